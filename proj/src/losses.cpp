#include "scenefit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scenefit/parallel.hpp"

namespace scenefit {

void LossWeights::validate() const {
    const double lambdas[] = {lambda1, lambda2, lambda3, lambda4, lambda5, lambda6,
                              w_keypoint, w_pose_prior, w_bend, w_selfpen};
    for (double v : lambdas)
        if (!std::isfinite(v) || v < 0) throw InvalidArgument("loss weights must be finite and non-negative");
    if (!(sigma_keypoint > 0) || !(sigma_contact > 0) || !(smooth_l1_beta > 0))
        throw InvalidArgument("robustifier scales must be positive");
}

double smooth_l1(double x, double beta) {
    const double a = std::abs(x);
    return a < beta ? 0.5 * x * x / beta : a - 0.5 * beta;
}

double geman_mcclure(double e, double sigma) {
    const double e2 = e * e, s2 = sigma * sigma;
    return e2 * s2 / (e2 + s2);
}

namespace {

// Reported joints from an already posed mesh (regressor rows).
std::vector<Vec3> reported_joints(const BodyState& body) {
    const BodyTemplate& tmpl = *body.doc->tmpl;
    std::vector<Vec3> joints(tmpl.regressor.size());
    for (std::size_t r = 0; r < tmpl.regressor.size(); ++r) {
        Vec3 acc = Vec3::Zero();
        for (const WeightEntry& w : tmpl.regressor[r]) acc += w.weight * body.posed.vertices[w.index];
        joints[r] = acc;
    }
    return joints;
}

}  // namespace

double loss_keypoint_reprojection(const SceneState& state, const LossWeights& w) {
    if (!state.body) return 0.0;
    const BodyState& body = *state.body;
    const std::vector<Keypoint2D>& kps = body.doc->keypoints;
    const std::vector<int>& map = body.doc->tmpl->keypoint_map;
    if (kps.size() != map.size())
        throw LengthMismatch("scene has " + std::to_string(kps.size()) + " keypoints, template maps " +
                             std::to_string(map.size()));
    const std::vector<Vec3> joints = reported_joints(body);
    const double s2 = w.sigma_keypoint * w.sigma_keypoint;
    const Intrinsics& K = state.doc->intrinsics;
    std::vector<double> terms(kps.size(), 0.0);
    for (std::size_t k = 0; k < kps.size(); ++k) {
        const double conf = kps[k].confidence;
        if (conf <= 0.0) continue;
        const Vec3 p_cam = world_to_camera(joints[map[k]], state.camera);
        if (p_cam.z() <= 1e-6) {
            terms[k] = conf * s2;  // behind the camera: saturated penalty
            continue;
        }
        const Vec2 px(K.fx * p_cam.x() / p_cam.z() + K.cx, K.fy * p_cam.y() / p_cam.z() + K.cy);
        terms[k] = conf * geman_mcclure((px - kps[k].pixel).norm(), w.sigma_keypoint);
    }
    return pairwise_sum(terms);
}

double loss_scene_reprojection(const SceneState& state, const LossWeights& w) {
    if (state.objects.empty()) throw NoObjects("scene reprojection needs at least one object");
    std::vector<double> per_object(state.objects.size(), 0.0);
    for (std::size_t i = 0; i < state.objects.size(); ++i) {
        const ObjectState& obj = state.objects[i];
        Rect2D rect;
        try {
            rect = project_box_to_rect(obj.box, state.camera, state.doc->intrinsics);
        } catch (const NonPositiveDepth& e) {
            throw NonPositiveDepth("object '" + obj.doc->label + "': " + e.what());
        }
        const auto pc = rect.corners();
        const auto dc = obj.doc->detection.corners();
        double s = 0.0;
        for (int c = 0; c < 4; ++c) {
            s += smooth_l1(pc[c].x() - dc[c].x(), w.smooth_l1_beta);
            s += smooth_l1(pc[c].y() - dc[c].y(), w.smooth_l1_beta);
        }
        per_object[i] = s;
    }
    return pairwise_sum(per_object) / static_cast<double>(state.objects.size());
}

double loss_scene_collision(const SceneState& state) {
    if (state.objects.empty()) return 0.0;
    const FrozenContext& ctx = *state.ctx;
    if (ctx.sdf_excluding.size() != state.objects.size())
        throw LengthMismatch("frozen context does not match the scene's object count");
    const int res = ctx.resolution;
    const GradFilter* filter = ctx.filter.get();
    std::vector<double> per_object(state.objects.size(), 0.0);
    std::vector<double> cells(static_cast<std::size_t>(res) * res * res);
    for (std::size_t i = 0; i < state.objects.size(); ++i) {
        const SdfGrid& grid = *ctx.sdf_excluding[i];
        const BBox3D& box = state.objects[i].box;
        const Mat3 r = yaw_rotation(box.yaw);
        const std::uint8_t* mask =
            filter && i < filter->collision_cells.size() ? filter->collision_cells[i].data() : nullptr;
        std::size_t cell = 0;
        for (int k = 0; k < res; ++k)
            for (int j = 0; j < res; ++j)
                for (int i2 = 0; i2 < res; ++i2, ++cell) {
                    if (mask && !mask[cell]) {
                        cells[cell] = 0.0;
                        continue;
                    }
                    const Vec3 local(((i2 + 0.5) / res - 0.5) * box.size.x(),
                                     ((j + 0.5) / res - 0.5) * box.size.y(),
                                     ((k + 0.5) / res - 0.5) * box.size.z());
                    const double v = sdf_query(grid, box.centroid + r * local).value;
                    cells[cell] = v < 0.0 ? v * v : 0.0;
                }
        per_object[i] = pairwise_sum(cells);
    }
    return pairwise_sum(per_object) / static_cast<double>(state.objects.size());
}

double loss_obj_ground(const SceneState& state) {
    if (state.objects.empty()) return 0.0;
    const double floor = state.layout.floor_height();
    std::vector<double> per_object(state.objects.size(), 0.0);
    for (std::size_t i = 0; i < state.objects.size(); ++i)
        per_object[i] = std::abs(state.objects[i].box.floor_height() - floor);
    return pairwise_sum(per_object) / static_cast<double>(state.objects.size());
}

double loss_body_ground(const SceneState& state) {
    if (!state.body) return 0.0;
    double min_y = std::numeric_limits<double>::infinity();
    for (const Vec3& v : state.body->posed.vertices) min_y = std::min(min_y, v.y());
    return std::abs(min_y - state.layout.floor_height());
}

double loss_contact(const SceneState& state, const LossWeights& w) {
    if (!state.body) return 0.0;
    if (state.objects.empty()) throw NoObjects("contact needs at least one scene object");
    const BodyTemplate& tmpl = *state.body->doc->tmpl;
    const std::vector<int>& cvs = tmpl.contact_vertices;
    if (cvs.empty()) return 0.0;
    const std::vector<ContactPick>* picks =
        state.ctx->contact.has_value() ? &*state.ctx->contact : nullptr;
    if (picks && picks->size() != cvs.size())
        throw LengthMismatch("frozen contact picks do not match the template contact set");
    std::vector<double> terms(cvs.size(), 0.0);
    for (std::size_t c = 0; c < cvs.size(); ++c) {
        const Vec3 p = state.body->posed.vertices[cvs[c]];
        double d;
        if (picks) {
            const ContactPick& pick = (*picks)[c];
            d = (state.objects[pick.object].placed.vertices[pick.vertex] - p).norm();
        } else {
            double best = std::numeric_limits<double>::infinity();
            for (const ObjectState& obj : state.objects)
                for (const Vec3& v : obj.placed.vertices) best = std::min(best, (v - p).squaredNorm());
            d = std::sqrt(best);
        }
        terms[c] = geman_mcclure(d, w.sigma_contact);
    }
    return pairwise_sum(terms);
}

double loss_body_penetration(const SceneState& state) {
    if (!state.body || state.objects.empty()) return 0.0;
    const FrozenContext& ctx = *state.ctx;
    if (!ctx.sdf_union) throw LengthMismatch("frozen context is missing the union SDF");
    const std::vector<Vec3>& verts = state.body->posed.vertices;
    const std::uint8_t* mask = ctx.filter && !ctx.filter->body_vertices.empty()
                                   ? ctx.filter->body_vertices.data()
                                   : nullptr;
    std::vector<double> terms(verts.size(), 0.0);
    for (std::size_t v = 0; v < verts.size(); ++v) {
        if (mask && !mask[v]) continue;
        const double d = sdf_query(*ctx.sdf_union, verts[v]).value;
        if (d < 0.0) terms[v] = d * d;
    }
    return pairwise_sum(terms);
}

double loss_body_total(const SceneState& state, const LossWeights& w) {
    if (!state.body) return 0.0;
    const BodyState& body = *state.body;
    const BodyTemplate& tmpl = *body.doc->tmpl;
    double total = loss_keypoint_reprojection(state, w);
    total += w.w_pose_prior * pose_prior(body.params);
    total += w.w_bend * bending_prior(body.params, tmpl.bend_joints);
    total += w.w_selfpen * self_penetration(tmpl, body.params);
    return total;
}

LossBreakdown loss_total(const SceneState& state, const LossWeights& w) {
    LossBreakdown b;
    if (state.body) {
        b.keypoint = loss_keypoint_reprojection(state, w);
        b.pose_prior = pose_prior(state.body->params);
        b.bending = bending_prior(state.body->params, state.body->doc->tmpl->bend_joints);
        b.self_penetration = self_penetration(*state.body->doc->tmpl, state.body->params);
        b.body_total = b.keypoint + w.w_pose_prior * b.pose_prior + w.w_bend * b.bending +
                       w.w_selfpen * b.self_penetration;
    }
    if (!state.objects.empty()) {
        b.scene_reprojection = loss_scene_reprojection(state, w);
        b.scene_collision = loss_scene_collision(state);
        b.obj_ground = loss_obj_ground(state);
        if (state.body) {
            b.contact = loss_contact(state, w);
            b.body_penetration = loss_body_penetration(state);
        }
    }
    b.body_ground = loss_body_ground(state);
    b.total = b.body_total + w.lambda1 * b.scene_reprojection + w.lambda2 * b.scene_collision +
              w.lambda3 * b.obj_ground + w.lambda4 * b.body_ground + w.lambda5 * b.contact +
              w.lambda6 * b.body_penetration;
    return b;
}

}  // namespace scenefit
