#include "scenefit/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scenefit {

SceneParams initial_params(const SceneDocument& doc) {
    SceneParams p;
    p.camera = doc.camera;
    p.layout = doc.layout;
    p.boxes.reserve(doc.objects.size());
    for (const ObjectDoc& o : doc.objects) p.boxes.push_back(o.box);
    if (doc.human) p.body = doc.human->params;
    return p;
}

namespace {

void check_shapes(const SceneDocument& doc, const SceneParams& params) {
    if (params.boxes.size() != doc.objects.size())
        throw LengthMismatch("parameter set has " + std::to_string(params.boxes.size()) +
                             " boxes for " + std::to_string(doc.objects.size()) + " objects");
    if (doc.human.has_value() != params.body.has_value())
        throw LengthMismatch("parameter set and document disagree about the human");
}

BBox3D inflate(const BBox3D& box, double factor) {
    return BBox3D(box.centroid, box.size * factor, box.yaw);
}

BBox3D body_region(const TriMesh& posed, double margin) {
    Vec3 lo, hi;
    posed.aabb(lo, hi);
    const Vec3 size = (hi - lo).cwiseMax(1e-3) + Vec3::Constant(2.0 * margin);
    return BBox3D(0.5 * (lo + hi), size, 0.0);
}

}  // namespace

SceneState materialize(const SceneDocument& doc, const SceneParams& params, const FrozenContext& ctx) {
    check_shapes(doc, params);
    SceneState s;
    s.doc = &doc;
    s.ctx = &ctx;
    s.camera = params.camera;
    s.layout = params.layout;
    s.objects.reserve(doc.objects.size());
    for (std::size_t i = 0; i < doc.objects.size(); ++i)
        s.objects.push_back({&doc.objects[i], params.boxes[i], place_mesh(*doc.objects[i].mesh, params.boxes[i])});
    if (doc.human)
        s.body = BodyState{&*doc.human, *params.body, body_forward(*doc.human->tmpl, *params.body)};
    return s;
}

FrozenContext build_context(const SceneDocument& doc, const SceneParams& params, int resolution,
                            bool freeze_contact) {
    check_shapes(doc, params);
    FrozenContext ctx;
    ctx.resolution = resolution;

    std::vector<TriMesh> placed;
    placed.reserve(doc.objects.size());
    for (std::size_t i = 0; i < doc.objects.size(); ++i)
        placed.push_back(place_mesh(*doc.objects[i].mesh, params.boxes[i]));

    // Per-object grids of the union of the other objects, sampled over the
    // box inflated 1.25x so probes and small box motions stay on the lattice.
    for (std::size_t i = 0; i < placed.size(); ++i) {
        std::vector<TriMesh> others;
        others.reserve(placed.size() - 1);
        for (std::size_t j = 0; j < placed.size(); ++j)
            if (j != i) others.push_back(placed[j]);
        ctx.sdf_excluding.push_back(std::make_shared<SdfGrid>(
            build_sdf(others, inflate(params.boxes[i], 1.25), resolution)));
    }

    if (doc.human) {
        const TriMesh posed = body_forward(*doc.human->tmpl, *params.body);
        ctx.sdf_union = std::make_shared<SdfGrid>(
            build_sdf(placed, body_region(posed, 0.75), resolution));
        if (freeze_contact && !placed.empty()) {
            std::vector<ContactPick> picks;
            picks.reserve(doc.human->tmpl->contact_vertices.size());
            for (int cv : doc.human->tmpl->contact_vertices) {
                const Vec3 p = posed.vertices[cv];
                ContactPick best{0, 0};
                double best_d2 = std::numeric_limits<double>::infinity();
                for (std::size_t o = 0; o < placed.size(); ++o) {
                    for (std::size_t v = 0; v < placed[o].vertices.size(); ++v) {
                        const double d2 = (placed[o].vertices[v] - p).squaredNorm();
                        if (d2 < best_d2) {
                            best_d2 = d2;
                            best = {static_cast<int>(o), static_cast<int>(v)};
                        }
                    }
                }
                picks.push_back(best);
            }
            ctx.contact = std::move(picks);
        }
    }
    return ctx;
}

std::shared_ptr<const GradFilter> build_grad_filter(const SceneDocument& doc, const SceneParams& params,
                                                    const FrozenContext& ctx) {
    check_shapes(doc, params);
    auto filter = std::make_shared<GradFilter>();
    const int res = ctx.resolution;
    filter->collision_cells.resize(doc.objects.size());
    for (std::size_t i = 0; i < doc.objects.size(); ++i) {
        const SdfGrid& grid = *ctx.sdf_excluding[i];
        const double margin = 2.0 * grid.max_cell_size();
        const BBox3D& box = params.boxes[i];
        const Mat3 r = yaw_rotation(box.yaw);
        auto& mask = filter->collision_cells[i];
        mask.assign(static_cast<std::size_t>(res) * res * res, 0);
        std::size_t cell = 0;
        for (int k = 0; k < res; ++k)
            for (int j = 0; j < res; ++j)
                for (int i2 = 0; i2 < res; ++i2, ++cell) {
                    const Vec3 local(((i2 + 0.5) / res - 0.5) * box.size.x(),
                                     ((j + 0.5) / res - 0.5) * box.size.y(),
                                     ((k + 0.5) / res - 0.5) * box.size.z());
                    const Vec3 p = box.centroid + r * local;
                    mask[cell] = std::abs(sdf_query(grid, p).value) >= margin ? 1 : 0;
                }
    }
    if (doc.human && ctx.sdf_union) {
        const TriMesh posed = body_forward(*doc.human->tmpl, *params.body);
        const double margin = 2.0 * ctx.sdf_union->max_cell_size();
        filter->body_vertices.assign(posed.vertices.size(), 0);
        for (std::size_t v = 0; v < posed.vertices.size(); ++v)
            filter->body_vertices[v] =
                std::abs(sdf_query(*ctx.sdf_union, posed.vertices[v]).value) >= margin ? 1 : 0;
    }
    return filter;
}

}  // namespace scenefit
