#include "scenefit/synth.hpp"

#include <cmath>
#include <string>

#include "scenefit/losses.hpp"
#include "scenefit/rng.hpp"

namespace scenefit {

namespace {

constexpr double kFloorY = -1.4;       // camera sits 1.4 m above the floor
constexpr double kRoomNearZ = 0.5;     // front wall, camera side
constexpr double kMinDepth = 3.1;      // keeps floor-level corners inside the image
constexpr double kWallMargin = 0.1;    // object box to wall
constexpr double kSeparation = 0.35;   // gap between object footprint circles
constexpr double kImageMargin = 12.0;  // pixels
constexpr int kMaxAttempts = 10000;

bool projects_inside(const Vec3& p, const CameraPose& cam, const Intrinsics& K) {
    try {
        const Vec2 px = project_point(p, cam, K);
        return px.x() >= kImageMargin && px.x() <= K.width - kImageMargin &&
               px.y() >= kImageMargin && px.y() <= K.height - kImageMargin;
    } catch (const NonPositiveDepth&) {
        return false;
    }
}

bool box_in_view(const BBox3D& box, const CameraPose& cam, const Intrinsics& K) {
    for (const Vec3& c : box_corners(box))
        if (world_to_camera(c, cam).z() < 1.0 || !projects_inside(c, cam, K)) return false;
    return true;
}

double footprint_radius(const Vec3& size) { return 0.5 * std::hypot(size.x(), size.z()); }

}  // namespace

void SynthSpec::validate() const {
    if (object_count < 1) throw InvalidArgument("synth spec needs at least one object");
    for (const Range& r : {room_width, room_depth, room_height})
        if (!(r.lo > 0) || !(r.hi >= r.lo) || !std::isfinite(r.lo) || !std::isfinite(r.hi))
            throw InvalidArgument("synth room ranges must satisfy 0 < lo <= hi");
    for (const double s : {sigma_centroid, sigma_size, sigma_yaw, sigma_body_translation})
        if (!(s >= 0) || !std::isfinite(s))
            throw InvalidArgument("synth perturbation sigmas must be non-negative");
    if (room_width.lo < 3.0 || room_depth.lo < 4.0 || room_height.lo < 2.0)
        throw InvalidArgument("synth rooms must be at least 3 x 2 x 4 m for a visible floor");
}

SynthResult synth_scene(std::uint64_t seed, const SynthSpec& spec,
                        const std::filesystem::path& asset_dir) {
    spec.validate();
    Rng rng(seed);

    const Intrinsics K;  // fixed synthetic camera
    const CameraPose cam{0.0, 0.0};

    const double W = rng.uniform(spec.room_width.lo, spec.room_width.hi);
    const double D = rng.uniform(spec.room_depth.lo, spec.room_depth.hi);
    const double H = rng.uniform(spec.room_height.lo, spec.room_height.hi);
    const BBox3D layout({0.0, kFloorY + H / 2, kRoomNearZ + D / 2}, {W, H, D}, 0.0);

    // the body template and its rest-pose bounds drive the touching pose
    std::shared_ptr<const BodyTemplate> tmpl;
    TriMesh rest;
    Vec3 body_lo{0, 0, 0}, body_hi{0, 0, 0};
    if (spec.include_human) {
        tmpl = std::make_shared<const BodyTemplate>(make_default_template());
        rest = body_forward(*tmpl, BodyParams::rest(tmpl->joint_count()));
        rest.aabb(body_lo, body_hi);
    }

    std::vector<BBox3D> boxes;
    Vec3 body_t{0, 0, 0};
    Vec2 body_center{0, 0};  // xz footprint circle for later rejections
    double body_radius = 0;

    for (int i = 0; i < spec.object_count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            const bool anchor = spec.include_human && i == 0;
            const Vec3 size(rng.uniform(0.5, 0.9), anchor ? 1.3 : rng.uniform(0.5, 0.9),
                            rng.uniform(0.5, 0.9));
            const double r = footprint_radius(size);

            const double z_lo = std::max(kRoomNearZ + r + kWallMargin, kMinDepth);
            const double z_hi = kRoomNearZ + D - r - kWallMargin;
            if (z_hi <= z_lo) continue;
            const double z = rng.uniform(z_lo, z_hi);

            // conservative frustum bound; the exact corner check runs below
            double x_lim = std::min(0.5 * W - r - kWallMargin,
                                    (0.5 * K.width - kImageMargin) / K.fx * (z - r) - r);
            double x_hi_extra = x_lim;
            if (anchor)  // leave room for the body standing against the +x face
                x_hi_extra = 0.5 * W - 0.5 * size.x() - (body_hi.x() - body_lo.x()) - kWallMargin;
            if (x_lim <= -x_lim || std::min(x_lim, x_hi_extra) <= -x_lim) continue;
            const double x = rng.uniform(-x_lim, std::min(x_lim, x_hi_extra));

            const double yaw = anchor ? 0.0 : rng.uniform(-M_PI, M_PI);
            const BBox3D box({x, kFloorY + 0.5 * size.y(), z}, size, yaw);

            bool clear = true;
            for (const BBox3D& other : boxes)
                if (std::hypot(x - other.centroid.x(), z - other.centroid.z()) <
                    r + footprint_radius(other.size) + kSeparation)
                    clear = false;
            if (spec.include_human && i > 0 &&
                std::hypot(x - body_center.x(), z - body_center.y()) < r + body_radius)
                clear = false;
            if (!clear || !box_in_view(box, cam, K)) continue;

            if (anchor) {
                // stand the body on the floor with the leftmost palm vertices
                // exactly on the box's +x face
                const double face_x = x + 0.5 * size.x();
                const Vec3 t(face_x - body_lo.x(), kFloorY - body_lo.y(), z);
                bool ok = t.x() + body_hi.x() <= 0.5 * W - 0.05 &&
                          t.z() + body_lo.z() >= kRoomNearZ + 0.05 &&
                          t.z() + body_hi.z() <= kRoomNearZ + D - 0.05;
                for (const Vec3& v : rest.vertices) {
                    if (!ok) break;
                    const Vec3 wv = v + t;
                    if (!projects_inside(wv, cam, K)) ok = false;
                    // palm vertices must land on the face rectangle
                    if (v.x() == body_lo.x() &&
                        (wv.y() < kFloorY || wv.y() > kFloorY + size.y() ||
                         std::abs(wv.z() - z) > 0.5 * size.z()))
                        ok = false;
                }
                if (!ok) continue;
                body_t = t;
                body_center = {t.x() + 0.5 * (body_lo.x() + body_hi.x()),
                               t.z() + 0.5 * (body_lo.z() + body_hi.z())};
                body_radius = 0.5 * std::hypot(body_hi.x() - body_lo.x(), body_hi.z() - body_lo.z()) +
                              kSeparation;
            }
            boxes.push_back(box);
            placed = true;
        }
        if (!placed)
            throw PlacementFailed("could not place object " + std::to_string(i) + " after " +
                                  std::to_string(kMaxAttempts) + " attempts");
    }

    // write the shared assets
    std::filesystem::create_directories(asset_dir);
    const TriMesh cube = make_box_mesh(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
    save_obj(cube, asset_dir / "cube.obj");
    const auto mesh = std::make_shared<const TriMesh>(normalize_unit_cube(cube));
    const std::string mesh_path =
        std::filesystem::absolute(asset_dir / "cube.obj").lexically_normal().string();
    std::string template_path;
    if (tmpl) {
        save_template(*tmpl, asset_dir / "body_template.obj");
        template_path =
            std::filesystem::absolute(asset_dir / "body_template.obj").lexically_normal().string();
    }

    SceneDocument gt;
    gt.intrinsics = K;
    gt.camera = cam;
    gt.layout = layout;
    for (int i = 0; i < spec.object_count; ++i) {
        ObjectDoc od;
        od.label = "object_" + std::to_string(i);
        od.mesh_path = mesh_path;
        od.mesh = mesh;
        od.box = boxes[i];
        od.detection = project_box_to_rect(boxes[i], cam, K);
        gt.objects.push_back(std::move(od));
    }
    if (tmpl) {
        HumanDoc hd;
        hd.template_path = template_path;
        hd.tmpl = tmpl;
        hd.params = BodyParams::rest(tmpl->joint_count());
        hd.params.translation = body_t;
        const std::vector<Vec3> joints = body_joints3d(*tmpl, hd.params);
        for (const int j : tmpl->keypoint_map)
            hd.keypoints.push_back({project_point(joints[j], cam, K), 1.0});
        gt.human = std::move(hd);
    }

    // the construction promises a floor-seated, collision-free ground truth
    {
        const SceneParams gp = initial_params(gt);
        const FrozenContext ctx = build_context(gt, gp, 16, false);
        const SceneState st = materialize(gt, gp, ctx);
        if (loss_scene_collision(st) != 0.0)
            throw PlacementFailed("generated ground truth has colliding objects");
        if (loss_obj_ground(st) > 1e-12)
            throw PlacementFailed("generated ground truth is not seated on the floor");
    }

    SceneDocument init = gt;
    for (ObjectDoc& od : init.objects) {
        const Vec3 dc = spec.sigma_centroid * rng.gaussian3();
        const Vec3 ds = spec.sigma_size * rng.gaussian3();
        const double dy = spec.sigma_yaw * rng.gaussian();
        od.box = BBox3D(od.box.centroid + dc, (od.box.size + ds).cwiseMax(0.1), od.box.yaw + dy);
    }
    if (init.human) {
        Vec3 dir = rng.gaussian3();
        const double n = dir.norm();
        dir = n > 0 ? Vec3(dir / n) : Vec3(1, 0, 0);
        init.human->params.translation += spec.sigma_body_translation * dir;
    }
    return {std::move(init), std::move(gt)};
}

}  // namespace scenefit
