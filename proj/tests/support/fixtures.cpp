#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "scenefit/geometry.hpp"

namespace scenefit::testing {

namespace {

// Midpoint index cache used while subdividing; keys are sorted vertex pairs.
int midpoint(std::map<std::pair<int, int>, int>& cache, std::vector<Vec3>& vertices, int a, int b,
             double radius) {
    const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const Vec3 mid = 0.5 * (vertices[a] + vertices[b]);
    const int index = static_cast<int>(vertices.size());
    vertices.push_back(radius * mid.normalized());
    cache.emplace(key, index);
    return index;
}

}  // namespace

TriMesh icosphere(int subdivisions, double radius) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> vertices = {
        {-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1},
    };
    for (Vec3& v : vertices) v = radius * v.normalized();
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
        {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1},
    };
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> cache;
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const std::array<int, 3>& f : faces) {
            const int ab = midpoint(cache, vertices, f[0], f[1], radius);
            const int bc = midpoint(cache, vertices, f[1], f[2], radius);
            const int ca = midpoint(cache, vertices, f[2], f[0], radius);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    return TriMesh::create(std::move(vertices), std::move(faces));
}

TriMesh torus_mesh(double major, double minor, int major_segments, int minor_segments) {
    const int n = major_segments, m = minor_segments;
    std::vector<Vec3> vertices;
    vertices.reserve(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i) {
        const double theta = 2.0 * M_PI * i / n;
        for (int j = 0; j < m; ++j) {
            const double phi = 2.0 * M_PI * j / m;
            const double ring = major + minor * std::cos(phi);
            vertices.emplace_back(ring * std::cos(theta), minor * std::sin(phi),
                                  ring * std::sin(theta));
        }
    }
    const auto at = [&](int i, int j) { return (i % n) * m + (j % m); };
    std::vector<std::array<int, 3>> faces;
    faces.reserve(static_cast<std::size_t>(n) * m * 2);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const int a = at(i, j), b = at(i + 1, j), c = at(i + 1, j + 1), d = at(i, j + 1);
            faces.push_back({a, c, b});
            faces.push_back({a, d, c});
        }
    }
    return TriMesh::create(std::move(vertices), std::move(faces));
}

double torus_signed_distance(const Vec3& p, double major, double minor) {
    return std::hypot(std::hypot(p.x(), p.z()) - major, p.y()) - minor;
}

TriMesh unit_cube_mesh() { return make_box_mesh(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5)); }

SceneDocument make_test_scene(int object_count, bool with_human) {
    SceneDocument doc;
    doc.camera = {0.0, 0.0};
    doc.layout = BBox3D(Vec3(0.0, -0.15, 3.5), Vec3(7.0, 2.5, 6.0), 0.0);
    const double floor = doc.layout.floor_height();
    const auto cube = std::make_shared<const TriMesh>(unit_cube_mesh());
    for (int i = 0; i < object_count; ++i) {
        ObjectDoc obj;
        obj.label = "object_" + std::to_string(i);
        obj.mesh_path = "cube.obj";
        obj.mesh = cube;
        const Vec3 size(0.8, 0.9 + 0.1 * (i % 2), 0.7);
        const Vec3 centroid(-1.8 + 1.0 * i, floor + 0.5 * size.y(), 4.0 + 0.3 * (i % 2));
        obj.box = BBox3D(centroid, size, 0.15 * i);
        obj.detection = project_box_to_rect(obj.box, doc.camera, doc.intrinsics);
        doc.objects.push_back(std::move(obj));
    }
    if (with_human) {
        HumanDoc human;
        human.template_path = "body_template.obj";
        const auto tmpl = std::make_shared<const BodyTemplate>(make_default_template());
        human.tmpl = tmpl;
        human.params = BodyParams::rest(tmpl->joint_count());
        human.params.translation = Vec3(0.95, floor, 4.0);
        const std::vector<Vec3> joints = body_joints3d(*tmpl, human.params);
        for (const int j : tmpl->keypoint_map)
            human.keypoints.push_back({project_point(joints[j], doc.camera, doc.intrinsics), 1.0});
        doc.human = std::move(human);
    }
    return doc;
}

SceneDocument make_floating_box_doc(double gap) {
    SceneDocument doc;
    doc.camera = {0.0, 0.0};
    doc.layout = BBox3D(Vec3(0.0, -0.15, 3.5), Vec3(7.0, 2.5, 6.0), 0.0);
    const double floor = doc.layout.floor_height();
    ObjectDoc obj;
    obj.label = "crate";
    obj.mesh_path = "cube.obj";
    obj.mesh = std::make_shared<const TriMesh>(unit_cube_mesh());
    const Vec3 size(0.8, 0.8, 0.8);
    const BBox3D seated(Vec3(0.0, floor + 0.5 * size.y(), 4.0), size, 0.0);
    obj.detection = project_box_to_rect(seated, doc.camera, doc.intrinsics);
    obj.box = BBox3D(seated.centroid + Vec3(0.0, gap, 0.0), size, 0.0);
    doc.objects.push_back(std::move(obj));
    return doc;
}

SceneDocument make_penetration_doc() {
    SceneDocument doc;
    doc.camera = {0.0, 0.0};
    doc.layout = BBox3D(Vec3(0.0, -0.15, 3.5), Vec3(7.0, 2.5, 6.0), 0.0);
    const double floor = doc.layout.floor_height();
    ObjectDoc obj;
    obj.label = "crate";
    obj.mesh_path = "cube.obj";
    obj.mesh = std::make_shared<const TriMesh>(unit_cube_mesh());
    const Vec3 size(1.4, 1.8, 0.9);
    obj.box = BBox3D(Vec3(0.0, floor + 0.5 * size.y(), 4.0), size, 0.0);
    obj.detection = project_box_to_rect(obj.box, doc.camera, doc.intrinsics);
    doc.objects.push_back(std::move(obj));

    HumanDoc human;
    human.template_path = "body_template.obj";
    const auto tmpl = std::make_shared<const BodyTemplate>(make_default_template());
    human.tmpl = tmpl;
    human.params = BodyParams::rest(tmpl->joint_count());
    human.params.translation = Vec3(1.35, floor, 4.0);
    const std::vector<Vec3> joints = body_joints3d(*tmpl, human.params);
    for (const int j : tmpl->keypoint_map)
        human.keypoints.push_back({project_point(joints[j], doc.camera, doc.intrinsics), 0.0});
    doc.human = std::move(human);
    return doc;
}

SceneParams randomize_params(const SceneDocument& doc, Rng& rng) {
    SceneParams p = initial_params(doc);
    p.camera.pitch += 0.05 * rng.gaussian();
    p.camera.roll += 0.05 * rng.gaussian();
    const auto jitter = [&rng](BBox3D& b, double pos, double sz, double yaw) {
        const Vec3 size = (b.size + sz * rng.gaussian3()).cwiseMax(0.3);
        b = BBox3D(b.centroid + pos * rng.gaussian3(), size, b.yaw + yaw * rng.gaussian());
    };
    for (BBox3D& b : p.boxes) jitter(b, 0.15, 0.05, 0.2);
    jitter(p.layout, 0.1, 0.1, 0.05);
    if (p.body) {
        p.body->translation += 0.2 * rng.gaussian3();
        p.body->global_rotation += 0.2 * rng.gaussian3();
        for (Vec3& a : p.body->pose) a += 0.2 * rng.gaussian3();
        p.body->shape_scale =
            (p.body->shape_scale + 0.1 * rng.gaussian3()).cwiseMax(0.6).cwiseMin(1.8);
    }
    return p;
}

std::filesystem::path make_temp_dir(const std::string& tag) {
    static std::atomic<std::uint64_t> counter{0};
    const std::filesystem::path dir = std::filesystem::temp_directory_path() /
                                      ("scenefit_" + tag + "_" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace scenefit::testing
