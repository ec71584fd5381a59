#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "scenefit/geometry.hpp"

namespace scenefit {

// Indexed triangle mesh. Use create() when the data comes from outside the
// library; it validates indices and rejects degenerate faces. Transform
// helpers preserve topology and do not revalidate.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;

    static TriMesh create(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> faces);

    void aabb(Vec3& lo, Vec3& hi) const;
};

// Wavefront OBJ input/output (v and f records; polygons are fan-triangulated).
TriMesh load_mesh(const std::filesystem::path& path);
void save_obj(const TriMesh& mesh, const std::filesystem::path& path);

// Recenters and uniformly scales so the longest axis spans exactly [-0.5, 0.5]
// (aspect ratio preserved). Throws InvalidArgument on a zero-extent mesh.
TriMesh normalize_unit_cube(const TriMesh& mesh);

// Instantiates a unit-cube-normalized mesh into a box: scale by the box size
// per axis, rotate by yaw, translate to the centroid.
TriMesh place_mesh(const TriMesh& mesh, const BBox3D& box);

// True when every directed edge appears exactly once and so does its reverse
// (closed, consistently oriented 2-manifold). On failure the first offending
// edge is written to bad_edge when provided.
bool is_watertight(const TriMesh& mesh, std::array<int, 2>* bad_edge = nullptr);

// Generalized winding number (sum of signed solid angles over 4*pi). Roughly
// 1 inside a watertight mesh, 0 outside.
double winding_number(const Vec3& p, const TriMesh& mesh);

// Exhaustive point-to-surface distance; reference for the BVH.
double unsigned_distance_brute(const Vec3& p, const TriMesh& mesh);

// BVH-accelerated point queries against a fixed mesh.
class MeshBvh {
public:
    explicit MeshBvh(const TriMesh& mesh);  // throws EmptyMesh

    double unsigned_distance(const Vec3& p) const;
    double winding_number(const Vec3& p) const;
    std::size_t face_count() const { return tris_.size(); }

private:
    struct Node {
        Vec3 lo, hi;
        std::int32_t left = -1;   // internal: child index; leaf: first tri
        std::int32_t right = -1;  // internal: child index; leaf: -1
        std::int32_t begin = 0, end = 0;
    };
    struct Tri {
        Vec3 a, b, c;
    };

    std::int32_t build(std::vector<std::int32_t>& order, std::int32_t begin, std::int32_t end,
                       std::vector<Vec3>& centroids);
    void query(std::int32_t node, const Vec3& p, double& best) const;

    std::vector<Tri> tris_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

// Unsigned point-to-mesh distance (builds a one-shot BVH; use MeshBvh for
// repeated queries). Throws EmptyMesh.
double unsigned_distance(const Vec3& p, const TriMesh& mesh);

// Watertight axis-aligned box: 8 vertices (index bits 0/1/2 select the upper
// bound on x/y/z), 12 outward-facing triangles.
TriMesh make_box_mesh(const Vec3& lo, const Vec3& hi);

// Signed distance: negative inside, positive outside, sign from the winding
// number (threshold 0.5). Requires a watertight mesh (throws NotWatertight).
double signed_distance(const Vec3& p, const TriMesh& mesh);

}  // namespace scenefit
