#include "scenefit/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "scenefit/parallel.hpp"

namespace scenefit {

namespace {

SdfGrid make_grid(std::span<const TriMesh> meshes, const BBox3D& box, int resolution, bool parallel) {
    if (resolution < 2) throw InvalidArgument("SDF resolution must be at least 2");
    SdfGrid grid;
    Vec3 lo, hi;
    box.aabb(lo, hi);
    grid.origin = lo;
    grid.cell_size = (hi - lo) / static_cast<double>(resolution);
    grid.dims = {resolution, resolution, resolution};
    grid.values.assign(static_cast<std::size_t>(resolution) * resolution * resolution, kEmptySdfValue);
    if (meshes.empty()) return grid;

    std::vector<MeshBvh> bvhs;
    bvhs.reserve(meshes.size());
    for (std::size_t m = 0; m < meshes.size(); ++m) {
        std::array<int, 2> edge;
        if (!is_watertight(meshes[m], &edge))
            throw NotWatertight("mesh " + std::to_string(m) + " is not watertight at edge (" +
                                std::to_string(edge[0]) + ", " + std::to_string(edge[1]) + ")");
        bvhs.emplace_back(meshes[m]);
    }

    const std::size_t n_cells = grid.values.size();
    const auto fill = [&](std::size_t cell) {
        const int i = static_cast<int>(cell % resolution);
        const int j = static_cast<int>((cell / resolution) % resolution);
        const int k = static_cast<int>(cell / (static_cast<std::size_t>(resolution) * resolution));
        const Vec3 p = grid.cell_center(i, j, k);
        double best = kEmptySdfValue;
        bool inside = false;
        for (const MeshBvh& bvh : bvhs) {
            best = std::min(best, bvh.unsigned_distance(p));
            if (!inside && bvh.winding_number(p) >= 0.5) inside = true;
        }
        grid.values[cell] = inside ? -best : best;
    };
    if (parallel)
        parallel_for(n_cells, fill);
    else
        serial_for(n_cells, fill);
    return grid;
}

}  // namespace

SdfGrid build_sdf(std::span<const TriMesh> meshes, const BBox3D& box, int resolution) {
    return make_grid(meshes, box, resolution, true);
}

SdfGrid build_sdf_serial(std::span<const TriMesh> meshes, const BBox3D& box, int resolution) {
    return make_grid(meshes, box, resolution, false);
}

SdfSample sdf_query(const SdfGrid& grid, const Vec3& p) {
    const Vec3 aabb_lo = grid.aabb_lo();
    const Vec3 aabb_hi = grid.aabb_hi();

    // Distance from p to the grid AABB (zero inside), added to the clamped
    // interpolated value so far-away queries keep growing.
    Vec3 q_aabb = p.cwiseMax(aabb_lo).cwiseMin(aabb_hi);
    const Vec3 out_vec = p - q_aabb;
    const double out_dist = out_vec.norm();

    // Sample lattice spans cell centers only.
    const Vec3 lat_lo = aabb_lo + 0.5 * grid.cell_size;
    const Vec3 lat_hi = aabb_hi - 0.5 * grid.cell_size;
    const Vec3 q = p.cwiseMax(lat_lo).cwiseMin(lat_hi);

    // Locate the base sample and fractional coordinates.
    int idx[3];
    double frac[3];
    bool interior[3];
    for (int a = 0; a < 3; ++a) {
        const double t = (q[a] - lat_lo[a]) / grid.cell_size[a];
        int i0 = static_cast<int>(std::floor(t));
        i0 = std::clamp(i0, 0, grid.dims[a] - 2);
        idx[a] = i0;
        frac[a] = std::clamp(t - i0, 0.0, 1.0);
        interior[a] = p[a] > lat_lo[a] && p[a] < lat_hi[a];
    }

    const auto value_at = [&](int di, int dj, int dk) {
        return grid.values[grid.index(idx[0] + di, idx[1] + dj, idx[2] + dk)];
    };
    const double c000 = value_at(0, 0, 0), c100 = value_at(1, 0, 0);
    const double c010 = value_at(0, 1, 0), c110 = value_at(1, 1, 0);
    const double c001 = value_at(0, 0, 1), c101 = value_at(1, 0, 1);
    const double c011 = value_at(0, 1, 1), c111 = value_at(1, 1, 1);

    const double fx = frac[0], fy = frac[1], fz = frac[2];
    const double c00 = c000 + (c100 - c000) * fx;
    const double c10 = c010 + (c110 - c010) * fx;
    const double c01 = c001 + (c101 - c001) * fx;
    const double c11 = c011 + (c111 - c011) * fx;
    const double c0 = c00 + (c10 - c00) * fy;
    const double c1 = c01 + (c11 - c01) * fy;
    const double value = c0 + (c1 - c0) * fz;

    const double dvdx = ((c100 - c000) * (1 - fy) + (c110 - c010) * fy) * (1 - fz) +
                        ((c101 - c001) * (1 - fy) + (c111 - c011) * fy) * fz;
    const double dvdy = ((c010 - c000) * (1 - fx) + (c110 - c100) * fx) * (1 - fz) +
                        ((c011 - c001) * (1 - fx) + (c111 - c101) * fx) * fz;
    const double dvdz = (c001 - c000) * (1 - fx) * (1 - fy) + (c101 - c100) * fx * (1 - fy) +
                        (c011 - c010) * (1 - fx) * fy + (c111 - c110) * fx * fy;

    SdfSample out;
    out.value = value + out_dist;
    // Clamped axes contribute no interpolant gradient; the AABB distance term
    // contributes its outward unit direction.
    out.gradient = Vec3(interior[0] ? dvdx / grid.cell_size.x() : 0.0,
                        interior[1] ? dvdy / grid.cell_size.y() : 0.0,
                        interior[2] ? dvdz / grid.cell_size.z() : 0.0);
    if (out_dist > 0.0) out.gradient += out_vec / out_dist;
    return out;
}

}  // namespace scenefit
