#pragma once

#include <array>
#include <span>
#include <vector>

#include "scenefit/geometry.hpp"
#include "scenefit/mesh.hpp"

namespace scenefit {

// Value stored everywhere when a grid is built over zero meshes.
inline constexpr double kEmptySdfValue = 1e30;

// Regular grid of signed distances sampled at cell centers over a box AABB.
// Sample (i, j, k) sits at origin + ((i+.5) dx, (j+.5) dy, (k+.5) dz).
struct SdfGrid {
    Vec3 origin{0, 0, 0};
    Vec3 cell_size{1, 1, 1};
    std::array<int, 3> dims{0, 0, 0};
    std::vector<double> values;  // x-fastest: ((k * ny) + j) * nx + i

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
    }
    Vec3 cell_center(int i, int j, int k) const {
        return origin + Vec3((i + 0.5) * cell_size.x(), (j + 0.5) * cell_size.y(),
                             (k + 0.5) * cell_size.z());
    }
    Vec3 aabb_lo() const { return origin; }
    Vec3 aabb_hi() const {
        return origin + Vec3(dims[0] * cell_size.x(), dims[1] * cell_size.y(), dims[2] * cell_size.z());
    }
    double max_cell_size() const { return cell_size.maxCoeff(); }
};

// Samples the union signed distance of the given meshes (min unsigned
// distance, negative when inside any mesh by winding number) on a
// resolution^3 grid over the box's axis-aligned bounds. Every mesh must be
// watertight. Zero meshes produce a grid of kEmptySdfValue.
SdfGrid build_sdf(std::span<const TriMesh> meshes, const BBox3D& box, int resolution);

// Serial reference implementation; produces identical values.
SdfGrid build_sdf_serial(std::span<const TriMesh> meshes, const BBox3D& box, int resolution);

struct SdfSample {
    double value = 0.0;
    Vec3 gradient{0, 0, 0};
};

// Trilinear interpolation of the grid with the analytic gradient of the
// interpolant. Points beyond the sample lattice clamp to it; points outside
// the grid AABB additionally add their distance to the AABB (gradient points
// away from it), so queries stay finite and increasing far from the grid.
SdfSample sdf_query(const SdfGrid& grid, const Vec3& p);

}  // namespace scenefit
