#pragma once

#include <filesystem>
#include <string>

#include "scenefit/body.hpp"
#include "scenefit/mesh.hpp"
#include "scenefit/rng.hpp"
#include "scenefit/scene.hpp"

namespace scenefit::testing {

// Icosahedron subdivided `subdivisions` times, vertices projected onto the
// sphere of the given radius: 12, 42, 162, 642, ... vertices.
TriMesh icosphere(int subdivisions, double radius);

// Torus around the y axis: a tube of radius `minor` swept along a circle of
// radius `major` in the xz plane.
TriMesh torus_mesh(double major, double minor, int major_segments, int minor_segments);

// Exact signed distance to the ideal torus surface (not the faceted mesh).
double torus_signed_distance(const Vec3& p, double major, double minor);

// Cube with bounds [-0.5, 0.5]^3, i.e. already unit-cube normalized.
TriMesh unit_cube_mesh();

// Self-contained scene in front of a level camera: default intrinsics, a
// 7 x 2.5 x 6 room with its floor at y = -1.4, `object_count` cube objects
// seated on the floor, and optionally a human standing close enough to the
// objects that small perturbations create contact and penetration. Detections
// and keypoints are exact projections of this layout; meshes live in memory
// only (mesh_path is a placeholder).
SceneDocument make_test_scene(int object_count, bool with_human);

// Single cube object floating `gap` meters above the floor. Its detection
// rectangle is the projection of the seated box, so both the ground term and
// the image evidence ask for the same correction. No human.
SceneDocument make_floating_box_doc(double gap);

// A human standing next to a tall crate with the left forearm inside the
// crate's +x face (four mesh vertices penetrate, nearest exit is +x). All
// keypoints have zero confidence so nothing anchors the body to the image;
// the crate's detection matches its own projection.
SceneDocument make_penetration_doc();

// Gaussian jitter of a document's initial parameters; the sampler used to
// draw states for gradient checks.
SceneParams randomize_params(const SceneDocument& doc, Rng& rng);

// Fresh unique directory under the system temp root.
std::filesystem::path make_temp_dir(const std::string& tag);

}  // namespace scenefit::testing
