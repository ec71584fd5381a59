#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scenefit/body.hpp"
#include "scenefit/geometry.hpp"
#include "scenefit/mesh.hpp"
#include "scenefit/sdf.hpp"

namespace scenefit {

// One detected object: a unit-cube-normalized mesh, an initial 3D box
// estimate, and the 2D detection rectangle that anchors it to the image.
struct ObjectDoc {
    std::string label;
    std::string mesh_path;  // resolved against the scene file at load
    std::shared_ptr<const TriMesh> mesh;  // normalized to [-0.5, 0.5]^3
    BBox3D box;
    Rect2D detection;
};

struct HumanDoc {
    std::string template_path;
    std::shared_ptr<const BodyTemplate> tmpl;
    std::vector<Keypoint2D> keypoints;  // one per template keypoint_map slot
    BodyParams params;
};

// Everything loaded from a scene file: camera intrinsics, initial estimates
// for the camera orientation, room layout and objects, and optionally a
// human with 2D keypoint evidence.
struct SceneDocument {
    Intrinsics intrinsics;
    CameraPose camera;
    BBox3D layout;
    std::vector<ObjectDoc> objects;
    std::optional<HumanDoc> human;
};

// The optimizable subset of a scene document.
struct SceneParams {
    CameraPose camera;
    BBox3D layout;
    std::vector<BBox3D> boxes;  // one per document object
    std::optional<BodyParams> body;
};

SceneParams initial_params(const SceneDocument& doc);

// A contact vertex's pinned nearest scene vertex.
struct ContactPick {
    int object = 0;
    int vertex = 0;
};

// Restriction masks used by the gradient-check harness: hinge-style sums
// (collision cells, body penetration vertices) skip entries whose stored
// signed distance at the snapshot state was within two cells of a sign
// change, so finite differences never straddle the hinge. Production runs
// leave this unset.
struct GradFilter {
    std::vector<std::vector<std::uint8_t>> collision_cells;  // per object, resolution^3
    std::vector<std::uint8_t> body_vertices;
};

// Quantities frozen for one outer optimization iteration so every loss and
// finite-difference probe inside the iteration differentiates one fixed,
// piecewise-smooth function: SDF grids and the contact nearest-vertex picks.
struct FrozenContext {
    int resolution = 32;
    // per object i: signed distance of the union of all other objects,
    // sampled over object i's inflated box
    std::vector<std::shared_ptr<const SdfGrid>> sdf_excluding;
    // union of all objects over the body's inflated bounds (null without a body)
    std::shared_ptr<const SdfGrid> sdf_union;
    std::optional<std::vector<ContactPick>> contact;  // per template contact vertex
    std::shared_ptr<const GradFilter> filter;
};

// Builds the frozen context at the given parameters. freeze_contact controls
// whether contact picks are pinned (they are during optimization; one-shot
// loss evaluations may leave them free).
FrozenContext build_context(const SceneDocument& doc, const SceneParams& params, int resolution,
                            bool freeze_contact);

// Attach hinge masks computed from this state (see GradFilter).
std::shared_ptr<const GradFilter> build_grad_filter(const SceneDocument& doc, const SceneParams& params,
                                                    const FrozenContext& ctx);

struct ObjectState {
    const ObjectDoc* doc = nullptr;
    BBox3D box;
    TriMesh placed;
};

struct BodyState {
    const HumanDoc* doc = nullptr;
    BodyParams params;
    TriMesh posed;
};

// A scene document instantiated at concrete parameters, ready for loss
// evaluation. Owns the placed geometry; borrows the document and context.
struct SceneState {
    const SceneDocument* doc = nullptr;
    const FrozenContext* ctx = nullptr;
    CameraPose camera;
    BBox3D layout;
    std::vector<ObjectState> objects;
    std::optional<BodyState> body;
};

SceneState materialize(const SceneDocument& doc, const SceneParams& params, const FrozenContext& ctx);

}  // namespace scenefit
