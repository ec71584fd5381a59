#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scenefit/geometry.hpp"
#include "scenefit/mesh.hpp"

namespace scenefit {

// One 2D keypoint detection: pixel position plus confidence in [0, 1].
struct Keypoint2D {
    Vec2 pixel{0, 0};
    double confidence = 1.0;
};

struct Joint {
    std::string name;
    int parent = -1;  // -1 for the root; otherwise an earlier joint index
    Vec3 offset{0, 0, 0};  // rest offset from the parent (from origin for the root)
};

// Sparse weight entry shared by skinning rows (index = joint) and regressor
// rows (index = vertex).
struct WeightEntry {
    int index = 0;
    double weight = 0.0;
};

// A joint whose bending about one local axis is penalized asymmetrically:
// exp(sign * angle) is small for natural bending and explodes past the
// straight configuration in the unnatural direction.
struct BendJoint {
    int joint = 0;
    int axis = 0;  // 0=x, 1=y, 2=z component of the axis-angle pose
    double sign = 1.0;
};

// Articulated template: triangle mesh skinned to a joint tree.
struct BodyTemplate {
    TriMesh mesh;  // rest pose
    std::vector<Joint> skeleton;
    std::vector<std::vector<WeightEntry>> skinning;   // per vertex, weights sum to 1
    std::vector<std::vector<WeightEntry>> regressor;  // per reported joint, weights sum to 1
    std::vector<int> contact_vertices;                // expected scene-contact vertices
    std::vector<int> keypoint_map;                    // detection slot -> reported joint
    std::vector<double> capsule_radii;                // per joint: radius of bone (parent, joint)
    std::vector<BendJoint> bend_joints;

    std::size_t joint_count() const { return skeleton.size(); }
    std::size_t reported_joint_count() const { return regressor.size(); }

    // Rest-pose world position of every joint (shape scale 1).
    std::vector<Vec3> rest_joint_positions() const;

    // Throws (BadJointIndex, LengthMismatch, InvalidArgument) on structural
    // problems: bad parents, weight rows not summing to 1, out-of-range
    // vertex or joint references.
    void validate() const;
};

struct BodyParams {
    Vec3 translation{0, 0, 0};
    Vec3 global_rotation{0, 0, 0};  // axis-angle
    std::vector<Vec3> pose;         // per-joint axis-angle, size = joint_count
    Vec3 shape_scale{1, 1, 1};      // clamped to [0.5, 2] wherever applied

    static BodyParams rest(std::size_t joints) {
        BodyParams p;
        p.pose.assign(joints, Vec3::Zero());
        return p;
    }
};

inline constexpr double kShapeScaleMin = 0.5;
inline constexpr double kShapeScaleMax = 2.0;

// Linear blend skinning: scale the template and rest offsets by shape_scale,
// pose the joint tree, skin the vertices, then apply the global rotation
// (about the origin) and translation. Throws LengthMismatch when params.pose
// disagrees with the skeleton size.
TriMesh body_forward(const BodyTemplate& tmpl, const BodyParams& params);

// Reported joints: regressor rows applied to the body_forward vertices.
std::vector<Vec3> body_joints3d(const BodyTemplate& tmpl, const BodyParams& params);

// Squared norm of the per-joint pose vector (global rotation excluded).
double pose_prior(const BodyParams& params);

// Sum of exp(sign * pose[joint][axis]) over the given bend joints.
double bending_prior(const BodyParams& params, std::span<const BendJoint> bend_joints);

// Capsule-based self-collision: for every pair of bones that do not share a
// joint, penalize squared overlap of their capsules in the posed skeleton.
double self_penetration(const BodyTemplate& tmpl, const BodyParams& params);

// Built-in 15-joint box-limb template used by the synthetic generator and
// tests: feet soles on y=0, T-pose arms along x, COCO-style 17 reported
// joints, contact vertices on soles, palms and posterior.
BodyTemplate make_default_template();

// Template storage: OBJ mesh plus a JSON sidecar at path + ".json" holding
// the skeleton, weights and annotations.
BodyTemplate load_template(const std::filesystem::path& obj_path);
void save_template(const BodyTemplate& tmpl, const std::filesystem::path& obj_path);

}  // namespace scenefit
