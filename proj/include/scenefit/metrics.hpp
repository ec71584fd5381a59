#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "scenefit/scene.hpp"

namespace scenefit {

// Best similarity transform (scale * R * p + t) mapping src onto dst in the
// least-squares sense, with det(R) = +1 enforced. Throws LengthMismatch on
// size disagreement and DegenerateConfiguration when the source points do
// not span a plane (fewer than 3 points or zero variance).
struct Similarity {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation{0, 0, 0};

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

Similarity umeyama_alignment(std::span<const Vec3> src, std::span<const Vec3> dst);

// Mean Euclidean distance between corresponding points (meters).
double mean_point_error(std::span<const Vec3> pred, std::span<const Vec3> gt);

// Mean pixel error between projected predicted joints and ground-truth
// keypoints, using the prediction's camera. Keypoint k compares against
// joints[map[k]]; zero-confidence keypoints are skipped.
double mean_pixel_error(std::span<const Vec3> pred_joints, std::span<const Keypoint2D> gt_keypoints,
                        std::span<const int> keypoint_map, const CameraPose& cam, const Intrinsics& K);

// Mean vertex-to-vertex distance between same-topology meshes.
double v2v(const TriMesh& pred, const TriMesh& gt);

// Procrustes-aligned variants: align pred onto gt first.
double procrustes_point_error(std::span<const Vec3> pred, std::span<const Vec3> gt);
double procrustes_v2v(const TriMesh& pred, const TriMesh& gt);

// Greedy IoU matching between predicted and ground-truth boxes: repeatedly
// take the highest-IoU remaining pair while IoU >= threshold.
std::vector<std::pair<int, int>> greedy_iou_matching(std::span<const BBox3D> pred,
                                                     std::span<const BBox3D> gt, double threshold);

struct EvalReport {
    int matched_objects = 0;
    double mean_iou3d = 0;
    double mean_iou2d = 0;
    // body metrics, present when both documents carry a human
    std::optional<double> pje_mm;
    std::optional<double> pje2d_px;
    std::optional<double> v2v_mm;
    std::optional<double> p_pje_mm;
    std::optional<double> p_v2v_mm;
};

// Compares refined estimates against ground truth. matching holds
// (pred index, gt index) pairs; pass std::nullopt to match greedily by 3D IoU
// at the given threshold. An explicit empty matching throws EmptyMatching.
EvalReport evaluate(const SceneDocument& pred, const SceneDocument& gt,
                    const std::optional<std::vector<std::pair<int, int>>>& matching,
                    double greedy_threshold = 0.15);

}  // namespace scenefit
