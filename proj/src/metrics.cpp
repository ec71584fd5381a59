#include "scenefit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scenefit {

Similarity umeyama_alignment(std::span<const Vec3> src, std::span<const Vec3> dst) {
    if (src.size() != dst.size())
        throw LengthMismatch("alignment needs equally sized point sets, got " +
                             std::to_string(src.size()) + " and " + std::to_string(dst.size()));
    const std::size_t n = src.size();
    if (n < 3) throw DegenerateConfiguration("alignment needs at least 3 points");

    Vec3 mu_src = Vec3::Zero(), mu_dst = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mu_src += src[i];
        mu_dst += dst[i];
    }
    mu_src /= static_cast<double>(n);
    mu_dst /= static_cast<double>(n);

    Mat3 cov = Mat3::Zero();
    double var_src = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 a = src[i] - mu_src;
        const Vec3 b = dst[i] - mu_dst;
        cov += b * a.transpose();
        var_src += a.squaredNorm();
    }
    cov /= static_cast<double>(n);
    var_src /= static_cast<double>(n);
    if (var_src <= 0.0) throw DegenerateConfiguration("source points are coincident");

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    Mat3 v = svd.matrixV();
    Vec3 d = svd.singularValues();
    Mat3 s = Mat3::Identity();
    if (u.determinant() * v.determinant() < 0) s(2, 2) = -1.0;

    Similarity sim;
    sim.rotation = u * s * v.transpose();
    sim.scale = (d.asDiagonal() * s).trace() / var_src;
    sim.translation = mu_dst - sim.scale * (sim.rotation * mu_src);
    return sim;
}

double mean_point_error(std::span<const Vec3> pred, std::span<const Vec3> gt) {
    if (pred.size() != gt.size())
        throw LengthMismatch("point sets differ in size: " + std::to_string(pred.size()) + " vs " +
                             std::to_string(gt.size()));
    if (pred.empty()) throw LengthMismatch("point sets are empty");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - gt[i]).norm();
    return s / static_cast<double>(pred.size());
}

double mean_pixel_error(std::span<const Vec3> pred_joints, std::span<const Keypoint2D> gt_keypoints,
                        std::span<const int> keypoint_map, const CameraPose& cam, const Intrinsics& K) {
    if (gt_keypoints.size() != keypoint_map.size())
        throw LengthMismatch("keypoint count does not match the template map");
    double s = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < gt_keypoints.size(); ++k) {
        if (gt_keypoints[k].confidence <= 0.0) continue;
        const int j = keypoint_map[k];
        if (j < 0 || j >= static_cast<int>(pred_joints.size()))
            throw BadJointIndex("keypoint map entry " + std::to_string(j) + " out of range");
        s += (project_point(pred_joints[j], cam, K) - gt_keypoints[k].pixel).norm();
        ++n;
    }
    if (n == 0) throw LengthMismatch("no keypoints with positive confidence");
    return s / n;
}

double v2v(const TriMesh& pred, const TriMesh& gt) {
    if (pred.vertices.size() != gt.vertices.size())
        throw LengthMismatch("meshes differ in vertex count: " + std::to_string(pred.vertices.size()) +
                             " vs " + std::to_string(gt.vertices.size()));
    return mean_point_error(pred.vertices, gt.vertices);
}

double procrustes_point_error(std::span<const Vec3> pred, std::span<const Vec3> gt) {
    const Similarity sim = umeyama_alignment(pred, gt);
    std::vector<Vec3> aligned(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) aligned[i] = sim.apply(pred[i]);
    return mean_point_error(aligned, gt);
}

double procrustes_v2v(const TriMesh& pred, const TriMesh& gt) {
    if (pred.vertices.size() != gt.vertices.size())
        throw LengthMismatch("meshes differ in vertex count");
    return procrustes_point_error(pred.vertices, gt.vertices);
}

std::vector<std::pair<int, int>> greedy_iou_matching(std::span<const BBox3D> pred,
                                                     std::span<const BBox3D> gt, double threshold) {
    struct Cand {
        double iou;
        int p, g;
    };
    std::vector<Cand> cands;
    for (int p = 0; p < static_cast<int>(pred.size()); ++p)
        for (int g = 0; g < static_cast<int>(gt.size()); ++g) {
            const double iou = iou_box3d(pred[p], gt[g]);
            if (iou >= threshold) cands.push_back({iou, p, g});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.p != b.p) return a.p < b.p;
        return a.g < b.g;
    });
    std::vector<bool> used_p(pred.size(), false), used_g(gt.size(), false);
    std::vector<std::pair<int, int>> out;
    for (const Cand& c : cands) {
        if (used_p[c.p] || used_g[c.g]) continue;
        used_p[c.p] = used_g[c.g] = true;
        out.push_back({c.p, c.g});
    }
    return out;
}

EvalReport evaluate(const SceneDocument& pred, const SceneDocument& gt,
                    const std::optional<std::vector<std::pair<int, int>>>& matching,
                    double greedy_threshold) {
    std::vector<std::pair<int, int>> pairs;
    if (matching) {
        if (matching->empty()) throw EmptyMatching("explicit matching is empty");
        for (const auto& [p, g] : *matching) {
            if (p < 0 || p >= static_cast<int>(pred.objects.size()) || g < 0 ||
                g >= static_cast<int>(gt.objects.size()))
                throw InvalidArgument("matching pair (" + std::to_string(p) + ", " + std::to_string(g) +
                                      ") out of range");
            pairs.push_back({p, g});
        }
    } else {
        std::vector<BBox3D> pb, gb;
        for (const ObjectDoc& o : pred.objects) pb.push_back(o.box);
        for (const ObjectDoc& o : gt.objects) gb.push_back(o.box);
        pairs = greedy_iou_matching(pb, gb, greedy_threshold);
    }

    EvalReport report;
    report.matched_objects = static_cast<int>(pairs.size());
    if (!pairs.empty()) {
        double s3 = 0.0, s2 = 0.0;
        for (const auto& [p, g] : pairs) {
            s3 += iou_box3d(pred.objects[p].box, gt.objects[g].box);
            const Rect2D rect = project_box_to_rect(pred.objects[p].box, pred.camera, pred.intrinsics);
            s2 += iou_rect(rect, gt.objects[g].detection);
        }
        report.mean_iou3d = s3 / pairs.size();
        report.mean_iou2d = s2 / pairs.size();
    }

    if (pred.human && gt.human) {
        const std::vector<Vec3> pj = body_joints3d(*pred.human->tmpl, pred.human->params);
        const std::vector<Vec3> gj = body_joints3d(*gt.human->tmpl, gt.human->params);
        report.pje_mm = 1000.0 * mean_point_error(pj, gj);
        report.pje2d_px = mean_pixel_error(pj, gt.human->keypoints, gt.human->tmpl->keypoint_map,
                                           pred.camera, pred.intrinsics);
        const TriMesh pm = body_forward(*pred.human->tmpl, pred.human->params);
        const TriMesh gm = body_forward(*gt.human->tmpl, gt.human->params);
        report.v2v_mm = 1000.0 * v2v(pm, gm);
        report.p_pje_mm = 1000.0 * procrustes_point_error(pj, gj);
        report.p_v2v_mm = 1000.0 * procrustes_v2v(pm, gm);
    }
    return report;
}

}  // namespace scenefit
