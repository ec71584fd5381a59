#include "scenefit/body.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace scenefit {

namespace {

using nlohmann::json;

Mat3 axis_angle_rotation(const Vec3& r) {
    const double angle = r.norm();
    if (angle < 1e-18) return Mat3::Identity();
    return Eigen::AngleAxisd(angle, r / angle).toRotationMatrix();
}

Vec3 clamp_shape(const Vec3& s) {
    return s.cwiseMax(kShapeScaleMin).cwiseMin(kShapeScaleMax);
}

struct JointTransform {
    Mat3 r = Mat3::Identity();
    Vec3 t = Vec3::Zero();
};

// Global transforms of every joint for the scaled, posed skeleton.
std::vector<JointTransform> forward_kinematics(const BodyTemplate& tmpl, const BodyParams& params,
                                               const Vec3& scale) {
    std::vector<JointTransform> g(tmpl.skeleton.size());
    for (std::size_t j = 0; j < tmpl.skeleton.size(); ++j) {
        const Joint& joint = tmpl.skeleton[j];
        const Vec3 off = joint.offset.cwiseProduct(scale);
        const Mat3 local = axis_angle_rotation(params.pose[j]);
        if (joint.parent < 0) {
            g[j].r = local;
            g[j].t = off;
        } else {
            const JointTransform& p = g[joint.parent];
            g[j].r = p.r * local;
            g[j].t = p.r * off + p.t;
        }
    }
    return g;
}

}  // namespace

std::vector<Vec3> BodyTemplate::rest_joint_positions() const {
    std::vector<Vec3> pos(skeleton.size());
    for (std::size_t j = 0; j < skeleton.size(); ++j) {
        const Joint& joint = skeleton[j];
        pos[j] = joint.parent < 0 ? joint.offset : pos[joint.parent] + joint.offset;
    }
    return pos;
}

void BodyTemplate::validate() const {
    if (skeleton.empty()) throw LengthMismatch("template has no joints");
    if (mesh.vertices.empty()) throw EmptyMesh("template mesh is empty");
    const int n_joints = static_cast<int>(skeleton.size());
    const int n_verts = static_cast<int>(mesh.vertices.size());
    for (int j = 0; j < n_joints; ++j) {
        const int p = skeleton[j].parent;
        if (p >= j || (p < 0 && j != 0) || (j == 0 && p != -1) || p < -1)
            throw BadJointIndex("joint " + std::to_string(j) + " has invalid parent " + std::to_string(p));
    }
    if (skinning.size() != mesh.vertices.size())
        throw LengthMismatch("skinning rows (" + std::to_string(skinning.size()) +
                             ") do not match vertex count (" + std::to_string(mesh.vertices.size()) + ")");
    for (std::size_t v = 0; v < skinning.size(); ++v) {
        if (skinning[v].empty())
            throw LengthMismatch("vertex " + std::to_string(v) + " has no skinning weights");
        double sum = 0.0;
        for (const WeightEntry& w : skinning[v]) {
            if (w.index < 0 || w.index >= n_joints)
                throw BadJointIndex("skinning row " + std::to_string(v) + " references joint " +
                                    std::to_string(w.index));
            if (w.weight < 0)
                throw InvalidArgument("skinning weights must be non-negative");
            sum += w.weight;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw InvalidArgument("skinning row " + std::to_string(v) + " sums to " + std::to_string(sum));
    }
    if (regressor.empty()) throw LengthMismatch("template has no reported joints");
    for (std::size_t r = 0; r < regressor.size(); ++r) {
        if (regressor[r].empty())
            throw LengthMismatch("regressor row " + std::to_string(r) + " is empty");
        double sum = 0.0;
        for (const WeightEntry& w : regressor[r]) {
            if (w.index < 0 || w.index >= n_verts)
                throw BadJointIndex("regressor row " + std::to_string(r) + " references vertex " +
                                    std::to_string(w.index));
            sum += w.weight;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw InvalidArgument("regressor row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
    for (int v : contact_vertices)
        if (v < 0 || v >= n_verts) throw BadJointIndex("contact vertex " + std::to_string(v) + " out of range");
    for (int k : keypoint_map)
        if (k < 0 || k >= static_cast<int>(regressor.size()))
            throw BadJointIndex("keypoint map entry " + std::to_string(k) + " out of range");
    if (capsule_radii.size() != skeleton.size())
        throw LengthMismatch("capsule radii count does not match joint count");
    for (double r : capsule_radii)
        if (r < 0) throw InvalidArgument("capsule radii must be non-negative");
    for (const BendJoint& b : bend_joints) {
        if (b.joint < 0 || b.joint >= n_joints)
            throw BadJointIndex("bend joint " + std::to_string(b.joint) + " out of range");
        if (b.axis < 0 || b.axis > 2) throw InvalidArgument("bend axis must be 0, 1 or 2");
    }
}

TriMesh body_forward(const BodyTemplate& tmpl, const BodyParams& params) {
    if (params.pose.size() != tmpl.skeleton.size())
        throw LengthMismatch("pose has " + std::to_string(params.pose.size()) + " joints, template has " +
                             std::to_string(tmpl.skeleton.size()));
    const Vec3 scale = clamp_shape(params.shape_scale);
    const std::vector<Vec3> rest = [&] {
        std::vector<Vec3> pos(tmpl.skeleton.size());
        for (std::size_t j = 0; j < tmpl.skeleton.size(); ++j) {
            const Joint& joint = tmpl.skeleton[j];
            const Vec3 off = joint.offset.cwiseProduct(scale);
            pos[j] = joint.parent < 0 ? off : pos[joint.parent] + off;
        }
        return pos;
    }();
    const std::vector<JointTransform> g = forward_kinematics(tmpl, params, scale);
    const Mat3 rg = axis_angle_rotation(params.global_rotation);

    TriMesh out = tmpl.mesh;
    for (std::size_t v = 0; v < out.vertices.size(); ++v) {
        const Vec3 p = tmpl.mesh.vertices[v].cwiseProduct(scale);
        Vec3 skinned = Vec3::Zero();
        for (const WeightEntry& w : tmpl.skinning[v]) {
            const JointTransform& m = g[w.index];
            skinned += w.weight * (m.r * (p - rest[w.index]) + m.t);
        }
        out.vertices[v] = rg * skinned + params.translation;
    }
    return out;
}

std::vector<Vec3> body_joints3d(const BodyTemplate& tmpl, const BodyParams& params) {
    const TriMesh posed = body_forward(tmpl, params);
    std::vector<Vec3> joints(tmpl.regressor.size());
    for (std::size_t r = 0; r < tmpl.regressor.size(); ++r) {
        Vec3 acc = Vec3::Zero();
        for (const WeightEntry& w : tmpl.regressor[r]) acc += w.weight * posed.vertices[w.index];
        joints[r] = acc;
    }
    return joints;
}

double pose_prior(const BodyParams& params) {
    double s = 0.0;
    for (const Vec3& r : params.pose) s += r.squaredNorm();
    return s;
}

double bending_prior(const BodyParams& params, std::span<const BendJoint> bend_joints) {
    double s = 0.0;
    for (const BendJoint& b : bend_joints) {
        if (b.joint < 0 || b.joint >= static_cast<int>(params.pose.size()))
            throw BadJointIndex("bend joint " + std::to_string(b.joint) + " out of range");
        s += std::exp(b.sign * params.pose[b.joint][b.axis]);
    }
    return s;
}

namespace {

double seg_seg_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
    const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
    const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
    double s, t;
    constexpr double eps = 1e-12;
    if (a <= eps && e <= eps) return r.norm();
    if (a <= eps) {
        s = 0.0;
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = d1.dot(r);
        if (e <= eps) {
            t = 0.0;
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = d1.dot(d2);
            const double denom = a * e - b * b;
            s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0) {
                t = 0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1) {
                t = 1;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    return (p1 + d1 * s - (p2 + d2 * t)).norm();
}

}  // namespace

double self_penetration(const BodyTemplate& tmpl, const BodyParams& params) {
    if (params.pose.size() != tmpl.skeleton.size())
        throw LengthMismatch("pose joint count does not match the skeleton");
    const std::vector<JointTransform> g = forward_kinematics(tmpl, params, clamp_shape(params.shape_scale));

    struct Bone {
        int proximal, distal;  // joint indices
        Vec3 a, b;
        double radius;
    };
    std::vector<Bone> bones;
    for (std::size_t j = 0; j < tmpl.skeleton.size(); ++j) {
        const int p = tmpl.skeleton[j].parent;
        if (p < 0) continue;
        bones.push_back({p, static_cast<int>(j), g[p].t, g[j].t, tmpl.capsule_radii[j]});
    }
    const auto parent_of = [&](int j) { return tmpl.skeleton[j].parent; };
    const auto adjacent = [&](const Bone& x, const Bone& y) {
        const auto in = [](int v, const Bone& b) { return v == b.proximal || v == b.distal; };
        return in(x.proximal, y) || in(x.distal, y) || in(parent_of(x.proximal), y) ||
               in(parent_of(y.proximal), x);
    };
    double s = 0.0;
    for (std::size_t i = 0; i < bones.size(); ++i) {
        for (std::size_t j = i + 1; j < bones.size(); ++j) {
            if (adjacent(bones[i], bones[j])) continue;
            const double d = seg_seg_distance(bones[i].a, bones[i].b, bones[j].a, bones[j].b);
            const double overlap = bones[i].radius + bones[j].radius - d;
            if (overlap > 0) s += overlap * overlap;
        }
    }
    return s;
}

// ---------------------------------------------------------------- default template

namespace {

void add_box(TriMesh& mesh, std::vector<std::vector<WeightEntry>>& skinning, const Vec3& lo,
             const Vec3& hi, int joint) {
    const int base = static_cast<int>(mesh.vertices.size());
    const TriMesh box = make_box_mesh(lo, hi);
    for (const Vec3& v : box.vertices) {
        mesh.vertices.push_back(v);
        skinning.push_back({{joint, 1.0}});
    }
    for (const auto& [a, b, c] : box.faces) mesh.faces.push_back({base + a, base + b, base + c});
}

}  // namespace

BodyTemplate make_default_template() {
    BodyTemplate t;
    // joint tree: pelvis(0) spine(1) head(2), l hip/knee/ankle(3-5),
    // r hip/knee/ankle(6-8), l shoulder/elbow/wrist(9-11), r (12-14)
    t.skeleton = {
        {"pelvis", -1, {0.00, 0.95, 0.00}},  {"spine", 0, {0.00, 0.30, 0.00}},
        {"head", 1, {0.00, 0.30, 0.00}},     {"l_hip", 0, {-0.10, -0.05, 0.00}},
        {"l_knee", 3, {0.00, -0.45, 0.00}},  {"l_ankle", 4, {0.00, -0.40, 0.00}},
        {"r_hip", 0, {0.10, -0.05, 0.00}},   {"r_knee", 6, {0.00, -0.45, 0.00}},
        {"r_ankle", 7, {0.00, -0.40, 0.00}}, {"l_shoulder", 1, {-0.20, 0.00, 0.00}},
        {"l_elbow", 9, {-0.28, 0.00, 0.00}}, {"l_wrist", 10, {-0.26, 0.00, 0.00}},
        {"r_shoulder", 1, {0.20, 0.00, 0.00}}, {"r_elbow", 12, {0.28, 0.00, 0.00}},
        {"r_wrist", 13, {0.26, 0.00, 0.00}},
    };

    // box limbs, each bound rigidly to the proximal joint of its bone
    add_box(t.mesh, t.skinning, {-0.17, 0.90, -0.11}, {0.17, 1.30, 0.11}, 0);    // torso
    add_box(t.mesh, t.skinning, {-0.09, 1.45, -0.09}, {0.09, 1.75, 0.09}, 2);    // head
    add_box(t.mesh, t.skinning, {-0.165, 0.45, -0.065}, {-0.035, 0.90, 0.065}, 3);  // l thigh
    add_box(t.mesh, t.skinning, {-0.155, 0.06, -0.055}, {-0.045, 0.45, 0.055}, 4);  // l shin
    add_box(t.mesh, t.skinning, {-0.16, 0.00, -0.06}, {-0.04, 0.06, 0.16}, 5);      // l foot
    add_box(t.mesh, t.skinning, {0.035, 0.45, -0.065}, {0.165, 0.90, 0.065}, 6);    // r thigh
    add_box(t.mesh, t.skinning, {0.045, 0.06, -0.055}, {0.155, 0.45, 0.055}, 7);    // r shin
    add_box(t.mesh, t.skinning, {0.04, 0.00, -0.06}, {0.16, 0.06, 0.16}, 8);        // r foot
    add_box(t.mesh, t.skinning, {-0.48, 1.205, -0.045}, {-0.20, 1.295, 0.045}, 9);  // l upper arm
    add_box(t.mesh, t.skinning, {-0.76, 1.21, -0.04}, {-0.48, 1.29, 0.04}, 10);     // l forearm + hand
    add_box(t.mesh, t.skinning, {0.20, 1.205, -0.045}, {0.48, 1.295, 0.045}, 12);   // r upper arm
    add_box(t.mesh, t.skinning, {0.48, 1.21, -0.04}, {0.76, 1.29, 0.04}, 13);       // r forearm + hand

    // 17 reported joints, COCO order: nose, eyes, ears, shoulders, elbows,
    // wrists, hips, knees, ankles. Rows average mesh vertices.
    const auto quad = [](int a, int b, int c, int d) {
        return std::vector<WeightEntry>{{a, 0.25}, {b, 0.25}, {c, 0.25}, {d, 0.25}};
    };
    const auto pair = [](int a, int b) { return std::vector<WeightEntry>{{a, 0.5}, {b, 0.5}}; };
    const auto one = [](int a) { return std::vector<WeightEntry>{{a, 1.0}}; };
    t.regressor = {
        pair(14, 15),          // nose: head front top
        one(14), one(15),      // eyes
        one(10), one(11),      // ears: head back top
        quad(65, 67, 69, 71),  // l shoulder: upper-arm inner face
        quad(80, 82, 84, 86),  // r shoulder
        quad(73, 75, 77, 79),  // l elbow: forearm inner face
        quad(88, 90, 92, 94),  // r elbow
        quad(72, 74, 76, 78),  // l wrist: forearm outer face
        quad(89, 91, 93, 95),  // r wrist
        quad(18, 19, 22, 23),  // l hip: thigh top face
        quad(42, 43, 46, 47),  // r hip
        quad(26, 27, 30, 31),  // l knee: shin top face
        quad(50, 51, 54, 55),  // r knee
        pair(34, 35),          // l ankle: foot top back edge
        pair(58, 59),          // r ankle
    };
    // rows are already in COCO order, so the keypoint map is the identity
    t.keypoint_map.resize(17);
    for (int k = 0; k < 17; ++k) t.keypoint_map[k] = k;

    // soles, palms, posterior
    t.contact_vertices = {32, 33, 36, 37, 56, 57, 60, 61,        // soles
                          72, 74, 76, 78, 89, 91, 93, 95,        // palm tips
                          0, 1, 4, 5};                           // torso bottom

    t.capsule_radii = {0.0, 0.13, 0.08, 0.0, 0.07, 0.055, 0.0, 0.07, 0.055,
                       0.0, 0.045, 0.04, 0.0, 0.045, 0.04};

    // knees flex backward (negative x pose is hyperextension), elbows flex
    // forward about y, mirrored between sides
    t.bend_joints = {{4, 0, -1.0}, {7, 0, -1.0}, {10, 1, -1.0}, {13, 1, 1.0}};

    t.validate();
    return t;
}

// ------------------------------------------------------------------ persistence

BodyTemplate load_template(const std::filesystem::path& obj_path) {
    BodyTemplate t;
    t.mesh = load_mesh(obj_path);
    const std::filesystem::path sidecar = obj_path.string() + ".json";
    std::ifstream in(sidecar);
    if (!in) throw IoError("cannot open template sidecar " + sidecar.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("template sidecar " + sidecar.string() + ": " + e.what());
    }
    try {
        for (const auto& joint : j.at("joints"))
            t.skeleton.push_back({joint.at("name").get<std::string>(), joint.at("parent").get<int>(),
                                  Vec3(joint.at("offset")[0].get<double>(), joint.at("offset")[1].get<double>(),
                                       joint.at("offset")[2].get<double>())});
        const auto rows = [](const json& arr) {
            std::vector<std::vector<WeightEntry>> out;
            for (const auto& row : arr) {
                std::vector<WeightEntry> r;
                for (const auto& e : row) r.push_back({e[0].get<int>(), e[1].get<double>()});
                out.push_back(std::move(r));
            }
            return out;
        };
        t.skinning = rows(j.at("skinning"));
        t.regressor = rows(j.at("regressor"));
        t.contact_vertices = j.at("contact_vertices").get<std::vector<int>>();
        t.keypoint_map = j.at("keypoint_map").get<std::vector<int>>();
        t.capsule_radii = j.at("capsule_radii").get<std::vector<double>>();
        for (const auto& b : j.at("bend_joints"))
            t.bend_joints.push_back({b[0].get<int>(), b[1].get<int>(), b[2].get<double>()});
    } catch (const json::exception& e) {
        throw SchemaError("template sidecar " + sidecar.string() + ": " + e.what());
    }
    t.validate();
    return t;
}

void save_template(const BodyTemplate& tmpl, const std::filesystem::path& obj_path) {
    save_obj(tmpl.mesh, obj_path);
    json j;
    for (const Joint& joint : tmpl.skeleton)
        j["joints"].push_back({{"name", joint.name},
                               {"parent", joint.parent},
                               {"offset", {joint.offset.x(), joint.offset.y(), joint.offset.z()}}});
    const auto rows = [](const std::vector<std::vector<WeightEntry>>& rs) {
        json arr = json::array();
        for (const auto& row : rs) {
            json r = json::array();
            for (const WeightEntry& e : row) r.push_back({e.index, e.weight});
            arr.push_back(std::move(r));
        }
        return arr;
    };
    j["skinning"] = rows(tmpl.skinning);
    j["regressor"] = rows(tmpl.regressor);
    j["contact_vertices"] = tmpl.contact_vertices;
    j["keypoint_map"] = tmpl.keypoint_map;
    j["capsule_radii"] = tmpl.capsule_radii;
    j["bend_joints"] = json::array();
    for (const BendJoint& b : tmpl.bend_joints) j["bend_joints"].push_back({b.joint, b.axis, b.sign});
    const std::filesystem::path sidecar = obj_path.string() + ".json";
    std::ofstream out(sidecar);
    if (!out) throw IoError("cannot open " + sidecar.string() + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing " + sidecar.string());
}

}  // namespace scenefit
