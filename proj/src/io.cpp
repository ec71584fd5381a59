#include "scenefit/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

namespace scenefit {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_file(const std::string& text, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::string join(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

const ordered_json& require(const ordered_json& j, const std::string& parent, const std::string& key) {
    if (!j.is_object()) throw SchemaError(parent + ": expected an object");
    const auto it = j.find(key);
    if (it == j.end()) throw SchemaError("missing required field \"" + join(parent, key) + "\"");
    return *it;
}

double require_number(const ordered_json& j, const std::string& parent, const std::string& key) {
    const ordered_json& v = require(j, parent, key);
    if (!v.is_number()) throw SchemaError(join(parent, key) + ": expected a number");
    return v.get<double>();
}

Vec3 require_vec3(const ordered_json& j, const std::string& parent, const std::string& key) {
    const ordered_json& v = require(j, parent, key);
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
        throw SchemaError(join(parent, key) + ": expected an array of 3 numbers");
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

std::string require_string(const ordered_json& j, const std::string& parent, const std::string& key) {
    const ordered_json& v = require(j, parent, key);
    if (!v.is_string()) throw SchemaError(join(parent, key) + ": expected a string");
    return v.get<std::string>();
}

BBox3D parse_box(const ordered_json& j, const std::string& path) {
    const Vec3 c = require_vec3(j, path, "centroid");
    const Vec3 s = require_vec3(j, path, "size");
    const double yaw = require_number(j, path, "yaw");
    try {
        return BBox3D(c, s, yaw);
    } catch (const InvalidArgument& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

Rect2D parse_rect(const ordered_json& j, const std::string& path) {
    try {
        return Rect2D{require_number(j, path, "xmin"), require_number(j, path, "ymin"),
                      require_number(j, path, "xmax"), require_number(j, path, "ymax")};
    } catch (const InvalidArgument& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

ordered_json vec3_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

ordered_json box_json(const BBox3D& b) {
    return {{"centroid", vec3_json(b.centroid)}, {"size", vec3_json(b.size)}, {"yaw", b.yaw}};
}

ordered_json rect_json(const Rect2D& r) {
    return {{"xmin", r.xmin}, {"ymin", r.ymin}, {"xmax", r.xmax}, {"ymax", r.ymax}};
}

// Resolves a stored reference against the directory holding the document.
std::string resolve(const std::filesystem::path& doc_path, const std::string& ref) {
    std::filesystem::path p(ref);
    if (!p.is_absolute()) p = doc_path.parent_path() / p;
    return p.lexically_normal().string();
}

// Rewrites an absolute reference relative to the directory that will hold
// the document, falling back to the absolute form across roots.
std::string relativize(const std::filesystem::path& doc_path, const std::string& ref) {
    const std::filesystem::path base = std::filesystem::absolute(doc_path).lexically_normal().parent_path();
    const std::filesystem::path target = std::filesystem::absolute(ref).lexically_normal();
    const std::filesystem::path rel = target.lexically_relative(base);
    return rel.empty() ? target.string() : rel.string();
}

BodyParams parse_body_params(const ordered_json& j, const std::string& path, std::size_t joints) {
    BodyParams p;
    p.translation = require_vec3(j, path, "translation");
    p.global_rotation = require_vec3(j, path, "global_rotation");
    p.shape_scale = require_vec3(j, path, "shape_scale");
    const ordered_json& pose = require(j, path, "pose");
    if (!pose.is_array() || pose.size() != joints)
        throw SchemaError(path + ".pose: expected " + std::to_string(joints) + " per-joint rotations");
    for (std::size_t k = 0; k < joints; ++k) {
        const ordered_json& r = pose[k];
        if (!r.is_array() || r.size() != 3 || !r[0].is_number() || !r[1].is_number() || !r[2].is_number())
            throw SchemaError(path + ".pose[" + std::to_string(k) + "]: expected an array of 3 numbers");
        p.pose.push_back({r[0].get<double>(), r[1].get<double>(), r[2].get<double>()});
    }
    return p;
}

ordered_json body_params_json(const BodyParams& p) {
    ordered_json pose = ordered_json::array();
    for (const Vec3& r : p.pose) pose.push_back(vec3_json(r));
    return {{"translation", vec3_json(p.translation)},
            {"global_rotation", vec3_json(p.global_rotation)},
            {"pose", std::move(pose)},
            {"shape_scale", vec3_json(p.shape_scale)}};
}

}  // namespace

SceneDocument load_scene(const std::filesystem::path& path) {
    const ordered_json j = parse_file(path);
    const std::string schema = require_string(j, "", "schema");
    if (schema != "scenefit/1")
        throw SchemaError("schema: expected \"scenefit/1\", got \"" + schema + "\"");

    SceneDocument doc;
    const ordered_json& camera = require(j, "", "camera");
    const ordered_json& K = require(camera, "camera", "intrinsics");
    doc.intrinsics.fx = require_number(K, "camera.intrinsics", "fx");
    doc.intrinsics.fy = require_number(K, "camera.intrinsics", "fy");
    doc.intrinsics.cx = require_number(K, "camera.intrinsics", "cx");
    doc.intrinsics.cy = require_number(K, "camera.intrinsics", "cy");
    doc.intrinsics.width = static_cast<int>(require_number(K, "camera.intrinsics", "width"));
    doc.intrinsics.height = static_cast<int>(require_number(K, "camera.intrinsics", "height"));
    if (doc.intrinsics.fx <= 0 || doc.intrinsics.fy <= 0)
        throw SchemaError("camera.intrinsics: focal lengths must be positive");
    if (doc.intrinsics.width <= 0 || doc.intrinsics.height <= 0)
        throw SchemaError("camera.intrinsics: image size must be positive");
    doc.camera.pitch = require_number(camera, "camera", "init_pitch");
    doc.camera.roll = require_number(camera, "camera", "init_roll");

    doc.layout = parse_box(require(j, "", "layout"), "layout");

    const ordered_json& objects = require(j, "", "objects");
    if (!objects.is_array()) throw SchemaError("objects: expected an array");
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const std::string p = "objects[" + std::to_string(i) + "]";
        const ordered_json& o = objects[i];
        ObjectDoc od;
        od.label = require_string(o, p, "label");
        od.mesh_path = resolve(path, require_string(o, p, "mesh"));
        const TriMesh raw = load_mesh(od.mesh_path);
        std::array<int, 2> edge{};
        if (!is_watertight(raw, &edge))
            throw NotWatertight(p + ": mesh " + od.mesh_path + " is not watertight (edge " +
                                std::to_string(edge[0]) + " -> " + std::to_string(edge[1]) + ")");
        od.mesh = std::make_shared<const TriMesh>(normalize_unit_cube(raw));
        od.box = parse_box(require(o, p, "box"), p + ".box");
        od.detection = parse_rect(require(o, p, "detection"), p + ".detection");
        doc.objects.push_back(std::move(od));
    }

    if (j.contains("human") && !j["human"].is_null()) {
        const ordered_json& h = j["human"];
        HumanDoc hd;
        hd.template_path = resolve(path, require_string(h, "human", "template"));
        hd.tmpl = std::make_shared<const BodyTemplate>(load_template(hd.template_path));
        const ordered_json& kps = require(h, "human", "keypoints_2d");
        if (!kps.is_array() || kps.size() != hd.tmpl->keypoint_map.size())
            throw SchemaError("human.keypoints_2d: expected " +
                              std::to_string(hd.tmpl->keypoint_map.size()) +
                              " entries to match the template keypoint map");
        for (std::size_t k = 0; k < kps.size(); ++k) {
            const ordered_json& e = kps[k];
            if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() ||
                !e[2].is_number())
                throw SchemaError("human.keypoints_2d[" + std::to_string(k) +
                                  "]: expected [x, y, confidence]");
            hd.keypoints.push_back({{e[0].get<double>(), e[1].get<double>()}, e[2].get<double>()});
        }
        hd.params = parse_body_params(require(h, "human", "params"), "human.params",
                                      hd.tmpl->joint_count());
        doc.human = std::move(hd);
    }
    return doc;
}

void save_scene(const SceneDocument& doc, const std::filesystem::path& path) {
    ordered_json j;
    j["schema"] = "scenefit/1";
    j["units"] = "meters";
    j["camera"] = {{"intrinsics",
                    ordered_json{{"fx", doc.intrinsics.fx},
                                 {"fy", doc.intrinsics.fy},
                                 {"cx", doc.intrinsics.cx},
                                 {"cy", doc.intrinsics.cy},
                                 {"width", doc.intrinsics.width},
                                 {"height", doc.intrinsics.height}}},
                   {"init_pitch", doc.camera.pitch},
                   {"init_roll", doc.camera.roll}};
    j["layout"] = box_json(doc.layout);
    ordered_json objects = ordered_json::array();
    for (const ObjectDoc& o : doc.objects)
        objects.push_back({{"label", o.label},
                           {"mesh", relativize(path, o.mesh_path)},
                           {"box", box_json(o.box)},
                           {"detection", rect_json(o.detection)}});
    j["objects"] = std::move(objects);
    if (doc.human) {
        ordered_json kps = ordered_json::array();
        for (const Keypoint2D& k : doc.human->keypoints)
            kps.push_back(ordered_json::array({k.pixel.x(), k.pixel.y(), k.confidence}));
        j["human"] = {{"template", relativize(path, doc.human->template_path)},
                      {"keypoints_2d", std::move(kps)},
                      {"params", body_params_json(doc.human->params)}};
    }
    write_file(j.dump(2) + "\n", path);
}

SceneDocument apply_params(SceneDocument doc, const SceneParams& params) {
    if (params.boxes.size() != doc.objects.size())
        throw LengthMismatch("parameters carry " + std::to_string(params.boxes.size()) +
                             " boxes for " + std::to_string(doc.objects.size()) + " objects");
    doc.camera = params.camera;
    doc.layout = params.layout;
    for (std::size_t i = 0; i < doc.objects.size(); ++i) doc.objects[i].box = params.boxes[i];
    if (doc.human && params.body) doc.human->params = *params.body;
    return doc;
}

void export_meshes(const SceneDocument& doc, const SceneParams& params,
                   const std::filesystem::path& dir) {
    if (params.boxes.size() != doc.objects.size())
        throw LengthMismatch("parameters carry " + std::to_string(params.boxes.size()) +
                             " boxes for " + std::to_string(doc.objects.size()) + " objects");
    std::filesystem::create_directories(dir);
    ordered_json manifest = ordered_json::array();
    for (std::size_t i = 0; i < doc.objects.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "object_%03zu.obj", i);
        save_obj(place_mesh(*doc.objects[i].mesh, params.boxes[i]), dir / name);
        manifest.push_back({{"file", name}, {"kind", "object"}, {"label", doc.objects[i].label}});
    }
    if (doc.human && params.body) {
        save_obj(body_forward(*doc.human->tmpl, *params.body), dir / "body.obj");
        manifest.push_back({{"file", "body.obj"}, {"kind", "body"}});
    }
    const TriMesh cube = make_box_mesh(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
    save_obj(place_mesh(cube, params.layout), dir / "layout.obj");
    manifest.push_back({{"file", "layout.obj"}, {"kind", "layout"}});
    write_file(ordered_json{{"meshes", std::move(manifest)}}.dump(2) + "\n", dir / "manifest.json");
}

namespace {

// Applies every present key of j to fields named in the table; rejects keys
// naming nothing.
struct FieldTable {
    std::vector<std::pair<std::string, double*>> fields;

    void apply(const ordered_json& j, const std::string& section) const {
        for (const auto& [key, value] : j.items()) {
            auto it = std::find_if(fields.begin(), fields.end(),
                                   [&](const auto& f) { return f.first == key; });
            if (it == fields.end())
                throw SchemaError(join(section, key) + ": unknown setting");
            if (!value.is_number()) throw SchemaError(join(section, key) + ": expected a number");
            *it->second = value.get<double>();
        }
    }
};

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
    const ordered_json j = parse_file(path);
    RunConfig cfg;

    double s1t = cfg.schedule.stage1_translation_iters, s1b = cfg.schedule.stage1_body_iters,
           s1s = cfg.schedule.stage1_scene_iters, s2a = cfg.schedule.stage2_alternations,
           s2i = cfg.schedule.stage2_body_inner_iters, rebuild = cfg.schedule.sdf_rebuild_every,
           res = cfg.sdf_resolution;
    for (const auto& [key, value] : j.items()) {
        if (key == "weights") {
            FieldTable t{{{"lambda1", &cfg.weights.lambda1},
                          {"lambda2", &cfg.weights.lambda2},
                          {"lambda3", &cfg.weights.lambda3},
                          {"lambda4", &cfg.weights.lambda4},
                          {"lambda5", &cfg.weights.lambda5},
                          {"lambda6", &cfg.weights.lambda6},
                          {"w_keypoint", &cfg.weights.w_keypoint},
                          {"w_pose_prior", &cfg.weights.w_pose_prior},
                          {"w_bend", &cfg.weights.w_bend},
                          {"w_selfpen", &cfg.weights.w_selfpen},
                          {"sigma_keypoint", &cfg.weights.sigma_keypoint},
                          {"sigma_contact", &cfg.weights.sigma_contact},
                          {"smooth_l1_beta", &cfg.weights.smooth_l1_beta}}};
            t.apply(value, "weights");
        } else if (key == "schedule") {
            FieldTable t{{{"stage1_translation_iters", &s1t},
                          {"stage1_body_iters", &s1b},
                          {"stage1_scene_iters", &s1s},
                          {"stage2_alternations", &s2a},
                          {"stage2_body_inner_iters", &s2i},
                          {"stage1_body_lr", &cfg.schedule.stage1_body_lr},
                          {"stage1_scene_lr", &cfg.schedule.stage1_scene_lr},
                          {"stage2_body_lr", &cfg.schedule.stage2_body_lr},
                          {"stage2_scene_lr", &cfg.schedule.stage2_scene_lr},
                          {"weight_decay", &cfg.schedule.weight_decay},
                          {"sdf_rebuild_every", &rebuild}}};
            t.apply(value, "schedule");
        } else if (key == "sdf_resolution") {
            if (!value.is_number()) throw SchemaError("sdf_resolution: expected a number");
            res = value.get<double>();
        } else {
            throw SchemaError(key + ": unknown setting");
        }
    }

    const auto to_count = [](double v, const char* name) {
        if (!(v >= 0) || v != std::floor(v))
            throw SchemaError(std::string(name) + ": expected a non-negative integer");
        return static_cast<int>(v);
    };
    cfg.schedule.stage1_translation_iters = to_count(s1t, "schedule.stage1_translation_iters");
    cfg.schedule.stage1_body_iters = to_count(s1b, "schedule.stage1_body_iters");
    cfg.schedule.stage1_scene_iters = to_count(s1s, "schedule.stage1_scene_iters");
    cfg.schedule.stage2_alternations = to_count(s2a, "schedule.stage2_alternations");
    cfg.schedule.stage2_body_inner_iters = to_count(s2i, "schedule.stage2_body_inner_iters");
    cfg.schedule.sdf_rebuild_every = to_count(rebuild, "schedule.sdf_rebuild_every");
    if (cfg.schedule.sdf_rebuild_every < 1)
        throw SchemaError("schedule.sdf_rebuild_every: must be at least 1");
    cfg.sdf_resolution = to_count(res, "sdf_resolution");
    if (cfg.sdf_resolution < 2) throw SchemaError("sdf_resolution: must be at least 2");
    for (const double lr : {cfg.schedule.stage1_body_lr, cfg.schedule.stage1_scene_lr,
                            cfg.schedule.stage2_body_lr, cfg.schedule.stage2_scene_lr})
        if (!(lr > 0) || !std::isfinite(lr)) throw SchemaError("schedule: learning rates must be positive");
    if (!(cfg.schedule.weight_decay >= 0) || !std::isfinite(cfg.schedule.weight_decay))
        throw SchemaError("schedule.weight_decay: must be non-negative");
    try {
        cfg.weights.validate();
    } catch (const InvalidArgument& e) {
        throw SchemaError(std::string("weights: ") + e.what());
    }
    return cfg;
}

namespace {

ordered_json terms_json(const LossBreakdown& t) {
    return {{"keypoint", t.keypoint},
            {"pose_prior", t.pose_prior},
            {"bending", t.bending},
            {"self_penetration", t.self_penetration},
            {"body_total", t.body_total},
            {"scene_reprojection", t.scene_reprojection},
            {"scene_collision", t.scene_collision},
            {"obj_ground", t.obj_ground},
            {"body_ground", t.body_ground},
            {"contact", t.contact},
            {"body_penetration", t.body_penetration},
            {"total", t.total}};
}

}  // namespace

void write_trajectory(std::span<const TrajectoryEntry> trajectory, const std::filesystem::path& path) {
    std::string out;
    for (const TrajectoryEntry& e : trajectory) {
        const ordered_json line = {{"stage", e.stage},
                                   {"iter", e.iteration},
                                   {"terms", terms_json(e.terms)},
                                   {"step", e.step_size}};
        out += line.dump();
        out += "\n";
    }
    write_file(out, path);
}

std::string breakdown_to_json(const LossBreakdown& terms) { return terms_json(terms).dump(2) + "\n"; }

SynthSpec load_synth_spec(const std::filesystem::path& path) {
    const ordered_json j = parse_file(path);
    SynthSpec spec;
    const auto range = [](const ordered_json& v, const std::string& key) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw SchemaError(key + ": expected [lo, hi]");
        return SynthSpec::Range{v[0].get<double>(), v[1].get<double>()};
    };
    for (const auto& [key, value] : j.items()) {
        if (key == "object_count") {
            if (!value.is_number_integer()) throw SchemaError("object_count: expected an integer");
            spec.object_count = value.get<int>();
        } else if (key == "room_width") {
            spec.room_width = range(value, key);
        } else if (key == "room_depth") {
            spec.room_depth = range(value, key);
        } else if (key == "room_height") {
            spec.room_height = range(value, key);
        } else if (key == "sigma_centroid" || key == "sigma_size" || key == "sigma_yaw" ||
                   key == "sigma_body_translation") {
            if (!value.is_number()) throw SchemaError(key + ": expected a number");
            const double v = value.get<double>();
            if (key == "sigma_centroid") spec.sigma_centroid = v;
            if (key == "sigma_size") spec.sigma_size = v;
            if (key == "sigma_yaw") spec.sigma_yaw = v;
            if (key == "sigma_body_translation") spec.sigma_body_translation = v;
        } else if (key == "include_human") {
            if (!value.is_boolean()) throw SchemaError("include_human: expected a boolean");
            spec.include_human = value.get<bool>();
        } else {
            throw SchemaError(key + ": unknown setting");
        }
    }
    try {
        spec.validate();
    } catch (const InvalidArgument& e) {
        throw SchemaError(std::string("synth spec: ") + e.what());
    }
    return spec;
}

std::vector<std::pair<int, int>> load_matching(const std::filesystem::path& path) {
    const ordered_json j = parse_file(path);
    if (!j.is_array()) throw SchemaError("matching: expected an array of [pred, gt] pairs");
    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const ordered_json& e = j[i];
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
            throw SchemaError("matching[" + std::to_string(i) + "]: expected [pred, gt]");
        out.push_back({e[0].get<int>(), e[1].get<int>()});
    }
    return out;
}

std::string report_to_json(const EvalReport& report) {
    ordered_json j = {{"matched_objects", report.matched_objects},
                      {"mean_iou3d", report.mean_iou3d},
                      {"mean_iou2d", report.mean_iou2d}};
    if (report.pje_mm) j["pje_mm"] = *report.pje_mm;
    if (report.pje2d_px) j["pje2d_px"] = *report.pje2d_px;
    if (report.v2v_mm) j["v2v_mm"] = *report.v2v_mm;
    if (report.p_pje_mm) j["p_pje_mm"] = *report.p_pje_mm;
    if (report.p_v2v_mm) j["p_v2v_mm"] = *report.p_v2v_mm;
    return j.dump(2) + "\n";
}

}  // namespace scenefit
