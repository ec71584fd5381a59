#include "scenefit/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <json.hpp>

#include "scenefit/io.hpp"

namespace scenefit {

using ordered_json = nlohmann::ordered_json;

std::vector<TermGradError> gradient_check(const SceneDocument& doc, const SceneParams& params,
                                          const RunConfig& cfg, double oracle_h) {
    const ParamLayout layout = make_layout(params);
    FrozenContext ctx = build_context(doc, params, cfg.sdf_resolution, true);
    ctx.filter = build_grad_filter(doc, params, ctx);
    const auto frozen = FreezeMask::none(layout).scalars(layout);
    const std::vector<double> x0 = pack(layout, params);
    const LossWeights& w = cfg.weights;

    std::vector<std::pair<std::string, std::function<double(const SceneState&)>>> terms;
    const bool has_body = doc.human.has_value();
    const bool has_objects = !doc.objects.empty();
    if (has_body) {
        terms.emplace_back("keypoint",
                           [&w](const SceneState& s) { return loss_keypoint_reprojection(s, w); });
        terms.emplace_back("pose_prior", [](const SceneState& s) { return pose_prior(s.body->params); });
        terms.emplace_back("bending", [](const SceneState& s) {
            return bending_prior(s.body->params, s.body->doc->tmpl->bend_joints);
        });
        terms.emplace_back("self_penetration", [](const SceneState& s) {
            return self_penetration(*s.body->doc->tmpl, s.body->params);
        });
        terms.emplace_back("body_ground", [](const SceneState& s) { return loss_body_ground(s); });
    }
    if (has_objects) {
        terms.emplace_back("scene_reprojection",
                           [&w](const SceneState& s) { return loss_scene_reprojection(s, w); });
        terms.emplace_back("scene_collision",
                           [](const SceneState& s) { return loss_scene_collision(s); });
        terms.emplace_back("obj_ground", [](const SceneState& s) { return loss_obj_ground(s); });
    }
    if (has_body && has_objects) {
        terms.emplace_back("contact", [&w](const SceneState& s) { return loss_contact(s, w); });
        terms.emplace_back("body_penetration",
                           [](const SceneState& s) { return loss_body_penetration(s); });
    }
    terms.emplace_back("total", [&w](const SceneState& s) { return loss_total(s, w).total; });

    std::vector<TermGradError> out;
    for (const auto& [name, term] : terms) {
        const LossFn f = [&](std::span<const double> x) {
            const SceneParams p = unpack(layout, x, params);
            return term(materialize(doc, p, ctx));
        };
        const std::vector<double> engine = fd_gradient(f, x0, frozen, layout);
        const std::vector<double> oracle = fd_gradient_step(f, x0, frozen, oracle_h);
        double scale = 1e-10, err = 0;
        for (std::size_t i = 0; i < engine.size(); ++i)
            scale = std::max({scale, std::abs(engine[i]), std::abs(oracle[i])});
        for (std::size_t i = 0; i < engine.size(); ++i)
            err = std::max(err, std::abs(engine[i] - oracle[i]) / scale);
        out.push_back({name, err});
    }
    return out;
}

namespace {

int fail(const std::string& kind, const std::exception& e, bool json, int code) {
    if (json)
        std::cerr << ordered_json{{"error", kind}, {"message", e.what()}}.dump() << "\n";
    else
        std::cerr << "error: " << e.what() << "\n";
    return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"joint 3D human and indoor-scene refinement from 2D evidence"};
    app.require_subcommand(1);
    bool json_errors = false;
    app.add_flag("--json", json_errors, "machine-readable errors on stderr");

    auto* opt = app.add_subcommand("optimize", "refine a scene estimate");
    std::string opt_scene, opt_config, opt_out, opt_export;
    bool stage1_only = false;
    opt->add_option("--scene", opt_scene, "scene JSON")->required();
    opt->add_option("--config", opt_config, "optimization settings JSON");
    opt->add_option("--out", opt_out, "destination for the refined scene JSON")->required();
    opt->add_option("--export-meshes", opt_export, "directory for placed OBJ meshes");
    opt->add_flag("--stage1-only", stage1_only, "skip the joint refinement stage");

    auto* ev = app.add_subcommand("evaluate", "compare a refined scene against ground truth");
    std::string ev_pred, ev_gt, ev_matching;
    ev->add_option("--pred", ev_pred, "refined scene JSON")->required();
    ev->add_option("--gt", ev_gt, "ground-truth scene JSON")->required();
    ev->add_option("--matching", ev_matching, "explicit [pred, gt] index pairs JSON");

    auto* gc = app.add_subcommand("gradcheck", "gradient engine vs fixed-step oracle");
    std::string gc_scene, gc_config;
    gc->add_option("--scene", gc_scene, "scene JSON")->required();
    gc->add_option("--config", gc_config, "optimization settings JSON");

    auto* sy = app.add_subcommand("synth", "generate a synthetic scene pair");
    std::uint64_t seed = 0;
    std::string sy_spec, sy_init, sy_gt;
    sy->add_option("--seed", seed, "random seed");
    sy->add_option("--spec", sy_spec, "generation recipe JSON");
    sy->add_option("--out-init", sy_init, "destination for the perturbed scene")->required();
    sy->add_option("--out-gt", sy_gt, "destination for the ground-truth scene")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*opt) {
            const SceneDocument doc = load_scene(opt_scene);
            const RunConfig cfg = opt_config.empty() ? RunConfig{} : load_config(opt_config);
            const RunResult res =
                stage1_only ? run_stage1(doc, initial_params(doc), cfg) : run_pipeline(doc, cfg);
            const SceneDocument refined = apply_params(doc, res.params);
            save_scene(refined, opt_out);
            std::filesystem::path traj(opt_out);
            traj.replace_extension(".trajectory.jsonl");
            write_trajectory(res.trajectory, traj);
            if (!opt_export.empty()) export_meshes(refined, res.params, opt_export);
            const FrozenContext ctx = build_context(doc, res.params, cfg.sdf_resolution, false);
            std::cout << breakdown_to_json(loss_total(materialize(doc, res.params, ctx), cfg.weights));
        } else if (*ev) {
            const SceneDocument pred = load_scene(ev_pred);
            const SceneDocument gt = load_scene(ev_gt);
            std::optional<std::vector<std::pair<int, int>>> matching;
            if (!ev_matching.empty()) matching = load_matching(ev_matching);
            std::cout << report_to_json(evaluate(pred, gt, matching));
        } else if (*gc) {
            const SceneDocument doc = load_scene(gc_scene);
            const RunConfig cfg = gc_config.empty() ? RunConfig{} : load_config(gc_config);
            ordered_json out = ordered_json::object();
            double worst = 0;
            for (const TermGradError& e : gradient_check(doc, initial_params(doc), cfg)) {
                out[e.term] = e.max_rel_err;
                worst = std::max(worst, e.max_rel_err);
            }
            out["max"] = worst;
            std::cout << out.dump(2) << "\n";
        } else if (*sy) {
            const SynthSpec spec = sy_spec.empty() ? SynthSpec{} : load_synth_spec(sy_spec);
            std::filesystem::path dir = std::filesystem::path(sy_init).parent_path();
            if (dir.empty()) dir = ".";
            const SynthResult r = synth_scene(seed, spec, dir);
            save_scene(r.init, sy_init);
            save_scene(r.gt, sy_gt);
        }
        return 0;
    } catch (const NonFiniteLoss& e) {
        return fail("optimization_error", e, json_errors, 2);
    } catch (const LineSearchFailed& e) {
        return fail("optimization_error", e, json_errors, 2);
    } catch (const Error& e) {
        return fail("input_error", e, json_errors, 1);
    } catch (const std::exception& e) {
        return fail("internal_error", e, json_errors, 1);
    }
}

}  // namespace scenefit
