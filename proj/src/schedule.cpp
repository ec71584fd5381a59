#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "scenefit/optim.hpp"

namespace scenefit {

namespace {

// Bundles everything a stage objective needs. Each evaluation materializes
// the scene at the probed parameters against the shared frozen context.
struct StageEnv {
    const SceneDocument* doc;
    const ParamLayout* layout;
    SceneParams prototype;
    const FrozenContext* ctx;
    const LossWeights* weights;
};

LossFn make_objective(const StageEnv& env, double (*term)(const SceneState&, const LossWeights&)) {
    return [env, term](std::span<const double> x) {
        const SceneParams p = unpack(*env.layout, x, env.prototype);
        const SceneState s = materialize(*env.doc, p, *env.ctx);
        return term(s, *env.weights);
    };
}

// Within-body stage objective.
double body_objective(const SceneState& s, const LossWeights& w) { return loss_body_total(s, w); }

double keypoint_objective(const SceneState& s, const LossWeights& w) {
    return w.w_keypoint * loss_keypoint_reprojection(s, w);
}

// Stage-1 scene objective: reprojection + collision.
double scene_objective(const SceneState& s, const LossWeights& w) {
    return w.lambda1 * loss_scene_reprojection(s, w) + w.lambda2 * loss_scene_collision(s);
}

// Stage-2 split of the full energy into the terms each side can influence;
// the omitted terms are constant on the frozen side, so gradients and line
// searches match the full energy exactly.
double stage2_body_objective(const SceneState& s, const LossWeights& w) {
    double v = loss_body_total(s, w) + w.lambda4 * loss_body_ground(s) +
               w.lambda6 * loss_body_penetration(s);
    if (!s.objects.empty()) v += w.lambda5 * loss_contact(s, w);
    return v;
}

double stage2_scene_objective(const SceneState& s, const LossWeights& w) {
    return w.lambda1 * loss_scene_reprojection(s, w) + w.lambda2 * loss_scene_collision(s) +
           w.lambda3 * loss_obj_ground(s) + w.lambda4 * loss_body_ground(s) +
           w.lambda5 * loss_contact(s, w);
}

// Breakdown of the stage objective only; other terms stay zero so log lines
// reflect what the stage optimized.
LossBreakdown stage_terms(const StageEnv& env, const SceneParams& p, const std::string& stage) {
    const SceneState s = materialize(*env.doc, p, *env.ctx);
    const LossWeights& w = *env.weights;
    LossBreakdown b;
    if (stage == "1a") {
        b.keypoint = loss_keypoint_reprojection(s, w);
        b.total = w.w_keypoint * b.keypoint;
    } else if (stage == "1b") {
        b.keypoint = loss_keypoint_reprojection(s, w);
        b.pose_prior = pose_prior(s.body->params);
        b.bending = bending_prior(s.body->params, s.body->doc->tmpl->bend_joints);
        b.self_penetration = self_penetration(*s.body->doc->tmpl, s.body->params);
        b.body_total = b.keypoint + w.w_pose_prior * b.pose_prior + w.w_bend * b.bending +
                       w.w_selfpen * b.self_penetration;
        b.total = b.body_total;
    } else if (stage == "1c") {
        b.scene_reprojection = loss_scene_reprojection(s, w);
        b.scene_collision = loss_scene_collision(s);
        b.total = w.lambda1 * b.scene_reprojection + w.lambda2 * b.scene_collision;
    } else {
        b = loss_total(s, w);
    }
    return b;
}

FrozenContext light_context(int resolution) {
    FrozenContext ctx;
    ctx.resolution = resolution;
    return ctx;
}

}  // namespace

RunResult run_stage1(const SceneDocument& doc, const SceneParams& init, const RunConfig& cfg) {
    cfg.weights.validate();
    RunResult result;
    result.params = init;
    const ParamLayout layout = make_layout(init);

    // ---- body: L-BFGS on the within-body energy ----
    if (doc.human) {
        const FrozenContext ctx = light_context(cfg.sdf_resolution);
        StageEnv env{&doc, &layout, init, &ctx, &cfg.weights};

        // (a) translation-only warmup against the keypoint term
        {
            FreezeMask mask = FreezeMask::all(layout);
            mask.set(layout, "body.translation", false);
            const auto frozen = mask.scalars(layout);
            const LossFn f = make_objective(env, keypoint_objective);
            LbfgsConfig opt;
            opt.lr = cfg.schedule.stage1_body_lr;
            LbfgsState state;
            std::vector<double> x = pack(layout, result.params);
            for (int it = 0; it < cfg.schedule.stage1_translation_iters; ++it) {
                StepResult step;
                try {
                    step = lbfgs_step(state, x, f, frozen, layout, opt);
                } catch (const LineSearchFailed&) {  // no descent left: converged
                    result.trajectory.push_back({"1a", it, stage_terms(env, result.params, "1a"), 0.0});
                    break;
                }
                result.params = unpack(layout, x, init);
                result.trajectory.push_back(
                    {"1a", it, stage_terms(env, result.params, "1a"), step.step_size});
                if (step.step_size == 0.0) break;  // stationary
            }
        }

        // (b) all body parameters
        {
            FreezeMask mask = FreezeMask::all(layout);
            mask.set(layout, "body.", false);
            const auto frozen = mask.scalars(layout);
            const LossFn f = make_objective(env, body_objective);
            LbfgsConfig opt;
            opt.lr = cfg.schedule.stage1_body_lr;
            LbfgsState state;
            std::vector<double> x = pack(layout, result.params);
            for (int it = 0; it < cfg.schedule.stage1_body_iters; ++it) {
                StepResult step;
                try {
                    step = lbfgs_step(state, x, f, frozen, layout, opt);
                } catch (const LineSearchFailed&) {
                    result.trajectory.push_back({"1b", it, stage_terms(env, result.params, "1b"), 0.0});
                    break;
                }
                result.params = unpack(layout, x, init);
                result.trajectory.push_back(
                    {"1b", it, stage_terms(env, result.params, "1b"), step.step_size});
                if (step.step_size == 0.0) break;
            }
        }
    }

    // ---- scene: Adam on boxes + layout + camera ----
    if (!doc.objects.empty() && cfg.schedule.stage1_scene_iters > 0) {
        FreezeMask mask = FreezeMask::all(layout);
        mask.set(layout, "camera.", false);
        mask.set(layout, "object[", false);
        mask.set(layout, "layout.", false);
        const auto frozen = mask.scalars(layout);
        AdamConfig opt;
        opt.lr = cfg.schedule.stage1_scene_lr;
        opt.weight_decay = cfg.schedule.weight_decay;
        AdamState state;
        std::vector<double> x = pack(layout, result.params);
        double best_loss = std::numeric_limits<double>::infinity();
        std::vector<double> best_x = x;
        for (int it = 0; it < cfg.schedule.stage1_scene_iters; ++it) {
            // grids follow the current boxes, frozen within the iteration
            const FrozenContext ctx =
                build_context(doc, unpack(layout, x, init), cfg.sdf_resolution, false);
            StageEnv env{&doc, &layout, init, &ctx, &cfg.weights};
            const LossFn f = make_objective(env, scene_objective);
            const double loss_here = f(x);
            if (loss_here < best_loss) {
                best_loss = loss_here;
                best_x = x;
            }
            const std::vector<double> g = fd_gradient(f, x, frozen, layout);
            adam_step(state, x, g, opt, frozen);
            result.trajectory.push_back(
                {"1c", it, stage_terms(env, unpack(layout, x, init), "1c"), opt.lr});
        }
        // keep the best-loss iterate, including the post-step candidate
        {
            const FrozenContext ctx =
                build_context(doc, unpack(layout, x, init), cfg.sdf_resolution, false);
            StageEnv env{&doc, &layout, init, &ctx, &cfg.weights};
            if (make_objective(env, scene_objective)(x) >= best_loss) x = best_x;
        }
        result.params = unpack(layout, x, init);
    }
    return result;
}

RunResult run_stage2(const SceneDocument& doc, const SceneParams& init, const RunConfig& cfg) {
    cfg.weights.validate();
    RunResult result;
    result.params = init;
    if (doc.objects.empty() && !doc.human) return result;
    const ParamLayout layout = make_layout(init);

    FreezeMask body_mask = FreezeMask::all(layout);
    if (doc.human) body_mask.set(layout, "body.", false);
    FreezeMask scene_mask = FreezeMask::all(layout);
    if (!doc.objects.empty()) {
        scene_mask.set(layout, "object[", false);
        scene_mask.set(layout, ".yaw", true);  // orientations stay frozen
    }
    scene_mask.set(layout, "layout.centroid", false);
    scene_mask.set(layout, "layout.size", false);
    const auto body_frozen = body_mask.scalars(layout);
    const auto scene_frozen = scene_mask.scalars(layout);

    LbfgsConfig body_opt;
    body_opt.lr = cfg.schedule.stage2_body_lr;
    AdamConfig scene_opt;
    scene_opt.lr = cfg.schedule.stage2_scene_lr;
    scene_opt.weight_decay = cfg.schedule.weight_decay;
    AdamState scene_state;

    std::vector<double> x = pack(layout, result.params);
    std::unique_ptr<FrozenContext> ctx;
    const int rebuild = std::max(1, cfg.schedule.sdf_rebuild_every);
    for (int alt = 0; alt < cfg.schedule.stage2_alternations; ++alt) {
        if (alt % rebuild == 0)
            ctx = std::make_unique<FrozenContext>(
                build_context(doc, unpack(layout, x, init), cfg.sdf_resolution, true));
        StageEnv env{&doc, &layout, init, ctx.get(), &cfg.weights};

        if (doc.human) {
            const LossFn f = make_objective(env, stage2_body_objective);
            LbfgsState body_state;  // fresh: the frozen context changes between alternations
            for (int k = 0; k < cfg.schedule.stage2_body_inner_iters; ++k) {
                StepResult step;
                try {
                    step = lbfgs_step(body_state, x, f, body_frozen, layout, body_opt);
                } catch (const LineSearchFailed&) {
                    result.trajectory.push_back({"2-body", alt * cfg.schedule.stage2_body_inner_iters + k,
                                                 stage_terms(env, unpack(layout, x, init), "2"), 0.0});
                    break;
                }
                result.trajectory.push_back({"2-body", alt * cfg.schedule.stage2_body_inner_iters + k,
                                             stage_terms(env, unpack(layout, x, init), "2"),
                                             step.step_size});
                if (step.step_size == 0.0) break;
            }
        }
        if (!doc.objects.empty()) {
            const LossFn f = make_objective(env, stage2_scene_objective);
            const std::vector<double> g = fd_gradient(f, x, scene_frozen, layout);
            adam_step(scene_state, x, g, scene_opt, scene_frozen);
            result.trajectory.push_back(
                {"2-scene", alt, stage_terms(env, unpack(layout, x, init), "2"), scene_opt.lr});
        }
    }
    result.params = unpack(layout, x, init);
    return result;
}

RunResult run_pipeline(const SceneDocument& doc, const RunConfig& cfg) {
    RunResult stage1 = run_stage1(doc, initial_params(doc), cfg);
    RunResult stage2 = run_stage2(doc, stage1.params, cfg);
    RunResult out;
    out.params = std::move(stage2.params);
    out.trajectory = std::move(stage1.trajectory);
    out.trajectory.insert(out.trajectory.end(), stage2.trajectory.begin(), stage2.trajectory.end());
    return out;
}

}  // namespace scenefit
