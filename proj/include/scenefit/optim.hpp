#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "scenefit/losses.hpp"
#include "scenefit/scene.hpp"

namespace scenefit {

// --- parameter vector ------------------------------------------------------

struct ParamSlice {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
};

// Fixed packing order: camera pitch, camera roll; per object centroid, size,
// yaw; layout centroid, size, yaw; body translation, global rotation, pose,
// shape scale.
struct ParamLayout {
    std::vector<ParamSlice> slices;
    std::size_t total = 0;

    const ParamSlice& slice(const std::string& name) const;  // throws InvalidArgument
    // Name of the scalar at a flat index, e.g. "object[2].centroid[1]".
    std::string scalar_name(std::size_t index) const;
};

ParamLayout make_layout(const SceneParams& prototype);

std::vector<double> pack(const ParamLayout& layout, const SceneParams& params);

// Rebuilds structured parameters from a flat vector. Sizes are clamped to
// >= 1e-6, shape scale to [0.5, 2], and yaws wrapped to [-pi, pi), so every
// flat vector maps to a valid parameter set.
SceneParams unpack(const ParamLayout& layout, std::span<const double> x, const SceneParams& prototype);

// Per-slice freeze flags, expandable to per-scalar flags.
struct FreezeMask {
    std::vector<std::uint8_t> frozen;  // one per layout slice

    static FreezeMask none(const ParamLayout& layout);
    static FreezeMask all(const ParamLayout& layout);
    // Freeze/unfreeze every slice whose name contains the substring; throws
    // InvalidArgument when nothing matches.
    void set(const ParamLayout& layout, const std::string& substring, bool freeze);

    std::vector<std::uint8_t> scalars(const ParamLayout& layout) const;
};

// --- finite-difference gradient engine --------------------------------------

using LossFn = std::function<double(std::span<const double>)>;

// Central differences with per-coordinate step h_i = max(1e-6, 1e-6 |x_i|).
// Frozen entries get exactly zero. Probes run in parallel; each evaluation
// sees its own copy of x. Throws NonFiniteLoss naming the offending scalar
// when a probe produces a non-finite value.
std::vector<double> fd_gradient(const LossFn& f, std::span<const double> x,
                                std::span<const std::uint8_t> frozen_scalars,
                                const ParamLayout& layout);

// Serial reference producing identical values.
std::vector<double> fd_gradient_serial(const LossFn& f, std::span<const double> x,
                                       std::span<const std::uint8_t> frozen_scalars,
                                       const ParamLayout& layout);

// Fixed-step central differences (the oracle used by gradient checks).
std::vector<double> fd_gradient_step(const LossFn& f, std::span<const double> x,
                                     std::span<const std::uint8_t> frozen_scalars, double h);

// --- Adam --------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled: x *= (1 - lr * wd) before the step
};

struct AdamState {
    std::vector<double> m, v;
    long t = 0;
};

// One Adam update in place. Frozen entries are left untouched (no decay, no
// moment update).
void adam_step(AdamState& state, std::span<double> x, std::span<const double> g,
               const AdamConfig& cfg, std::span<const std::uint8_t> frozen_scalars);

// --- L-BFGS -------------------------------------------------------------------

struct LbfgsConfig {
    double lr = 1e-3;       // seeds the first trial step and the fallback search
    int history = 10;       // curvature pairs kept
    double c1 = 1e-4;       // Armijo constant
    double c2 = 0.9;        // curvature constant
    int max_trials = 20;    // line-search evaluations per step
};

struct LbfgsState {
    std::deque<std::pair<std::vector<double>, std::vector<double>>> pairs;  // (s, y)
    std::vector<double> prev_x, prev_grad;
    bool first_step = true;
};

struct StepResult {
    double loss_before = 0;
    double loss_after = 0;
    double step_size = 0;
    double grad_inf_norm = 0;
};

// One quasi-Newton step: two-loop recursion direction, strong-Wolfe line
// search, curvature-pair update. Falls back to backtracking steepest descent
// when the Wolfe search exhausts its trials, and throws LineSearchFailed when
// that fails too. A (near-)zero gradient returns with step_size 0.
StepResult lbfgs_step(LbfgsState& state, std::vector<double>& x, const LossFn& f,
                      std::span<const std::uint8_t> frozen_scalars, const ParamLayout& layout,
                      const LbfgsConfig& cfg);

// --- schedule ------------------------------------------------------------------

struct ScheduleConfig {
    int stage1_translation_iters = 20;  // body translation only, keypoint loss
    int stage1_body_iters = 80;         // all body parameters, within-body loss
    int stage1_scene_iters = 150;       // Adam on boxes + layout + camera
    int stage2_alternations = 20;
    int stage2_body_inner_iters = 1;
    double stage1_body_lr = 1e-3;
    double stage1_scene_lr = 1e-4;
    double stage2_body_lr = 1e-4;
    double stage2_scene_lr = 5e-5;
    double weight_decay = 1e-4;  // Adam scene updates only
    int sdf_rebuild_every = 1;   // stage-2 context refresh period, in alternations
};

struct RunConfig {
    LossWeights weights;
    ScheduleConfig schedule;
    int sdf_resolution = 32;
};

struct TrajectoryEntry {
    std::string stage;  // "1a", "1b", "1c", "2-body", "2-scene"
    int iteration = 0;
    LossBreakdown terms;
    double step_size = 0;
};

struct RunResult {
    SceneParams params;
    std::vector<TrajectoryEntry> trajectory;
};

// Stage I: independent body fit (translation-only L-BFGS warmup, then all
// body parameters) and scene fit (Adam on boxes, layout and camera against
// reprojection + collision). Returns the best-loss iterate for the Adam leg.
RunResult run_stage1(const SceneDocument& doc, const SceneParams& init, const RunConfig& cfg);

// Stage II: alternating body/scene refinement of the full energy with camera
// pitch/roll and every yaw frozen; scene updates move only centroids and
// sizes. SDF grids and contact picks refresh every sdf_rebuild_every
// alternations.
RunResult run_stage2(const SceneDocument& doc, const SceneParams& init, const RunConfig& cfg);

// Stage I followed by Stage II; trajectories concatenated.
RunResult run_pipeline(const SceneDocument& doc, const RunConfig& cfg);

}  // namespace scenefit
