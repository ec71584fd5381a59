// Acceptance gate: one self-contained check per release criterion. Each
// criterion prints a single PASS/FAIL line (plus optional [diagnostic]
// lines) and the process exits nonzero if any requested criterion fails.
//
// Usage: scenefit_acceptance [--criterion N]   (no flag runs all eight)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "scenefit/cli.hpp"
#include "scenefit/io.hpp"
#include "scenefit/losses.hpp"
#include "scenefit/mesh.hpp"
#include "scenefit/metrics.hpp"
#include "scenefit/optim.hpp"
#include "scenefit/rng.hpp"
#include "scenefit/scene.hpp"
#include "scenefit/sdf.hpp"
#include "scenefit/synth.hpp"
#include "support/fixtures.hpp"

namespace {

using namespace scenefit;
using scenefit::testing::icosphere;
using scenefit::testing::make_floating_box_doc;
using scenefit::testing::make_penetration_doc;
using scenefit::testing::make_temp_dir;
using scenefit::testing::make_test_scene;
using scenefit::testing::randomize_params;
using scenefit::testing::torus_mesh;

struct Outcome {
    bool pass = false;
    std::string detail;
    double gated_seconds = -1;  // if >= 0, the budget applies to this portion only
};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Analytic-vs-oracle gradients on randomized scenes.

Outcome criterion1() {
    const SceneDocument doc = make_test_scene(3, true);
    RunConfig cfg;
    cfg.sdf_resolution = 16;
    Rng rng(1);
    double worst = 0;
    std::string worst_term = "none";
    for (int trial = 0; trial < 50; ++trial) {
        const SceneParams p = randomize_params(doc, rng);
        for (const TermGradError& e : gradient_check(doc, p, cfg)) {
            if (e.max_rel_err > worst) {
                worst = e.max_rel_err;
                worst_term = e.term;
            }
        }
    }
    return {worst < 1e-4,
            "max relative gradient error " + fmt(worst) + " (term: " + worst_term +
                ") over 50 randomized states, threshold 1e-4"};
}

// ---------------------------------------------------------------------------
// 2. SDF grids match per-cell brute-force signed distances.

double brute_signed(const Vec3& p, const TriMesh& mesh) {
    const double d = unsigned_distance_brute(p, mesh);
    return winding_number(p, mesh) > 0.5 ? -d : d;
}

Outcome criterion2() {
    const TriMesh sphere = icosphere(1, 0.8);
    const TriMesh cube = make_box_mesh(Vec3(-0.7, -0.5, -0.6), Vec3(0.5, 0.7, 0.4));
    const TriMesh torus = torus_mesh(0.6, 0.25, 24, 12);
    const BBox3D domain(Vec3(0, 0, 0), Vec3(2.2, 2.2, 2.2), 0.0);

    double worst = 0;
    for (const TriMesh* mesh : {&sphere, &cube, &torus}) {
        const SdfGrid grid = build_sdf({mesh, 1}, domain, 8);
        for (int k = 0; k < grid.dims[2]; ++k)
            for (int j = 0; j < grid.dims[1]; ++j)
                for (int i = 0; i < grid.dims[0]; ++i) {
                    const double got = grid.values[grid.index(i, j, k)];
                    const double want = brute_signed(grid.cell_center(i, j, k), *mesh);
                    worst = std::max(worst, std::abs(got - want));
                }
    }

    const TriMesh unit = icosphere(3, 1.0);
    const double center = brute_signed(Vec3(0, 0, 0), unit);
    const bool center_ok = std::abs(center - (-1.0)) < 0.01;

    return {worst <= 1e-9 && center_ok,
            "max |grid - brute| " + fmt(worst) + " over sphere/cube/torus at resolution 8; "
            "unit-sphere center distance " + fmt(center) + " (want -1 within 0.01)"};
}

// ---------------------------------------------------------------------------
// 3. 3D IoU vs Monte-Carlo and vs the axis-aligned closed form.

bool inside_box(const BBox3D& box, const Vec3& p) {
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const Vec3 d = p - box.centroid;
    const double xl = c * d.x() - s * d.z();
    const double zl = s * d.x() + c * d.z();
    return std::abs(xl) <= 0.5 * box.size.x() && std::abs(d.y()) <= 0.5 * box.size.y() &&
           std::abs(zl) <= 0.5 * box.size.z();
}

double mc_iou(const BBox3D& a, const BBox3D& b, Rng& rng, int samples) {
    Vec3 alo, ahi, blo, bhi;
    a.aabb(alo, ahi);
    b.aabb(blo, bhi);
    const Vec3 lo = alo.cwiseMin(blo), hi = ahi.cwiseMax(bhi);
    long long in_a = 0, in_b = 0, in_both = 0;
    for (int n = 0; n < samples; ++n) {
        const Vec3 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()),
                     rng.uniform(lo.z(), hi.z()));
        const bool ia = inside_box(a, p), ib = inside_box(b, p);
        in_a += ia;
        in_b += ib;
        in_both += ia && ib;
    }
    const double vol = (hi - lo).prod();
    const double inter = vol * static_cast<double>(in_both) / samples;
    const double uni = vol * static_cast<double>(in_a + in_b - in_both) / samples;
    return uni > 0 ? inter / uni : 0.0;
}

BBox3D random_box(Rng& rng, bool yawed) {
    const Vec3 centroid = 0.5 * rng.gaussian3();
    const Vec3 size(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0));
    const double yaw = yawed ? rng.uniform(-M_PI, M_PI) : 0.0;
    return BBox3D(centroid, size, yaw);
}

Outcome criterion3() {
    Rng rng(3);
    double worst_mc = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const BBox3D a = random_box(rng, true);
        BBox3D b = random_box(rng, true);
        b.centroid = a.centroid + 0.6 * rng.gaussian3();
        worst_mc = std::max(worst_mc, std::abs(iou_box3d(a, b) - mc_iou(a, b, rng, 1000000)));
    }

    double worst_exact = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const BBox3D a = random_box(rng, false);
        BBox3D b = random_box(rng, false);
        b.centroid = a.centroid + 0.6 * rng.gaussian3();
        double inter = 1.0;
        for (int axis = 0; axis < 3; ++axis) {
            const double lo = std::max(a.centroid[axis] - 0.5 * a.size[axis],
                                       b.centroid[axis] - 0.5 * b.size[axis]);
            const double hi = std::min(a.centroid[axis] + 0.5 * a.size[axis],
                                       b.centroid[axis] + 0.5 * b.size[axis]);
            inter *= std::max(0.0, hi - lo);
        }
        const double uni = a.size.prod() + b.size.prod() - inter;
        worst_exact = std::max(worst_exact, std::abs(iou_box3d(a, b) - inter / uni));
    }

    return {worst_mc < 0.01 && worst_exact <= 1e-9,
            "max |IoU - MC(1e6)| " + fmt(worst_mc) + " on 100 yawed pairs (threshold 0.01); "
            "max closed-form error " + fmt(worst_exact) + " on 100 axis-aligned pairs (1e-9)"};
}

// ---------------------------------------------------------------------------
// 4. Optimizer sanity: L-BFGS on Rosenbrock, Adam on a quadratic.

Outcome criterion4() {
    ParamLayout layout;
    layout.slices = {{"x", 0, 2}};
    layout.total = 2;

    const LossFn rosen = [](std::span<const double> x) {
        const double a = x[0], b = x[1];
        return (1 - a) * (1 - a) + 100.0 * (b - a * a) * (b - a * a);
    };
    std::vector<double> x = {-1.2, 1.0};
    LbfgsState lstate;
    const LbfgsConfig lcfg;
    int iters = 0;
    while (iters < 200) {
        StepResult r;
        try {
            r = lbfgs_step(lstate, x, rosen, {}, layout, lcfg);
        } catch (const LineSearchFailed&) {
            break;
        }
        ++iters;
        if (std::hypot(x[0] - 1.0, x[1] - 1.0) < 1e-6) break;
        if (r.step_size == 0.0) break;
    }
    const double rosen_dist = std::hypot(x[0] - 1.0, x[1] - 1.0);
    const bool rosen_ok = rosen_dist < 1e-6 && iters <= 200;

    std::vector<double> y = {5.0, -3.0};
    AdamState astate;
    AdamConfig acfg;
    acfg.lr = 0.1;
    int steps = 0;
    double norm2 = y[0] * y[0] + y[1] * y[1];
    while (steps < 500 && norm2 >= 1e-4) {
        const std::vector<double> g = {2.0 * y[0], 2.0 * y[1]};
        adam_step(astate, y, g, acfg, {});
        ++steps;
        norm2 = y[0] * y[0] + y[1] * y[1];
    }
    const bool adam_ok = norm2 < 1e-4;

    return {rosen_ok && adam_ok,
            "L-BFGS Rosenbrock distance " + fmt(rosen_dist) + " after " + std::to_string(iters) +
                " iters (want <1e-6 in <=200); Adam |x|^2 " + fmt(norm2) + " after " +
                std::to_string(steps) + " steps (want <1e-4 in <=500)"};
}

// ---------------------------------------------------------------------------
// 5. Stage-1 recovery on a synthetic scene.

double scene_objective(const SceneDocument& doc, const SceneParams& p, const RunConfig& cfg) {
    const FrozenContext ctx = build_context(doc, p, cfg.sdf_resolution, false);
    const SceneState st = materialize(doc, p, ctx);
    return cfg.weights.lambda1 * loss_scene_reprojection(st, cfg.weights) +
           cfg.weights.lambda2 * loss_scene_collision(st);
}

double mean_centroid_error(const SceneParams& p, const SceneDocument& gt) {
    double sum = 0;
    for (std::size_t i = 0; i < p.boxes.size(); ++i)
        sum += (p.boxes[i].centroid - gt.objects[i].box.centroid).norm();
    return sum / static_cast<double>(p.boxes.size());
}

Outcome criterion5() {
    const std::filesystem::path dir = make_temp_dir("accept5");
    const SynthResult sr = synth_scene(0, SynthSpec{}, dir);
    const RunConfig cfg;
    const SceneParams init = initial_params(sr.init);

    const auto t0 = std::chrono::steady_clock::now();
    const RunResult res = run_stage1(sr.init, init, cfg);
    const double gated = elapsed_s(t0);

    const double body_err = (res.params.body->translation - sr.gt.human->params.translation).norm();
    const double centroid_err = mean_centroid_error(res.params, sr.gt);
    const double obj0 = scene_objective(sr.init, init, cfg);
    const double obj1 = scene_objective(sr.init, res.params, cfg);
    const double reduction = obj0 > 0 ? 1.0 - obj1 / obj0 : 0.0;

    const bool body_ok = body_err < 0.01;
    const bool scene_ok = centroid_err < 0.02 && reduction >= 0.90;

    if (!scene_ok) {
        RunConfig diag = cfg;
        diag.schedule.stage1_translation_iters = 0;
        diag.schedule.stage1_body_iters = 0;
        diag.schedule.stage1_scene_lr = 5e-3;
        const RunResult dres = run_stage1(sr.init, init, diag);
        const double dcent = mean_centroid_error(dres.params, sr.gt);
        const double dobj = scene_objective(sr.init, dres.params, cfg);
        const double dred = obj0 > 0 ? 1.0 - dobj / obj0 : 0.0;
        std::cout << "criterion 5 [diagnostic]: scene leg rerun at lr 5e-3 reaches mean centroid "
                     "error "
                  << fmt(dcent) << " m and objective reduction " << fmt(100 * dred)
                  << "%, vs " << fmt(centroid_err) << " m / " << fmt(100 * reduction)
                  << "% at the default lr 1e-4 (150 iters x 1e-4 caps per-coordinate movement at "
                     "0.015 m against 0.2 m perturbations)\n";
        if (dred >= 0.90 && dcent >= 0.02)
            std::cout << "criterion 5 [diagnostic]: the rerun minimizes the objective fully while "
                         "centroids stay off; a detection rectangle constrains 4 DOF per object, "
                         "so depth trades against size and centroid recovery stays "
                         "underdetermined until grounding and contact terms join in stage 2\n";
    }

    return {body_ok && scene_ok,
            "body translation error " + fmt(body_err) + " m (want <0.01); mean centroid error " +
                fmt(centroid_err) + " m (want <0.02); scene objective reduction " +
                fmt(100 * reduction) + "% (want >=90%)",
            gated};
}

// ---------------------------------------------------------------------------
// 6. Stage-2 physical plausibility: grounding and penetration.

double ground_term(const SceneDocument& doc, const SceneParams& p, int resolution) {
    const FrozenContext ctx = build_context(doc, p, resolution, false);
    return loss_obj_ground(materialize(doc, p, ctx));
}

double penetration_term(const SceneDocument& doc, const SceneParams& p, int resolution) {
    const FrozenContext ctx = build_context(doc, p, resolution, false);
    return loss_body_penetration(materialize(doc, p, ctx));
}

Outcome criterion6() {
    const RunConfig cfg;
    double gated = 0;

    const SceneDocument fdoc = make_floating_box_doc(0.3);
    const SceneParams finit = initial_params(fdoc);
    const double ground0 = ground_term(fdoc, finit, cfg.sdf_resolution);
    auto t0 = std::chrono::steady_clock::now();
    const RunResult fres = run_stage2(fdoc, finit, cfg);
    gated += elapsed_s(t0);
    const double ground1 = ground_term(fdoc, fres.params, cfg.sdf_resolution);
    const bool float_ok = ground1 < 0.05 * ground0;

    if (!float_ok) {
        RunConfig diag = cfg;
        diag.schedule.stage2_scene_lr = 0.05;
        const RunResult dres = run_stage2(fdoc, finit, diag);
        const double dg = ground_term(fdoc, dres.params, cfg.sdf_resolution);
        std::cout << "criterion 6 [diagnostic]: floating box rerun at scene lr 0.05 lowers the "
                     "ground term to "
                  << fmt(dg) << " (" << fmt(100 * dg / ground0) << "% of initial), vs "
                  << fmt(100 * ground1 / ground0)
                  << "% at the default lr 5e-5 (20 alternations x 1 step x 5e-5 caps movement at "
                     "1e-3 m against a 0.3 m gap)\n";
    }

    const SceneDocument pdoc = make_penetration_doc();
    const SceneParams pinit = initial_params(pdoc);
    const double pen0 = penetration_term(pdoc, pinit, cfg.sdf_resolution);
    t0 = std::chrono::steady_clock::now();
    const RunResult pres = run_stage2(pdoc, pinit, cfg);
    const double pen_full = penetration_term(pdoc, pres.params, cfg.sdf_resolution);

    RunConfig ablation = cfg;
    ablation.weights.lambda6 = 0;
    const RunResult ares = run_stage2(pdoc, pinit, ablation);
    gated += elapsed_s(t0);
    const double pen_ab = penetration_term(pdoc, ares.params, cfg.sdf_resolution);
    const bool pen_ok = pen_full < pen0 && pen_ab >= 10.0 * pen_full;

    if (!pen_ok) {
        std::cout << "criterion 6 [diagnostic]: penetration ratio "
                  << fmt(pen_full > 0 ? pen_ab / pen_full : 0.0)
                  << "x at the default 20 alternations; alternation sweep:";
        for (const int alts : {60, 200}) {
            RunConfig diag = cfg;
            diag.schedule.stage2_alternations = alts;
            const double pf = penetration_term(pdoc, run_stage2(pdoc, pinit, diag).params,
                                               cfg.sdf_resolution);
            RunConfig diag_ab = diag;
            diag_ab.weights.lambda6 = 0;
            const double pa = penetration_term(pdoc, run_stage2(pdoc, pinit, diag_ab).params,
                                               cfg.sdf_resolution);
            std::cout << " " << alts << " -> full " << fmt(pf) << ", weight off " << fmt(pa)
                      << " (ratio " << fmt(pf > 0 ? pa / pf : 0.0) << "x);";
        }
        std::cout << "\n";
    }

    return {float_ok && pen_ok,
            "floating-box ground term " + fmt(ground1) + " vs initial " + fmt(ground0) +
                " (want <5%); penetration " + fmt(pen0) + " -> " + fmt(pen_full) +
                " with the full model, " + fmt(pen_ab) +
                " with the penetration weight off (want >=10x the full-model value)",
            gated};
}

// ---------------------------------------------------------------------------
// 7. Aligned vertex error never beats raw, and recovers exact similarities.

Outcome criterion7() {
    Rng rng(7);
    const TriMesh base = icosphere(2, 1.0);

    double worst_gap = -1e300;
    for (int trial = 0; trial < 100; ++trial) {
        TriMesh gt = base;
        for (Vec3& v : gt.vertices) v += 0.02 * rng.gaussian3();
        TriMesh pred = gt;
        for (Vec3& v : pred.vertices) v += 0.05 * rng.gaussian3();
        const double angle = rng.uniform(0, 2 * M_PI);
        const Mat3 rot = Eigen::AngleAxisd(angle, rng.gaussian3().normalized()).toRotationMatrix();
        const double scale = rng.uniform(0.5, 2.0);
        const Vec3 shift = rng.gaussian3();
        for (Vec3& v : pred.vertices) v = scale * (rot * v) + shift;
        worst_gap = std::max(worst_gap, procrustes_v2v(pred, gt) - v2v(pred, gt));
    }
    const bool never_worse = worst_gap <= 1e-9;

    double worst_recovery = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const double angle = rng.uniform(0, 2 * M_PI);
        const Mat3 rot = Eigen::AngleAxisd(angle, rng.gaussian3().normalized()).toRotationMatrix();
        const double scale = rng.uniform(0.5, 2.0);
        const Vec3 shift = rng.gaussian3();
        TriMesh pred = base;
        for (Vec3& v : pred.vertices) v = scale * (rot * v) + shift;
        const Similarity sim = umeyama_alignment(pred.vertices, base.vertices);
        worst_recovery = std::max({worst_recovery, std::abs(sim.scale * scale - 1.0),
                                   (sim.rotation * rot - Mat3::Identity()).cwiseAbs().maxCoeff(),
                                   procrustes_v2v(pred, base)});
    }
    const bool recovers = worst_recovery <= 1e-9;

    return {never_worse && recovers,
            "max (aligned - raw) vertex error " + fmt(worst_gap) +
                " over 100 perturbed pairs (want <=1e-9); worst exact-similarity recovery "
                "residual " + fmt(worst_recovery) + " (want <=1e-9)"};
}

// ---------------------------------------------------------------------------
// 8. End-to-end determinism of the command-line pipeline.

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_quiet(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

Outcome criterion8() {
    const char* cli = std::getenv("SCENEFIT_CLI");
    if (!cli) return {false, "SCENEFIT_CLI is not set; cannot locate the command-line binary"};

    const std::filesystem::path dir = make_temp_dir("accept8");
    const std::string bin = std::string("\"") + cli + "\"";
    const std::string init = (dir / "init.json").string();

    if (run_quiet(bin + " synth --seed 7 --out-init \"" + init + "\" --out-gt \"" +
                  (dir / "gt.json").string() + "\"") != 0)
        return {false, "synth subcommand failed"};

    const std::filesystem::path config = dir / "config.json";
    std::ofstream(config) << "{\"schedule\":{\"stage1_translation_iters\":2,"
                             "\"stage1_body_iters\":3,\"stage1_scene_iters\":3,"
                             "\"stage2_alternations\":2},\"sdf_resolution\":8}\n";

    for (const char* name : {"a", "b"}) {
        const std::string out = (dir / (std::string("refined_") + name + ".json")).string();
        if (run_quiet(bin + " optimize --scene \"" + init + "\" --config \"" + config.string() +
                      "\" --out \"" + out + "\"") != 0)
            return {false, std::string("optimize run ") + name + " failed"};
    }

    const std::string doc_a = slurp(dir / "refined_a.json");
    const std::string doc_b = slurp(dir / "refined_b.json");
    const std::string traj_a = slurp(dir / "refined_a.trajectory.jsonl");
    const std::string traj_b = slurp(dir / "refined_b.trajectory.jsonl");
    const bool docs_equal = !doc_a.empty() && doc_a == doc_b;
    const bool trajs_equal = !traj_a.empty() && traj_a == traj_b;

    return {docs_equal && trajs_equal,
            std::string("two optimize runs on the same input: refined documents ") +
                (docs_equal ? "byte-identical" : "DIFFER") + " (" +
                std::to_string(doc_a.size()) + " bytes), trajectories " +
                (trajs_equal ? "byte-identical" : "DIFFER") + " (" +
                std::to_string(traj_a.size()) + " bytes)"};
}

// ---------------------------------------------------------------------------

struct Entry {
    int id;
    double budget_s;  // 0 means no wall-clock bound
    Outcome (*fn)();
};

const Entry kEntries[] = {
    {1, 120, criterion1}, {2, 30, criterion2},  {3, 60, criterion3}, {4, 0, criterion4},
    {5, 300, criterion5}, {6, 300, criterion6}, {7, 0, criterion7},  {8, 0, criterion8},
};

bool run_one(const Entry& e) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = e.fn();
    } catch (const std::exception& ex) {
        out = {false, std::string("unexpected exception: ") + ex.what()};
    }
    const double total = elapsed_s(t0);
    const double gated = out.gated_seconds >= 0 ? out.gated_seconds : total;
    const bool in_budget = e.budget_s == 0 || gated < e.budget_s;

    std::cout << "criterion " << e.id << ": " << (out.pass && in_budget ? "PASS" : "FAIL") << " ("
              << std::fixed << std::setprecision(1) << total << " s";
    if (e.budget_s > 0) {
        std::cout << ", gated " << gated << " s " << (in_budget ? "<" : ">=") << " budget "
                  << std::setprecision(0) << e.budget_s << " s";
    }
    std::cout.unsetf(std::ios::fixed);
    std::cout << std::setprecision(6) << ") -- " << out.detail << "\n";
    return out.pass && in_budget;
}

}  // namespace

int main(int argc, char** argv) {
    int which = 0;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--criterion") which = std::atoi(argv[i + 1]);

    bool all_pass = true;
    bool matched = false;
    for (const Entry& e : kEntries) {
        if (which != 0 && e.id != which) continue;
        matched = true;
        all_pass = run_one(e) && all_pass;
    }
    if (!matched) {
        std::cerr << "unknown criterion " << which << " (valid: 1..8)\n";
        return 1;
    }
    return all_pass ? 0 : 1;
}
