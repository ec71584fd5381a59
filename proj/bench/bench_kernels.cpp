// Compares the parallel kernels against their serial reference
// implementations: SDF construction, finite-difference gradients and
// pairwise summation. Results double as a correctness spot check, since
// both sides must agree to tight tolerances.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "scenefit/losses.hpp"
#include "scenefit/mesh.hpp"
#include "scenefit/optim.hpp"
#include "scenefit/parallel.hpp"
#include "scenefit/rng.hpp"
#include "scenefit/scene.hpp"
#include "scenefit/sdf.hpp"
#include "support/fixtures.hpp"

namespace {

using namespace scenefit;

double time_s(const std::function<void()>& f, int repeats) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < repeats; ++r) f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / repeats;
}

void report(const std::string& name, double serial_s, double parallel_s, double max_diff) {
    std::printf("%-28s serial %8.4f s   parallel %8.4f s   speedup %5.2fx   max diff %.3g\n",
                name.c_str(), serial_s, parallel_s, serial_s / parallel_s, max_diff);
}

void bench_sdf() {
    const TriMesh mesh = scenefit::testing::icosphere(3, 0.9);
    const BBox3D domain(Vec3(0, 0, 0), Vec3(2.5, 2.5, 2.5), 0.0);
    const int resolution = 48;

    SdfGrid serial_grid, parallel_grid;
    const double serial_s =
        time_s([&] { serial_grid = build_sdf_serial({&mesh, 1}, domain, resolution); }, 3);
    const double parallel_s =
        time_s([&] { parallel_grid = build_sdf({&mesh, 1}, domain, resolution); }, 3);

    double max_diff = 0;
    for (std::size_t i = 0; i < serial_grid.values.size(); ++i)
        max_diff = std::max(max_diff, std::abs(serial_grid.values[i] - parallel_grid.values[i]));
    report("build_sdf (48^3, 1280 tris)", serial_s, parallel_s, max_diff);
}

void bench_gradient() {
    const SceneDocument doc = scenefit::testing::make_test_scene(3, true);
    const SceneParams params = initial_params(doc);
    const ParamLayout layout = make_layout(params);
    const FrozenContext ctx = build_context(doc, params, 16, true);
    const LossWeights weights;
    const LossFn f = [&](std::span<const double> x) {
        const SceneParams p = unpack(layout, x, params);
        return loss_total(materialize(doc, p, ctx), weights).total;
    };
    const std::vector<double> x = pack(layout, params);
    const std::vector<std::uint8_t> frozen = FreezeMask::none(layout).scalars(layout);

    std::vector<double> g_serial, g_parallel;
    const double serial_s =
        time_s([&] { g_serial = fd_gradient_serial(f, x, frozen, layout); }, 3);
    const double parallel_s = time_s([&] { g_parallel = fd_gradient(f, x, frozen, layout); }, 3);

    double max_diff = 0;
    for (std::size_t i = 0; i < g_serial.size(); ++i)
        max_diff = std::max(max_diff, std::abs(g_serial[i] - g_parallel[i]));
    report("fd_gradient (77 params)", serial_s, parallel_s, max_diff);
}

void bench_sum() {
    Rng rng(0);
    std::vector<double> values(1 << 22);
    for (double& v : values) v = rng.gaussian();

    double a = 0, b = 0;
    const double serial_s = time_s([&] { a = sequential_sum(values); }, 20);
    const double parallel_s = time_s([&] { b = pairwise_sum(values); }, 20);
    report("sum (4M doubles)", serial_s, parallel_s, std::abs(a - b));
}

}  // namespace

int main() {
    std::printf("threads: %d\n", thread_count());
    bench_sdf();
    bench_gradient();
    bench_sum();
    return 0;
}
