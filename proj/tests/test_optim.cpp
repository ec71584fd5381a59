#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "scenefit/optim.hpp"
#include "scenefit/scene.hpp"
#include "support/fixtures.hpp"

using namespace scenefit;
using namespace scenefit::testing;

namespace {

ParamLayout plain_layout(std::size_t n) {
    ParamLayout layout;
    layout.slices = {{"x", 0, n}};
    layout.total = n;
    return layout;
}

}  // namespace

TEST_CASE("layout, packing and unpacking") {
    const SceneDocument doc = make_test_scene(2, true);
    const SceneParams init = initial_params(doc);
    const ParamLayout layout = make_layout(init);

    SUBCASE("slice bookkeeping") {
        // 2 camera + 2*(3+3+1) boxes + 7 layout + 3+3+45+3 body
        CHECK(layout.total == 2 + 14 + 7 + 54);
        CHECK(layout.slice("camera.pitch").length == 1);
        CHECK(layout.slice("object[1].yaw").length == 1);
        CHECK(layout.slice("body.pose").length == 45);
        CHECK_THROWS_AS(layout.slice("object[2].yaw"), InvalidArgument);
        CHECK(layout.scalar_name(0) == "camera.pitch");
        const ParamSlice& c1 = layout.slice("object[1].centroid");
        CHECK(layout.scalar_name(c1.offset + 1) == "object[1].centroid[1]");
        CHECK(layout.scalar_name(layout.total + 5) == "param[" + std::to_string(layout.total + 5) + "]");
    }

    SUBCASE("round trip is exact") {
        const std::vector<double> x = pack(layout, init);
        REQUIRE(x.size() == layout.total);
        const SceneParams back = unpack(layout, x, init);
        CHECK(back.camera.pitch == init.camera.pitch);
        CHECK(back.camera.roll == init.camera.roll);
        REQUIRE(back.boxes.size() == init.boxes.size());
        for (std::size_t i = 0; i < init.boxes.size(); ++i) {
            CHECK((back.boxes[i].centroid - init.boxes[i].centroid).norm() == 0.0);
            CHECK((back.boxes[i].size - init.boxes[i].size).norm() == 0.0);
            CHECK(back.boxes[i].yaw == init.boxes[i].yaw);
        }
        CHECK((back.layout.centroid - init.layout.centroid).norm() == 0.0);
        REQUIRE(back.body.has_value());
        CHECK((back.body->translation - init.body->translation).norm() == 0.0);
        CHECK(back.body->pose.size() == init.body->pose.size());
        CHECK((back.body->shape_scale - init.body->shape_scale).norm() == 0.0);
    }

    SUBCASE("unpack repairs out-of-range entries") {
        std::vector<double> x = pack(layout, init);
        x[layout.slice("object[0].size").offset] = -4.0;       // clamped up
        x[layout.slice("object[0].yaw").offset] = 7.0;         // wrapped
        x[layout.slice("body.shape_scale").offset] = 9.0;      // clamped down
        x[layout.slice("body.shape_scale").offset + 1] = 0.0;  // clamped up
        const SceneParams back = unpack(layout, x, init);
        CHECK(back.boxes[0].size.x() == 1e-6);
        CHECK(back.boxes[0].yaw == doctest::Approx(wrap_angle(7.0)).epsilon(1e-15));
        CHECK(back.body->shape_scale.x() == kShapeScaleMax);
        CHECK(back.body->shape_scale.y() == kShapeScaleMin);
    }

    SUBCASE("flat vector length is checked") {
        std::vector<double> x = pack(layout, init);
        x.pop_back();
        CHECK_THROWS_AS(unpack(layout, x, init), LengthMismatch);
    }

    SUBCASE("bodyless layout omits the body slices") {
        const SceneDocument bare = make_test_scene(3, false);
        const ParamLayout blayout = make_layout(initial_params(bare));
        CHECK(blayout.total == 2 + 21 + 7);
        CHECK_THROWS_AS(blayout.slice("body.translation"), InvalidArgument);
    }
}

TEST_CASE("freeze masks") {
    const SceneDocument doc = make_test_scene(2, true);
    const ParamLayout layout = make_layout(initial_params(doc));

    SUBCASE("none and all") {
        const FreezeMask none = FreezeMask::none(layout);
        CHECK(none.frozen.size() == layout.slices.size());
        for (auto f : none.frozen) CHECK(f == 0);
        const FreezeMask all = FreezeMask::all(layout);
        for (auto f : all.frozen) CHECK(f == 1);
        const auto scalars = all.scalars(layout);
        REQUIRE(scalars.size() == layout.total);
        for (auto f : scalars) CHECK(f == 1);
    }

    SUBCASE("substring selection expands to the right scalars") {
        FreezeMask m = FreezeMask::none(layout);
        m.set(layout, "yaw", true);
        const auto scalars = m.scalars(layout);
        for (std::size_t i = 0; i < layout.total; ++i) {
            const bool is_yaw = layout.scalar_name(i).find("yaw") != std::string::npos;
            CHECK(scalars[i] == (is_yaw ? 1 : 0));
        }
        // unfreeze a subset of a fully frozen mask
        FreezeMask a = FreezeMask::all(layout);
        a.set(layout, "body.", false);
        const auto sa = a.scalars(layout);
        CHECK(sa[layout.slice("body.pose").offset] == 0);
        CHECK(sa[layout.slice("camera.pitch").offset] == 1);
    }

    SUBCASE("unmatched substring is an error") {
        FreezeMask m = FreezeMask::none(layout);
        CHECK_THROWS_AS(m.set(layout, "quaternion", true), InvalidArgument);
    }

    SUBCASE("mask length is validated") {
        FreezeMask m = FreezeMask::none(layout);
        m.frozen.pop_back();
        CHECK_THROWS_AS(m.scalars(layout), LengthMismatch);
    }
}

TEST_CASE("finite-difference gradients") {
    const ParamLayout layout = plain_layout(3);
    const LossFn quad = [](std::span<const double> x) {
        return 1.5 * x[0] * x[0] + 0.5 * x[1] * x[1] + 4.0 * x[2] * x[2];
    };
    const std::vector<double> x = {2.0, -3.0, 0.5};

    SUBCASE("quadratic gradient is recovered") {
        const auto g = fd_gradient(quad, x, {}, layout);
        REQUIRE(g.size() == 3);
        CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-8));
        CHECK(g[1] == doctest::Approx(-3.0).epsilon(1e-8));
        CHECK(g[2] == doctest::Approx(4.0).epsilon(1e-8));
    }

    SUBCASE("frozen coordinates get exactly zero") {
        const std::vector<std::uint8_t> frozen = {0, 1, 0};
        const auto g = fd_gradient(quad, x, frozen, layout);
        CHECK(g[1] == 0.0);
        CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-8));
    }

    SUBCASE("parallel and serial engines agree bitwise") {
        const auto gp = fd_gradient(quad, x, {}, layout);
        const auto gs = fd_gradient_serial(quad, x, {}, layout);
        REQUIRE(gp.size() == gs.size());
        for (std::size_t i = 0; i < gp.size(); ++i) CHECK(gp[i] == gs[i]);
    }

    SUBCASE("fixed-step oracle honours its h") {
        const LossFn cubic = [](std::span<const double> x2) { return x2[0] * x2[0] * x2[0]; };
        const std::vector<double> at = {1.0};
        // central difference of x^3 at 1 with step h is exactly 3 + h^2
        const auto g = fd_gradient_step(cubic, at, {}, 1e-2);
        CHECK(g[0] == doctest::Approx(3.0 + 1e-4).epsilon(1e-10));
        const auto tiny = fd_gradient_step(cubic, at, {}, 1e-6);
        CHECK(std::abs(tiny[0] - 3.0) < 1e-9);
        CHECK_THROWS_AS(fd_gradient_step(cubic, at, {}, 0.0), InvalidArgument);
    }

    SUBCASE("non-finite probes name the scalar") {
        const LossFn rooty = [](std::span<const double> x2) { return std::sqrt(x2[1]); };
        const std::vector<double> at = {1.0, 0.0, 1.0};
        try {
            fd_gradient(rooty, at, {}, layout);
            FAIL("expected NonFiniteLoss");
        } catch (const NonFiniteLoss& e) {
            CHECK(std::string(e.what()).find("x[1]") != std::string::npos);
        }
    }

    SUBCASE("freeze flag length is validated") {
        const std::vector<std::uint8_t> bad = {1};
        CHECK_THROWS_AS(fd_gradient(quad, x, bad, layout), LengthMismatch);
    }
}

TEST_CASE("adam_step") {
    AdamConfig cfg;
    cfg.lr = 0.1;

    SUBCASE("first step moves by lr in the gradient sign") {
        AdamState st;
        std::vector<double> x = {1.0, -2.0};
        const std::vector<double> g = {2.0, -0.5};
        adam_step(st, x, g, cfg, {});
        CHECK(x[0] == doctest::Approx(0.9).epsilon(1e-7));
        CHECK(x[1] == doctest::Approx(-1.9).epsilon(1e-7));
        CHECK(st.t == 1);
    }

    SUBCASE("frozen entries are untouched, moments included") {
        AdamState st;
        std::vector<double> x = {1.0, -2.0};
        const std::vector<double> g = {2.0, -0.5};
        const std::vector<std::uint8_t> frozen = {1, 0};
        adam_step(st, x, g, cfg, frozen);
        CHECK(x[0] == 1.0);
        CHECK(st.m[0] == 0.0);
        CHECK(st.v[0] == 0.0);
        CHECK(x[1] == doctest::Approx(-1.9).epsilon(1e-7));
    }

    SUBCASE("weight decay is decoupled") {
        AdamConfig wd = cfg;
        wd.weight_decay = 0.5;
        AdamState st;
        std::vector<double> x = {4.0};
        const std::vector<double> g = {0.0};
        adam_step(st, x, g, wd, {});
        CHECK(x[0] == 4.0 * (1.0 - 0.1 * 0.5));
    }

    SUBCASE("shape mismatches are rejected") {
        AdamState st;
        std::vector<double> x = {1.0, 2.0};
        const std::vector<double> g = {1.0};
        CHECK_THROWS_AS(adam_step(st, x, g, cfg, {}), LengthMismatch);
    }

    SUBCASE("drives a quadratic to zero") {
        AdamState st;
        std::vector<double> x = {5.0, -3.0};
        int steps = 0;
        while (steps < 500 && x[0] * x[0] + x[1] * x[1] >= 1e-4) {
            const std::vector<double> g = {2.0 * x[0], 2.0 * x[1]};
            adam_step(st, x, g, cfg, {});
            ++steps;
        }
        CHECK(x[0] * x[0] + x[1] * x[1] < 1e-4);
        CHECK(steps <= 500);
    }
}

TEST_CASE("lbfgs_step") {
    const ParamLayout layout = plain_layout(2);
    const LbfgsConfig cfg;

    SUBCASE("solves Rosenbrock from the classic start") {
        const LossFn rosen = [](std::span<const double> x) {
            const double a = x[0], b = x[1];
            return (1 - a) * (1 - a) + 100.0 * (b - a * a) * (b - a * a);
        };
        std::vector<double> x = {-1.2, 1.0};
        LbfgsState st;
        int iters = 0;
        bool converged = false;
        while (iters < 200) {
            const StepResult r = lbfgs_step(st, x, rosen, {}, layout, cfg);
            ++iters;
            CHECK(r.loss_after <= r.loss_before + 1e-15);
            if (std::abs(x[0] - 1.0) < 1e-6 && std::abs(x[1] - 1.0) < 1e-6) {
                converged = true;
                break;
            }
            if (r.step_size == 0.0) break;
        }
        CHECK(converged);
        CHECK(iters <= 200);
    }

    SUBCASE("a separable quadratic converges in a few steps") {
        const LossFn f = [](std::span<const double> x) {
            return (x[0] - 5.0) * (x[0] - 5.0) + 3.0 * (x[1] + 2.0) * (x[1] + 2.0);
        };
        std::vector<double> x = {0.0, 0.0};
        LbfgsState st;
        for (int i = 0; i < 20; ++i) {
            if (lbfgs_step(st, x, f, {}, layout, cfg).step_size == 0.0) break;
        }
        CHECK(std::abs(x[0] - 5.0) < 1e-6);
        CHECK(std::abs(x[1] + 2.0) < 1e-6);
    }

    SUBCASE("stationary points return a zero step") {
        const LossFn flat = [](std::span<const double>) { return 3.0; };
        std::vector<double> x = {0.7, -0.4};
        LbfgsState st;
        const StepResult r = lbfgs_step(st, x, flat, {}, layout, cfg);
        CHECK(r.step_size == 0.0);
        CHECK(r.loss_before == 3.0);
        CHECK(r.loss_after == 3.0);
        CHECK(r.grad_inf_norm == 0.0);
        CHECK(x[0] == 0.7);
        CHECK(x[1] == -0.4);
    }

    SUBCASE("frozen coordinates never move") {
        const LossFn f = [](std::span<const double> x) {
            return (x[0] - 5.0) * (x[0] - 5.0) + (x[1] - 7.0) * (x[1] - 7.0);
        };
        std::vector<double> x = {0.0, 1.25};
        const std::vector<std::uint8_t> frozen = {0, 1};
        LbfgsState st;
        for (int i = 0; i < 15; ++i) lbfgs_step(st, x, f, frozen, layout, cfg);
        CHECK(x[1] == 1.25);
        CHECK(std::abs(x[0] - 5.0) < 1e-6);
    }

    SUBCASE("repeat runs are bitwise identical") {
        const LossFn rosen = [](std::span<const double> x) {
            const double a = x[0], b = x[1];
            return (1 - a) * (1 - a) + 100.0 * (b - a * a) * (b - a * a);
        };
        const auto run = [&] {
            std::vector<double> x = {-1.2, 1.0};
            LbfgsState st;
            for (int i = 0; i < 8; ++i) lbfgs_step(st, x, rosen, {}, layout, cfg);
            return x;
        };
        const auto a = run(), b = run();
        CHECK(a[0] == b[0]);
        CHECK(a[1] == b[1]);
    }

    SUBCASE("a cliff with a vanishing descent side fails the line search") {
        const ParamLayout one = plain_layout(1);
        const LossFn cliff = [](std::span<const double> x) {
            return x[0] > 0 ? 1.0 + x[0] : 1.0 + 1e-12 * x[0];
        };
        std::vector<double> x = {0.0};
        LbfgsState st;
        CHECK_THROWS_AS(lbfgs_step(st, x, cliff, {}, one, cfg), LineSearchFailed);
    }

    SUBCASE("non-finite start is reported") {
        const LossFn bad = [](std::span<const double>) {
            return std::numeric_limits<double>::quiet_NaN();
        };
        std::vector<double> x = {1.0, 1.0};
        LbfgsState st;
        CHECK_THROWS_AS(lbfgs_step(st, x, bad, {}, layout, cfg), NonFiniteLoss);
    }
}
