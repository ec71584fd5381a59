#include "scenefit/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scenefit/parallel.hpp"

namespace scenefit {

// --- layout / packing ---------------------------------------------------------

const ParamSlice& ParamLayout::slice(const std::string& name) const {
    for (const ParamSlice& s : slices)
        if (s.name == name) return s;
    throw InvalidArgument("no parameter slice named '" + name + "'");
}

std::string ParamLayout::scalar_name(std::size_t index) const {
    for (const ParamSlice& s : slices)
        if (index >= s.offset && index < s.offset + s.length)
            return s.length == 1 ? s.name : s.name + "[" + std::to_string(index - s.offset) + "]";
    return "param[" + std::to_string(index) + "]";
}

ParamLayout make_layout(const SceneParams& prototype) {
    ParamLayout layout;
    std::size_t off = 0;
    const auto add = [&](const std::string& name, std::size_t len) {
        layout.slices.push_back({name, off, len});
        off += len;
    };
    add("camera.pitch", 1);
    add("camera.roll", 1);
    for (std::size_t i = 0; i < prototype.boxes.size(); ++i) {
        const std::string base = "object[" + std::to_string(i) + "].";
        add(base + "centroid", 3);
        add(base + "size", 3);
        add(base + "yaw", 1);
    }
    add("layout.centroid", 3);
    add("layout.size", 3);
    add("layout.yaw", 1);
    if (prototype.body) {
        add("body.translation", 3);
        add("body.global_rotation", 3);
        add("body.pose", 3 * prototype.body->pose.size());
        add("body.shape_scale", 3);
    }
    layout.total = off;
    return layout;
}

namespace {

void put3(std::vector<double>& x, std::size_t off, const Vec3& v) {
    x[off] = v.x();
    x[off + 1] = v.y();
    x[off + 2] = v.z();
}

Vec3 get3(std::span<const double> x, std::size_t off) { return {x[off], x[off + 1], x[off + 2]}; }

}  // namespace

std::vector<double> pack(const ParamLayout& layout, const SceneParams& params) {
    std::vector<double> x(layout.total, 0.0);
    std::size_t off = 0;
    x[off++] = params.camera.pitch;
    x[off++] = params.camera.roll;
    for (const BBox3D& b : params.boxes) {
        put3(x, off, b.centroid);
        put3(x, off + 3, b.size);
        x[off + 6] = b.yaw;
        off += 7;
    }
    put3(x, off, params.layout.centroid);
    put3(x, off + 3, params.layout.size);
    x[off + 6] = params.layout.yaw;
    off += 7;
    if (params.body) {
        const BodyParams& b = *params.body;
        put3(x, off, b.translation);
        put3(x, off + 3, b.global_rotation);
        off += 6;
        for (const Vec3& p : b.pose) {
            put3(x, off, p);
            off += 3;
        }
        put3(x, off, b.shape_scale);
        off += 3;
    }
    return x;
}

SceneParams unpack(const ParamLayout& layout, std::span<const double> x, const SceneParams& prototype) {
    if (x.size() != layout.total)
        throw LengthMismatch("flat vector has " + std::to_string(x.size()) + " entries, layout expects " +
                             std::to_string(layout.total));
    SceneParams p;
    std::size_t off = 0;
    p.camera.pitch = x[off++];
    p.camera.roll = x[off++];
    p.boxes.reserve(prototype.boxes.size());
    const auto box_from = [&](std::size_t o) {
        return BBox3D(get3(x, o), get3(x, o + 3).cwiseMax(1e-6), wrap_angle(x[o + 6]));
    };
    for (std::size_t i = 0; i < prototype.boxes.size(); ++i) {
        p.boxes.push_back(box_from(off));
        off += 7;
    }
    p.layout = box_from(off);
    off += 7;
    if (prototype.body) {
        BodyParams b;
        b.translation = get3(x, off);
        b.global_rotation = get3(x, off + 3);
        off += 6;
        b.pose.resize(prototype.body->pose.size());
        for (Vec3& pose : b.pose) {
            pose = get3(x, off);
            off += 3;
        }
        b.shape_scale = get3(x, off).cwiseMax(kShapeScaleMin).cwiseMin(kShapeScaleMax);
        off += 3;
        p.body = std::move(b);
    }
    return p;
}

// --- freeze masks ----------------------------------------------------------------

FreezeMask FreezeMask::none(const ParamLayout& layout) {
    FreezeMask m;
    m.frozen.assign(layout.slices.size(), 0);
    return m;
}

FreezeMask FreezeMask::all(const ParamLayout& layout) {
    FreezeMask m;
    m.frozen.assign(layout.slices.size(), 1);
    return m;
}

void FreezeMask::set(const ParamLayout& layout, const std::string& substring, bool freeze) {
    bool hit = false;
    for (std::size_t i = 0; i < layout.slices.size(); ++i) {
        if (layout.slices[i].name.find(substring) != std::string::npos) {
            frozen[i] = freeze ? 1 : 0;
            hit = true;
        }
    }
    if (!hit) throw InvalidArgument("no parameter slice matches '" + substring + "'");
}

std::vector<std::uint8_t> FreezeMask::scalars(const ParamLayout& layout) const {
    if (frozen.size() != layout.slices.size())
        throw LengthMismatch("freeze mask does not match the layout");
    std::vector<std::uint8_t> out(layout.total, 0);
    for (std::size_t i = 0; i < layout.slices.size(); ++i)
        if (frozen[i])
            std::fill_n(out.begin() + layout.slices[i].offset, layout.slices[i].length, 1);
    return out;
}

// --- finite differences --------------------------------------------------------

namespace {

std::vector<double> fd_gradient_impl(const LossFn& f, std::span<const double> x,
                                     std::span<const std::uint8_t> frozen, const ParamLayout* layout,
                                     double fixed_h, bool parallel) {
    if (!frozen.empty() && frozen.size() != x.size())
        throw LengthMismatch("freeze flags do not match the parameter vector");
    std::vector<double> g(x.size(), 0.0);
    std::vector<std::size_t> active;
    active.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        if (frozen.empty() || !frozen[i]) active.push_back(i);

    const auto probe = [&](std::size_t a) {
        const std::size_t i = active[a];
        const double h = fixed_h > 0 ? fixed_h : std::max(1e-6, 1e-6 * std::abs(x[i]));
        std::vector<double> xp(x.begin(), x.end());
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            const std::string name = layout ? layout->scalar_name(i) : "param[" + std::to_string(i) + "]";
            throw NonFiniteLoss("loss is not finite probing " + name + " near " + std::to_string(x[i]));
        }
        g[i] = (fp - fm) / (2.0 * h);
    };
    if (parallel)
        parallel_for(active.size(), probe);
    else
        serial_for(active.size(), probe);
    return g;
}

}  // namespace

std::vector<double> fd_gradient(const LossFn& f, std::span<const double> x,
                                std::span<const std::uint8_t> frozen_scalars, const ParamLayout& layout) {
    return fd_gradient_impl(f, x, frozen_scalars, &layout, 0.0, true);
}

std::vector<double> fd_gradient_serial(const LossFn& f, std::span<const double> x,
                                       std::span<const std::uint8_t> frozen_scalars,
                                       const ParamLayout& layout) {
    return fd_gradient_impl(f, x, frozen_scalars, &layout, 0.0, false);
}

std::vector<double> fd_gradient_step(const LossFn& f, std::span<const double> x,
                                     std::span<const std::uint8_t> frozen_scalars, double h) {
    if (!(h > 0)) throw InvalidArgument("finite-difference step must be positive");
    return fd_gradient_impl(f, x, frozen_scalars, nullptr, h, true);
}

// --- Adam -----------------------------------------------------------------------

void adam_step(AdamState& state, std::span<double> x, std::span<const double> g, const AdamConfig& cfg,
               std::span<const std::uint8_t> frozen_scalars) {
    if (g.size() != x.size()) throw LengthMismatch("gradient does not match the parameter vector");
    if (!frozen_scalars.empty() && frozen_scalars.size() != x.size())
        throw LengthMismatch("freeze flags do not match the parameter vector");
    if (state.m.empty()) {
        state.m.assign(x.size(), 0.0);
        state.v.assign(x.size(), 0.0);
        state.t = 0;
    }
    if (state.m.size() != x.size()) throw LengthMismatch("Adam state does not match the parameter vector");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!frozen_scalars.empty() && frozen_scalars[i]) continue;
        if (cfg.weight_decay != 0.0) x[i] *= 1.0 - cfg.lr * cfg.weight_decay;
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        x[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

// --- L-BFGS ----------------------------------------------------------------------

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<double> two_loop_direction(const LbfgsState& state, const std::vector<double>& g) {
    std::vector<double> q = g;
    const std::size_t k = state.pairs.size();
    std::vector<double> alpha(k, 0.0), rho(k, 0.0);
    for (std::size_t idx = k; idx-- > 0;) {
        const auto& [s, y] = state.pairs[idx];
        rho[idx] = 1.0 / dot(s, y);
        alpha[idx] = rho[idx] * dot(s, q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[idx] * y[i];
    }
    double gamma = 1.0;
    if (k > 0) {
        const auto& [s, y] = state.pairs.back();
        gamma = dot(s, y) / dot(y, y);
    }
    for (double& v : q) v *= gamma;
    for (std::size_t idx = 0; idx < k; ++idx) {
        const auto& [s, y] = state.pairs[idx];
        const double beta = rho[idx] * dot(y, q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] += s[i] * (alpha[idx] - beta);
    }
    for (double& v : q) v = -v;
    return q;
}

}  // namespace

namespace {

StepResult lbfgs_step_impl(LbfgsState& state, std::vector<double>& x, const LossFn& f,
                           std::span<const std::uint8_t> frozen, const ParamLayout& layout,
                           const LbfgsConfig& cfg) {
    const double f0 = f(x);
    if (!std::isfinite(f0)) throw NonFiniteLoss("loss is not finite at the current parameters");

    std::vector<double> g;
    if (!state.prev_x.empty() && state.prev_x == x && !state.prev_grad.empty()) {
        g = state.prev_grad;
    } else {
        g = fd_gradient(f, x, frozen, layout);
    }
    double gnorm_inf = 0.0, gnorm_1 = 0.0;
    for (double v : g) {
        gnorm_inf = std::max(gnorm_inf, std::abs(v));
        gnorm_1 += std::abs(v);
    }
    StepResult result{f0, f0, 0.0, gnorm_inf};
    if (gnorm_inf < 1e-12) return result;  // stationary

    std::vector<double> d = two_loop_direction(state, g);
    if (!frozen.empty())
        for (std::size_t i = 0; i < d.size(); ++i)
            if (frozen[i]) d[i] = 0.0;
    double dphi0 = dot(g, d);
    if (dphi0 >= 0.0) {  // not a descent direction: restart from steepest descent
        state.pairs.clear();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = (frozen.empty() || !frozen[i]) ? -g[i] : 0.0;
        dphi0 = dot(g, d);
    }

    const auto phi = [&](double t) {
        std::vector<double> xt(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) xt[i] = x[i] + t * d[i];
        return f(xt);
    };
    // scalar directional derivative by central differences along d
    const auto dphi = [&](double t) {
        const double dt = 1e-7 * std::max(1.0, std::abs(t));
        return (phi(t + dt) - phi(t - dt)) / (2.0 * dt);
    };

    const double sufficient = cfg.c1 * dphi0;
    const double curvature = -cfg.c2 * dphi0;
    double accepted = -1.0;
    double accepted_phi = f0;
    int trials = 0;

    // strong Wolfe: bracket then zoom
    double t_prev = 0.0, phi_prev = f0;
    double t = state.first_step ? std::min(1.0, 1.0 / std::max(gnorm_1, 1e-30)) * cfg.lr : 1.0;
    double zoom_lo = -1.0, zoom_hi = -1.0, phi_lo = 0.0;
    while (trials < cfg.max_trials) {
        ++trials;
        const double phi_t = phi(t);
        if (!std::isfinite(phi_t)) {  // overshot into an invalid region: shrink
            t = 0.5 * (t_prev + t);
            continue;
        }
        if (phi_t > f0 + t * sufficient || (trials > 1 && phi_t >= phi_prev)) {
            zoom_lo = t_prev;
            phi_lo = phi_prev;
            zoom_hi = t;
            break;
        }
        const double dphi_t = dphi(t);
        if (std::abs(dphi_t) <= curvature) {
            accepted = t;
            accepted_phi = phi_t;
            break;
        }
        if (dphi_t >= 0.0) {
            zoom_lo = t;
            phi_lo = phi_t;
            zoom_hi = t_prev;
            break;
        }
        t_prev = t;
        phi_prev = phi_t;
        t = std::min(2.0 * t, 1e8);
    }
    if (accepted < 0.0 && zoom_lo >= 0.0) {
        while (trials < cfg.max_trials) {
            ++trials;
            const double tm = 0.5 * (zoom_lo + zoom_hi);
            const double phi_m = phi(tm);
            if (!std::isfinite(phi_m) || phi_m > f0 + tm * sufficient || phi_m >= phi_lo) {
                zoom_hi = tm;
                continue;
            }
            const double dphi_m = dphi(tm);
            if (std::abs(dphi_m) <= curvature) {
                accepted = tm;
                accepted_phi = phi_m;
                break;
            }
            if (dphi_m * (zoom_hi - zoom_lo) >= 0.0) zoom_hi = zoom_lo;
            zoom_lo = tm;
            phi_lo = phi_m;
        }
    }

    std::vector<double> x_new;
    if (accepted > 0.0) {
        x_new.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) x_new[i] = x[i] + accepted * d[i];
        result.step_size = accepted;
        result.loss_after = accepted_phi;
    } else {
        // fallback: backtracking steepest descent from the configured step
        double tb = cfg.lr;
        const double gg = dot(g, g);
        bool ok = false;
        for (int k = 0; k < cfg.max_trials; ++k, tb *= 0.5) {
            std::vector<double> xt(x.size());
            for (std::size_t i = 0; i < x.size(); ++i)
                xt[i] = x[i] - ((frozen.empty() || !frozen[i]) ? tb * g[i] : 0.0);
            const double ft = f(xt);
            if (std::isfinite(ft) && ft <= f0 - cfg.c1 * tb * gg) {
                x_new = std::move(xt);
                result.step_size = tb;
                result.loss_after = ft;
                ok = true;
                break;
            }
        }
        if (!ok)
            throw LineSearchFailed("no acceptable step after " + std::to_string(cfg.max_trials) +
                                   " Wolfe trials and " + std::to_string(cfg.max_trials) +
                                   " backtracking trials");
    }

    std::vector<double> g_new = fd_gradient(f, x_new, frozen, layout);
    std::vector<double> s(x.size()), y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        s[i] = x_new[i] - x[i];
        y[i] = g_new[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-10 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y))) {
        state.pairs.emplace_back(std::move(s), std::move(y));
        while (static_cast<int>(state.pairs.size()) > cfg.history) state.pairs.pop_front();
    }
    x = std::move(x_new);
    state.prev_x = x;
    state.prev_grad = std::move(g_new);
    state.first_step = false;
    return result;
}

}  // namespace

StepResult lbfgs_step(LbfgsState& state, std::vector<double>& x, const LossFn& f,
                      std::span<const std::uint8_t> frozen_scalars, const ParamLayout& layout,
                      const LbfgsConfig& cfg) {
    return lbfgs_step_impl(state, x, f, frozen_scalars, layout, cfg);
}

}  // namespace scenefit
