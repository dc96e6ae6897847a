#pragma once

// Fixed-step integration of the flow map, used only to cross-check the
// closed-form propagator and the simulator. The max(0, x) kink in xi's
// integrand gets no special treatment here.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pelletctl/controller.hpp"
#include "pelletctl/error.hpp"
#include "pelletctl/flow.hpp"
#include "pelletctl/params.hpp"
#include "pelletctl/simulator.hpp"
#include "pelletctl/verifier.hpp"

namespace pelletctl {

enum class Scheme { RK4, Euler };

[[nodiscard]] constexpr std::string_view to_string(Scheme s) noexcept {
    return s == Scheme::RK4 ? "rk4" : "euler";
}

template <typename Real = double>
struct OracleConfig {
    Real h{1e-5};
    Scheme scheme{Scheme::RK4};
};

/// Steps are considered aligned when duration / h is this close to an integer.
inline constexpr double kAlignmentTol = 1e-6;

namespace detail {

template <typename Real>
long aligned_steps(const Real& duration, const Real& h, const char* what) {
    using std::abs;
    using std::round;
    const Real ratio = duration / h;
    const Real n = round(ratio);
    if (!(abs(ratio - n) <= Real(kAlignmentTol))) {
        throw Error(Errc::MisalignedStep,
                    std::string(what) + ": " + describe("duration", duration) +
                        " is not a multiple of " + describe("h", h));
    }
    return static_cast<long>(n);
}

template <typename Real>
struct PlantRate {
    Real r;
    Real tau;

    // (x', xi')
    std::pair<Real, Real> operator()(const Real& x) const {
        return {(r - x) / tau, x > 0 ? x : Real(0)};
    }
};

} // namespace detail

template <typename Real>
void validate_oracle(const OracleConfig<Real>& cfg, const ValidatedParams<Real>& p) {
    if (!(cfg.h > 0)) {
        throw Error(Errc::MisalignedStep, detail::describe("h", cfg.h) + " must be positive");
    }
    detail::aligned_steps(p.t_c(), cfg.h, "T_c");
}

/// Integrates x and xi with the configured scheme; the timer advances exactly.
template <typename Real>
[[nodiscard]] HybridState<Real> integrate_arc(const HybridState<Real>& q0, const Real& duration,
                                              const ValidatedParams<Real>& p,
                                              const OracleConfig<Real>& cfg) {
    detail::require_non_negative_duration(duration);
    if (!(cfg.h > 0)) {
        throw Error(Errc::MisalignedStep, detail::describe("h", cfg.h) + " must be positive");
    }
    const long n = detail::aligned_steps(duration, cfg.h, "arc");
    if (n == 0) {
        return q0;
    }
    const Real h = duration / Real(n);
    const detail::PlantRate<Real> f{p.r(), p.tau()};
    Real x = q0.x;
    Real xi = q0.xi;
    for (long k = 0; k < n; ++k) {
        if (cfg.scheme == Scheme::Euler) {
            const auto [dx, dxi] = f(x);
            x += h * dx;
            xi += h * dxi;
            continue;
        }
        const auto [k1x, k1s] = f(x);
        const auto [k2x, k2s] = f(x + h / 2 * k1x);
        const auto [k3x, k3s] = f(x + h / 2 * k2x);
        const auto [k4x, k4s] = f(x + h * k3x);
        x += h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
        xi += h / 6 * (k1s + 2 * k2s + 2 * k3s + k4s);
    }
    return {x, xi, q0.t_timer + duration};
}

/// Same slot and jump logic as `simulate`, with numerically integrated arcs.
template <typename Real>
[[nodiscard]] Trajectory<Real> simulate_numeric(const ValidatedParams<Real>& p, const Real& x0,
                                                const Real& horizon, const OracleConfig<Real>& cfg,
                                                const Real& t0_timer = Real(0),
                                                const Real& xi0 = Real(0),
                                                TieBreak tie = TieBreak::Pellet) {
    validate_oracle(cfg, p);
    detail::aligned_steps(Real(p.t_c() - t0_timer), cfg.h, "first slot");
    return detail::run_slots(p, HybridState<Real>{x0, xi0, t0_timer}, horizon, tie,
                             [&](const HybridState<Real>& q, const Real& dt) {
                                 return integrate_arc(q, dt, p, cfg);
                             });
}

struct CompareTolerance {
    double x{0};   // absolute, m^-3
    double xi{0};  // absolute, m^-3 s
};

/// State pair at one common checkpoint (every jump, plus the horizon).
struct CompareRow {
    double t{};
    long j{};
    double x_a{}, x_b{};
    double xi_a{}, xi_b{};
    JumpKind kind_a{JumpKind::Skip}, kind_b{JumpKind::Skip};
    bool is_jump{true};
};

struct Comparison {
    VerificationReport report;
    double max_dx{0};
    double max_dxi{0};
    double jaccard{1};
    std::vector<CompareRow> rows;
};

[[nodiscard]] inline double pellet_jaccard(const Trajectory<double>& a,
                                           const Trajectory<double>& b) {
    const auto sa = pellet_times(a).slots;
    const auto sb = pellet_times(b).slots;
    const std::set<long> A(sa.begin(), sa.end());
    const std::set<long> B(sb.begin(), sb.end());
    std::size_t common = 0;
    for (long s : A) {
        common += B.count(s);
    }
    const std::size_t all = A.size() + B.size() - common;
    return all == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(all);
}

/// Compares two runs of the same scenario slot by slot. If the schedules
/// part ways at a slot where either run had xi within the xi tolerance of
/// Delta, the split is a near-tie: it is noted, and deviations are measured
/// only up to that slot.
[[nodiscard]] inline Comparison compare(const Trajectory<double>& a, const Trajectory<double>& b,
                                        const CompareTolerance& tol) {
    if (!(a.params == b.params) || !(a.initial_state == b.initial_state) ||
        a.horizon != b.horizon || a.jumps.size() != b.jumps.size()) {
        throw Error(Errc::IncomparableRuns,
                    "runs differ in parameters, initial state, horizon or slot count");
    }
    const auto p = validate(a.params);
    const double near_tie = std::max(tol.xi, 1e-12 * p.r() * p.t_c());

    Comparison out;
    out.jaccard = pellet_jaccard(a, b);
    std::optional<std::size_t> split;
    for (std::size_t i = 0; i < a.jumps.size(); ++i) {
        const auto& ja = a.jumps[i];
        const auto& jb = b.jumps[i];
        out.rows.push_back({ja.time, ja.jump_index, ja.state_before.x, jb.state_before.x,
                            ja.state_before.xi, jb.state_before.xi, ja.kind, jb.kind, true});
        if (!split && ja.kind != jb.kind) {
            split = i;
        }
    }
    out.rows.push_back({a.arcs.back().t_end, a.arcs.back().j, a.arcs.back().end.x,
                        b.arcs.back().end.x, a.arcs.back().end.xi, b.arcs.back().end.xi,
                        JumpKind::Skip, JumpKind::Skip, false});

    bool tie_split = false;
    if (split) {
        const auto& ja = a.jumps[*split];
        const auto& jb = b.jumps[*split];
        tie_split = std::abs(ja.state_before.xi - p.delta()) <= near_tie ||
                    std::abs(jb.state_before.xi - p.delta()) <= near_tie;
    }
    const std::size_t measured = split && tie_split ? *split + 1 : out.rows.size();
    double t_dx = 0, t_dxi = 0;
    long j_dx = 0, j_dxi = 0;
    for (std::size_t i = 0; i < measured; ++i) {
        const auto& row = out.rows[i];
        const double dx = std::abs(row.x_a - row.x_b);
        const double dxi = std::abs(row.xi_a - row.xi_b);
        if (dx > out.max_dx) {
            out.max_dx = dx;
            t_dx = row.t;
            j_dx = row.j;
        }
        if (dxi > out.max_dxi) {
            out.max_dxi = dxi;
            t_dxi = row.t;
            j_dxi = row.j;
        }
    }

    const auto check = [](const char* name, double margin, double t, long j) {
        CheckResult c(name);
        c.margin = margin;
        c.t = t;
        c.j = j;
        detail::finish(c);
        return c;
    };
    const auto cx = check("compare.max_dx", tol.x - out.max_dx, t_dx, j_dx);
    const auto cxi = check("compare.max_dxi", tol.xi - out.max_dxi, t_dxi, j_dxi);
    auto cs = check("compare.schedule", out.jaccard - 1.0, 0.0, 0);
    cs.passed = true;
    if (split) {
        cs.t = out.rows[*split].t;
        cs.j = out.rows[*split].j;
        cs.passed = tie_split;
        cs.note = tie_split ? "schedules split at a near-tie slot" : "schedules differ";
    }
    cs.note += (cs.note.empty() ? "" : "; ") + std::string("jaccard ") + format_number(out.jaccard);
    out.report.checks = {cx, cxi, cs};
    return out;
}

} // namespace pelletctl
