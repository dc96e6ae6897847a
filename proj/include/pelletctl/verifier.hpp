#pragma once

// Trajectory checks against the closed-loop guarantees:
//
//   x(0,0) > 0:   -alpha < x(t,j) <= gamma^(t/tau_d - 1) x(0,0) + alpha
//   x(0,0) <= 0:  min(r - e^{-t/tau}(r - x(0,0)), -alpha) < x(t,j) <= alpha
//
// plus the per-cycle facts they rest on (pellet gaps and contraction), and
// the asymptotic band |x| <= alpha.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pelletctl/controller.hpp"
#include "pelletctl/error.hpp"
#include "pelletctl/flow.hpp"
#include "pelletctl/params.hpp"
#include "pelletctl/simulator.hpp"

namespace pelletctl {

enum class EnvelopeCase { PositiveStart, NonPositiveStart };

struct Bounds {
    double lower{};
    double upper{};
};

/// One verdict. `margin` is the signed distance to the bound in the check's
/// natural unit; the check fails iff margin < -tolerance.
struct CheckResult {
    CheckResult() = default;
    explicit CheckResult(std::string check_name) : name(std::move(check_name)) {}

    std::string name;
    bool passed{true};
    double margin{std::numeric_limits<double>::infinity()};
    double tolerance{0};
    double t{0};
    long j{0};
    std::string note;
};

struct VerificationReport {
    std::vector<CheckResult> checks;

    [[nodiscard]] bool passed() const {
        return std::all_of(checks.begin(), checks.end(),
                           [](const CheckResult& c) { return c.passed; });
    }

    [[nodiscard]] const CheckResult* find(const std::string& name) const {
        for (const auto& c : checks) {
            if (c.name == name) {
                return &c;
            }
        }
        return nullptr;
    }

    void append(const VerificationReport& other) {
        checks.insert(checks.end(), other.checks.begin(), other.checks.end());
    }
};

/// Absolute numerical slack for strict inequalities, in units of r.
inline constexpr double kNumericalRelativeTol = 1e-9;

/// Cycles that start closer to zero than this (relative to r) are excluded
/// from the contraction check; the ratio bound degenerates there.
inline constexpr double kContractionStartFloor = 1e-6;

inline std::string format_number(double v, int precision = 6) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

/// One line per check: name, verdict, margin, location.
inline void write_report(std::ostream& os, const VerificationReport& report) {
    for (const auto& c : report.checks) {
        os << c.name << ' ' << (c.passed ? "PASS" : "FAIL") << " margin=" << format_number(c.margin)
           << " tol=" << format_number(c.tolerance) << " t=" << format_number(c.t, 10)
           << " j=" << c.j;
        if (!c.note.empty()) {
            os << " # " << c.note;
        }
        os << '\n';
    }
}

namespace detail {

inline void finish(CheckResult& c) { c.passed = c.margin >= -c.tolerance; }

/// Tracks the worst margin seen so far.
struct WorstCase {
    CheckResult result;

    WorstCase(std::string name, double tolerance) : result(std::move(name)) {
        result.tolerance = tolerance;
    }

    void observe(double margin, double t, long j) {
        if (margin < result.margin) {
            result.margin = margin;
            result.t = t;
            result.j = j;
        }
    }

    CheckResult done() {
        finish(result);
        return result;
    }
};

/// Visit every state the checks look at: both endpoints of every arc (so
/// pre- and post-jump states) and interior points on a grid of `step`.
template <typename Visit>
void for_each_checkpoint(const Trajectory<double>& traj, const ValidatedParams<double>& p,
                         double step, Visit&& visit) {
    for (std::size_t i = 0; i < traj.arcs.size(); ++i) {
        const auto& arc = traj.arcs[i];
        visit(arc.t_start, arc.j, arc.start);
        const double length = arc.t_end - arc.t_start;
        if (step > 0 && length > step) {
            const auto n = static_cast<long>(std::ceil(length / step));
            for (long k = 1; k < n; ++k) {
                const double dt = length * static_cast<double>(k) / static_cast<double>(n);
                visit(arc.t_start + dt, arc.j, flow_state(arc.start, dt, p));
            }
        }
        visit(arc.t_end, arc.j, arc.end);
    }
}

} // namespace detail

[[nodiscard]] inline EnvelopeCase envelope_case(double x0) {
    return x0 > 0 ? EnvelopeCase::PositiveStart : EnvelopeCase::NonPositiveStart;
}

/// The bound formulas without the hypothesis check. Only used where the
/// caller already knows (or deliberately ignores) whether T_c and Delta are
/// admissible.
[[nodiscard]] inline Bounds envelope_unchecked(const ValidatedParams<double>& p, double x0,
                                               double t) {
    const double alpha = p.alpha();
    if (envelope_case(x0) == EnvelopeCase::PositiveStart) {
        const double gamma = contraction_ratio(p);
        const double tau_d = tc_upper_bound(p);
        return {-alpha, std::pow(gamma, t / tau_d - 1.0) * x0 + alpha};
    }
    const double transient = p.r() - std::exp(-t / p.tau()) * (p.r() - x0);
    return {std::min(transient, -alpha), alpha};
}

[[nodiscard]] inline Bounds envelope(const ValidatedParams<double>& p, double x0, double t) {
    if (!satisfies_design_conditions(p)) {
        throw Error(Errc::TheoremHypothesisViolated,
                    "T_c or delta outside the admissible intervals; the envelope does not apply");
    }
    return envelope_unchecked(p, x0, t);
}

/// First time the envelope guarantees |x| <= alpha + settle_tol.
[[nodiscard]] inline double settle_time_estimate(const ValidatedParams<double>& p, double x0,
                                                 double settle_tol) {
    if (x0 > 0) {
        if (x0 <= settle_tol) {
            return 0.0;
        }
        // gamma^(t/tau_d - 1) x0 = settle_tol
        const double tau_d = tc_upper_bound(p);
        const double t = tau_d * (1.0 + std::log(settle_tol / x0) / std::log(contraction_ratio(p)));
        return std::max(t, 0.0);
    }
    const double floor_value = -(p.alpha() + settle_tol);
    if (x0 >= floor_value) {
        return 0.0;
    }
    // r - e^{-t/tau}(r - x0) = -(alpha + settle_tol)
    return p.tau() * std::log((p.r() - x0) / (p.r() - floor_value));
}

/// Envelope check at every arc endpoint and on an interior grid. A run whose
/// parameters violate the design conditions gets a failing hypothesis entry
/// and is still measured against the same formulas.
[[nodiscard]] inline VerificationReport check_envelope(const Trajectory<double>& traj,
                                                       double interior_step = 0.0) {
    const auto p = validate(traj.params);
    const double x0 = traj.initial_state.x;
    const double tol = kNumericalRelativeTol * p.r();
    if (interior_step <= 0) {
        interior_step = p.t_c() / 10.0;
    }

    VerificationReport report;
    CheckResult hyp("envelope.hypotheses");
    hyp.margin = 0.0;
    hyp.passed = satisfies_design_conditions(p) && traj.initial_state.xi == 0.0;
    if (!hyp.passed) {
        hyp.margin = -1.0;
        hyp.note = traj.initial_state.xi != 0.0 ? "xi(0,0) != 0"
                                                : "T_c or delta outside admissible interval";
    }
    report.checks.push_back(hyp);

    detail::WorstCase lower("envelope.lower", tol);
    detail::WorstCase upper("envelope.upper", tol);
    detail::for_each_checkpoint(traj, p, interior_step,
                                [&](double t, long j, const HybridState<double>& q) {
                                    const auto b = envelope_unchecked(p, x0, t);
                                    lower.observe(q.x - b.lower, t, j);
                                    upper.observe(b.upper - q.x, t, j);
                                });
    auto lo = lower.done();
    auto hi = upper.done();
    const char* which = envelope_case(x0) == EnvelopeCase::PositiveStart ? "x0 > 0" : "x0 <= 0";
    lo.note = which;
    hi.note = which;
    report.checks.push_back(lo);
    report.checks.push_back(hi);
    return report;
}

/// One stretch between consecutive pellets (or from the start to the first
/// pellet, when the run starts with xi = 0).
struct PelletCycle {
    double t_start{};
    long j_start{};  // hybrid index of the state that starts the cycle
    double x_start{};
    bool closed{false};  // ended by a pellet inside the horizon
    double t_end{};
    long j_end{};
    double x_end{};  // after the closing pellet
};

[[nodiscard]] inline std::vector<PelletCycle> pellet_cycles(const Trajectory<double>& traj,
                                                            bool include_initial) {
    std::vector<PelletCycle> cycles;
    std::optional<PelletCycle> open;
    if (include_initial && traj.initial_state.xi == 0.0) {
        open = PelletCycle{0.0, 0, traj.initial_state.x};
    }
    for (const auto& jump : traj.jumps) {
        if (jump.kind != JumpKind::Pellet) {
            continue;
        }
        if (open) {
            open->closed = true;
            open->t_end = jump.time;
            open->j_end = jump.jump_index + 1;
            open->x_end = jump.state_after.x;
            cycles.push_back(*open);
        }
        open = PelletCycle{jump.time, jump.jump_index + 1, jump.state_after.x};
    }
    if (open) {
        open->t_end = traj.arcs.empty() ? open->t_start : traj.arcs.back().t_end;
        open->j_end = traj.arcs.empty() ? open->j_start : traj.arcs.back().j;
        open->x_end = traj.arcs.empty() ? open->x_start : traj.arcs.back().end.x;
        cycles.push_back(*open);
    }
    return cycles;
}

/// (a) jumps sit exactly on the slot grid, one per slot, j incrementing by
/// one; (b) while x > 0, pellets are never further apart than tau_d rounded
/// up to whole slots.
[[nodiscard]] inline VerificationReport check_dwell_and_pellet_gaps(
    const Trajectory<double>& traj) {
    const auto p = validate(traj.params);
    VerificationReport report;

    detail::WorstCase slots("dwell.slot_grid", 0.0);
    slots.result.margin = 0.0;
    for (std::size_t i = 0; i < traj.jumps.size(); ++i) {
        const auto& jump = traj.jumps[i];
        const bool on_grid = jump.jump_index == static_cast<long>(i) &&
                             jump.time == traj.slot_time(static_cast<long>(i)) &&
                             jump.state_before.t_timer == p.t_c() && jump.state_after.t_timer == 0.0;
        if (!on_grid) {
            slots.observe(-std::abs(jump.time - traj.slot_time(static_cast<long>(i))) - 1.0,
                          jump.time, jump.jump_index);
        }
    }
    if (!traj.jumps.empty()) {
        double worst_gap = 0.0;
        for (std::size_t i = 1; i < traj.jumps.size(); ++i) {
            worst_gap = std::max(worst_gap,
                                 std::abs(traj.jumps[i].time - traj.jumps[i - 1].time - p.t_c()));
        }
        slots.result.note = "max |gap - T_c| = " + format_number(worst_gap, 3);
    }
    report.checks.push_back(slots.done());

    const double tau_d = tc_upper_bound(p);
    const long max_slots =
        std::max(1L, static_cast<long>(std::ceil(tau_d / p.t_c() * (1.0 - 1e-12))));
    const double max_gap = static_cast<double>(max_slots) * p.t_c();
    detail::WorstCase gaps("dwell.pellet_gap", 1e-9 * p.t_c());
    long checked = 0;
    for (const auto& cycle : pellet_cycles(traj, true)) {
        if (!(cycle.x_start > 0)) {
            continue;
        }
        ++checked;
        gaps.observe(max_gap - (cycle.t_end - cycle.t_start), cycle.t_end, cycle.j_end);
    }
    auto g = gaps.done();
    g.note = "bound " + format_number(max_gap) + " s over " + std::to_string(checked) + " cycles";
    report.checks.push_back(g);
    return report;
}

/// x_end <= gamma x_start + 1e-9 r on every closed pellet-to-pellet cycle that
/// starts at a pellet jump with x > 0 (x then stays positive all cycle).
[[nodiscard]] inline VerificationReport check_contraction(const Trajectory<double>& traj) {
    const auto p = validate(traj.params);
    const double gamma = contraction_ratio(p);
    detail::WorstCase worst("contraction", kNumericalRelativeTol * p.r());
    long checked = 0;
    for (const auto& cycle : pellet_cycles(traj, false)) {
        if (!cycle.closed || !(cycle.x_start >= kContractionStartFloor * p.r())) {
            continue;
        }
        ++checked;
        worst.observe(gamma * cycle.x_start - cycle.x_end, cycle.t_end, cycle.j_end);
    }
    auto c = worst.done();
    c.note = std::to_string(checked) + " cycles";
    VerificationReport report;
    report.checks.push_back(c);
    return report;
}

/// |x| must end inside alpha + settle_tol no later than the envelope says.
/// Every arc is monotone in x, so arc endpoints carry the extremes of |x|.
[[nodiscard]] inline VerificationReport check_ultimate_bound(const Trajectory<double>& traj,
                                                             double settle_tol) {
    const auto p = validate(traj.params);
    const double x0 = traj.initial_state.x;
    const double estimate = settle_time_estimate(p, x0, settle_tol);
    if (traj.horizon < estimate) {
        throw Error(Errc::HorizonTooShort, "horizon " + format_number(traj.horizon) +
                                               " s is shorter than the settle estimate " +
                                               format_number(estimate) + " s");
    }
    const double band = p.alpha() + settle_tol;

    std::optional<std::pair<double, long>> last_out;
    double worst_after = std::numeric_limits<double>::infinity();
    double worst_t = 0.0;
    long worst_j = 0;
    const auto visit = [&](double t, long j, double x) {
        if (std::abs(x) > band) {
            last_out = {t, j};
        }
        if (t >= estimate && band - std::abs(x) < worst_after) {
            worst_after = band - std::abs(x);
            worst_t = t;
            worst_j = j;
        }
    };
    for (const auto& arc : traj.arcs) {
        visit(arc.t_start, arc.j, arc.start.x);
        visit(arc.t_end, arc.j, arc.end.x);
    }

    VerificationReport report;
    CheckResult settle("ultimate.settle_time");
    settle.tolerance = 0.0;
    settle.margin = last_out ? estimate - last_out->first : estimate;
    settle.t = last_out ? last_out->first : 0.0;
    settle.j = last_out ? last_out->second : 0;
    settle.note = "estimate " + format_number(estimate) + " s";
    detail::finish(settle);
    report.checks.push_back(settle);

    CheckResult steady("ultimate.steady_band");
    steady.tolerance = 0.0;
    steady.margin = worst_after;
    steady.t = worst_t;
    steady.j = worst_j;
    steady.note = "|x| <= " + format_number(band);
    detail::finish(steady);
    report.checks.push_back(steady);
    return report;
}

/// All four checks in one report.
[[nodiscard]] inline VerificationReport verify_all(const Trajectory<double>& traj,
                                                   double settle_tol, double interior_step = 0.0) {
    VerificationReport report = check_envelope(traj, interior_step);
    report.append(check_dwell_and_pellet_gaps(traj));
    report.append(check_contraction(traj));
    try {
        report.append(check_ultimate_bound(traj, settle_tol));
    } catch (const Error& e) {
        if (e.code() != Errc::HorizonTooShort) {
            throw;
        }
        CheckResult c("ultimate.settle_time");
        c.passed = false;
        c.margin = -1.0;
        c.note = e.what();
        report.checks.push_back(c);
    }
    return report;
}

} // namespace pelletctl
