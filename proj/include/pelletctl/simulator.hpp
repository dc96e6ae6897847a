#pragma once

// Event-driven closed-loop simulation. The timer runs at unit rate, so every
// launch slot time is known in advance: flow exactly to the slot, decide,
// jump, repeat. No event location is involved.

#include <cmath>
#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "pelletctl/controller.hpp"
#include "pelletctl/error.hpp"
#include "pelletctl/flow.hpp"
#include "pelletctl/params.hpp"

namespace pelletctl {

/// One interval of flow at a fixed jump counter j.
template <typename Real = double>
struct FlowArc {
    Real t_start{};
    Real t_end{};
    long j{};
    HybridState<Real> start;
    HybridState<Real> end;

    friend bool operator==(const FlowArc&, const FlowArc&) = default;
};

/// A hybrid arc: arcs[i] ends where jumps[i] happens and jumps[i].state_after
/// starts arcs[i + 1]. The last arc is cut at the horizon.
template <typename Real = double>
struct Trajectory {
    SystemParams<Real> params;
    HybridState<Real> initial_state;
    Real horizon{};
    TieBreak tie{TieBreak::Pellet};
    std::vector<FlowArc<Real>> arcs;
    std::vector<JumpEvent<Real>> jumps;

    /// Time of the k-th launch slot (k = 0 is the first).
    [[nodiscard]] Real slot_time(long k) const {
        return (params.t_c - initial_state.t_timer) + Real(k) * params.t_c;
    }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Launch times that carried a pellet, with their slot indices.
template <typename Real = double>
struct PelletSchedule {
    std::vector<Real> times;
    std::vector<long> slots;

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
    [[nodiscard]] bool empty() const noexcept { return times.empty(); }
};

enum class SampleEvent { Flow, Skip, Pellet };

[[nodiscard]] constexpr std::string_view to_string(SampleEvent e) noexcept {
    switch (e) {
        case SampleEvent::Flow: return "flow";
        case SampleEvent::Skip: return "skip";
        case SampleEvent::Pellet: return "pellet";
    }
    return "flow";
}

template <typename Real = double>
struct Sample {
    Real t{};
    long j{};
    Real x{};
    Real xi{};
    Real timer{};
    Real n_e{};
    SampleEvent event{SampleEvent::Flow};

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// A slot that lands within this relative distance of the horizon is taken
/// as landing on it, so that horizon = k T_c yields exactly k jumps.
inline constexpr double kHorizonRelativeSlack = 1e-12;

namespace detail {

template <typename Real>
void validate_initial(const HybridState<Real>& q0, const Real& horizon,
                      const ValidatedParams<Real>& p) {
    using std::isfinite;
    if (!(q0.x <= p.r()) || !isfinite(q0.x)) {
        throw Error(Errc::InvalidInitialState, describe("x0", q0.x) + " must be finite and <= r");
    }
    if (!(q0.xi >= 0) || !isfinite(q0.xi)) {
        throw Error(Errc::InvalidInitialState, describe("xi0", q0.xi) + " must be >= 0");
    }
    if (!(q0.t_timer >= 0 && q0.t_timer <= p.t_c())) {
        throw Error(Errc::InvalidInitialState, describe("T0", q0.t_timer) + " must be in [0, T_c]");
    }
    if (!(horizon > 0) || !isfinite(horizon)) {
        throw Error(Errc::InvalidInitialState, describe("horizon", horizon) + " must be positive");
    }
}

/// Shared slot loop. `propagate(q, dt)` flows q for dt seconds; the analytic
/// engine and the numerical oracle differ only in this callable.
template <typename Real, typename Propagate>
Trajectory<Real> run_slots(const ValidatedParams<Real>& p, const HybridState<Real>& q0,
                           const Real& horizon, TieBreak tie, Propagate&& propagate) {
    validate_initial(q0, horizon, p);

    Trajectory<Real> traj;
    traj.params = p.values();
    traj.initial_state = q0;
    traj.horizon = horizon;
    traj.tie = tie;

    const Real last_admissible = horizon * Real(1 + kHorizonRelativeSlack);
    HybridState<Real> q = q0;
    Real t = 0;
    for (long j = 0;; ++j) {
        const Real slot = traj.slot_time(j);
        if (slot > last_admissible) {
            const Real dt = horizon > t ? Real(horizon - t) : Real(0);
            traj.arcs.push_back({t, t + dt, j, q, propagate(q, dt)});
            break;
        }
        auto before = propagate(q, j == 0 ? Real(p.t_c() - q0.t_timer) : p.t_c());
        before.t_timer = p.t_c();
        traj.arcs.push_back({t, slot, j, q, before});

        const JumpKind kind = jump_decision(before, p, tie);
        const auto after = apply_jump(before, kind, p);
        traj.jumps.push_back({slot, j, kind, before, after});
        q = after;
        t = slot;
    }
    return traj;
}

} // namespace detail

/// Closed-loop run from (x0, xi0, t0_timer) over [0, horizon].
template <typename Real>
[[nodiscard]] Trajectory<Real> simulate(const ValidatedParams<Real>& p, const Real& x0,
                                        const Real& horizon, const Real& t0_timer = Real(0),
                                        const Real& xi0 = Real(0),
                                        TieBreak tie = TieBreak::Pellet) {
    return detail::run_slots(p, HybridState<Real>{x0, xi0, t0_timer}, horizon, tie,
                             [&p](const HybridState<Real>& q, const Real& dt) {
                                 return flow_state(q, dt, p);
                             });
}

template <typename Real>
[[nodiscard]] PelletSchedule<Real> pellet_times(const Trajectory<Real>& traj) {
    PelletSchedule<Real> schedule;
    for (const auto& jump : traj.jumps) {
        if (jump.kind == JumpKind::Pellet) {
            schedule.times.push_back(jump.time);
            schedule.slots.push_back(jump.jump_index);
        }
    }
    return schedule;
}

/// Dense samples from the arc closed forms on the grid m * dt_sample, plus
/// every arc endpoint. A jump emits its pre-jump row at (t, j) and its
/// post-jump row at (t, j + 1).
template <typename Real>
[[nodiscard]] std::vector<Sample<Real>> sample(const Trajectory<Real>& traj,
                                               const Real& dt_sample) {
    using std::floor;
    if (!(dt_sample > 0)) {
        throw Error(Errc::NegativeDuration, detail::describe("dt_sample", dt_sample) +
                                                " must be positive");
    }
    const auto p = validate(traj.params);
    const Real r = p.r();
    std::vector<Sample<Real>> rows;
    const auto row = [&](const Real& t, long j, const HybridState<Real>& q, SampleEvent e) {
        rows.push_back({t, j, q.x, q.xi, q.t_timer, r - q.x, e});
    };
    const Real guard = dt_sample * Real(1e-9);

    for (std::size_t i = 0; i < traj.arcs.size(); ++i) {
        const auto& arc = traj.arcs[i];
        if (i == 0) {
            row(arc.t_start, arc.j, arc.start, SampleEvent::Flow);
        }
        for (long m = static_cast<long>(floor(arc.t_start / dt_sample)) + 1;; ++m) {
            const Real t = Real(m) * dt_sample;
            if (!(t < arc.t_end - guard)) {
                break;
            }
            if (t <= arc.t_start + guard) {
                continue;
            }
            row(t, arc.j, flow_state(arc.start, Real(t - arc.t_start), p), SampleEvent::Flow);
        }
        if (i < traj.jumps.size()) {
            const auto& jump = traj.jumps[i];
            const auto e = jump.kind == JumpKind::Pellet ? SampleEvent::Pellet : SampleEvent::Skip;
            row(jump.time, jump.jump_index, jump.state_before, e);
            row(jump.time, jump.jump_index + 1, jump.state_after, e);
        } else if (i == 0 || arc.t_end > arc.t_start) {
            row(arc.t_end, arc.j, arc.end, SampleEvent::Flow);
        }
    }
    return rows;
}

} // namespace pelletctl
