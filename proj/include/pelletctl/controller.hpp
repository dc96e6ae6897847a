#pragma once

// Jump logic at a launch slot. The jump set splits into
//   D1: T >= T_c and xi <= Delta  -> G1, no pellet: (x, xi, 0)
//   D2: T >= T_c and xi >= Delta  -> G2, pellet:    (x - alpha, 0, 0)
// which overlap at xi == Delta. The overlap is resolved by TieBreak.

#include <string_view>

#include "pelletctl/error.hpp"
#include "pelletctl/flow.hpp"
#include "pelletctl/params.hpp"

namespace pelletctl {

enum class JumpKind { Skip, Pellet };

/// Selection on D1 ∩ D2. Pellet is the default; Skip is kept for
/// robustness experiments.
enum class TieBreak { Pellet, Skip };

[[nodiscard]] constexpr std::string_view to_string(JumpKind kind) noexcept {
    return kind == JumpKind::Pellet ? "pellet" : "skip";
}

[[nodiscard]] constexpr std::string_view to_string(TieBreak tie) noexcept {
    return tie == TieBreak::Pellet ? "pellet" : "skip";
}

template <typename Real = double>
struct JumpEvent {
    Real time{};
    long jump_index{};  // j before the jump; state_after lives at j + 1
    JumpKind kind{JumpKind::Skip};
    HybridState<Real> state_before;
    HybridState<Real> state_after;

    friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

template <typename Real>
[[nodiscard]] JumpKind jump_decision(const HybridState<Real>& q, const ValidatedParams<Real>& p,
                                     TieBreak tie = TieBreak::Pellet) {
    if (q.t_timer < p.t_c()) {
        throw Error(Errc::NotInJumpSet,
                    detail::describe("T", q.t_timer) + " has not reached T_c");
    }
    const bool fire = tie == TieBreak::Pellet ? q.xi >= p.delta() : q.xi > p.delta();
    return fire ? JumpKind::Pellet : JumpKind::Skip;
}

template <typename Real>
[[nodiscard]] HybridState<Real> apply_jump(const HybridState<Real>& q, JumpKind kind,
                                           const ValidatedParams<Real>& p) {
    if (q.t_timer < p.t_c()) {
        throw Error(Errc::NotInJumpSet,
                    detail::describe("T", q.t_timer) + " has not reached T_c");
    }
    if (kind == JumpKind::Pellet) {
        if (!(q.xi >= p.delta())) {
            throw Error(Errc::InadmissibleJump, "pellet requires xi >= delta, " +
                                                    detail::describe("xi", q.xi));
        }
        return {q.x - p.alpha(), Real(0), Real(0)};
    }
    if (!(q.xi <= p.delta())) {
        throw Error(Errc::InadmissibleJump,
                    "skip requires xi <= delta, " + detail::describe("xi", q.xi));
    }
    return {q.x, q.xi, Real(0)};
}

} // namespace pelletctl
