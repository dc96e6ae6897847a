#pragma once

// Exact propagation of q = (x, xi, T) along the flow map
//
//   x'  = (r - x) / tau
//   xi' = max(0, x)
//   T'  = 1
//
// The plant is linear between jumps, so every component has a closed form.
// The only non-smooth piece is the max(0, x) kink in xi's integrand, which is
// handled by solving for the zero crossing of x explicitly.

#include <cmath>
#include <limits>
#include <optional>

#include "pelletctl/error.hpp"
#include "pelletctl/params.hpp"

namespace pelletctl {

template <typename Real = double>
struct HybridState {
    Real x{};        // density error r - n_e
    Real xi{};       // membrane potential
    Real t_timer{};  // time since the last launch slot

    friend bool operator==(const HybridState&, const HybridState&) = default;
};

/// Relative slack on T <= T_c, absorbing the rounding of t0 + (T_c - t0).
inline constexpr double kTimerRelativeSlack = 1e-12;

namespace detail {

template <typename Real>
void require_non_negative_duration(const Real& dt) {
    if (!(dt >= 0)) {
        throw Error(Errc::NegativeDuration, describe("dt", dt) + " must be non-negative");
    }
}

/// 1 - e^{-u}
template <typename Real>
Real one_minus_exp_neg(const Real& u) {
    using std::expm1;
    return -expm1(-u);
}

/// u - (1 - e^{-u}), accurate for small u where the difference cancels.
template <typename Real>
Real exp_neg_remainder(const Real& u) {
    using std::abs;
    using std::expm1;
    if (u > Real(0.05)) {
        return u + expm1(-u);
    }
    // u^2/2 - u^3/6 + u^4/24 - ...
    const Real eps = std::numeric_limits<Real>::epsilon();
    Real term = u * u / 2;
    Real sum = term;
    for (int k = 3; k < 200; ++k) {
        term *= -u / k;
        sum += term;
        if (abs(term) <= eps * abs(sum)) {
            break;
        }
    }
    return sum;
}

} // namespace detail

/// x after flowing `dt` seconds: r - e^{-dt/tau} (r - x0).
template <typename Real>
[[nodiscard]] Real flow_x(const Real& x0, const Real& dt, const ValidatedParams<Real>& p) {
    using std::exp;
    detail::require_non_negative_duration(dt);
    if (dt == 0) {
        return x0;
    }
    return p.r() - exp(-dt / p.tau()) * (p.r() - x0);
}

/// Time at which a negative error flows up to exactly zero; none if x0 >= 0.
template <typename Real>
[[nodiscard]] std::optional<Real> zero_crossing_time(const Real& x0, const ValidatedParams<Real>& p) {
    using std::log;
    if (!(x0 < 0)) {
        return std::nullopt;
    }
    return p.tau() * log((p.r() - x0) / p.r());
}

/// xi0 plus the integral of max(0, x(s)) over [0, dt].
///
/// For x0 >= 0 the integrand is x itself:
///   tau (x0 - r)(1 - e^{-dt/tau}) + r dt = tau [x0 (1 - e^{-u}) + r (u - (1 - e^{-u}))]
/// with u = dt / tau; the right-hand form avoids cancelling two O(r dt) terms.
/// For x0 < 0 nothing accrues until the crossing time, after which the
/// same formula applies from x = 0.
template <typename Real>
[[nodiscard]] Real flow_xi(const Real& x0, const Real& xi0, const Real& dt,
                           const ValidatedParams<Real>& p) {
    detail::require_non_negative_duration(dt);
    Real x_start = x0;
    Real active = dt;
    if (const auto crossing = zero_crossing_time(x0, p)) {
        if (!(dt > *crossing)) {
            return xi0;
        }
        x_start = Real(0);
        active = dt - *crossing;
    }
    const Real u = active / p.tau();
    return xi0 + p.tau() * (x_start * detail::one_minus_exp_neg(u) +
                            p.r() * detail::exp_neg_remainder(u));
}

/// Flow every component of q for `dt` seconds inside the flow set T <= T_c.
template <typename Real>
[[nodiscard]] HybridState<Real> flow_state(const HybridState<Real>& q, const Real& dt,
                                           const ValidatedParams<Real>& p) {
    detail::require_non_negative_duration(dt);
    Real timer = q.t_timer + dt;
    if (timer > p.t_c()) {
        if (timer > p.t_c() * Real(1 + kTimerRelativeSlack)) {
            throw Error(Errc::FlowSetViolation, detail::describe("T", q.t_timer) + " plus " +
                                                    detail::describe("dt", dt) +
                                                    " leaves the flow set T <= T_c");
        }
        timer = p.t_c();
    }
    return {flow_x(q.x, dt, p), flow_xi(q.x, q.xi, dt, p), timer};
}

} // namespace pelletctl
