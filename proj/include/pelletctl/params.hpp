#pragma once

// System constants of the pellet-fuelled plasma loop and the admissibility
// bounds on the actuator period T_c and the neuron threshold Delta.
//
// Everything is templated on the scalar type so the same formulas can be
// evaluated in extended precision (see the oracle convergence tests).

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "pelletctl/error.hpp"

namespace pelletctl {

template <typename Real = double>
struct SystemParams {
    Real tau{};    // particle confinement time [s]
    Real r{};      // reference density [m^-3]
    Real alpha{};  // density increment per pellet [m^-3]
    Real t_c{};    // time between launch slots [s]
    Real delta{};  // neuron firing threshold [m^-3 s]

    std::optional<Real> pellet_particles;  // m_p
    std::optional<Real> conversion;        // B, so that alpha = B * m_p

    friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

template <typename Real = double>
struct DerivedConstants {
    Real gamma{};      // per-cycle contraction ratio (r - alpha) / r
    Real tau_d{};      // longest pellet-to-pellet time while x > 0
    Real t_c_max{};    // largest admissible slot period
    Real delta_max{};  // largest admissible threshold for the given t_c
};

/// Relative slack when comparing T_c against its supremum. Lets a period
/// printed to six significant digits (0.0154151) count as the boundary.
inline constexpr double kTcRelativeSlack = 1e-5;

/// Relative tolerance on alpha versus B * m_p.
inline constexpr double kAlphaConsistencyTol = 1e-9;

template <typename Real>
class ValidatedParams;

template <typename Real>
ValidatedParams<Real> validate(const SystemParams<Real>& params);

/// Parameters that passed `validate`. Only `validate` can construct one.
template <typename Real = double>
class ValidatedParams {
public:
    [[nodiscard]] const SystemParams<Real>& values() const noexcept { return p_; }
    [[nodiscard]] Real tau() const noexcept { return p_.tau; }
    [[nodiscard]] Real r() const noexcept { return p_.r; }
    [[nodiscard]] Real alpha() const noexcept { return p_.alpha; }
    [[nodiscard]] Real t_c() const noexcept { return p_.t_c; }
    [[nodiscard]] Real delta() const noexcept { return p_.delta; }

    /// Same constants with a different threshold; re-validated.
    [[nodiscard]] ValidatedParams with_delta(Real delta) const {
        auto p = p_;
        p.delta = delta;
        return validate(p);
    }
    [[nodiscard]] ValidatedParams with_t_c(Real t_c) const {
        auto p = p_;
        p.t_c = t_c;
        return validate(p);
    }

private:
    explicit ValidatedParams(const SystemParams<Real>& p) : p_(p) {}
    friend ValidatedParams validate<Real>(const SystemParams<Real>&);

    SystemParams<Real> p_;
};

namespace detail {

template <typename Real>
std::string to_text(const Real& value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    return os.str();
}

template <typename Real>
std::string describe(const char* name, const Real& value) {
    return std::string(name) + " = " + to_text(value);
}

template <typename Real>
bool positive_finite(const Real& v) {
    using std::isfinite;
    return v > 0 && isfinite(v);
}

} // namespace detail

template <typename Real>
ValidatedParams<Real> validate(const SystemParams<Real>& params) {
    const std::pair<const char*, Real> positive[] = {
        {"tau", params.tau}, {"r", params.r}, {"alpha", params.alpha}, {"t_c", params.t_c}};
    for (const auto& [name, value] : positive) {
        if (!detail::positive_finite(value)) {
            throw Error(Errc::NonPositiveParam,
                        detail::describe(name, value) + " must be positive and finite");
        }
    }
    if (!(params.r > params.alpha)) {
        throw Error(Errc::ReferenceTooSmall, "r must exceed alpha (" +
                                                 detail::describe("r", params.r) + ", " +
                                                 detail::describe("alpha", params.alpha) + ")");
    }
    // +inf is allowed: a threshold that is never reached is the open-loop plant.
    if (!(params.delta >= 0)) {
        throw Error(Errc::NegativeDelta,
                    detail::describe("delta", params.delta) + " must be non-negative");
    }
    if (params.pellet_particles && params.conversion) {
        using std::abs;
        const Real implied = *params.conversion * *params.pellet_particles;
        if (abs(params.alpha - implied) > Real(kAlphaConsistencyTol) * params.alpha) {
            throw Error(Errc::InconsistentAlpha,
                        detail::describe("alpha", params.alpha) +
                            " but B*m_p = " + detail::to_text(implied));
        }
    }
    return ValidatedParams<Real>(params);
}

/// Supremum of admissible slot periods: tau * ln(r / (r - alpha)).
template <typename Real>
[[nodiscard]] Real tc_upper_bound(const ValidatedParams<Real>& p) {
    using std::log;
    return p.tau() * log(p.r() / (p.r() - p.alpha()));
}

/// The same bound written in terms of the ratio r / alpha.
template <typename Real>
[[nodiscard]] Real tc_upper_bound_ratio_form(const ValidatedParams<Real>& p) {
    using std::log;
    const Real ratio = p.r() / p.alpha();
    return p.tau() * log(ratio / (ratio - 1));
}

/// True when t_c lies in (0, t_c_max] up to kTcRelativeSlack.
template <typename Real>
[[nodiscard]] bool actuator_fast_enough(const ValidatedParams<Real>& p) {
    return p.t_c() <= tc_upper_bound(p) * Real(1 + kTcRelativeSlack);
}

/// Supremum of admissible thresholds for the configured t_c:
///   r tau ln(r/(r-alpha)) - r tau (1 - ((r-alpha)/r) e^{t_c/tau}) - r t_c.
/// As a function of t_c this has its minimum, zero, at t_c_max; the clamp
/// only absorbs rounding there.
template <typename Real>
[[nodiscard]] Real delta_upper_bound(const ValidatedParams<Real>& p) {
    using std::exp;
    using std::log;
    if (!actuator_fast_enough(p)) {
        std::ostringstream os;
        os.precision(6);
        os << "t_c = " << p.t_c() << " s exceeds t_c_max = " << tc_upper_bound(p)
           << " s; minimum slot rate is " << 1 / tc_upper_bound(p) << " Hz";
        throw Error(Errc::ActuatorTooSlow, os.str());
    }
    const Real r = p.r(), tau = p.tau(), a = p.alpha(), tc = p.t_c();
    const Real bound = r * tau * log(r / (r - a)) - r * tau * (1 - ((r - a) / r) * exp(tc / tau)) -
                       r * tc;
    return bound < 0 ? Real(0) : bound;
}

/// gamma = (r - alpha) / r.
template <typename Real>
[[nodiscard]] Real contraction_ratio(const ValidatedParams<Real>& p) {
    return (p.r() - p.alpha()) / p.r();
}

template <typename Real>
[[nodiscard]] DerivedConstants<Real> derive_constants(const ValidatedParams<Real>& p) {
    DerivedConstants<Real> d;
    d.gamma = contraction_ratio(p);
    d.tau_d = tc_upper_bound(p);
    d.t_c_max = d.tau_d;
    d.delta_max = delta_upper_bound(p);
    return d;
}

/// Both hypotheses of the ultimate-bound result: slot period and threshold
/// inside their admissible intervals.
template <typename Real>
[[nodiscard]] bool satisfies_design_conditions(const ValidatedParams<Real>& p) {
    return actuator_fast_enough(p) && p.delta() <= delta_upper_bound(p);
}

} // namespace pelletctl
