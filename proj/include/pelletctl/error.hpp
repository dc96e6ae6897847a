#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pelletctl {

enum class Errc {
    NonPositiveParam,
    ReferenceTooSmall,
    NegativeDelta,
    InconsistentAlpha,
    ActuatorTooSlow,
    NegativeDuration,
    FlowSetViolation,
    NotInJumpSet,
    InadmissibleJump,
    InvalidInitialState,
    TheoremHypothesisViolated,
    HorizonTooShort,
    MisalignedStep,
    IncomparableRuns,
    ConfigParseError,
    IoError,
};

[[nodiscard]] constexpr std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::NonPositiveParam: return "NonPositiveParam";
        case Errc::ReferenceTooSmall: return "ReferenceTooSmall";
        case Errc::NegativeDelta: return "NegativeDelta";
        case Errc::InconsistentAlpha: return "InconsistentAlpha";
        case Errc::ActuatorTooSlow: return "ActuatorTooSlow";
        case Errc::NegativeDuration: return "NegativeDuration";
        case Errc::FlowSetViolation: return "FlowSetViolation";
        case Errc::NotInJumpSet: return "NotInJumpSet";
        case Errc::InadmissibleJump: return "InadmissibleJump";
        case Errc::InvalidInitialState: return "InvalidInitialState";
        case Errc::TheoremHypothesisViolated: return "TheoremHypothesisViolated";
        case Errc::HorizonTooShort: return "HorizonTooShort";
        case Errc::MisalignedStep: return "MisalignedStep";
        case Errc::IncomparableRuns: return "IncomparableRuns";
        case Errc::ConfigParseError: return "ConfigParseError";
        case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace pelletctl
