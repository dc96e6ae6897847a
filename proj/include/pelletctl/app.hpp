#pragma once

// Command implementations behind the pelletctl executable. Each returns the
// process exit status: 0 all checks pass, 1 a check failed, 2 usage or
// configuration error.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "pelletctl/error.hpp"
#include "pelletctl/io.hpp"
#include "pelletctl/oracle.hpp"
#include "pelletctl/params.hpp"
#include "pelletctl/simulator.hpp"
#include "pelletctl/verifier.hpp"

namespace pelletctl::app {

inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// Command-line overrides applied on top of a scenario file.
struct Overrides {
    std::optional<double> horizon;
    std::optional<TieBreak> tie;
};

inline void apply(ScenarioConfig& cfg, const Overrides& o) {
    if (o.horizon) cfg.horizon = *o.horizon;
    if (o.tie) cfg.tie = *o.tie;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream out(dir / name);
    if (!out) {
        throw Error(Errc::IoError, "cannot write '" + (dir / name).string() + "'");
    }
    out << std::setprecision(17);
    return out;
}

inline void write_reports(const std::filesystem::path& dir, const std::string& stem,
                          const VerificationReport& report) {
    auto txt = open_out(dir, stem + ".txt");
    write_report(txt, report);
    auto csv = open_out(dir, stem + ".csv");
    write_report_csv(csv, report);
}

inline Trajectory<double> run_analytic(const ScenarioConfig& cfg, const ValidatedParams<double>& p) {
    return simulate(p, cfg.initial_x(), cfg.horizon, cfg.t0, cfg.xi0, cfg.tie);
}

} // namespace detail

/// Writes trajectory.csv, envelope.csv, report.txt and report.csv.
inline int run_simulate(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
                        std::ostream& log) {
    const auto p = validate(cfg.params);
    const auto traj = detail::run_analytic(cfg, p);
    const double dt = cfg.sample_step();

    {
        auto out = detail::open_out(out_dir, "trajectory.csv");
        write_trajectory_csv(out, sample(traj, dt));
    }
    {
        auto out = detail::open_out(out_dir, "envelope.csv");
        write_envelope_csv(out, p, cfg.initial_x(), cfg.horizon, dt);
    }
    const auto report = verify_all(traj, cfg.settle_tolerance(), dt);
    detail::write_reports(out_dir, "report", report);

    const auto schedule = pellet_times(traj);
    log << "slots " << traj.jumps.size() << ", pellets " << schedule.size() << '\n';
    write_report(log, report);
    return report.passed() ? kExitPass : kExitCheckFailed;
}

/// Re-checks a trajectory.csv written by `run_simulate`.
inline int run_verify(const ScenarioConfig& cfg, const std::filesystem::path& trajectory_csv,
                      const std::optional<std::filesystem::path>& out_dir, std::ostream& log) {
    validate(cfg.params);
    std::ifstream in(trajectory_csv);
    if (!in) {
        throw Error(Errc::IoError, "cannot open '" + trajectory_csv.string() + "'");
    }
    const auto rows = read_trajectory_csv(in);
    const auto traj = trajectory_from_samples(rows, cfg.params, cfg.tie);
    auto report = verify_all(traj, cfg.settle_tolerance(), cfg.sample_step());
    report.checks.push_back(check_sample_flow(rows, traj));
    if (out_dir) {
        detail::write_reports(*out_dir, "verify_report", report);
    }
    write_report(log, report);
    return report.passed() ? kExitPass : kExitCheckFailed;
}

/// Analytic engine against the fixed-step oracle; writes compare.csv and
/// compare_report.{txt,csv}.
inline int run_compare(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
                       std::ostream& log) {
    if (!cfg.oracle_enabled) {
        throw Error(Errc::ConfigParseError, "compare needs oracle.enabled = true");
    }
    const auto p = validate(cfg.params);
    const auto analytic = detail::run_analytic(cfg, p);
    const auto numeric =
        simulate_numeric(p, cfg.initial_x(), cfg.horizon, cfg.oracle, cfg.t0, cfg.xi0, cfg.tie);
    const auto cmp = compare(analytic, numeric, cfg.compare_tolerance());
    {
        auto out = detail::open_out(out_dir, "compare.csv");
        write_compare_csv(out, cmp);
    }
    detail::write_reports(out_dir, "compare_report", cmp.report);
    log << "scheme " << to_string(cfg.oracle.scheme) << ", h " << cfg.oracle.h << ", max|dx| "
        << cmp.max_dx << " (" << cmp.max_dx / p.r() << " r), jaccard " << cmp.jaccard << '\n';
    write_report(log, cmp.report);
    return cmp.report.passed() ? kExitPass : kExitCheckFailed;
}

struct BoundsRequest {
    double tau{};
    double r{};
    double alpha{};
    std::optional<double> t_c;
    bool json{false};
};

/// Design report: admissible slot period and, for a given T_c, threshold.
inline int run_bounds(const BoundsRequest& req, std::ostream& out) {
    SystemParams<double> raw;
    raw.tau = req.tau;
    raw.r = req.r;
    raw.alpha = req.alpha;
    raw.t_c = req.t_c.value_or(1.0);
    const auto p = validate(raw);
    const double t_c_max = tc_upper_bound(p);
    const double gamma = contraction_ratio(p);

    nlohmann::json doc;
    doc["tau"] = req.tau;
    doc["r"] = req.r;
    doc["alpha"] = req.alpha;
    doc["t_c_max"] = t_c_max;
    doc["min_slot_rate_hz"] = 1.0 / t_c_max;
    doc["gamma"] = gamma;
    doc["tau_d"] = t_c_max;

    int status = kExitPass;
    std::optional<std::string> failure;
    if (req.t_c) {
        doc["t_c"] = *req.t_c;
        try {
            doc["delta_max"] = delta_upper_bound(p);
        } catch (const Error& e) {
            if (e.code() != Errc::ActuatorTooSlow) throw;
            failure = e.what();
            doc["error"] = "ActuatorTooSlow";
            status = kExitCheckFailed;
        }
    }

    if (req.json) {
        out << doc.dump(2) << '\n';
        return status;
    }
    out << std::setprecision(6);
    out << "t_c_max   " << t_c_max << " s\n";
    out << "min rate  " << 1.0 / t_c_max << " Hz\n";
    if (req.t_c) {
        out << "t_c       " << *req.t_c << " s\n";
        out << "gamma     " << gamma << '\n';
        out << "tau_d     " << t_c_max << " s\n";
        if (failure) {
            out << *failure << '\n';
        } else {
            out << "delta_max " << doc["delta_max"].get<double>() << '\n';
        }
    }
    return status;
}

} // namespace pelletctl::app
