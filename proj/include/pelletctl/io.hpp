#pragma once

// Scenario files and CSV output.
//
// Scenario grammar: one `section.key = value` per line, `#` starts a comment,
// blank lines are ignored. Numbers use C locale syntax (7e19, 0.01, inf).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pelletctl/controller.hpp"
#include "pelletctl/error.hpp"
#include "pelletctl/oracle.hpp"
#include "pelletctl/params.hpp"
#include "pelletctl/simulator.hpp"
#include "pelletctl/verifier.hpp"

namespace pelletctl {

struct ScenarioConfig {
    SystemParams<double> params;
    std::optional<double> x0;
    std::optional<double> n_e0;
    double xi0{0};
    double t0{0};
    double horizon{2.0};
    std::optional<double> dt_sample;   // default T_c / 10
    std::optional<double> settle_tol;  // default 1e-3 alpha
    bool oracle_enabled{false};
    OracleConfig<double> oracle;
    double oracle_tol_x_rel{1e-8};   // times r
    double oracle_tol_xi_rel{1e-8};  // times r T_c
    TieBreak tie{TieBreak::Pellet};

    [[nodiscard]] double initial_x() const { return x0 ? *x0 : params.r - *n_e0; }
    [[nodiscard]] double sample_step() const { return dt_sample ? *dt_sample : params.t_c / 10; }
    [[nodiscard]] double settle_tolerance() const {
        return settle_tol ? *settle_tol : 1e-3 * params.alpha;
    }
    [[nodiscard]] CompareTolerance compare_tolerance() const {
        return {oracle_tol_x_rel * params.r, oracle_tol_xi_rel * params.r * params.t_c};
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::optional<double> parse_double(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    double value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty()) {
        return std::nullopt;
    }
    return value;
}

inline std::optional<long> parse_long(std::string_view text) {
    text = trim(text);
    long value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty()) {
        return std::nullopt;
    }
    return value;
}

[[noreturn]] inline void config_error(std::size_t line, const std::string& what) {
    throw Error(Errc::ConfigParseError, "line " + std::to_string(line) + ": " + what);
}

} // namespace detail

[[nodiscard]] inline TieBreak parse_tie_break(std::string_view text) {
    if (text == "pellet") {
        return TieBreak::Pellet;
    }
    if (text == "skip") {
        return TieBreak::Skip;
    }
    throw Error(Errc::ConfigParseError, "tie_break must be pellet or skip, got '" +
                                            std::string(text) + "'");
}

[[nodiscard]] inline ScenarioConfig parse_scenario(std::istream& in) {
    ScenarioConfig cfg;
    std::map<std::string, std::size_t> seen;
    std::string raw;
    std::size_t line_no = 0;

    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            detail::config_error(line_no, "expected 'key = value'");
        }
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            detail::config_error(line_no, "empty key or value");
        }
        if (const auto it = seen.find(key); it != seen.end()) {
            detail::config_error(line_no, "duplicate key '" + key + "' (first on line " +
                                              std::to_string(it->second) + ")");
        }
        seen.emplace(key, line_no);

        const auto number = [&]() {
            const auto v = detail::parse_double(value);
            if (!v) {
                detail::config_error(line_no, "'" + key + "' expects a number, got '" +
                                                  std::string(value) + "'");
            }
            return *v;
        };

        if (key == "params.tau") cfg.params.tau = number();
        else if (key == "params.r") cfg.params.r = number();
        else if (key == "params.alpha") cfg.params.alpha = number();
        else if (key == "params.t_c") cfg.params.t_c = number();
        else if (key == "params.delta") cfg.params.delta = number();
        else if (key == "params.pellet_particles") cfg.params.pellet_particles = number();
        else if (key == "params.conversion") cfg.params.conversion = number();
        else if (key == "initial.x0") cfg.x0 = number();
        else if (key == "initial.n_e0") cfg.n_e0 = number();
        else if (key == "initial.xi0") cfg.xi0 = number();
        else if (key == "initial.t0") cfg.t0 = number();
        else if (key == "run.horizon") cfg.horizon = number();
        else if (key == "run.dt_sample") cfg.dt_sample = number();
        else if (key == "run.settle_tol") cfg.settle_tol = number();
        else if (key == "oracle.h") cfg.oracle.h = number();
        else if (key == "oracle.tol_x_rel") cfg.oracle_tol_x_rel = number();
        else if (key == "oracle.tol_xi_rel") cfg.oracle_tol_xi_rel = number();
        else if (key == "oracle.enabled") {
            if (value == "true" || value == "1") cfg.oracle_enabled = true;
            else if (value == "false" || value == "0") cfg.oracle_enabled = false;
            else detail::config_error(line_no, "oracle.enabled expects true or false");
        } else if (key == "oracle.scheme") {
            if (value == "rk4") cfg.oracle.scheme = Scheme::RK4;
            else if (value == "euler") cfg.oracle.scheme = Scheme::Euler;
            else detail::config_error(line_no, "oracle.scheme expects rk4 or euler");
        } else if (key == "variant.tie_break") {
            try {
                cfg.tie = parse_tie_break(value);
            } catch (const Error&) {
                detail::config_error(line_no, "variant.tie_break expects pellet or skip");
            }
        } else {
            detail::config_error(line_no, "unknown key '" + key + "'");
        }
    }

    for (const char* required : {"params.tau", "params.r", "params.alpha", "params.t_c",
                                 "params.delta"}) {
        if (!seen.count(required)) {
            detail::config_error(line_no, std::string("missing required key '") + required + "'");
        }
    }
    if (cfg.x0.has_value() == cfg.n_e0.has_value()) {
        detail::config_error(line_no, "give exactly one of initial.x0 and initial.n_e0");
    }
    return cfg;
}

[[nodiscard]] inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::IoError, "cannot open scenario '" + path + "'");
    }
    return parse_scenario(in);
}

/// Shortest decimal that parses back to the same double.
inline std::string format_exact(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

inline constexpr std::string_view kTrajectoryHeader = "t,j,x,xi,T,n_e,event";
inline constexpr std::string_view kEnvelopeHeader = "t,lower,upper";
inline constexpr std::string_view kCompareHeader =
    "t,j,x_analytic,x_numeric,dx,xi_analytic,xi_numeric,dxi,kind_analytic,kind_numeric";
inline constexpr std::string_view kReportHeader = "check,status,margin,tolerance,t,j,note";

inline void write_trajectory_csv(std::ostream& os, const std::vector<Sample<double>>& rows) {
    os << kTrajectoryHeader << '\n';
    for (const auto& s : rows) {
        os << format_exact(s.t) << ',' << s.j << ',' << format_exact(s.x) << ','
           << format_exact(s.xi) << ',' << format_exact(s.timer) << ',' << format_exact(s.n_e)
           << ',' << to_string(s.event) << '\n';
    }
}

[[nodiscard]] inline std::vector<Sample<double>> read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != kTrajectoryHeader) {
        throw Error(Errc::ConfigParseError, "line 1: expected header '" +
                                                std::string(kTrajectoryHeader) + "'");
    }
    std::vector<Sample<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        std::vector<std::string_view> cells;
        std::string_view rest = line;
        for (;;) {
            const auto comma = rest.find(',');
            cells.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (cells.size() != 7) {
            detail::config_error(line_no, "expected 7 columns");
        }
        Sample<double> s;
        const auto num = [&](std::size_t k) {
            const auto v = detail::parse_double(cells[k]);
            if (!v) detail::config_error(line_no, "bad number in column " + std::to_string(k + 1));
            return *v;
        };
        s.t = num(0);
        const auto j = detail::parse_long(cells[1]);
        if (!j) detail::config_error(line_no, "bad jump index");
        s.j = *j;
        s.x = num(2);
        s.xi = num(3);
        s.timer = num(4);
        s.n_e = num(5);
        const auto ev = detail::trim(cells[6]);
        if (ev == "flow") s.event = SampleEvent::Flow;
        else if (ev == "skip") s.event = SampleEvent::Skip;
        else if (ev == "pellet") s.event = SampleEvent::Pellet;
        else detail::config_error(line_no, "event must be flow, skip or pellet");
        rows.push_back(s);
    }
    return rows;
}

/// Rebuilds arcs and jumps from sampled rows: consecutive (pre, post) rows
/// with a skip/pellet event are one jump; flow rows in between are interior
/// samples and carry no extra information.
[[nodiscard]] inline Trajectory<double> trajectory_from_samples(
    const std::vector<Sample<double>>& rows, const SystemParams<double>& params, TieBreak tie) {
    if (rows.empty()) {
        throw Error(Errc::ConfigParseError, "trajectory has no rows");
    }
    const auto state = [](const Sample<double>& s) { return HybridState<double>{s.x, s.xi, s.timer}; };
    Trajectory<double> traj;
    traj.params = params;
    traj.tie = tie;
    traj.initial_state = state(rows.front());
    traj.horizon = rows.back().t;

    double t = rows.front().t;
    long j = rows.front().j;
    HybridState<double> q = traj.initial_state;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.event == SampleEvent::Flow) {
            if (i + 1 == rows.size()) {
                traj.arcs.push_back({t, row.t, j, q, state(row)});
            }
            continue;
        }
        if (i + 1 >= rows.size() || rows[i + 1].event != row.event || rows[i + 1].t != row.t ||
            rows[i + 1].j != row.j + 1) {
            throw Error(Errc::ConfigParseError,
                        "row " + std::to_string(i + 2) + ": jump row without its post-jump row");
        }
        const auto& post = rows[i + 1];
        const auto kind = row.event == SampleEvent::Pellet ? JumpKind::Pellet : JumpKind::Skip;
        traj.arcs.push_back({t, row.t, j, q, state(row)});
        traj.jumps.push_back({row.t, row.j, kind, state(row), state(post)});
        t = post.t;
        j = post.j;
        q = state(post);
        ++i;
        if (i + 1 == rows.size()) {
            traj.arcs.push_back({t, t, j, q, q});
        }
    }
    if (traj.arcs.empty()) {
        traj.arcs.push_back({t, t, j, q, q});
    }
    return traj;
}

/// Interior rows are not needed to rebuild a trajectory, so they are checked
/// separately: each must sit on the closed-form flow from its arc start.
/// The xi deviation is divided by T_c to share the unit of x.
[[nodiscard]] inline CheckResult check_sample_flow(const std::vector<Sample<double>>& rows,
                                                   const Trajectory<double>& traj) {
    const auto p = validate(traj.params);
    const double tol = kNumericalRelativeTol * p.r();
    detail::WorstCase worst("samples.flow", 0.0);
    long checked = 0;
    for (const auto& row : rows) {
        if (row.event != SampleEvent::Flow || row.j < 0 ||
            row.j >= static_cast<long>(traj.arcs.size())) {
            continue;
        }
        const auto& arc = traj.arcs[static_cast<std::size_t>(row.j)];
        const double dt = row.t - arc.t_start;
        if (dt < 0) {
            worst.observe(-p.r(), row.t, row.j);
            continue;
        }
        ++checked;
        const double dx = std::abs(row.x - flow_x(arc.start.x, dt, p));
        const double dxi = std::abs(row.xi - flow_xi(arc.start.x, arc.start.xi, dt, p)) / p.t_c();
        worst.observe(tol - std::max(dx, dxi), row.t, row.j);
    }
    auto c = worst.done();
    c.note = std::to_string(checked) + " rows within " + format_number(tol);
    return c;
}

inline void write_envelope_csv(std::ostream& os, const ValidatedParams<double>& p, double x0,
                               double horizon, double dt) {
    os << kEnvelopeHeader << '\n';
    const auto n = static_cast<long>(std::ceil(horizon / dt - 1e-9));
    for (long k = 0; k <= n; ++k) {
        const double t = k == n ? horizon : static_cast<double>(k) * dt;
        const auto b = envelope_unchecked(p, x0, t);
        os << format_exact(t) << ',' << format_exact(b.lower) << ',' << format_exact(b.upper)
           << '\n';
    }
}

inline void write_report_csv(std::ostream& os, const VerificationReport& report) {
    os << kReportHeader << '\n';
    for (const auto& c : report.checks) {
        std::string note = c.note;
        for (auto& ch : note) {
            if (ch == ',') ch = ';';
        }
        os << c.name << ',' << (c.passed ? "pass" : "fail") << ',' << format_exact(c.margin) << ','
           << format_exact(c.tolerance) << ',' << format_exact(c.t) << ',' << c.j << ',' << note
           << '\n';
    }
}

inline void write_compare_csv(std::ostream& os, const Comparison& cmp) {
    os << kCompareHeader << '\n';
    for (const auto& row : cmp.rows) {
        const auto kind = [&](JumpKind k) { return row.is_jump ? to_string(k) : "flow"; };
        os << format_exact(row.t) << ',' << row.j << ',' << format_exact(row.x_a) << ','
           << format_exact(row.x_b) << ',' << format_exact(row.x_a - row.x_b) << ','
           << format_exact(row.xi_a) << ',' << format_exact(row.xi_b) << ','
           << format_exact(row.xi_a - row.xi_b) << ',' << kind(row.kind_a) << ','
           << kind(row.kind_b) << '\n';
    }
}

} // namespace pelletctl
