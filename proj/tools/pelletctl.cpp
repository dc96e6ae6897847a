#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "pelletctl/app.hpp"
#include "pelletctl/error.hpp"
#include "pelletctl/io.hpp"

namespace {

int exit_code_for(pelletctl::Errc code) {
    using pelletctl::Errc;
    switch (code) {
        case Errc::ActuatorTooSlow:
        case Errc::TheoremHypothesisViolated:
        case Errc::HorizonTooShort:
            return pelletctl::app::kExitCheckFailed;
        default:
            return pelletctl::app::kExitUsage;
    }
}

} // namespace

int main(int argc, char** argv) {
    using namespace pelletctl;

    CLI::App cli{"Pellet-injection density control: simulate, verify and design"};
    cli.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string trajectory_path;
    std::optional<double> horizon;
    std::string tie_break;
    long seed = 0;

    const auto add_run_flags = [&](CLI::App* cmd, bool needs_out) {
        cmd->add_option("--config", config_path, "Scenario file")->required()->check(CLI::ExistingFile);
        auto* out = cmd->add_option("--out", out_dir, "Output directory");
        if (needs_out) out->capture_default_str();
        cmd->add_option("--horizon", horizon, "Override run.horizon [s]");
        cmd->add_option("--tie-break", tie_break, "Override variant.tie_break")
            ->check(CLI::IsMember({"pellet", "skip"}));
        cmd->add_option("--seed", seed, "Reserved; the engines are deterministic");
    };

    auto* simulate_cmd = cli.add_subcommand("simulate", "Run a scenario and check it");
    add_run_flags(simulate_cmd, true);

    auto* compare_cmd = cli.add_subcommand("compare", "Analytic engine against the numerical oracle");
    add_run_flags(compare_cmd, true);

    auto* verify_cmd = cli.add_subcommand("verify", "Re-check an existing trajectory.csv");
    add_run_flags(verify_cmd, false);
    verify_cmd->add_option("--trajectory", trajectory_path, "trajectory.csv to check")
        ->required()
        ->check(CLI::ExistingFile);

    app::BoundsRequest bounds;
    std::optional<double> tc;
    auto* bounds_cmd = cli.add_subcommand("bounds", "Admissible T_c and Delta for a plant");
    bounds_cmd->add_option("--tau", bounds.tau, "Confinement time [s]")->required();
    bounds_cmd->add_option("--r", bounds.r, "Reference density [m^-3]")->required();
    bounds_cmd->add_option("--alpha", bounds.alpha, "Density increase per pellet [m^-3]")->required();
    bounds_cmd->add_option("--tc", tc, "Slot period [s]");
    bounds_cmd->add_flag("--json", bounds.json, "Emit JSON");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = cli.exit(e);
        return rc == 0 ? 0 : app::kExitUsage;
    }

    try {
        if (bounds_cmd->parsed()) {
            bounds.t_c = tc;
            return app::run_bounds(bounds, std::cout);
        }

        auto cfg = load_scenario(config_path);
        app::Overrides overrides;
        overrides.horizon = horizon;
        if (!tie_break.empty()) overrides.tie = parse_tie_break(tie_break);
        app::apply(cfg, overrides);

        if (simulate_cmd->parsed()) {
            return app::run_simulate(cfg, out_dir, std::cout);
        }
        if (compare_cmd->parsed()) {
            return app::run_compare(cfg, out_dir, std::cout);
        }
        std::optional<std::filesystem::path> verify_out;
        if (verify_cmd->count("--out") > 0) verify_out = out_dir;
        return app::run_verify(cfg, trajectory_path, verify_out, std::cout);
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return app::kExitUsage;
    }
}
