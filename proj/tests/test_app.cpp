#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "pelletctl/app.hpp"

using namespace pelletctl;
namespace fs = std::filesystem;

namespace {

class AppTest : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / ("pelletctl_" + std::string(info->name()));
        fs::remove_all(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    static ScenarioConfig scenario(const char* name) {
        return load_scenario(std::string(PELLETCTL_SCENARIO_DIR) + "/" + name);
    }

    static std::string first_line(const fs::path& file) {
        std::ifstream in(file);
        std::string line;
        std::getline(in, line);
        return line;
    }
};

} // namespace

TEST_F(AppTest, SimulateWritesOutputs) {
    std::ostringstream log;
    EXPECT_EQ(app::run_simulate(scenario("fig2_fast.conf"), dir, log), app::kExitPass);
    EXPECT_EQ(first_line(dir / "trajectory.csv"), kTrajectoryHeader);
    EXPECT_EQ(first_line(dir / "envelope.csv"), kEnvelopeHeader);
    EXPECT_EQ(first_line(dir / "report.csv"), kReportHeader);
    EXPECT_TRUE(fs::exists(dir / "report.txt"));
    EXPECT_NE(log.str().find("slots 200"), std::string::npos);
}

TEST_F(AppTest, VerifyRechecksWrittenTrajectory) {
    std::ostringstream log;
    auto cfg = scenario("fig2_slow.conf");
    ASSERT_EQ(app::run_simulate(cfg, dir, log), app::kExitPass);
    EXPECT_EQ(app::run_verify(cfg, dir / "trajectory.csv", dir, log), app::kExitPass);
    EXPECT_TRUE(fs::exists(dir / "verify_report.txt"));
    EXPECT_TRUE(fs::exists(dir / "verify_report.csv"));
}

TEST_F(AppTest, VerifyCatchesTamperedTrajectory) {
    std::ostringstream log;
    auto cfg = scenario("fig2_fast.conf");
    ASSERT_EQ(app::run_simulate(cfg, dir, log), app::kExitPass);

    // Push one mid-run sample well above the upper envelope.
    std::ifstream in(dir / "trajectory.csv");
    std::ostringstream edited;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        if (++n == 1500) {
            std::istringstream cells(line);
            std::string t, j;
            std::getline(cells, t, ',');
            std::getline(cells, j, ',');
            line = t + "," + j + ",6e19,0,0.005,1e19,flow";
        }
        edited << line << '\n';
    }
    in.close();
    std::ofstream(dir / "trajectory.csv") << edited.str();
    EXPECT_EQ(app::run_verify(cfg, dir / "trajectory.csv", std::nullopt, log),
              app::kExitCheckFailed);
}

TEST_F(AppTest, OverridesApply) {
    auto cfg = scenario("fig2_fast.conf");
    app::apply(cfg, {0.5, TieBreak::Skip});
    EXPECT_EQ(cfg.horizon, 0.5);
    EXPECT_EQ(cfg.tie, TieBreak::Skip);
    std::ostringstream log;
    // Too short to reach the settle estimate: the ultimate check fails.
    EXPECT_EQ(app::run_simulate(cfg, dir, log), app::kExitCheckFailed);
}

TEST_F(AppTest, CompareAgainstOracle) {
    std::ostringstream log;
    EXPECT_EQ(app::run_compare(scenario("fig2_fast.conf"), dir, log), app::kExitPass);
    EXPECT_EQ(first_line(dir / "compare.csv"), kCompareHeader);
    EXPECT_TRUE(fs::exists(dir / "compare_report.csv"));
    EXPECT_NE(log.str().find("jaccard 1"), std::string::npos);
}

TEST_F(AppTest, CompareNeedsOracle) {
    auto cfg = scenario("fig2_fast.conf");
    cfg.oracle_enabled = false;
    std::ostringstream log;
    EXPECT_THROW((void)app::run_compare(cfg, dir, log), Error);
}

TEST(AppBounds, TextReport) {
    std::ostringstream out;
    EXPECT_EQ(app::run_bounds({0.1, 7e19, 1e19, 0.01, false}, out), app::kExitPass);
    EXPECT_NE(out.str().find("t_c_max   0.0154151"), std::string::npos);
    EXPECT_NE(out.str().find("min rate  64.8716"), std::string::npos);
    EXPECT_NE(out.str().find("delta_max 1.00803e+16"), std::string::npos);
}

TEST(AppBounds, JsonReport) {
    std::ostringstream out;
    EXPECT_EQ(app::run_bounds({0.1, 7e19, 1e19, 0.01, true}, out), app::kExitPass);
    const auto doc = nlohmann::json::parse(out.str());
    EXPECT_NEAR(doc["t_c_max"].get<double>(), 0.015415067982725830, 1e-15);
    EXPECT_NEAR(doc["delta_max"].get<double>(), 1.00802672446938789e16, 1e3);
    EXPECT_NEAR(doc["gamma"].get<double>(), 6.0 / 7.0, 1e-15);
}

TEST(AppBounds, SlowActuator) {
    std::ostringstream out;
    EXPECT_EQ(app::run_bounds({0.1, 7e19, 1e19, 0.02, true}, out), app::kExitCheckFailed);
    EXPECT_EQ(nlohmann::json::parse(out.str())["error"], "ActuatorTooSlow");
    std::ostringstream text;
    EXPECT_EQ(app::run_bounds({0.1, 7e19, 1e19, 0.02, false}, text), app::kExitCheckFailed);
    EXPECT_NE(text.str().find("64.8716"), std::string::npos);
}

TEST(AppBounds, WithoutSlotPeriod) {
    std::ostringstream out;
    EXPECT_EQ(app::run_bounds({0.1, 7e19, 1e19, std::nullopt, false}, out), app::kExitPass);
    EXPECT_EQ(out.str().find("delta_max"), std::string::npos);
}

TEST(AppBounds, InvalidParameters) {
    std::ostringstream out;
    try {
        (void)app::run_bounds({0.1, 1e19, 1e19, 0.01, false}, out);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ReferenceTooSmall);
    }
}
