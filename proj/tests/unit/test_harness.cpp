#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "regsig/error.hpp"
#include "regsig/harness.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace regsig;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = REGSIG_SCENARIO_DIR;

ScenarioConfig quick(const std::string& type, std::size_t episodes, std::vector<std::uint64_t> seeds) {
    ScenarioConfig c = load_scenario(kScenarios / "toy.json");
    c.metrics_path.clear();
    c.checkpoint_dir.clear();
    set_controller(c, type);
    c.episodes = episodes;
    c.seeds = std::move(seeds);
    c.controller.cma.generations = episodes;
    return c;
}

std::string csv(const std::vector<MetricRow>& rows) {
    std::ostringstream out;
    write_metrics_csv(out, rows);
    return out.str();
}

MetricRow row(std::uint64_t seed, std::size_t ep, double delay, const std::string& ctl = "x") {
    MetricRow r;
    r.seed = seed;
    r.episode = ep;
    r.controller = ctl;
    r.avg_delay = delay;
    return r;
}

} // namespace

TEST_CASE("shipped scenarios load") {
    for (const char* name : {"toy.json", "eight_phase.json", "ten_phase_high.json", "explicit_layout.json"}) {
        CAPTURE(name);
        const ScenarioConfig c = load_scenario(kScenarios / name);
        CHECK(c.layout);
        CHECK(c.demand.total() > 0);
        CHECK_FALSE(c.seeds.empty());
    }
}

TEST_CASE("config errors are reported") {
    nlohmann::json j = nlohmann::json::parse(R"({"name": "t", "layout": {"preset": "two-road"},
        "demand": "demand/toy.csv", "controller": {"type": "actuated"}, "bogus": 1})");
    CHECK_THROWS_AS(scenario_from_json(j, kScenarios), Error);
    j.erase("bogus");
    CHECK_NOTHROW(scenario_from_json(j, kScenarios));
    j["controller"]["type"] = "telepathic";
    CHECK_THROWS_AS(scenario_from_json(j, kScenarios), Error);
    j["controller"]["type"] = "fixed";
    j["controller"]["splits"] = nlohmann::json::parse(R"([{"combo": [2], "green": 10}, {"combo": [4], "green": 9}])");
    j["controller"]["cycle_length"] = 19;
    CHECK_THROWS_AS(scenario_from_json(j, kScenarios), Error);
}

TEST_CASE("row counts equal trials times episodes") {
    for (const char* type : {"actuated", "fixed", "dqn", "drhq", "ppo"}) {
        CAPTURE(type);
        const auto rows = run_experiment(quick(type, 3, {1, 2}));
        CHECK(rows.size() == 6);
        CHECK(rows.front().seed == 1);
        CHECK(rows.back().seed == 2);
    }
}

TEST_CASE("runs are reproducible to the byte") {
    for (const char* type : {"drsq", "cmaes"}) {
        CAPTURE(type);
        ScenarioConfig c = quick(type, 2, {3, 4});
        c.controller.cma_fitness_episodes = 1;
        c.trial_threads = 2;
        const std::string a = csv(run_experiment(c));
        c.trial_threads = 1;
        const std::string b = csv(run_experiment(c));
        CHECK(a == b);
    }
}

TEST_CASE("actuated control on zero demand has zero delay") {
    ScenarioConfig c = load_scenario(kScenarios / "eight_phase.json");
    c.metrics_path.clear();
    c.checkpoint_dir.clear();
    set_controller(c, "actuated");
    c.episodes = 1;
    c.seeds = {1};
    c.demand = load_demand(kScenarios / "demand" / "zero.csv", *c.layout);
    const auto rows = run_experiment(c);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].avg_delay == 0.0);
    CHECK(rows[0].vehicles == 0);
}

TEST_CASE("metrics files round-trip") {
    std::vector<MetricRow> rows{row(1, 0, 12.5, "dqn"), row(2, 0, -0.0, "dqn")};
    rows[0].total_delay = 1000.25;
    rows[0].vehicles = 80;
    rows[0].discounted_return = -3.5;
    const std::string text = csv(rows);
    CHECK(text.rfind(kMetricsHeader, 0) == 0);
    CHECK(text.find("-0.000000") == std::string::npos);
    std::istringstream in(text);
    const auto back = read_metrics_csv(in);
    REQUIRE(back.size() == 2);
    CHECK(back[0].avg_delay == 12.5);
    CHECK(back[0].vehicles == 80);
    CHECK(back[0].controller == "dqn");
    CHECK(csv(back) == text);
}

TEST_CASE("aggregation") {
    const auto constant = aggregate({row(1, 0, 5.0), row(2, 0, 5.0), row(3, 0, 5.0)});
    REQUIRE(constant.size() == 1);
    CHECK(constant[0].mean == 5.0);
    CHECK(*constant[0].half_width == 0.0);

    const auto two = aggregate({row(1, 0, 4.0), row(2, 0, 8.0)});
    CHECK(two[0].mean == 6.0);
    CHECK(two[0].trials == 2);
    CHECK_FALSE(aggregate({row(1, 0, 4.0)})[0].half_width.has_value());
}

TEST_CASE("95% intervals cover the mean about 95% of the time") {
    Rng rng = derive_rng(41, {1});
    std::normal_distribution<double> normal(3.0, 2.0);
    int covered = 0;
    const int trials = 1000;
    for (int k = 0; k < trials; ++k) {
        std::vector<double> v(6);
        double m = 0;
        for (double& x : v) m += x = normal(rng);
        m /= v.size();
        const double hw = t_half_width(v);
        covered += std::abs(m - 3.0) <= hw;
    }
    const double rate = covered / static_cast<double>(trials);
    // Binomial standard error at n = 1000 is about 0.007.
    CHECK(rate > 0.93);
    CHECK(rate < 0.97);
}

TEST_CASE("percent reduction") {
    const std::vector<MetricRow> base{row(1, 0, 10.0), row(2, 0, 10.0)};
    const std::vector<MetricRow> cand{row(1, 0, 8.0), row(2, 0, 8.0)};
    CHECK(*compare(base, base).reduction_percent == 0.0);
    CHECK(*compare(cand, base).reduction_percent == doctest::Approx(20.0));

    const std::vector<MetricRow> zero{row(1, 0, 0.0), row(2, 0, 0.0)};
    CHECK_FALSE(compare(cand, zero).reduction_percent.has_value());

    const std::vector<MetricRow> other{row(1, 0, 8.0), row(3, 0, 8.0)};
    CHECK_THROWS_AS(compare(other, base), Error);

    // Window: the mean of each seed's last two episodes.
    const std::vector<MetricRow> run{row(1, 0, 100.0), row(1, 1, 6.0), row(1, 2, 4.0)};
    const std::vector<MetricRow> ref{row(1, 0, 10.0), row(1, 1, 10.0), row(1, 2, 10.0)};
    CHECK(*compare(run, ref, 2).reduction_percent == doctest::Approx(50.0));
}

TEST_CASE("episode seeds are distinct and stable") {
    CHECK(episode_seed(1, 0) == episode_seed(1, 0));
    CHECK(episode_seed(1, 0) != episode_seed(1, 1));
    CHECK(episode_seed(1, 0) != episode_seed(2, 0));
}
