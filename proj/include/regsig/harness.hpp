#pragma once

#include "regsig/baselines.hpp"
#include "regsig/cmaes.hpp"
#include "regsig/demand.hpp"
#include "regsig/dqn.hpp"
#include "regsig/features.hpp"
#include "regsig/ppo.hpp"
#include "regsig/simulator.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace regsig {

/// Controller choice plus the hyperparameters of every kind; only the ones of `type` are used.
struct ControllerConfig {
    /// actuated, fixed, regulatable, dqn, drq, drsq, drhq, ppo, cmaes
    std::string type = "actuated";
    DqnConfig dqn;
    PpoConfig ppo;
    CmaConfig cma;
    std::size_t cma_fitness_episodes = 1;  // rollouts averaged per candidate
    double cma_x0 = 1.0;                   // start point, every coordinate
    ActuatedConfig actuated;
    std::vector<std::size_t> actuated_order;  // empty: protected lefts first
    std::optional<FixedTimePlan> plan;        // empty: equal splits of fixed_green
    double fixed_green = 30.0;
    std::filesystem::path theta_path;         // for "regulatable"

    double gamma() const { return dqn.gamma; }
};

struct ScenarioConfig {
    std::string name;
    std::shared_ptr<const IntersectionLayout> layout;
    DemandProfile demand;
    std::filesystem::path demand_path;
    SimParams sim;
    FeatureScales scales;
    ControllerConfig controller;
    std::size_t episodes = 1;
    std::vector<std::uint64_t> seeds{1};
    std::size_t trial_threads = 1;
    std::filesystem::path metrics_path;    // empty: not written by run_experiment
    std::filesystem::path checkpoint_dir;  // empty: no checkpoints
};

IntersectionLayout layout_from_json(const nlohmann::json& j);
/// Relative paths (demand, theta) resolve against `base_dir`.
ScenarioConfig scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Replaces the controller section's type (keeps other settings).
void set_controller(ScenarioConfig& config, const std::string& type);

struct MetricRow {
    std::uint64_t seed = 0;
    std::size_t episode = 0;
    std::string controller;
    double avg_delay = 0.0;
    double total_delay = 0.0;
    std::size_t vehicles = 0;
    double discounted_return = 0.0;
};

inline constexpr const char* kMetricsHeader = "seed,episode,controller,avg_delay,total_delay,vehicles,discounted_return";

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(std::istream& in);
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);

/// Environment seed of one episode of one trial.
std::uint64_t episode_seed(std::uint64_t trial_seed, std::size_t episode);

Simulator make_simulator(const ScenarioConfig& config);

struct TrialResult {
    std::vector<MetricRow> rows;
    std::optional<ThetaPrime> theta;  // learned or tuned precedence parameters, when the controller has them
};

/// Runs config.episodes episodes of the configured controller for one trial seed. For "cmaes" an
/// episode is one generation; its row is a held-out rollout of the current mean.
TrialResult run_trial(const ScenarioConfig& config, std::uint64_t seed);

/// All trials (possibly in parallel), rows in seed order; writes metrics_path when set.
std::vector<MetricRow> run_experiment(const ScenarioConfig& config);

struct AggregateRow {
    std::string controller;
    std::size_t episode = 0;
    std::size_t trials = 0;
    double mean = 0.0;
    std::optional<double> half_width;  // 95% t interval; absent with one trial
};

/// Mean average delay and its 95% CI per (controller, episode).
std::vector<AggregateRow> aggregate(const std::vector<MetricRow>& rows);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

/// Two-sided 95% t-interval half width of `values` (needs at least two).
double t_half_width(const std::vector<double>& values);

struct Comparison {
    double candidate_mean = 0.0;
    double baseline_mean = 0.0;
    std::optional<double> reduction_percent;  // absent when the baseline mean is 0
};

/// Percent reduction in average delay over the last `final_window` episodes of each run.
/// Both runs must cover the same seeds.
Comparison compare(const std::vector<MetricRow>& candidate, const std::vector<MetricRow>& baseline,
                   std::size_t final_window = 1);

} // namespace regsig
