#include "regsig/error.hpp"
#include "regsig/harness.hpp"
#include "regsig/layouts.hpp"
#include "regsig/regulatable.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace regsig;
namespace fs = std::filesystem;

namespace {

int cmd_run(const fs::path& config_path, const std::vector<std::uint64_t>& seeds, const std::string& controller,
            std::size_t episodes, const fs::path& out_dir, const fs::path& metrics, std::size_t threads,
            const fs::path& theta) {
    ScenarioConfig config = load_scenario(config_path);
    if (!controller.empty()) {
        if (controller == "regulatable" && !theta.empty()) config.controller.theta_path = theta;
        config.controller.type = controller;
        if (controller == "regulatable" && config.controller.theta_path.empty())
            throw regsig::Error("--controller regulatable needs --theta");
    }
    if (!seeds.empty()) config.seeds = seeds;
    if (episodes > 0) config.episodes = episodes;
    if (threads > 0) config.trial_threads = threads;
    if (!out_dir.empty()) {
        config.metrics_path = out_dir / (config.name + "_" + config.controller.type + ".csv");
        config.checkpoint_dir = out_dir / "checkpoints";
    }
    if (!metrics.empty()) config.metrics_path = metrics;

    const auto rows = run_experiment(config);
    if (config.metrics_path.empty()) {
        write_metrics_csv(std::cout, rows);
    } else {
        std::cerr << "wrote " << rows.size() << " rows to " << config.metrics_path.string() << '\n';
    }
    return 0;
}

int cmd_aggregate(const fs::path& metrics, const fs::path& out) {
    const auto agg = aggregate(read_metrics_csv(metrics));
    if (out.empty()) {
        write_aggregate_csv(std::cout, agg);
    } else {
        std::ofstream f(out);
        if (!f) throw regsig::Error("cannot write " + out.string());
        write_aggregate_csv(f, agg);
    }
    return 0;
}

int cmd_compare(const fs::path& candidate, const fs::path& baseline, std::size_t window) {
    const Comparison c = compare(read_metrics_csv(candidate), read_metrics_csv(baseline), window);
    std::printf("candidate mean delay: %.4f s/veh\n", c.candidate_mean);
    std::printf("baseline mean delay:  %.4f s/veh\n", c.baseline_mean);
    if (c.reduction_percent) std::printf("reduction: %.2f%%\n", *c.reduction_percent);
    else std::printf("reduction: undefined (baseline mean delay is 0)\n");
    return 0;
}

int cmd_audit(const fs::path& config_path, const fs::path& theta_path, std::size_t draws, std::size_t samples,
              std::uint64_t seed, bool verbose) {
    const ScenarioConfig config = load_scenario(config_path);
    const IntersectionLayout& layout = *config.layout;
    Rng rng = derive_rng(seed, {0x415544ULL});
    const auto states = random_observations(layout, samples, rng);

    std::vector<ThetaPrime> thetas;
    if (!theta_path.empty()) {
        thetas.push_back(load_theta(theta_path, layout));
    } else {
        for (std::size_t d = 0; d < draws; ++d) thetas.push_back(random_theta(layout, rng));
    }

    std::size_t mixed = 0;
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        const MonotonicityReport report = monotonicity_audit(thetas[k], states);
        mixed += report.mixed();
        if (verbose || report.mixed() > 0) {
            for (const auto& e : report.entries) {
                if (!verbose && e.verdict != SignVerdict::Mixed) continue;
                std::printf("theta %zu combo %s phase %d var s%zu: %s (+%zu -%zu 0:%zu)\n", k,
                            layout.combo_name(layout.combos[e.combo]).c_str(), layout.phases[e.phase].id, e.var + 1,
                            to_string(e.verdict).c_str(), e.positive, e.negative, e.zero);
            }
        }
    }
    std::printf("%zu parameter vectors, %zu states: %zu mixed variables\n", thetas.size(), states.size(), mixed);
    return mixed == 0 ? 0 : 1;
}

int cmd_explain(const fs::path& config_path, const fs::path& theta_path, std::uint64_t seed, std::size_t step) {
    const ScenarioConfig config = load_scenario(config_path);
    const FeatureEncoder encoder(*config.layout, config.scales);
    const ThetaPrime theta = load_theta(theta_path, *config.layout);
    Simulator env = make_simulator(config);
    Observation obs = env.reset(seed);
    for (std::size_t t = 0; t < step && !env.done(); ++t)
        obs = env.step(select_action(encoder.scaled(obs), theta)).observation;
    const Observation s = encoder.scaled(obs);
    const std::size_t chosen = select_action(s, theta);
    std::printf("decision %zu at t = %.1f s\n", step, obs.clock);
    std::fputs(explain(s, theta, chosen, obs.current_combo).to_text(*config.layout).c_str(), stdout);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regulatable traffic signal control experiments"};
    app.require_subcommand(1);

    fs::path config, out_dir, metrics, theta;
    std::vector<std::uint64_t> seeds;
    std::string controller;
    std::size_t episodes = 0, threads = 0;
    auto* run = app.add_subcommand("run", "Run the configured controller over all trial seeds");
    run->add_option("-c,--config", config, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--seeds", seeds, "Trial seeds (overrides the config)")->delimiter(',');
    run->add_option("--controller", controller, "Controller override");
    run->add_option("--episodes", episodes, "Episodes per trial (overrides the config)");
    run->add_option("-o,--out", out_dir, "Output directory for metrics and checkpoints");
    run->add_option("--metrics", metrics, "Metrics CSV path");
    run->add_option("--threads", threads, "Trials run in parallel");
    run->add_option("--theta", theta, "Parameter file for --controller regulatable");

    fs::path agg_in, agg_out;
    auto* agg = app.add_subcommand("aggregate", "Per-episode mean and 95% CI of a metrics CSV");
    agg->add_option("metrics", agg_in, "Metrics CSV")->required()->check(CLI::ExistingFile);
    agg->add_option("-o,--out", agg_out, "Output CSV (default stdout)");

    fs::path candidate, baseline;
    std::size_t window = 1;
    auto* cmp = app.add_subcommand("compare", "Percent delay reduction of a candidate over a baseline");
    cmp->add_option("candidate", candidate, "Candidate metrics CSV")->required()->check(CLI::ExistingFile);
    cmp->add_option("baseline", baseline, "Baseline metrics CSV")->required()->check(CLI::ExistingFile);
    cmp->add_option("--window", window, "Final episodes averaged per seed");

    std::size_t draws = 50, samples = 1000;
    std::uint64_t seed = 1;
    bool verbose = false;
    auto* audit = app.add_subcommand("audit-monotonicity", "Sign audit of dG/ds over sampled states");
    audit->add_option("-c,--config", config, "Scenario file (layout)")->required()->check(CLI::ExistingFile);
    audit->add_option("--theta", theta, "Parameter file (default: random draws)");
    audit->add_option("--draws", draws, "Random parameter vectors when no --theta is given");
    audit->add_option("--samples", samples, "Sampled states");
    audit->add_option("--seed", seed, "Sampling seed");
    audit->add_flag("-v,--verbose", verbose, "Print every variable");

    std::size_t step = 0;
    auto* exp = app.add_subcommand("explain", "Per-term breakdown of one decision");
    exp->add_option("-c,--config", config, "Scenario file")->required()->check(CLI::ExistingFile);
    exp->add_option("--theta", theta, "Parameter file")->required()->check(CLI::ExistingFile);
    exp->add_option("--seed", seed, "Episode seed");
    exp->add_option("--step", step, "Decision index to explain");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config, seeds, controller, episodes, out_dir, metrics, threads, theta);
        if (*agg) return cmd_aggregate(agg_in, agg_out);
        if (*cmp) return cmd_compare(candidate, baseline, window);
        if (*audit) return cmd_audit(config, theta, draws, samples, seed, verbose);
        if (*exp) return cmd_explain(config, theta, seed, step);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
