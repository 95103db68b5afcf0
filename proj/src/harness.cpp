#include "regsig/harness.hpp"

#include "regsig/error.hpp"
#include "regsig/parallel.hpp"
#include "regsig/layouts.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace regsig {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
    if (!j.is_object()) throw Error(section + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw Error(section + ": unknown key '" + key + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::vector<ClearanceCase> read_cases(const json& j) {
    std::vector<ClearanceCase> out;
    for (const auto& c : j) out.push_back(clearance_case_from_string(c.get<std::string>()));
    return out;
}

std::vector<std::size_t> read_combo_list(const json& j, const IntersectionLayout& layout) {
    std::vector<std::size_t> out;
    for (const auto& ids : j) out.push_back(find_combo(layout, ids.get<std::vector<int>>()).index);
    return out;
}

void read_clearance_durations(const json& c, ClearanceSpec& spec) {
    read(c, "full", spec.full_duration);
    read(c, "partial", spec.partial_duration);
    read(c, "permissive", spec.permissive_duration);
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    // "-0.000000" and "0.000000" must not differ between runs that only differ in signed zeros.
    if (std::string(buf) == "-0.000000") return "0.000000";
    return buf;
}

} // namespace

IntersectionLayout layout_from_json(const json& j) {
    IntersectionLayout layout;
    if (j.contains("preset")) {
        check_keys(j, {"preset", "clearance"}, "layout");
        layout = preset_layout(j.at("preset").get<std::string>());
        if (j.contains("clearance")) {
            check_keys(j.at("clearance"), {"full", "partial", "permissive"}, "layout.clearance");
            read_clearance_durations(j.at("clearance"), layout.clearance);
        }
    } else {
        check_keys(j, {"roads", "lanes", "phases", "conflicts", "compatible", "allow_singletons", "combos", "clearance"},
                   "layout");
        layout.roads = j.at("roads").get<std::vector<std::string>>();
        for (const auto& l : j.at("lanes")) {
            check_keys(l, {"id", "road", "movement"}, "layout.lanes");
            layout.lanes.push_back(
                Lane{l.at("id").get<int>(), l.at("road").get<std::string>(), l.at("movement").get<std::string>()});
        }
        for (const auto& p : j.at("phases")) {
            check_keys(p, {"id", "road", "turn", "lanes"}, "layout.phases");
            layout.phases.push_back(Phase{p.at("id").get<int>(), p.at("road").get<std::string>(),
                                          turn_from_string(p.at("turn").get<std::string>()),
                                          p.at("lanes").get<std::vector<int>>()});
        }
        const std::size_t n = layout.phases.size();
        layout.conflicts = ConflictMatrix(n);
        auto position = [&](int id) {
            auto pos = layout.phase_position(id);
            if (!pos) throw Error("layout: unknown phase " + std::to_string(id));
            return *pos;
        };
        if (j.contains("conflicts") == j.contains("compatible"))
            throw Error("layout: give exactly one of 'conflicts' or 'compatible'");
        if (j.contains("compatible")) {
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < n; ++b) layout.conflicts.set(a, b, a != b);
            for (const auto& pr : j.at("compatible")) {
                const auto ids = pr.get<std::vector<int>>();
                if (ids.size() != 2) throw Error("layout: compatible entries are phase pairs");
                layout.conflicts.set_pair(position(ids[0]), position(ids[1]), false);
            }
        } else {
            for (const auto& pr : j.at("conflicts")) {
                const auto ids = pr.get<std::vector<int>>();
                if (ids.size() != 2) throw Error("layout: conflict entries are phase pairs");
                layout.conflicts.set_pair(position(ids[0]), position(ids[1]), true);
            }
        }
        read(j, "allow_singletons", layout.allow_singletons);

        if (j.contains("combos")) {
            for (const auto& c : j.at("combos")) {
                PhaseCombo combo;
                auto ids = c.get<std::vector<int>>();
                std::sort(ids.begin(), ids.end());
                for (int id : ids) combo.phases.push_back(position(id));
                layout.combos.push_back(combo);
            }
            std::sort(layout.combos.begin(), layout.combos.end(), [&](const PhaseCombo& x, const PhaseCombo& y) {
                return layout.combo_key(x) < layout.combo_key(y);
            });
            for (std::size_t k = 0; k < layout.combos.size(); ++k) layout.combos[k].index = k;
        } else {
            layout.combos = enumerate_combos(layout);
        }

        const json c = j.value("clearance", json::object());
        check_keys(c, {"full", "partial", "permissive", "default", "rule", "table"}, "layout.clearance");
        read_clearance_durations(c, layout.clearance);
        if (c.contains("default")) layout.clearance.default_cases = read_cases(c.at("default"));
        const std::string rule = c.value("rule", c.contains("table") || c.contains("default") ? "none" : "standard");
        if (rule == "standard") {
            fill_standard_clearance(layout);
        } else if (rule != "none") {
            throw Error("layout.clearance: unknown rule '" + rule + "'");
        }
        if (c.contains("table")) {
            for (const auto& e : c.at("table")) {
                check_keys(e, {"from", "to", "cases"}, "layout.clearance.table");
                auto from = e.at("from").get<std::vector<int>>();
                auto to = e.at("to").get<std::vector<int>>();
                std::sort(from.begin(), from.end());
                std::sort(to.begin(), to.end());
                layout.clearance.table[{from, to}] = read_cases(e.at("cases"));
            }
        }
    }

    const auto issues = validate_layout(layout);
    if (!issues.empty()) {
        std::string msg = "invalid layout:";
        for (const auto& s : issues) msg += "\n  " + s;
        throw Error(msg);
    }
    if (layout.combos.empty()) throw Error("layout has no phase combos");
    return layout;
}

namespace {

ControllerConfig controller_from_json(const json& j, const IntersectionLayout& layout, const fs::path& base) {
    check_keys(j,
               {"type", "gamma", "epsilon_start", "epsilon_end", "epsilon_episodes", "epsilon_shape", "minibatch",
                "replay_capacity", "target_sync", "distill_iterations", "hidden_units", "hidden_layers",
                "q_learning_rate", "theta_learning_rate", "reward_scale", "drq_online_target", "clip", "epochs",
                "ppo_minibatch", "actor_learning_rate", "critic_learning_rate", "critic_hidden_units",
                "critic_hidden_layers", "generations", "population", "sigma0", "threads", "fitness_episodes", "x0",
                "min_green", "gap_out", "max_green", "order", "splits", "cycle_length", "green", "theta"},
               "controller");
    ControllerConfig c;
    read(j, "type", c.type);
    static const std::set<std::string> kinds{"actuated", "fixed", "regulatable", "dqn", "drq",
                                             "drsq", "drhq", "ppo", "cmaes"};
    if (!kinds.count(c.type)) throw Error("controller: unknown type '" + c.type + "'");

    DqnConfig& d = c.dqn;
    read(j, "gamma", d.gamma);
    read(j, "epsilon_start", d.epsilon_start);
    read(j, "epsilon_end", d.epsilon_end);
    read(j, "epsilon_episodes", d.epsilon_episodes);
    if (j.contains("epsilon_shape")) {
        const auto shape = j.at("epsilon_shape").get<std::string>();
        if (shape == "step") d.epsilon_shape = EpsilonShape::Step;
        else if (shape == "linear") d.epsilon_shape = EpsilonShape::Linear;
        else throw Error("controller: epsilon_shape must be 'step' or 'linear'");
    }
    read(j, "minibatch", d.minibatch);
    read(j, "replay_capacity", d.replay_capacity);
    read(j, "target_sync", d.target_sync);
    read(j, "distill_iterations", d.distill_iterations);
    read(j, "hidden_units", d.hidden_units);
    read(j, "hidden_layers", d.hidden_layers);
    read(j, "q_learning_rate", d.q_adam.learning_rate);
    read(j, "theta_learning_rate", d.theta_adam.learning_rate);
    read(j, "reward_scale", d.reward_scale);
    read(j, "drq_online_target", d.drq_online_target);
    if (!(d.gamma > 0 && d.gamma < 1)) throw Error("controller: gamma must lie in (0, 1)");

    PpoConfig& p = c.ppo;
    p.gamma = d.gamma;
    p.reward_scale = d.reward_scale;
    read(j, "clip", p.clip);
    read(j, "epochs", p.epochs);
    read(j, "ppo_minibatch", p.minibatch);
    read(j, "actor_learning_rate", p.actor_adam.learning_rate);
    read(j, "critic_learning_rate", p.critic_adam.learning_rate);
    read(j, "critic_hidden_units", p.critic_hidden_units);
    read(j, "critic_hidden_layers", p.critic_hidden_layers);

    read(j, "generations", c.cma.generations);
    read(j, "population", c.cma.lambda);
    read(j, "sigma0", c.cma.sigma0);
    read(j, "threads", c.cma.threads);
    read(j, "fitness_episodes", c.cma_fitness_episodes);
    read(j, "x0", c.cma_x0);
    if (c.cma_fitness_episodes == 0) throw Error("controller: fitness_episodes must be positive");

    read(j, "min_green", c.actuated.min_green);
    read(j, "gap_out", c.actuated.gap_out);
    read(j, "max_green", c.actuated.max_green);
    if (j.contains("order")) c.actuated_order = read_combo_list(j.at("order"), layout);

    read(j, "green", c.fixed_green);
    if (j.contains("splits")) {
        FixedTimePlan plan;
        for (const auto& s : j.at("splits")) {
            check_keys(s, {"combo", "green"}, "controller.splits");
            plan.splits.push_back(
                {find_combo(layout, s.at("combo").get<std::vector<int>>()).index, s.at("green").get<double>()});
        }
        if (!j.contains("cycle_length")) throw Error("controller: 'splits' needs 'cycle_length'");
        plan.cycle_length = j.at("cycle_length").get<double>();
        c.plan = plan;
    }
    if (j.contains("theta")) c.theta_path = resolve(base, j.at("theta").get<std::string>());
    if (c.type == "regulatable" && c.theta_path.empty()) throw Error("controller: 'regulatable' needs 'theta'");
    return c;
}

} // namespace

ScenarioConfig scenario_from_json(const json& j, const fs::path& base_dir) {
    check_keys(j,
               {"name", "layout", "demand", "demand_scale", "simulator", "scales", "controller", "episodes", "seeds",
                "trial_threads", "output"},
               "scenario");
    ScenarioConfig s;
    s.name = j.value("name", std::string("scenario"));
    s.layout = std::make_shared<const IntersectionLayout>(layout_from_json(j.at("layout")));

    s.demand_path = resolve(base_dir, j.at("demand").get<std::string>());
    if (!fs::exists(s.demand_path)) throw Error("demand file not found: " + s.demand_path.string());
    s.demand = load_demand(s.demand_path, *s.layout);
    if (j.contains("demand_scale")) s.demand = s.demand.scaled(j.at("demand_scale").get<std::uint32_t>());

    const json sim = j.value("simulator", json::object());
    check_keys(sim,
               {"link_length", "free_flow_speed", "saturation_headway", "permissive_headway_factor", "yellow",
                "min_phase", "detection_range", "cutoff_extra", "initial_combo"},
               "simulator");
    read(sim, "link_length", s.sim.link_length);
    read(sim, "free_flow_speed", s.sim.free_flow_speed);
    read(sim, "saturation_headway", s.sim.saturation_headway);
    read(sim, "permissive_headway_factor", s.sim.permissive_headway_factor);
    read(sim, "yellow", s.sim.yellow);
    read(sim, "min_phase", s.sim.min_phase);
    read(sim, "detection_range", s.sim.detection_range);
    read(sim, "cutoff_extra", s.sim.cutoff_extra);
    read(sim, "initial_combo", s.sim.initial_combo);
    for (double v : {s.sim.link_length, s.sim.free_flow_speed, s.sim.saturation_headway, s.sim.yellow,
                     s.sim.min_phase}) {
        if (!(v > 0)) throw Error("simulator: durations, lengths and speeds must be positive");
    }

    const json sc = j.value("scales", json::object());
    check_keys(sc, {"phase", "green_time"}, "scales");
    if (sc.contains("phase")) {
        const auto v = sc.at("phase").get<std::vector<double>>();
        if (v.size() != kStateVariables) throw Error("scales: 'phase' needs six entries");
        std::copy(v.begin(), v.end(), s.scales.phase.begin());
    }
    read(sc, "green_time", s.scales.green_time);

    s.controller = controller_from_json(j.value("controller", json::object()), *s.layout, base_dir);
    if (s.controller.plan) validate_plan(*s.controller.plan, *s.layout, s.sim.min_phase);
    read(j, "episodes", s.episodes);
    read(j, "seeds", s.seeds);
    read(j, "trial_threads", s.trial_threads);
    if (s.seeds.empty()) throw Error("scenario: at least one seed is required");
    if (s.episodes == 0) throw Error("scenario: episodes must be positive");

    const json out = j.value("output", json::object());
    check_keys(out, {"metrics", "checkpoints"}, "output");
    if (out.contains("metrics")) s.metrics_path = resolve(base_dir, out.at("metrics").get<std::string>());
    if (out.contains("checkpoints")) s.checkpoint_dir = resolve(base_dir, out.at("checkpoints").get<std::string>());
    return s;
}

ScenarioConfig load_scenario(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read scenario " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(path.string() + ": " + e.what());
    }
    try {
        return scenario_from_json(j, path.parent_path());
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void set_controller(ScenarioConfig& config, const std::string& type) {
    json j;
    j["type"] = type;
    const ControllerConfig check = controller_from_json(j, *config.layout, {});
    (void)check;
    config.controller.type = type;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
    out << kMetricsHeader << '\n';
    for (const MetricRow& r : rows) {
        out << r.seed << ',' << r.episode << ',' << r.controller << ',' << fmt_double(r.avg_delay) << ','
            << fmt_double(r.total_delay) << ',' << r.vehicles << ',' << fmt_double(r.discounted_return) << '\n';
    }
}

void write_metrics_csv(const fs::path& path, const std::vector<MetricRow>& rows) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_metrics_csv(out, rows);
}

std::vector<MetricRow> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("metrics file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMetricsHeader) throw ParseError("unexpected metrics header", 1);
    std::vector<MetricRow> rows;
    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != 7) throw ParseError("expected 7 fields", number);
        try {
            MetricRow r;
            r.seed = std::stoull(f[0]);
            r.episode = std::stoull(f[1]);
            r.controller = f[2];
            r.avg_delay = std::stod(f[3]);
            r.total_delay = std::stod(f[4]);
            r.vehicles = std::stoull(f[5]);
            r.discounted_return = std::stod(f[6]);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ParseError("bad number", number);
        }
    }
    return rows;
}

std::vector<MetricRow> read_metrics_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    return read_metrics_csv(in);
}

std::uint64_t episode_seed(std::uint64_t trial_seed, std::size_t episode) {
    Rng rng = derive_rng(trial_seed, {0x455053ULL, episode});
    return rng();
}

Simulator make_simulator(const ScenarioConfig& config) { return Simulator(config.layout, config.demand, config.sim); }

namespace {

MetricRow make_row(std::uint64_t seed, std::size_t episode, const std::string& controller, const EpisodeRecord& rec) {
    return MetricRow{seed,
                     episode,
                     controller,
                     rec.metrics.average_delay,
                     rec.metrics.total_delay,
                     rec.metrics.vehicles,
                     rec.discounted_return};
}

std::string checkpoint_name(const ScenarioConfig& config, std::uint64_t seed, const std::string& what) {
    return config.controller.type + "_seed" + std::to_string(seed) + "_" + what + ".txt";
}

Policy theta_policy(const FeatureEncoder& encoder, const ThetaPrime& theta) {
    return [&encoder, &theta](const Observation& obs, const Simulator&) {
        return select_action(encoder.scaled(obs), theta);
    };
}

TrialResult run_trial_impl(const ScenarioConfig& config, std::uint64_t seed) {
    const ControllerConfig& cc = config.controller;
    const std::string& type = cc.type;
    const FeatureEncoder encoder(*config.layout, config.scales);
    const fs::path& ckpt = config.checkpoint_dir;
    if (!ckpt.empty()) fs::create_directories(ckpt);

    Simulator env = make_simulator(config);
    TrialResult result;
    auto guard = [&](std::size_t episode, auto&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            throw Error("seed " + std::to_string(seed) + " episode " + std::to_string(episode) + ": " + e.what());
        }
    };

    if (type == "actuated" || type == "fixed" || type == "regulatable") {
        std::optional<ActuatedController> actuated;
        std::optional<FixedTimeController> fixed;
        ThetaPrime theta;
        Policy policy;
        if (type == "actuated") {
            actuated.emplace(*config.layout, cc.actuated, cc.actuated_order);
            policy = [&](const Observation& o, const Simulator& s) { return (*actuated)(o, s); };
        } else if (type == "fixed") {
            fixed.emplace(*config.layout, cc.plan ? *cc.plan : equal_split_plan(*config.layout, cc.fixed_green),
                          config.sim.min_phase);
            policy = [&](const Observation& o, const Simulator& s) { return (*fixed)(o, s); };
        } else {
            theta = load_theta(cc.theta_path, *config.layout);
            policy = theta_policy(encoder, theta);
            result.theta = theta;
        }
        for (std::size_t e = 0; e < config.episodes; ++e) {
            guard(e, [&] {
                if (fixed) fixed->reset();
                const EpisodeRecord rec = rollout(env, episode_seed(seed, e), policy, cc.gamma());
                result.rows.push_back(make_row(seed, e, type, rec));
            });
        }
        return result;
    }

    if (type == "dqn" || type == "drq" || type == "drsq" || type == "drhq") {
        DqnAgent agent(config.layout, encoder, cc.dqn, learner_from_string(type), seed);
        for (std::size_t e = 0; e < config.episodes; ++e) {
            guard(e, [&] {
                const EpisodeRecord rec = agent.run_episode(env, episode_seed(seed, e), e);
                result.rows.push_back(make_row(seed, e, type, rec));
            });
        }
        if (agent.regulatable()) result.theta = agent.theta();
        if (!ckpt.empty()) {
            save_mlp(ckpt / checkpoint_name(config, seed, "q"), agent.q());
            save_mlp(ckpt / checkpoint_name(config, seed, "target"), agent.target());
            if (agent.regulatable()) save_theta(ckpt / checkpoint_name(config, seed, "theta"), agent.theta());
        }
        return result;
    }

    if (type == "ppo") {
        PpoAgent agent(config.layout, encoder, cc.ppo, seed);
        for (std::size_t e = 0; e < config.episodes; ++e) {
            guard(e, [&] {
                const EpisodeRecord rec = agent.run_episode(env, episode_seed(seed, e));
                result.rows.push_back(make_row(seed, e, type, rec));
            });
        }
        result.theta = agent.theta();
        if (!ckpt.empty()) {
            save_theta(ckpt / checkpoint_name(config, seed, "theta"), agent.theta());
            save_mlp(ckpt / checkpoint_name(config, seed, "critic"), agent.critic());
        }
        return result;
    }

    // cmaes: one generation per episode row.
    const ThetaPrime shape(*config.layout, cc.cma_x0);
    const ThetaBounds bounds = cc.dqn.bounds;
    auto evaluate = [&](const std::vector<double>& x, std::uint64_t env_seed, Simulator& sim) {
        ThetaPrime theta = shape;
        theta.assign(x);
        theta.project(bounds);
        return rollout(sim, env_seed, theta_policy(encoder, theta), cc.gamma());
    };
    Fitness fitness = [&](const std::vector<double>& x, std::size_t, std::size_t) {
        Simulator sim = make_simulator(config);
        double sum = 0;
        for (std::size_t k = 0; k < cc.cma_fitness_episodes; ++k) {
            Rng r = derive_rng(seed, {0x434649ULL, k});
            sum += evaluate(x, r(), sim).metrics.average_delay;
        }
        return sum / static_cast<double>(cc.cma_fitness_episodes);
    };
    CmaConfig cma = cc.cma;
    cma.generations = config.episodes;
    const std::vector<double> x0(shape.values().begin(), shape.values().end());
    std::size_t episode = 0;
    CmaResult tuned;
    guard(0, [&] {
        tuned = cma_es_tune(x0, fitness, cma, seed, [&](const CmaGeneration&, const CmaEs& es) {
            const std::vector<double> mean(es.mean().data(), es.mean().data() + es.mean().size());
            const EpisodeRecord rec = evaluate(mean, episode_seed(seed, episode), env);
            result.rows.push_back(make_row(seed, episode, type, rec));
            ++episode;
            if (!ckpt.empty() && episode == config.episodes) es.save(ckpt / checkpoint_name(config, seed, "cma"));
            return false;
        });
    });
    ThetaPrime best = shape;
    best.assign(tuned.best);
    best.project(bounds);
    result.theta = best;
    if (!ckpt.empty()) save_theta(ckpt / checkpoint_name(config, seed, "theta"), best);
    return result;
}

} // namespace

TrialResult run_trial(const ScenarioConfig& config, std::uint64_t seed) { return run_trial_impl(config, seed); }

std::vector<MetricRow> run_experiment(const ScenarioConfig& config) {
    std::vector<std::vector<MetricRow>> per_seed(config.seeds.size());
    parallel_for(config.seeds.size(), config.trial_threads,
                 [&](std::size_t i) { per_seed[i] = run_trial(config, config.seeds[i]).rows; });
    std::vector<MetricRow> rows;
    for (auto& r : per_seed) rows.insert(rows.end(), r.begin(), r.end());
    if (!config.metrics_path.empty()) write_metrics_csv(config.metrics_path, rows);
    return rows;
}

double t_half_width(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) throw Error("a confidence interval needs at least two trials");
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const boost::math::students_t dist(static_cast<double>(n - 1));
    return boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(n));
}

std::vector<AggregateRow> aggregate(const std::vector<MetricRow>& rows) {
    std::vector<std::string> controllers;
    std::map<std::pair<std::string, std::size_t>, std::vector<double>> groups;
    for (const MetricRow& r : rows) {
        if (std::find(controllers.begin(), controllers.end(), r.controller) == controllers.end())
            controllers.push_back(r.controller);
        groups[{r.controller, r.episode}].push_back(r.avg_delay);
    }
    std::vector<AggregateRow> out;
    for (const std::string& c : controllers) {
        for (const auto& [key, values] : groups) {
            if (key.first != c) continue;
            AggregateRow a;
            a.controller = c;
            a.episode = key.second;
            a.trials = values.size();
            for (double v : values) a.mean += v;
            a.mean /= static_cast<double>(values.size());
            if (values.size() >= 2) a.half_width = t_half_width(values);
            out.push_back(a);
        }
    }
    return out;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
    out << "controller,episode,trials,mean_avg_delay,ci_low,ci_high\n";
    for (const AggregateRow& a : rows) {
        out << a.controller << ',' << a.episode << ',' << a.trials << ',' << fmt_double(a.mean) << ',';
        if (a.half_width) out << fmt_double(a.mean - *a.half_width) << ',' << fmt_double(a.mean + *a.half_width);
        else out << ',';
        out << '\n';
    }
}

namespace {

std::map<std::uint64_t, double> final_means(const std::vector<MetricRow>& rows, std::size_t window) {
    std::size_t last = 0;
    for (const MetricRow& r : rows) last = std::max(last, r.episode);
    const std::size_t first = last + 1 >= window ? last + 1 - window : 0;
    std::map<std::uint64_t, std::pair<double, std::size_t>> acc;
    for (const MetricRow& r : rows) {
        if (r.episode < first) continue;
        acc[r.seed].first += r.avg_delay;
        ++acc[r.seed].second;
    }
    std::map<std::uint64_t, double> out;
    for (const auto& [seed, a] : acc) out[seed] = a.first / static_cast<double>(a.second);
    return out;
}

} // namespace

Comparison compare(const std::vector<MetricRow>& candidate, const std::vector<MetricRow>& baseline,
                   std::size_t final_window) {
    if (candidate.empty() || baseline.empty()) throw Error("compare needs rows on both sides");
    if (final_window == 0) throw Error("compare window must be positive");
    const auto c = final_means(candidate, final_window);
    const auto b = final_means(baseline, final_window);
    std::set<std::uint64_t> cs, bs;
    for (const auto& [s, v] : c) cs.insert(s);
    for (const auto& [s, v] : b) bs.insert(s);
    if (cs != bs) throw Error("candidate and baseline cover different seeds");
    Comparison out;
    for (const auto& [s, v] : c) out.candidate_mean += v;
    for (const auto& [s, v] : b) out.baseline_mean += v;
    out.candidate_mean /= static_cast<double>(c.size());
    out.baseline_mean /= static_cast<double>(b.size());
    if (out.baseline_mean != 0.0)
        out.reduction_percent = 100.0 * (out.baseline_mean - out.candidate_mean) / out.baseline_mean;
    return out;
}

} // namespace regsig
