#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "regsig/baselines.hpp"
#include "regsig/cmaes.hpp"
#include "regsig/error.hpp"
#include "regsig/dqn.hpp"
#include "regsig/episode.hpp"
#include "regsig/harness.hpp"
#include "regsig/ppo.hpp"
#include "support.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <filesystem>

using namespace regsig;
using regsig::test::empty_demand;
using regsig::test::flat_demand;
using regsig::test::shared;
using regsig::test::zero_observation;

namespace {

std::vector<const Transition*> ptrs(const std::vector<Transition>& ts) {
    std::vector<const Transition*> out;
    for (const auto& t : ts) out.push_back(&t);
    return out;
}

double norm(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Two-combo state with G = (10, 0) under all-ones parameters; Q is a bias-only linear head.
struct TwoAction {
    IntersectionLayout layout = two_road_layout();
    Transition t;
    TwoAction() {
        t.state = zero_observation(layout);
        t.state.phase[0][0] = 10.0;
        t.features = {0.0, 0.0};
        t.next = t.state;
        t.next_features = t.features;
    }
    Mlp q_with(double q0, double q1) const {
        return Mlp(std::vector<LayerSpec>{{2, 2, false, {}}}, std::vector<double>{0, 0, 0, 0, q0, q1});
    }
};

ScenarioConfig toy() {
    ScenarioConfig c = load_scenario(std::filesystem::path(REGSIG_SCENARIO_DIR) / "toy.json");
    c.metrics_path.clear();
    c.checkpoint_dir.clear();
    return c;
}

} // namespace

TEST_CASE("epsilon schedules") {
    DqnConfig c;
    CHECK(c.epsilon(0) == 0.05);
    CHECK(c.epsilon(19) == 0.05);
    CHECK(c.epsilon(20) == 0.0);
    c.epsilon_shape = EpsilonShape::Linear;
    c.epsilon_start = 1.0;
    c.epsilon_episodes = 10;
    CHECK(c.epsilon(0) == 1.0);
    CHECK(c.epsilon(5) == doctest::Approx(0.5));
    CHECK(c.epsilon(10) == 0.0);
    CHECK(argmax(std::vector<double>{1, 3, 3, 2}) == 1);
    CHECK(learner_from_string(to_string(Learner::Drsq)) == Learner::Drsq);
}

TEST_CASE("full exploration is uniform over combos") {
    const auto layout = shared(eight_phase_layout());
    const FeatureEncoder enc(*layout, {});
    DqnAgent agent(layout, enc, {}, Learner::Drhq, 5);
    Simulator env(layout, flat_demand(*layout, 10));
    const Observation obs = env.reset(1);
    std::vector<double> counts(layout->combos.size(), 0.0);
    const int n = 10000;
    for (int k = 0; k < n; ++k) counts[agent.act(obs, 1.0)] += 1;
    const double expected = n / static_cast<double>(counts.size());
    double chi2 = 0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
    CHECK(chi2 < boost::math::quantile(dist, 0.999));
}

TEST_CASE("terminal transitions do not bootstrap") {
    Rng rng = derive_rng(31, {1});
    Mlp q(Mlp::dense_specs({2, 4, 2}), rng);
    const TwoAction toy;
    Mlp target = toy.q_with(1e6, 1e6);
    Transition t = toy.t;
    t.features = {0.3, -0.2};
    t.reward = 0.7;
    t.terminal = true;
    std::vector<Transition> batch{t};
    const double q0 = q.forward(t.features)[0];
    Adam adam(q.param_count(), {});
    const double loss = q_learning_update(q, target, adam, ptrs(batch), 0.8);
    CHECK(loss == doctest::Approx(huber(q0, 0.7).loss));
}

TEST_CASE("one-sample Q regression reaches its fixed point") {
    Rng rng = derive_rng(32, {1});
    Mlp q(Mlp::dense_specs({2, 8, 2}), rng);
    const TwoAction toy;
    const Mlp target = toy.q_with(0.5, 2.0);
    Transition t = toy.t;
    t.features = {0.6, 0.1};
    t.next_features = {0.2, 0.9};
    t.action = 1;
    t.reward = -0.4;
    std::vector<Transition> batch{t};
    const double y = -0.4 + 0.8 * 2.0;
    Adam adam(q.param_count(), {});
    for (int k = 0; k < 4000; ++k) q_learning_update(q, target, adam, ptrs(batch), 0.8);
    CHECK(std::abs(q.forward(t.features)[1] - y) < 1e-3);
}

TEST_CASE("hard distillation at a near-match") {
    const TwoAction toy;
    const ThetaPrime theta(toy.layout);
    REQUIRE(precedences(toy.t.state, theta) == std::vector<double>{10.0, 0.0});
    const Mlp q = toy.q_with(1.0, 0.0);
    std::vector<Transition> batch{toy.t};
    const DistillResult r = distill_gradient(Learner::Drhq, q, q, ptrs(batch), theta, 0.8);
    CHECK(r.loss == doctest::Approx(std::log1p(std::exp(-10.0))).epsilon(1e-9));
    CHECK(r.loss == doctest::Approx(4.54e-5).epsilon(1e-3));
    // softmax(G) - onehot(0) = (-p1, p1) and G1 has no load, so the gradient is -p1 dG0/dtheta.
    const double p1 = softmax(std::vector<double>{10.0, 0.0})[1];
    const double full = norm(grad_theta(toy.t.state, 0, toy.t.state.flags(0), theta));
    CHECK(norm(r.grad) == doctest::Approx(p1 * full).epsilon(1e-9));
    CHECK(norm(r.grad) < 1e-4 * full);
}

TEST_CASE("soft distillation vanishes when softmax(G) equals softmax(Q)") {
    const IntersectionLayout layout = eight_phase_layout();
    Rng rng = derive_rng(33, {1});
    const ThetaPrime theta = random_theta(layout, rng);
    std::vector<Transition> batch;
    for (const Observation& s : random_observations(layout, 8, rng)) {
        Transition t;
        t.state = s;
        t.features = {1.0};
        batch.push_back(t);
    }
    // Q reproduces G exactly on each state through a per-state bias net.
    for (const Transition& t : batch) {
        const auto g = precedences(t.state, theta);
        std::vector<double> p(g.size(), 0.0);
        p.insert(p.end(), g.begin(), g.end());
        const Mlp q(std::vector<LayerSpec>{{1, g.size(), false, {}}}, p);
        std::vector<Transition> one{t};
        const DistillResult r = distill_gradient(Learner::Drsq, q, q, ptrs(one), theta, 0.8);
        CHECK(norm(r.grad) < 1e-8);
        CHECK(r.loss >= 0.0);
    }
}

TEST_CASE("distillation losses are non-negative and the hard target is one-hot") {
    const IntersectionLayout layout = eight_phase_layout();
    Rng rng = derive_rng(34, {1});
    const FeatureEncoder enc(layout, {});
    const Mlp q(enc.network(16, 2, layout.combos.size()), rng);
    const ThetaPrime theta = random_theta(layout, rng);
    std::vector<Transition> batch;
    for (const Observation& s : random_observations(layout, 16, rng)) {
        Transition t;
        t.state = s;
        t.features = enc.encode(s);
        batch.push_back(t);
    }
    for (Learner m : {Learner::Drsq, Learner::Drhq}) {
        for (const Transition& t : batch) {
            std::vector<Transition> one{t};
            const DistillResult r = distill_gradient(m, q, q, ptrs(one), theta, 0.8);
            CHECK(r.loss >= 0.0);
            // The logit gradient softmax(G) - X sums to 0 exactly when X is a distribution.
            const auto g = precedences(t.state, theta);
            const auto qv = q.forward(t.features);
            std::vector<double> x(g.size(), 0.0);
            x[argmax(qv)] = 1.0;
            const auto lg = softmax_cross_entropy_logit_grad(x, g);
            double sum = 0;
            for (double v : lg) sum += v;
            CHECK(std::abs(sum) < 1e-12);
        }
    }
}

TEST_CASE("Bellman-regression distillation on one state and one action") {
    const TwoAction toy;
    ThetaPrime theta(toy.layout);
    Transition t = toy.t;
    t.state.phase[0] = {0.4, 0.2, 0.1, 0.3, 0.2, 0.5};
    t.reward = 3.0;
    t.terminal = true;
    std::vector<Transition> batch{t};
    const Mlp q = toy.q_with(0, 0);
    DqnConfig cfg;
    cfg.theta_adam.learning_rate = 1e-2;
    Adam adam(theta.size(), cfg.theta_adam);
    for (int k = 0; k < 5000; ++k) distill_update(Learner::Drq, q, q, ptrs(batch), theta, adam, cfg);
    CHECK(std::abs(precedence(t.state, 0, t.state.flags(0), theta) - 3.0) < 1e-3);
}

TEST_CASE("greedy regulatable agent without distillation follows select_action") {
    const auto layout = shared(eight_phase_layout());
    const FeatureEncoder enc(*layout, {});
    DqnConfig cfg;
    cfg.epsilon_start = 0.0;
    cfg.distill_iterations = 0;
    cfg.minibatch = 8;
    DqnAgent agent(layout, enc, cfg, Learner::Drhq, 9);
    Rng rng = derive_rng(35, {1});
    agent.theta() = random_theta(*layout, rng);
    const ThetaPrime frozen = agent.theta();
    Simulator env(layout, flat_demand(*layout, 25));
    const EpisodeRecord a = agent.run_episode(env, 77, 0);
    for (std::size_t i = 0; i < frozen.size(); ++i) REQUIRE(agent.theta().values()[i] == frozen.values()[i]);
    CHECK(agent.total_steps() == a.steps);

    const EpisodeRecord b = rollout(
        env, 77, [&](const Observation& obs, const Simulator&) { return select_action(enc.scaled(obs), frozen); },
        cfg.gamma);
    CHECK(a.steps == b.steps);
    CHECK(a.metrics.total_delay == b.metrics.total_delay);
    CHECK(a.discounted_return == b.discounted_return);
}

TEST_CASE("target network syncs every C steps") {
    const auto layout = shared(two_road_layout());
    const FeatureEncoder enc(*layout, {});
    DqnConfig cfg;
    cfg.minibatch = 4;
    cfg.target_sync = 5;
    DqnAgent agent(layout, enc, cfg, Learner::Dqn, 3);
    Simulator env(layout, flat_demand(*layout, 20));
    Observation obs = env.reset(4);
    Rng rng = derive_rng(36, {1});
    for (int k = 0; k < 30 && !env.done(); ++k) {
        agent.step(env, obs, 0.1);
        const bool same = std::equal(agent.q().params().begin(), agent.q().params().end(),
                                     agent.target().params().begin());
        if (agent.total_steps() % 5 == 0) {
            CHECK(same);
            for (int j = 0; j < 5; ++j) {
                std::vector<double> x(enc.size());
                for (double& v : x) v = uniform01(rng);
                CHECK(agent.q().forward(x) == agent.target().forward(x));
            }
        } else if (agent.total_steps() > cfg.minibatch) {
            CHECK_FALSE(same);
        }
    }
}

TEST_CASE("replay buffer") {
    ReplayBuffer buf(50);
    for (int k = 0; k < 70; ++k) {
        Transition t;
        t.reward = k;
        buf.push(t);
    }
    CHECK(buf.size() == 50);
    double min_r = 1e9;
    for (std::size_t i = 0; i < buf.size(); ++i) min_r = std::min(min_r, buf[i].reward);
    CHECK(min_r == 20.0);

    Rng rng = derive_rng(37, {1});
    const std::size_t draws = 100000;
    std::vector<double> counts(50, 0.0);
    for (std::size_t i : buf.sample_indices(draws, rng)) counts[i] += 1;
    const double p = 1.0 / 50.0;
    const double mean = draws * p, sd = std::sqrt(draws * p * (1 - p));
    for (double c : counts) CHECK(std::abs(c - mean) < 3.0 * sd);
}

TEST_CASE("CMA-ES bookkeeping") {
    CmaConfig cfg;
    cfg.generations = 60;
    auto sphere = [](const std::vector<double>& x, std::size_t, std::size_t) {
        double s = 0;
        for (double v : x) s += v * v;
        return s;
    };
    std::size_t calls = 0;
    const auto counted = [&](const std::vector<double>& x, std::size_t g, std::size_t c) {
        ++calls;
        return sphere(x, g, c);
    };
    double prev = std::numeric_limits<double>::infinity();
    const CmaResult r = cma_es_tune(std::vector<double>(8, 1.0), counted, cfg, 3, [&](const CmaGeneration& g, const CmaEs& es) {
        CHECK(g.fitness.size() == 12);
        CHECK(g.best_fitness <= prev);
        prev = g.best_fitness;
        const Eigen::MatrixXd& C = es.covariance();
        CHECK((C - C.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
        return false;
    });
    CHECK(calls == 60 * 12);
    CHECK(r.evaluations == 60 * 12);
    CHECK(r.best_fitness < 1e-3);

    cfg.threads = 3;
    const CmaResult parallel = cma_es_tune(std::vector<double>(8, 1.0), sphere, cfg, 3);
    CHECK(parallel.best == r.best);
    CHECK(parallel.best_fitness == r.best_fitness);
}

TEST_CASE("CMA-ES ranks non-finite fitness last") {
    CmaEs es(std::vector<double>(4, 0.0), {}, 1);
    const auto& c = es.ask();
    std::vector<double> f(c.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = i == 0 ? std::nan("") : static_cast<double>(i);
    es.tell(f);
    CHECK(es.best_fitness() == 1.0);
    CHECK(std::isfinite(es.mean()[0]));
}

TEST_CASE("CMA-ES state resumes exactly") {
    auto sphere = [](const std::vector<double>& x) {
        double s = 0;
        for (double v : x) s += (v - 0.3) * (v - 0.3);
        return s;
    };
    CmaEs a(std::vector<double>(5, 1.0), {}, 8);
    for (int g = 0; g < 10; ++g) {
        std::vector<double> f;
        for (const auto& x : a.ask()) f.push_back(sphere(x));
        a.tell(f);
    }
    const auto path = std::filesystem::temp_directory_path() / "regsig_cma_state.txt";
    a.save(path);
    CmaEs b = CmaEs::load(path, {}, 8);
    std::filesystem::remove(path);
    const auto ca = a.ask();
    const auto cb = b.ask();
    for (std::size_t i = 0; i < ca.size(); ++i)
        for (std::size_t j = 0; j < ca[i].size(); ++j) CHECK(ca[i][j] == doctest::Approx(cb[i][j]).epsilon(1e-12));
    CHECK(b.generation() == a.generation());
}

TEST_CASE("PPO surrogate gradient") {
    const IntersectionLayout layout = eight_phase_layout();
    Rng rng = derive_rng(38, {1});
    ThetaPrime theta = random_theta(layout, rng, {}, 0.5);
    std::vector<PpoSample> samples;
    for (const Observation& s : random_observations(layout, 24, rng, 1.0)) {
        PpoSample p;
        p.state = s;
        p.action = uniform_index(rng, layout.combos.size());
        p.log_prob = policy_log_prob(s, p.action, theta) + 0.3 * (uniform01(rng) - 0.5);
        p.advantage = 2.0 * uniform01(rng) - 1.0;
        samples.push_back(p);
    }
    std::vector<const PpoSample*> batch;
    for (const auto& s : samples) batch.push_back(&s);

    // Finite differences of the clipped surrogate.
    const auto analytic = ppo_surrogate_grad(batch, theta, 0.2);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double x = theta.values()[i];
        const double h = 1e-5 * std::max(1.0, std::abs(x));
        theta.values()[i] = x + h;
        const double up = ppo_surrogate(batch, theta, 0.2);
        theta.values()[i] = x - h;
        const double down = ppo_surrogate(batch, theta, 0.2);
        theta.values()[i] = x;
        const double fd = (up - down) / (2 * h);
        num = std::max(num, std::abs(fd - analytic[i]));
        den = std::max(den, std::max(std::abs(fd), std::abs(analytic[i])));
    }
    CHECK(num / den < 1e-4);

    // Ratios of 1: the clip is inactive and the gradient equals the unclipped one.
    for (auto& s : samples) s.log_prob = policy_log_prob(s.state, s.action, theta);
    CHECK(ppo_surrogate_grad(batch, theta, 0.2) == ppo_surrogate_grad(batch, theta, 1e9));

    for (auto& s : samples) s.advantage = 0.0;
    for (double g : ppo_surrogate_grad(batch, theta, 0.2)) CHECK(g == 0.0);
}

TEST_CASE("actuated control with no demand holds every combo for the minimum green") {
    const auto layout = shared(eight_phase_layout());
    Simulator env(layout, empty_demand(*layout, 2));
    const ActuatedController ctl(*layout, {});
    const auto order = ctl.order();
    Observation obs = env.reset(1);
    std::vector<std::size_t> actions;
    for (int k = 0; k < 20; ++k) {
        const std::size_t a = ctl(obs, env);
        if (k > 0 && a != obs.current_combo) CHECK(obs.green_time == 3.0);
        actions.push_back(a);
        obs = env.step(a).observation;
    }
    // First call holds the initial green; after that the cycle advances once per step.
    for (std::size_t k = 1; k < actions.size(); ++k) {
        const std::size_t slot = std::find(order.begin(), order.end(), actions[k - 1]) - order.begin();
        CHECK(actions[k] == order[(slot + 1) % order.size()]);
    }
    CHECK(env.metrics().average_delay == 0.0);
}

TEST_CASE("actuated control caps green at the maximum") {
    const auto layout = shared(two_road_layout());
    SimParams p;
    p.cutoff_extra = 600.0;
    Simulator env(layout, empty_demand(*layout, 6), p);
    const ActuatedController ctl(*layout, {});
    REQUIRE(ctl.config().max_green == 300.0);
    Observation obs = env.reset(1);
    for (int k = 0; k < 1200; ++k) env.place_vehicle(0, 0.0);  // EB through, combo 0

    std::vector<std::pair<std::size_t, double>> stints;
    while (!env.done() && stints.size() < 8) {
        const std::size_t a = ctl(obs, env);
        if (a != obs.current_combo) stints.emplace_back(obs.current_combo, obs.green_time);
        obs = env.step(a).observation;
    }
    REQUIRE(stints.size() >= 6);
    for (const auto& [combo, green] : stints) {
        if (combo == 0) CHECK(green == 300.0);
        else CHECK(green == 3.0);
    }
}

TEST_CASE("fixed-time plans") {
    const auto layout = shared(two_road_layout());
    Simulator env(layout, flat_demand(*layout, 10));
    FixedTimePlan plan{{{0, 9.0}, {1, 9.0}}, 18.0};
    CHECK_NOTHROW(validate_plan(plan, *layout, 3.0));
    FixedTimeController a(*layout, plan, 3.0), b(*layout, plan, 3.0);
    Observation obs = env.reset(1);
    std::vector<std::size_t> seq;
    for (int k = 0; k < 12; ++k) {
        const std::size_t x = a(obs, env);
        CHECK(b(obs, env) == x);
        seq.push_back(x);
        obs = env.step(x).observation;
    }
    CHECK(seq == std::vector<std::size_t>{0, 0, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1});

    const FixedTimePlan wrong_sum{{{0, 9.0}, {1, 9.0}}, 20.0};
    const FixedTimePlan off_grid{{{0, 10.0}, {1, 8.0}}, 18.0};
    const FixedTimePlan unknown{{{0, 9.0}, {5, 9.0}}, 18.0};
    const FixedTimePlan empty{{}, 0.0};
    for (const FixedTimePlan* bad : {&wrong_sum, &off_grid, &unknown, &empty})
        CHECK_THROWS_AS(validate_plan(*bad, *layout, 3.0), Error);
    const FixedTimePlan eq = equal_split_plan(*layout, 30.0);
    CHECK(eq.cycle_length == 60.0);
}

TEST_CASE("hard distillation imitates Q on the two-road toy") {
    const ScenarioConfig config = toy();
    const FeatureEncoder enc(*config.layout, config.scales);
    DqnAgent agent(config.layout, enc, config.controller.dqn, Learner::Drhq, 1);
    Simulator env = make_simulator(config);
    for (std::size_t e = 0; e < 20; ++e) agent.run_episode(env, episode_seed(1, e), e);
    // Held-out: transitions of a fresh greedy episode, never trained on.
    std::vector<Transition> held;
    Observation obs = env.reset(episode_seed(4242, 0));
    while (!env.done()) {
        const std::size_t a = agent.greedy_action(obs);
        const StepResult r = env.step(a);
        held.push_back(agent.make_transition(obs, a, r));
        obs = r.observation;
    }
    const double rate = agent.imitation_rate(ptrs(held));
    MESSAGE("DRHQ imitation rate on held-out states: " << rate);
    CHECK(rate >= 0.95);
}
