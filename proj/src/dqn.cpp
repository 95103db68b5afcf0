#include "regsig/dqn.hpp"

#include "regsig/error.hpp"

#include <algorithm>
#include <cmath>

namespace regsig {

std::string to_string(Learner learner) {
    switch (learner) {
    case Learner::Dqn: return "dqn";
    case Learner::Drq: return "drq";
    case Learner::Drsq: return "drsq";
    case Learner::Drhq: return "drhq";
    }
    return "?";
}

Learner learner_from_string(const std::string& text) {
    if (text == "dqn") return Learner::Dqn;
    if (text == "drq") return Learner::Drq;
    if (text == "drsq") return Learner::Drsq;
    if (text == "drhq") return Learner::Drhq;
    throw Error("unknown learner '" + text + "'");
}

double DqnConfig::epsilon(std::size_t episode) const {
    if (epsilon_shape == EpsilonShape::Step || epsilon_episodes == 0)
        return episode < epsilon_episodes ? epsilon_start : epsilon_end;
    const double frac = std::min(1.0, static_cast<double>(episode) / static_cast<double>(epsilon_episodes));
    return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k) {
        if (values[k] > values[best]) best = k;
    }
    return best;
}

double q_learning_update(Mlp& q, const Mlp& target, Adam& adam, std::span<const Transition* const> batch,
                         double gamma) {
    if (batch.empty()) return 0.0;
    std::vector<double> grad(q.param_count(), 0.0);
    std::vector<double> grad_out(q.output_size(), 0.0);
    MlpCache cache;
    MlpCache target_cache;
    double total = 0.0;
    for (const Transition* t : batch) {
        double y = t->reward;
        if (!t->terminal) {
            target.forward(t->next_features, target_cache);
            const auto next_q = target_cache.output();
            y += gamma * *std::max_element(next_q.begin(), next_q.end());
        }
        q.forward(t->features, cache);
        const ScalarLoss l = huber(cache.output()[t->action], y);
        total += l.loss;
        std::fill(grad_out.begin(), grad_out.end(), 0.0);
        grad_out[t->action] = l.grad / static_cast<double>(batch.size());
        q.backward(cache, grad_out, grad);
    }
    adam.step(q.params(), grad);
    return total / static_cast<double>(batch.size());
}

DistillResult distill_gradient(Learner mode, const Mlp& q, const Mlp& target, std::span<const Transition* const> batch,
                               const ThetaPrime& theta, double gamma, bool online_target) {
    if (mode == Learner::Dqn) throw Error("plain DQN has no distillation step");
    DistillResult result;
    result.grad.assign(theta.size(), 0.0);
    if (batch.empty()) return result;
    const double inv = 1.0 / static_cast<double>(batch.size());
    const std::size_t k = theta.combo_count();

    for (const Transition* t : batch) {
        if (mode == Learner::Drq) {
            double y = t->reward;
            if (!t->terminal) {
                const auto next_q = (online_target ? q : target).forward(t->next_features);
                y += gamma * *std::max_element(next_q.begin(), next_q.end());
            }
            const double g = precedence(t->state, t->action, t->state.flags(t->action), theta);
            const double e = g - y;
            result.loss += e * e * inv;
            accumulate_grad_theta(t->state, t->action, t->state.flags(t->action), theta, 2.0 * e * inv, result.grad);
            continue;
        }

        const auto q_values = q.forward(t->features);
        std::vector<double> x;
        if (mode == Learner::Drsq) {
            x = softmax(q_values);
        } else {
            x.assign(k, 0.0);
            x[argmax(q_values)] = 1.0;
        }
        const auto g = precedences(t->state, theta);
        const auto z = softmax(g);
        result.loss += cross_entropy(x, z).loss * inv;
        const auto logit_grad = softmax_cross_entropy_logit_grad(x, g);
        for (std::size_t a = 0; a < k; ++a) {
            if (logit_grad[a] == 0.0) continue;
            accumulate_grad_theta(t->state, a, t->state.flags(a), theta, logit_grad[a] * inv, result.grad);
        }
    }
    return result;
}

double distill_update(Learner mode, const Mlp& q, const Mlp& target, std::span<const Transition* const> batch,
                      ThetaPrime& theta, Adam& adam, const DqnConfig& config) {
    DistillResult r = distill_gradient(mode, q, target, batch, theta, config.gamma, config.drq_online_target);
    for (double& g : r.grad) {
        if (!std::isfinite(g)) g = 0.0;
    }
    adam.step(theta.values(), r.grad);
    theta.project(config.bounds);
    return r.loss;
}

DqnAgent::DqnAgent(std::shared_ptr<const IntersectionLayout> layout, FeatureEncoder encoder, DqnConfig config,
                   Learner learner, std::uint64_t seed)
    : layout_(std::move(layout)),
      encoder_(std::move(encoder)),
      config_(config),
      learner_(learner),
      rng_(derive_rng(seed, {0x44514eULL})),
      theta_(*layout_, 1.0),
      buffer_(config.replay_capacity) {
    if (!(config_.gamma > 0.0 && config_.gamma < 1.0)) throw Error("gamma must lie in (0, 1)");
    if (config_.epsilon_start < 0 || config_.epsilon_start > 1 || config_.epsilon_end < 0 || config_.epsilon_end > 1)
        throw Error("epsilon must lie in [0, 1]");
    if (config_.minibatch == 0 || config_.target_sync == 0) throw Error("minibatch and target sync must be positive");
    q_ = Mlp(encoder_.network(config_.hidden_units, config_.hidden_layers, layout_->combos.size()), rng_);
    target_ = q_;
    q_adam_ = Adam(q_.param_count(), config_.q_adam);
    theta_adam_ = Adam(theta_.size(), config_.theta_adam);
}

std::vector<double> DqnAgent::q_values(const Observation& raw) const { return q_.forward(encoder_.encode(raw)); }

std::size_t DqnAgent::greedy_action(const Observation& raw) const {
    if (regulatable()) return select_action(encoder_.scaled(raw), theta_);
    return argmax(q_values(raw));
}

std::size_t DqnAgent::act(const Observation& raw, double epsilon) {
    if (epsilon > 0.0 && uniform01(rng_) < epsilon) return uniform_index(rng_, layout_->combos.size());
    return greedy_action(raw);
}

Transition DqnAgent::make_transition(const Observation& raw, std::size_t action, const StepResult& result) const {
    Transition t;
    t.state = encoder_.scaled(raw);
    t.features = encoder_.encode(raw);
    t.action = action;
    t.reward = result.reward * config_.reward_scale;
    t.next = encoder_.scaled(result.observation);
    t.next_features = encoder_.encode(result.observation);
    t.terminal = result.done;
    return t;
}

DqnAgent::StepInfo DqnAgent::step(Simulator& env, Observation& obs, double epsilon) {
    StepInfo info;
    info.action = act(obs, epsilon);
    info.result = env.step(info.action);
    buffer_.push(make_transition(obs, info.action, info.result));

    if (buffer_.size() >= config_.minibatch) {
        const auto batch = buffer_.sample(config_.minibatch, rng_);
        info.q_loss = q_learning_update(q_, target_, q_adam_, batch, config_.gamma);
        info.trained = true;
    }
    ++steps_;
    if (steps_ % config_.target_sync == 0) sync_target();

    if (regulatable() && buffer_.size() >= config_.minibatch) {
        for (std::size_t n = 0; n < config_.distill_iterations; ++n) {
            const auto batch = buffer_.sample(config_.minibatch, rng_);
            info.distill_loss = distill_update(learner_, q_, target_, batch, theta_, theta_adam_, config_);
        }
    }
    obs = info.result.observation;
    return info;
}

EpisodeRecord DqnAgent::run_episode(Simulator& env, std::uint64_t env_seed, std::size_t episode) {
    EpisodeRecord record;
    Observation obs = env.reset(env_seed);
    const double epsilon = config_.epsilon(episode);
    double discount = 1.0;
    while (!env.done()) {
        const StepInfo info = step(env, obs, epsilon);
        record.discounted_return += discount * info.result.reward;
        discount *= config_.gamma;
        ++record.steps;
    }
    record.metrics = env.metrics();
    return record;
}

double DqnAgent::imitation_rate(std::span<const Transition* const> states) const {
    if (states.empty()) return 0.0;
    std::size_t match = 0;
    for (const Transition* t : states) {
        if (select_action(t->state, theta_) == argmax(q_.forward(t->features))) ++match;
    }
    return static_cast<double>(match) / static_cast<double>(states.size());
}

} // namespace regsig
