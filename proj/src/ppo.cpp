#include "regsig/ppo.hpp"

#include "regsig/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace regsig {

namespace {

std::vector<double> log_softmax(std::span<const double> logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    for (double g : logits) sum += std::exp(g - top);
    const double lse = top + std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

} // namespace

double policy_log_prob(const Observation& state, std::size_t action, const ThetaPrime& theta) {
    return log_softmax(precedences(state, theta)).at(action);
}

double ppo_surrogate(std::span<const PpoSample* const> batch, const ThetaPrime& theta, double clip) {
    if (batch.empty()) return 0.0;
    double total = 0;
    for (const PpoSample* s : batch) {
        const double rho = std::exp(policy_log_prob(s->state, s->action, theta) - s->log_prob);
        const double clipped = std::clamp(rho, 1.0 - clip, 1.0 + clip);
        total += std::min(rho * s->advantage, clipped * s->advantage);
    }
    return total / static_cast<double>(batch.size());
}

std::vector<double> ppo_surrogate_grad(std::span<const PpoSample* const> batch, const ThetaPrime& theta, double clip) {
    std::vector<double> grad(theta.size(), 0.0);
    if (batch.empty()) return grad;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (const PpoSample* s : batch) {
        const double a = s->advantage;
        if (a == 0.0) continue;
        const auto g = precedences(s->state, theta);
        const auto logp = log_softmax(g);
        const double rho = std::exp(logp[s->action] - s->log_prob);
        // The clipped branch is the minimum (and flat) only outside the interval on the side A points to.
        if ((a > 0 && rho > 1.0 + clip) || (a < 0 && rho < 1.0 - clip)) continue;
        for (std::size_t b = 0; b < g.size(); ++b) {
            const double dlogp = (b == s->action ? 1.0 : 0.0) - std::exp(logp[b]);
            if (dlogp == 0.0) continue;
            accumulate_grad_theta(s->state, b, s->state.flags(b), theta, a * rho * dlogp * inv, grad);
        }
    }
    return grad;
}

PpoAgent::PpoAgent(std::shared_ptr<const IntersectionLayout> layout, FeatureEncoder encoder, PpoConfig config,
                   std::uint64_t seed)
    : layout_(std::move(layout)),
      encoder_(std::move(encoder)),
      config_(config),
      rng_(derive_rng(seed, {0x50504fULL})),
      theta_(*layout_, 1.0) {
    if (!(config_.gamma > 0.0 && config_.gamma < 1.0)) throw Error("gamma must lie in (0, 1)");
    if (!(config_.clip > 0.0)) throw Error("PPO clip must be positive");
    if (config_.minibatch == 0) throw Error("PPO minibatch must be positive");
    actor_adam_ = Adam(theta_.size(), config_.actor_adam);
    std::vector<std::size_t> sizes{encoder_.size()};
    for (std::size_t i = 0; i < config_.critic_hidden_layers; ++i) sizes.push_back(config_.critic_hidden_units);
    sizes.push_back(1);
    critic_ = Mlp(Mlp::dense_specs(sizes), rng_);
    critic_adam_ = Adam(critic_.param_count(), config_.critic_adam);
}

std::size_t PpoAgent::sample_action(const Observation& scaled) {
    const auto p = softmax(precedences(scaled, theta_));
    const double u = uniform01(rng_);
    double acc = 0;
    for (std::size_t a = 0; a < p.size(); ++a) {
        acc += p[a];
        if (u < acc) return a;
    }
    return p.size() - 1;
}

EpisodeRecord PpoAgent::run_episode(Simulator& env, std::uint64_t env_seed, bool learn) {
    EpisodeRecord record;
    std::vector<PpoSample> episode;
    Observation obs = env.reset(env_seed);
    double discount = 1.0;
    while (!env.done()) {
        PpoSample s;
        s.state = encoder_.scaled(obs);
        s.features = encoder_.encode(obs);
        s.action = sample_action(s.state);
        s.log_prob = policy_log_prob(s.state, s.action, theta_);
        StepResult r = env.step(s.action);
        s.reward = r.reward * config_.reward_scale;
        s.next_features = encoder_.encode(r.observation);
        s.terminal = r.done;
        episode.push_back(std::move(s));
        record.discounted_return += discount * r.reward;
        discount *= config_.gamma;
        ++record.steps;
        obs = std::move(r.observation);
    }
    record.metrics = env.metrics();
    if (learn && !episode.empty()) update(episode);
    return record;
}

void PpoAgent::prepare(std::vector<PpoSample>& episode) const {
    double ret = 0;
    for (std::size_t i = episode.size(); i-- > 0;) {
        PpoSample& s = episode[i];
        ret = s.reward + (s.terminal ? 0.0 : config_.gamma * ret);
        s.ret = ret;
        const double v = critic_.forward(s.features)[0];
        const double v_next = s.terminal ? 0.0 : critic_.forward(s.next_features)[0];
        s.advantage = s.reward + config_.gamma * v_next - v;
    }
}

void PpoAgent::update(std::vector<PpoSample>& episode) {
    prepare(episode);
    std::vector<std::size_t> order(episode.size());
    std::iota(order.begin(), order.end(), 0);
    MlpCache cache;
    for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
        // Fisher-Yates with our own uniform draw; std::shuffle is not portable across libraries.
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng_, i)]);
        for (std::size_t begin = 0; begin < order.size(); begin += config_.minibatch) {
            const std::size_t end = std::min(order.size(), begin + config_.minibatch);
            std::vector<const PpoSample*> batch;
            for (std::size_t i = begin; i < end; ++i) batch.push_back(&episode[order[i]]);

            std::vector<double> grad = ppo_surrogate_grad(batch, theta_, config_.clip);
            for (double& g : grad) g = std::isfinite(g) ? -g : 0.0;  // ascend the surrogate
            actor_adam_.step(theta_.values(), grad);
            theta_.project(config_.bounds);

            std::vector<double> cgrad(critic_.param_count(), 0.0);
            const double inv = 1.0 / static_cast<double>(batch.size());
            for (const PpoSample* s : batch) {
                critic_.forward(s->features, cache);
                const double e = cache.output()[0] - s->ret;
                const double gout = e * inv;
                critic_.backward(cache, std::span<const double>(&gout, 1), cgrad);
            }
            critic_adam_.step(critic_.params(), cgrad);
        }
    }
}

} // namespace regsig
