#pragma once

#include "regsig/episode.hpp"
#include "regsig/features.hpp"
#include "regsig/neural.hpp"
#include "regsig/regulatable.hpp"

#include <memory>
#include <span>
#include <vector>

namespace regsig {

struct PpoConfig {
    double gamma = 0.8;
    double clip = 0.2;
    std::size_t epochs = 4;
    std::size_t minibatch = 64;
    std::size_t critic_hidden_units = 64;
    std::size_t critic_hidden_layers = 2;
    AdamConfig actor_adam;
    AdamConfig critic_adam;
    double reward_scale = 0.01;
    ThetaBounds bounds;
};

/// One on-policy sample. `state` is the scaled observation read by G.
struct PpoSample {
    Observation state;
    std::vector<double> features;
    std::size_t action = 0;
    double log_prob = 0.0;   // under the policy that collected it
    double reward = 0.0;     // scaled
    std::vector<double> next_features;
    bool terminal = false;
    double advantage = 0.0;
    double ret = 0.0;        // discounted return from this step
};

/// log softmax(G(s, .))[a]
double policy_log_prob(const Observation& state, std::size_t action, const ThetaPrime& theta);

/// Clipped surrogate mean_j min(rho_j A_j, clip(rho_j, 1 - eps, 1 + eps) A_j), to be maximized.
double ppo_surrogate(std::span<const PpoSample* const> batch, const ThetaPrime& theta, double clip);

/// Gradient of ppo_surrogate w.r.t. theta.
std::vector<double> ppo_surrogate_grad(std::span<const PpoSample* const> batch, const ThetaPrime& theta, double clip);

/// PPO with the precedence function as actor: pi(a | s) = softmax over G(s, .; theta).
class PpoAgent {
public:
    PpoAgent(std::shared_ptr<const IntersectionLayout> layout, FeatureEncoder encoder, PpoConfig config,
             std::uint64_t seed);

    std::size_t sample_action(const Observation& scaled);

    /// Collects one episode with the stochastic policy, then updates actor and critic on it.
    EpisodeRecord run_episode(Simulator& env, std::uint64_t env_seed, bool learn = true);

    /// Fills advantages (one-step TD against the critic) and discounted returns.
    void prepare(std::vector<PpoSample>& episode) const;
    void update(std::vector<PpoSample>& episode);

    const ThetaPrime& theta() const { return theta_; }
    ThetaPrime& theta() { return theta_; }
    const Mlp& critic() const { return critic_; }
    const PpoConfig& config() const { return config_; }

private:
    std::shared_ptr<const IntersectionLayout> layout_;
    FeatureEncoder encoder_;
    PpoConfig config_;
    Rng rng_;
    ThetaPrime theta_;
    Adam actor_adam_;
    Mlp critic_;
    Adam critic_adam_;
};

} // namespace regsig
