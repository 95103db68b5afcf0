#pragma once

#include "regsig/episode.hpp"
#include "regsig/features.hpp"
#include "regsig/neural.hpp"
#include "regsig/regulatable.hpp"
#include "regsig/replay.hpp"

#include <memory>
#include <span>
#include <string>

namespace regsig {

/// Which function acts and how the precedence parameters are trained.
///   Dqn:  Q acts, no precedence function.
///   Drq:  G acts; G(s, a) regressed on the Bellman target.
///   Drsq: G acts; softmax(G) fit to softmax(Q) by cross-entropy.
///   Drhq: G acts; softmax(G) fit to the one-hot argmax of Q by cross-entropy.
enum class Learner { Dqn, Drq, Drsq, Drhq };

std::string to_string(Learner learner);
Learner learner_from_string(const std::string& text);

enum class EpsilonShape { Step, Linear };

struct DqnConfig {
    double gamma = 0.8;
    double epsilon_start = 0.05;
    double epsilon_end = 0.0;
    std::size_t epsilon_episodes = 20;  // epsilon_end from this episode on
    EpsilonShape epsilon_shape = EpsilonShape::Step;
    std::size_t minibatch = 32;
    std::size_t replay_capacity = 100000;
    std::size_t target_sync = 500;        // C, in environment steps
    std::size_t distill_iterations = 2;   // inner minibatches per step
    std::size_t hidden_units = 64;
    std::size_t hidden_layers = 3;
    AdamConfig q_adam;
    AdamConfig theta_adam;
    double reward_scale = 0.01;           // applied to rewards before learning
    bool drq_online_target = false;       // DRQ Bellman target from theta instead of theta-bar
    ThetaBounds bounds;

    double epsilon(std::size_t episode) const;
};

std::size_t argmax(std::span<const double> values);

/// One DQN minibatch step on Q with Huber loss against y = r + gamma max_a' Q-bar(s', a')
/// (y = r on terminal transitions). Returns the mean loss.
double q_learning_update(Mlp& q, const Mlp& target, Adam& adam, std::span<const Transition* const> batch,
                         double gamma);

struct DistillResult {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d theta, averaged over the batch
};

DistillResult distill_gradient(Learner mode, const Mlp& q, const Mlp& target, std::span<const Transition* const> batch,
                               const ThetaPrime& theta, double gamma, bool online_target = false);

/// distill_gradient followed by an Adam step and projection onto the bounds. Returns the loss.
double distill_update(Learner mode, const Mlp& q, const Mlp& target, std::span<const Transition* const> batch,
                      ThetaPrime& theta, Adam& adam, const DqnConfig& config);

/// DQN agent, optionally with a regulatable actor trained by distillation from Q.
class DqnAgent {
public:
    DqnAgent(std::shared_ptr<const IntersectionLayout> layout, FeatureEncoder encoder, DqnConfig config,
             Learner learner, std::uint64_t seed);

    bool regulatable() const { return learner_ != Learner::Dqn; }
    Learner learner() const { return learner_; }

    std::vector<double> q_values(const Observation& raw) const;
    std::size_t greedy_action(const Observation& raw) const;
    std::size_t act(const Observation& raw, double epsilon);

    struct StepInfo {
        StepResult result;
        std::size_t action = 0;
        bool trained = false;
        double q_loss = 0.0;
        double distill_loss = 0.0;
    };

    /// Act, execute, store, train Q, maybe sync the target, then distill into theta.
    StepInfo step(Simulator& env, Observation& obs, double epsilon);

    EpisodeRecord run_episode(Simulator& env, std::uint64_t env_seed, std::size_t episode);

    /// Fraction of transitions whose argmax G equals argmax Q.
    double imitation_rate(std::span<const Transition* const> states) const;

    void sync_target() { target_ = q_; }

    const Mlp& q() const { return q_; }
    const Mlp& target() const { return target_; }
    const ThetaPrime& theta() const { return theta_; }
    ThetaPrime& theta() { return theta_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const FeatureEncoder& encoder() const { return encoder_; }
    const DqnConfig& config() const { return config_; }
    std::size_t total_steps() const { return steps_; }

    Transition make_transition(const Observation& raw, std::size_t action, const StepResult& result) const;

private:
    std::shared_ptr<const IntersectionLayout> layout_;
    FeatureEncoder encoder_;
    DqnConfig config_;
    Learner learner_;
    Rng rng_;
    Mlp q_;
    Mlp target_;
    Adam q_adam_;
    ThetaPrime theta_;
    Adam theta_adam_;
    ReplayBuffer buffer_;
    std::size_t steps_ = 0;
};

} // namespace regsig
