#include "regsig/episode.hpp"

namespace regsig {

EpisodeRecord rollout(Simulator& env, std::uint64_t seed, const Policy& policy, double gamma) {
    EpisodeRecord record;
    Observation obs = env.reset(seed);
    double discount = 1.0;
    while (!env.done()) {
        StepResult r = env.step(policy(obs, env));
        record.discounted_return += discount * r.reward;
        discount *= gamma;
        ++record.steps;
        obs = std::move(r.observation);
    }
    record.metrics = env.metrics();
    return record;
}

} // namespace regsig
