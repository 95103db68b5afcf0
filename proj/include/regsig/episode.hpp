#pragma once

#include "regsig/simulator.hpp"

#include <cstdint>
#include <functional>

namespace regsig {

struct EpisodeRecord {
    EpisodeMetrics metrics;
    double discounted_return = 0.0;  // sum_t gamma^t r_t over raw rewards
    std::size_t steps = 0;
};

using Policy = std::function<std::size_t(const Observation&, const Simulator&)>;

/// Resets `env` with `seed` and follows `policy` until the episode ends.
EpisodeRecord rollout(Simulator& env, std::uint64_t seed, const Policy& policy, double gamma);

} // namespace regsig
