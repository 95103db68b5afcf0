#pragma once

#include "regsig/intersection.hpp"
#include "regsig/simulator.hpp"

#include <vector>

namespace regsig {

struct ActuatedConfig {
    double min_green = 3.0;
    double gap_out = 3.0;     // s without a vehicle at or reaching the stop line
    double max_green = 300.0;
};

/// Default cycle for the actuated controller: combos made only of protected lefts first, then the
/// rest, each group in combo index order.
std::vector<std::size_t> default_cycle_order(const IntersectionLayout& layout);

/// Conventional actuated control over a fixed cycle. Holds the current combo while a served lane
/// has demand within the gap-out window, up to max green, then moves to the next combo in the cycle.
class ActuatedController {
public:
    ActuatedController(const IntersectionLayout& layout, ActuatedConfig config, std::vector<std::size_t> order = {});

    void reset() {}
    std::size_t operator()(const Observation& obs, const Simulator& env) const;

    const std::vector<std::size_t>& order() const { return order_; }
    const ActuatedConfig& config() const { return config_; }

private:
    std::size_t next_after(std::size_t combo) const;

    ActuatedConfig config_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> position_;  // combo -> slot in order_, or npos
};

struct FixedSplit {
    std::size_t combo = 0;
    double green = 0.0;  // s
};

/// Fixed-time plan: combos in order, each held for its green split.
struct FixedTimePlan {
    std::vector<FixedSplit> splits;
    double cycle_length = 0.0;  // sum of the splits
};

/// Throws Error when the plan is empty, names an unknown combo, has a split that is not a positive
/// multiple of `min_phase`, or does not sum to its cycle length.
void validate_plan(const FixedTimePlan& plan, const IntersectionLayout& layout, double min_phase);

/// Equal splits of `green` seconds over every combo in index order.
FixedTimePlan equal_split_plan(const IntersectionLayout& layout, double green);

class FixedTimeController {
public:
    FixedTimeController(const IntersectionLayout& layout, FixedTimePlan plan, double min_phase);

    void reset() {
        slot_ = 0;
        elapsed_ = 0.0;
    }
    std::size_t operator()(const Observation& obs, const Simulator& env);

    const FixedTimePlan& plan() const { return plan_; }

private:
    FixedTimePlan plan_;
    double min_phase_;
    std::size_t slot_ = 0;
    double elapsed_ = 0.0;  // green already granted to the current split
};

} // namespace regsig
