#include "regsig/baselines.hpp"

#include "regsig/error.hpp"

#include <cmath>
#include <limits>

namespace regsig {

namespace {
constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
constexpr double kTimeEps = 1e-9;
} // namespace

std::vector<std::size_t> default_cycle_order(const IntersectionLayout& layout) {
    std::vector<std::size_t> lefts, rest;
    for (const PhaseCombo& c : layout.combos) {
        bool all_left = true;
        for (std::size_t p : c.phases) all_left = all_left && layout.phases[p].turn == Turn::ProtectedLeft;
        (all_left ? lefts : rest).push_back(c.index);
    }
    lefts.insert(lefts.end(), rest.begin(), rest.end());
    return lefts;
}

ActuatedController::ActuatedController(const IntersectionLayout& layout, ActuatedConfig config,
                                       std::vector<std::size_t> order)
    : config_(config), order_(order.empty() ? default_cycle_order(layout) : std::move(order)) {
    if (!(config_.min_green > 0) || !(config_.max_green >= config_.min_green) || !(config_.gap_out >= 0))
        throw Error("actuated timings must satisfy 0 < min_green <= max_green and gap_out >= 0");
    position_.assign(layout.combos.size(), npos);
    for (std::size_t i = 0; i < order_.size(); ++i) {
        if (order_[i] >= layout.combos.size()) throw Error("actuated cycle names an unknown combo");
        if (position_[order_[i]] != npos) throw Error("actuated cycle repeats a combo");
        position_[order_[i]] = i;
    }
}

std::size_t ActuatedController::next_after(std::size_t combo) const {
    const std::size_t slot = position_.at(combo);
    return slot == npos ? order_.front() : order_[(slot + 1) % order_.size()];
}

std::size_t ActuatedController::operator()(const Observation& obs, const Simulator& env) const {
    const std::size_t current = obs.current_combo;
    if (position_.at(current) == npos) return order_.front();
    const double green = obs.green_time;
    if (green + kTimeEps < config_.min_green) return current;
    if (green + kTimeEps >= config_.max_green) return next_after(current);
    if (env.demand_within(current, config_.gap_out)) return current;
    return next_after(current);
}

void validate_plan(const FixedTimePlan& plan, const IntersectionLayout& layout, double min_phase) {
    if (plan.splits.empty()) throw Error("fixed-time plan has no splits");
    double sum = 0;
    for (const FixedSplit& s : plan.splits) {
        if (s.combo >= layout.combos.size()) throw Error("fixed-time plan names an unknown combo");
        if (!(s.green > 0)) throw Error("fixed-time split must be positive");
        const double steps = s.green / min_phase;
        if (std::abs(steps - std::round(steps)) > 1e-9)
            throw Error("fixed-time split " + std::to_string(s.green) + " s is not a multiple of the minimum phase");
        sum += s.green;
    }
    if (std::abs(sum - plan.cycle_length) > 1e-9)
        throw Error("fixed-time splits sum to " + std::to_string(sum) + " s, cycle length is " +
                    std::to_string(plan.cycle_length) + " s");
}

FixedTimePlan equal_split_plan(const IntersectionLayout& layout, double green) {
    FixedTimePlan plan;
    for (const PhaseCombo& c : layout.combos) {
        plan.splits.push_back({c.index, green});
        plan.cycle_length += green;
    }
    return plan;
}

FixedTimeController::FixedTimeController(const IntersectionLayout& layout, FixedTimePlan plan, double min_phase)
    : plan_(std::move(plan)), min_phase_(min_phase) {
    validate_plan(plan_, layout, min_phase_);
}

std::size_t FixedTimeController::operator()(const Observation&, const Simulator&) {
    if (elapsed_ + kTimeEps >= plan_.splits[slot_].green) {
        slot_ = (slot_ + 1) % plan_.splits.size();
        elapsed_ = 0.0;
    }
    elapsed_ += min_phase_;
    return plan_.splits[slot_].combo;
}

} // namespace regsig
