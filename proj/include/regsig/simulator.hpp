#pragma once

#include "regsig/demand.hpp"
#include "regsig/intersection.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <vector>

namespace regsig {

struct SimParams {
    double link_length = 300.0;         // m
    double free_flow_speed = 15.0;      // m/s
    double saturation_headway = 2.0;    // s per vehicle per lane
    double permissive_headway_factor = 2.0;
    double yellow = 3.0;                // s
    double min_phase = 3.0;             // s
    double detection_range = std::numeric_limits<double>::infinity();  // m from the stop line
    double cutoff_extra = 1800.0;       // s past the demand horizon
    std::size_t initial_combo = 0;

    double free_flow_time() const { return link_length / free_flow_speed; }
};

/// Phase-dependent state variables, in order: stopped count, approaching count, cumulative stopped
/// time, average stopped time, stopped per served lane, average approach speed.
using PhaseVariables = std::array<double, 6>;
inline constexpr std::size_t kStateVariables = 6;

enum class VehicleStatus { Pending, Approaching, Queued, Departed };

struct Vehicle {
    std::size_t id = 0;
    std::size_t movement = 0;
    std::size_t lane = 0;
    double spawn_time = 0.0;
    double stop_line_time = 0.0;  // spawn_time + free-flow travel time
    double exit_time = std::numeric_limits<double>::quiet_NaN();

    bool departed() const { return exit_time == exit_time; }
    VehicleStatus status(double clock) const;
    /// exit - spawn - free-flow time; only meaningful once departed.
    double delay() const { return exit_time - stop_line_time; }
};

/// Signal assignment at a decision point. green/yellow/red partition the phase positions.
struct SignalState {
    std::vector<std::size_t> green;
    std::vector<std::size_t> yellow;
    std::vector<std::size_t> red;
    std::size_t combo = 0;
    double phase_timer = 0.0;  // seconds the current combo has been green
    bool in_clearance = false;
    double clearance_remaining = 0.0;
};

struct Observation {
    double clock = 0.0;
    std::vector<PhaseVariables> phase;           // per phase position
    std::vector<ClearanceCase> clearance;        // per candidate combo, from the current combo
    std::size_t current_combo = 0;
    double green_time = 0.0;

    ClearanceFlags flags(std::size_t combo) const { return ClearanceFlags::from_case(clearance.at(combo)); }
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    double duration = 0.0;
    bool done = false;
};

struct EpisodeMetrics {
    double total_delay = 0.0;
    std::size_t vehicles = 0;      // departed
    double average_delay = 0.0;
    std::size_t residual = 0;      // still in network at the end
    bool no_departures = false;    // average reported as 0
};

/// Counters filled while executing signal intervals.
struct SignalAudit {
    std::size_t intervals = 0;
    std::size_t conflicting_green = 0;
    std::size_t missing_yellow = 0;  // green -> red with no yellow in between
    std::size_t short_yellow = 0;    // yellow shorter or longer than configured
    std::size_t yellow_transitions = 0;

    bool clean() const { return conflicting_green == 0 && missing_yellow == 0 && short_yellow == 0; }
};

/// Point-queue model of one intersection. Vehicles travel the approach link at free-flow speed,
/// wait in a FIFO queue at the stop line, and discharge one per saturation headway while green.
class Simulator {
public:
    Simulator(std::shared_ptr<const IntersectionLayout> layout, DemandProfile demand, SimParams params = {});

    Observation reset(std::uint64_t seed);
    /// Runs yellow and clearance when the action changes the green set, then min_phase of green.
    StepResult step(std::size_t combo);
    Observation observe() const;
    EpisodeMetrics metrics() const;

    bool done() const { return done_; }
    double clock() const { return clock_; }
    double horizon() const { return horizon_; }
    double cutoff() const { return cutoff_; }
    std::size_t current_combo() const { return combo_; }
    SignalState signal() const;
    const SignalAudit& audit() const { return audit_; }
    const IntersectionLayout& layout() const { return *layout_; }
    const SimParams& params() const { return params_; }
    const std::vector<Vehicle>& vehicles() const { return vehicles_; }
    std::size_t combo_count() const { return layout_->combos.size(); }

    std::size_t spawned() const { return spawned_; }
    std::size_t departed() const { return departed_; }
    std::size_t in_network() const;

    /// True when a served lane of `combo` holds a queued vehicle or one reaching the stop line
    /// within `window` seconds.
    bool demand_within(std::size_t combo, double window) const;

    /// Places a vehicle directly at the given lane (position) and stop-line time. Test and
    /// scenario-construction hook; the vehicle counts as spawned.
    void place_vehicle(std::size_t lane, double stop_line_time);

    ClearanceDecision clearance(std::size_t from, std::size_t to) const { return clearance_.at(from * combo_count() + to); }

private:
    struct LaneState {
        std::deque<std::size_t> queue;  // vehicle ids in stop-line order, not yet departed
        bool green = false;
        double green_since = 0.0;
        double last_departure = -std::numeric_limits<double>::infinity();
        double headway = 0.0;
    };
    enum class Color : std::uint8_t { Red, Yellow, Green };

    double run_interval(double duration, const std::vector<bool>& green, const std::vector<bool>& yellow);
    void admit_until(double t_end);
    double advance_lane(LaneState& lane, double t0, double t1);
    void update_done();

    std::shared_ptr<const IntersectionLayout> layout_;
    DemandProfile demand_;
    SimParams params_;
    std::vector<std::vector<std::size_t>> phase_lanes_;
    std::vector<ClearanceDecision> clearance_;
    double horizon_ = 0.0;
    double cutoff_ = 0.0;

    std::vector<Vehicle> vehicles_;
    std::vector<std::size_t> pending_;  // ids by spawn time
    std::size_t next_pending_ = 0;
    std::vector<LaneState> lanes_;
    std::vector<Color> colors_;
    std::vector<double> yellow_since_;
    double clock_ = 0.0;
    std::size_t combo_ = 0;
    double green_time_ = 0.0;
    std::size_t spawned_ = 0;
    std::size_t departed_ = 0;
    bool done_ = false;
    SignalAudit audit_;
};

} // namespace regsig
