#include "regsig/simulator.hpp"

#include "regsig/error.hpp"

#include <algorithm>
#include <cmath>

namespace regsig {

VehicleStatus Vehicle::status(double clock) const {
    if (departed() && exit_time <= clock) return VehicleStatus::Departed;
    if (spawn_time > clock) return VehicleStatus::Pending;
    if (stop_line_time > clock) return VehicleStatus::Approaching;
    return VehicleStatus::Queued;
}

Simulator::Simulator(std::shared_ptr<const IntersectionLayout> layout, DemandProfile demand, SimParams params)
    : layout_(std::move(layout)), demand_(std::move(demand)), params_(params) {
    if (!layout_) throw Error("simulator needs a layout");
    if (layout_->combos.empty()) throw Error("layout has no phase combinations");
    if (params_.free_flow_speed <= 0 || params_.link_length <= 0 || params_.saturation_headway <= 0 ||
        params_.min_phase <= 0 || params_.yellow <= 0)
        throw Error("simulator durations, speeds and lengths must be positive");
    if (params_.initial_combo >= layout_->combos.size()) throw Error("initial combo out of range");

    phase_lanes_.resize(layout_->phases.size());
    for (std::size_t p = 0; p < layout_->phases.size(); ++p) {
        for (int lane_id : layout_->phases[p].served_lanes) {
            auto pos = layout_->lane_position(lane_id);
            if (!pos) throw Error("phase references unknown lane " + std::to_string(lane_id));
            if (std::find(phase_lanes_[p].begin(), phase_lanes_[p].end(), *pos) == phase_lanes_[p].end())
                phase_lanes_[p].push_back(*pos);
        }
    }

    const std::size_t k = layout_->combos.size();
    clearance_.reserve(k * k);
    for (std::size_t from = 0; from < k; ++from) {
        for (std::size_t to = 0; to < k; ++to) {
            clearance_.push_back(classify_clearance(*layout_, layout_->combos[from], layout_->combos[to]));
        }
    }

    horizon_ = demand_.horizon();
    cutoff_ = horizon_ + params_.cutoff_extra;
    reset(0);
}

Observation Simulator::reset(std::uint64_t seed) {
    vehicles_.clear();
    pending_.clear();
    next_pending_ = 0;
    spawned_ = departed_ = 0;
    clock_ = 0.0;
    done_ = false;
    audit_ = {};

    const double fft = params_.free_flow_time();
    std::vector<Arrival> arrivals;
    for (std::size_t bin = 0; bin < demand_.bins(); ++bin) {
        auto batch = spawn_arrivals(demand_, bin, *layout_, seed);
        arrivals.insert(arrivals.end(), batch.begin(), batch.end());
    }
    std::stable_sort(arrivals.begin(), arrivals.end(),
                     [](const Arrival& a, const Arrival& b) { return a.spawn_time < b.spawn_time; });
    vehicles_.reserve(arrivals.size());
    for (const Arrival& a : arrivals) {
        Vehicle v;
        v.id = vehicles_.size();
        v.movement = a.movement;
        v.lane = a.lane;
        v.spawn_time = a.spawn_time;
        v.stop_line_time = a.spawn_time + fft;
        pending_.push_back(v.id);
        vehicles_.push_back(v);
    }

    lanes_.assign(layout_->lanes.size(), LaneState{});
    colors_.assign(layout_->phases.size(), Color::Red);
    yellow_since_.assign(layout_->phases.size(), 0.0);
    combo_ = params_.initial_combo;
    green_time_ = 0.0;
    for (std::size_t p : layout_->combos[combo_].phases) {
        colors_[p] = Color::Green;
        for (std::size_t l : phase_lanes_[p]) {
            lanes_[l].green = true;
            lanes_[l].green_since = 0.0;
            lanes_[l].headway = params_.saturation_headway;
        }
    }
    return observe();
}

StepResult Simulator::step(std::size_t combo) {
    if (combo >= layout_->combos.size()) throw Error("action is not an enumerated combo");
    if (done_) throw Error("step called after the episode ended");

    const std::size_t n = layout_->phases.size();
    const double start = clock_;
    double accrued = 0.0;

    std::vector<bool> in_next(n, false);
    for (std::size_t p : layout_->combos[combo].phases) in_next[p] = true;

    if (combo != combo_) {
        std::vector<bool> continuing(n, false);
        std::vector<bool> losing(n, false);
        bool any_losing = false;
        for (std::size_t p : layout_->combos[combo_].phases) {
            if (in_next[p]) {
                continuing[p] = true;
            } else {
                losing[p] = true;
                any_losing = true;
            }
        }
        if (any_losing) accrued += run_interval(params_.yellow, continuing, losing);
        const ClearanceDecision cl = clearance(combo_, combo);
        if (cl.duration > 0.0) accrued += run_interval(cl.duration, continuing, std::vector<bool>(n, false));
        combo_ = combo;
        green_time_ = 0.0;
    }

    const double before_green = clock_;
    accrued += run_interval(params_.min_phase, in_next, std::vector<bool>(n, false));
    green_time_ += clock_ - before_green;

    update_done();
    return StepResult{observe(), -accrued, clock_ - start, done_};
}

double Simulator::run_interval(double duration, const std::vector<bool>& green, const std::vector<bool>& yellow) {
    if (clock_ >= cutoff_) return 0.0;
    const double t0 = clock_;
    const double t1 = std::min(clock_ + duration, cutoff_);
    const std::size_t n = layout_->phases.size();

    ++audit_.intervals;
    for (std::size_t a = 0; a < n; ++a) {
        if (!green[a]) continue;
        for (std::size_t b = a + 1; b < n; ++b) {
            if (green[b] && layout_->conflicts.conflicts(a, b)) {
                ++audit_.conflicting_green;
                a = n;
                break;
            }
        }
    }
    for (std::size_t p = 0; p < n; ++p) {
        const Color next = green[p] ? Color::Green : (yellow[p] ? Color::Yellow : Color::Red);
        const Color prev = colors_[p];
        if (prev == Color::Green && next == Color::Red) ++audit_.missing_yellow;
        if (prev == Color::Yellow && next != Color::Yellow) {
            ++audit_.yellow_transitions;
            if (std::abs((t0 - yellow_since_[p]) - params_.yellow) > 1e-9) ++audit_.short_yellow;
        }
        if (next == Color::Yellow && prev != Color::Yellow) yellow_since_[p] = t0;
        colors_[p] = next;
    }

    std::vector<double> headway(lanes_.size(), 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        if (!green[p]) continue;
        const double h = layout_->phases[p].turn == Turn::PermissiveLeft
                             ? params_.saturation_headway * params_.permissive_headway_factor
                             : params_.saturation_headway;
        for (std::size_t l : phase_lanes_[p]) headway[l] = headway[l] == 0.0 ? h : std::min(headway[l], h);
    }
    for (std::size_t l = 0; l < lanes_.size(); ++l) {
        const bool now_green = headway[l] > 0.0;
        if (now_green && !lanes_[l].green) lanes_[l].green_since = t0;
        lanes_[l].green = now_green;
        lanes_[l].headway = headway[l];
    }

    admit_until(t1);
    double accrued = 0.0;
    for (LaneState& lane : lanes_) accrued += advance_lane(lane, t0, t1);
    clock_ = t1;
    return accrued;
}

void Simulator::admit_until(double t_end) {
    while (next_pending_ < pending_.size() && vehicles_[pending_[next_pending_]].spawn_time < t_end) {
        const Vehicle& v = vehicles_[pending_[next_pending_]];
        lanes_[v.lane].queue.push_back(v.id);
        ++spawned_;
        ++next_pending_;
    }
}

double Simulator::advance_lane(LaneState& lane, double t0, double t1) {
    double accrued = 0.0;
    while (lane.green && !lane.queue.empty()) {
        Vehicle& v = vehicles_[lane.queue.front()];
        if (v.stop_line_time >= t1) break;
        const double earliest =
            std::max({v.stop_line_time, lane.green_since + lane.headway, lane.last_departure + lane.headway});
        if (earliest >= t1) break;
        v.exit_time = earliest;
        lane.last_departure = earliest;
        accrued += std::max(0.0, earliest - std::max(v.stop_line_time, t0));
        lane.queue.pop_front();
        ++departed_;
    }
    for (std::size_t id : lane.queue) {
        const Vehicle& v = vehicles_[id];
        if (v.stop_line_time >= t1) break;
        accrued += t1 - std::max(v.stop_line_time, t0);
    }
    return accrued;
}

void Simulator::update_done() {
    if (clock_ >= cutoff_) {
        done_ = true;
    } else if (clock_ >= horizon_ && next_pending_ == pending_.size() && in_network() == 0) {
        done_ = true;
    }
}

std::size_t Simulator::in_network() const { return spawned_ - departed_; }

Observation Simulator::observe() const {
    Observation obs;
    obs.clock = clock_;
    obs.current_combo = combo_;
    obs.green_time = green_time_;
    obs.phase.resize(layout_->phases.size());
    const double range = params_.detection_range;

    for (std::size_t p = 0; p < layout_->phases.size(); ++p) {
        double stopped = 0, approaching = 0, stopped_time = 0;
        for (std::size_t l : phase_lanes_[p]) {
            for (std::size_t id : lanes_[l].queue) {
                const Vehicle& v = vehicles_[id];
                if (v.stop_line_time <= clock_) {
                    stopped += 1;
                    stopped_time += clock_ - v.stop_line_time;
                } else if ((v.stop_line_time - clock_) * params_.free_flow_speed <= range) {
                    approaching += 1;
                }
            }
        }
        PhaseVariables& s = obs.phase[p];
        s[0] = stopped;
        s[1] = approaching;
        s[2] = stopped_time;
        s[3] = stopped > 0 ? stopped_time / stopped : 0.0;
        s[4] = stopped / static_cast<double>(phase_lanes_[p].size());
        s[5] = approaching > 0 ? params_.free_flow_speed : 0.0;
    }

    const std::size_t k = layout_->combos.size();
    obs.clearance.resize(k);
    for (std::size_t c = 0; c < k; ++c) obs.clearance[c] = clearance(combo_, c).flags.active();
    return obs;
}

EpisodeMetrics Simulator::metrics() const {
    EpisodeMetrics m;
    for (const Vehicle& v : vehicles_) {
        if (v.departed()) {
            m.total_delay += v.delay();
            ++m.vehicles;
        }
    }
    for (const LaneState& lane : lanes_) {
        for (std::size_t id : lane.queue) {
            m.total_delay += std::max(0.0, clock_ - vehicles_[id].stop_line_time);
            ++m.residual;
        }
    }
    if (m.vehicles == 0) {
        m.no_departures = true;
        m.average_delay = 0.0;
    } else {
        m.average_delay = m.total_delay / static_cast<double>(m.vehicles);
    }
    return m;
}

SignalState Simulator::signal() const {
    SignalState s;
    s.combo = combo_;
    s.phase_timer = green_time_;
    std::vector<bool> green(layout_->phases.size(), false);
    for (std::size_t p : layout_->combos[combo_].phases) green[p] = true;
    for (std::size_t p = 0; p < green.size(); ++p) (green[p] ? s.green : s.red).push_back(p);
    return s;
}

bool Simulator::demand_within(std::size_t combo, double window) const {
    for (std::size_t p : layout_->combos.at(combo).phases) {
        for (std::size_t l : phase_lanes_[p]) {
            for (std::size_t id : lanes_[l].queue) {
                if (vehicles_[id].stop_line_time <= clock_ + window) return true;
            }
        }
    }
    return false;
}

void Simulator::place_vehicle(std::size_t lane, double stop_line_time) {
    if (lane >= lanes_.size()) throw Error("lane out of range");
    const auto tokens = movement_tokens(*layout_);
    const auto it = std::find(tokens.begin(), tokens.end(), layout_->lanes[lane].movement);
    Vehicle v;
    v.id = vehicles_.size();
    v.movement = static_cast<std::size_t>(it - tokens.begin());
    v.lane = lane;
    v.stop_line_time = stop_line_time;
    v.spawn_time = stop_line_time - params_.free_flow_time();
    vehicles_.push_back(v);

    auto& queue = lanes_[lane].queue;
    auto pos = std::find_if(queue.begin(), queue.end(),
                            [&](std::size_t id) { return vehicles_[id].stop_line_time > stop_line_time; });
    queue.insert(pos, v.id);
    ++spawned_;
}

} // namespace regsig
