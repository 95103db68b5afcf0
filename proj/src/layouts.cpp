#include "regsig/layouts.hpp"

#include "regsig/error.hpp"

#include <algorithm>

namespace regsig {

namespace {

struct PhaseDef {
    int id;
    const char* road;
    Turn turn;
    std::vector<int> lanes;
};

IntersectionLayout build(std::vector<std::string> roads, std::vector<Lane> lanes, const std::vector<PhaseDef>& defs,
                         const std::vector<std::pair<int, int>>& compatible) {
    IntersectionLayout layout;
    layout.roads = std::move(roads);
    layout.lanes = std::move(lanes);
    for (const PhaseDef& d : defs) layout.phases.push_back(Phase{d.id, d.road, d.turn, d.lanes});

    // Everything conflicts except the listed pairs.
    const std::size_t n = layout.phases.size();
    layout.conflicts = ConflictMatrix(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) layout.conflicts.set(a, b, a != b);
    for (auto [x, y] : compatible) layout.conflicts.set_pair(*layout.phase_position(x), *layout.phase_position(y), false);

    layout.combos = enumerate_combos(layout);
    fill_standard_clearance(layout);
    return layout;
}

std::vector<Lane> four_approach_lanes() {
    return {
        {1, "N", "SB_L"}, {2, "N", "SB_T"}, {3, "N", "SB_T"},
        {4, "S", "NB_L"}, {5, "S", "NB_T"}, {6, "S", "NB_T"},
        {7, "E", "WB_L"}, {8, "E", "WB_T"}, {9, "E", "WB_T"},
        {10, "W", "EB_L"}, {11, "W", "EB_T"}, {12, "W", "EB_T"},
    };
}

std::vector<PhaseDef> eight_phases() {
    return {
        {1, "N", Turn::ProtectedLeft, {1}},
        {2, "S", Turn::Through, {5, 6}},
        {3, "E", Turn::ProtectedLeft, {7}},
        {4, "W", Turn::Through, {11, 12}},
        {5, "S", Turn::ProtectedLeft, {4}},
        {6, "N", Turn::Through, {2, 3}},
        {7, "W", Turn::ProtectedLeft, {10}},
        {8, "E", Turn::Through, {8, 9}},
    };
}

std::vector<std::pair<int, int>> eight_pairs() {
    return {{1, 5}, {1, 6}, {2, 5}, {2, 6}, {3, 7}, {3, 8}, {4, 7}, {4, 8}};
}

} // namespace

void fill_standard_clearance(IntersectionLayout& layout) {
    layout.clearance.table.clear();
    for (const PhaseCombo& from : layout.combos) {
        for (const PhaseCombo& to : layout.combos) {
            if (from.index == to.index) continue;
            bool shared = false;
            bool permissive_change = false;
            for (std::size_t p : from.phases) {
                const bool kept = std::find(to.phases.begin(), to.phases.end(), p) != to.phases.end();
                shared = shared || kept;
                if (!kept && layout.phases[p].turn == Turn::PermissiveLeft) permissive_change = true;
            }
            for (std::size_t p : to.phases) {
                const bool kept = std::find(from.phases.begin(), from.phases.end(), p) != from.phases.end();
                if (!kept && layout.phases[p].turn == Turn::PermissiveLeft) permissive_change = true;
            }
            ClearanceCase c = ClearanceCase::Full;
            if (shared) c = permissive_change ? ClearanceCase::Permissive : ClearanceCase::Partial;
            layout.clearance.table[{layout.combo_key(from), layout.combo_key(to)}] = {c};
        }
    }
}

IntersectionLayout eight_phase_layout() {
    return build({"N", "S", "E", "W"}, four_approach_lanes(), eight_phases(), eight_pairs());
}

IntersectionLayout ten_phase_layout() {
    auto phases = eight_phases();
    phases.push_back({9, "S", Turn::PermissiveLeft, {4}});
    phases.push_back({10, "N", Turn::PermissiveLeft, {1}});
    auto pairs = eight_pairs();
    pairs.insert(pairs.end(), {{4, 9}, {8, 10}, {9, 10}});
    return build({"N", "S", "E", "W"}, four_approach_lanes(), phases, pairs);
}

IntersectionLayout two_road_layout() {
    std::vector<Lane> lanes{{1, "EW", "EB_T"}, {2, "EW", "WB_T"}, {3, "NS", "NB_T"}, {4, "NS", "SB_T"}};
    std::vector<PhaseDef> phases{{2, "EW", Turn::Through, {1, 2}}, {4, "NS", Turn::Through, {3, 4}}};
    return build({"EW", "NS"}, lanes, phases, {});
}

IntersectionLayout preset_layout(const std::string& name) {
    if (name == "eight-phase") return eight_phase_layout();
    if (name == "ten-phase") return ten_phase_layout();
    if (name == "two-road") return two_road_layout();
    throw Error("unknown layout preset '" + name + "'");
}

std::vector<Observation> random_observations(const IntersectionLayout& layout, std::size_t count, Rng& rng,
                                             double scale) {
    std::vector<Observation> out(count);
    const std::size_t k = layout.combos.size();
    for (Observation& obs : out) {
        obs.phase.assign(layout.phases.size(), PhaseVariables{});
        for (auto& vars : obs.phase) {
            for (double& v : vars) v = uniform01(rng) < 0.25 ? 0.0 : scale * uniform01(rng);
        }
        obs.clearance.resize(k);
        for (auto& c : obs.clearance) c = static_cast<ClearanceCase>(uniform_index(rng, 4));
        obs.current_combo = uniform_index(rng, k);
        obs.clearance[obs.current_combo] = ClearanceCase::None;
        obs.green_time = 60.0 * uniform01(rng);
    }
    return out;
}

ThetaPrime random_theta(const IntersectionLayout& layout, Rng& rng, const ThetaBounds& bounds, double weight_range) {
    ThetaPrime t(layout, 1.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        double& v = t.values()[i];
        const double u = uniform01(rng);
        if (t.is_exponent(i)) v = bounds.exponent_min + (bounds.exponent_max - bounds.exponent_min) * u;
        else if (t.is_clearance_weight(i)) v = bounds.clearance_weight_min + (weight_range - bounds.clearance_weight_min) * u;
        else v = weight_range * (2.0 * u - 1.0);
    }
    return t;
}

} // namespace regsig
