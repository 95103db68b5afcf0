#include "regsig/intersection.hpp"

#include "regsig/error.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace regsig {

std::string to_string(Turn turn) {
    switch (turn) {
    case Turn::Through: return "through";
    case Turn::ProtectedLeft: return "protected-left";
    case Turn::PermissiveLeft: return "permissive-left";
    }
    return "?";
}

Turn turn_from_string(const std::string& text) {
    if (text == "through" || text == "T") return Turn::Through;
    if (text == "protected-left" || text == "L") return Turn::ProtectedLeft;
    if (text == "permissive-left" || text == "P") return Turn::PermissiveLeft;
    throw ParseError("unknown turn kind '" + text + "'");
}

std::string to_string(ClearanceCase c) {
    switch (c) {
    case ClearanceCase::Full: return "full";
    case ClearanceCase::Partial: return "partial";
    case ClearanceCase::Permissive: return "permissive";
    case ClearanceCase::None: return "none";
    }
    return "?";
}

ClearanceCase clearance_case_from_string(const std::string& text) {
    if (text == "full") return ClearanceCase::Full;
    if (text == "partial") return ClearanceCase::Partial;
    if (text == "permissive") return ClearanceCase::Permissive;
    if (text == "none") return ClearanceCase::None;
    throw ParseError("unknown clearance case '" + text + "'");
}

ClearanceCase ClearanceFlags::active() const {
    for (std::size_t j = 0; j < f.size(); ++j) {
        if (f[j] != 0.0) return static_cast<ClearanceCase>(j);
    }
    return ClearanceCase::None;
}

ConflictMatrix::ConflictMatrix(std::size_t phase_count) : n_(phase_count), cells_(phase_count * phase_count, 0) {}

double ClearanceSpec::duration(ClearanceCase c) const {
    switch (c) {
    case ClearanceCase::Full: return full_duration;
    case ClearanceCase::Partial: return partial_duration;
    case ClearanceCase::Permissive: return permissive_duration;
    case ClearanceCase::None: return 0.0;
    }
    return 0.0;
}

std::optional<std::size_t> IntersectionLayout::phase_position(int phase_id) const {
    for (std::size_t i = 0; i < phases.size(); ++i) {
        if (phases[i].id == phase_id) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> IntersectionLayout::lane_position(int lane_id) const {
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        if (lanes[i].id == lane_id) return i;
    }
    return std::nullopt;
}

std::size_t IntersectionLayout::road_position(const std::string& road) const {
    auto it = std::find(roads.begin(), roads.end(), road);
    if (it == roads.end()) throw Error("unknown road '" + road + "'");
    return static_cast<std::size_t>(it - roads.begin());
}

ClearanceSpec::Key IntersectionLayout::combo_key(const PhaseCombo& combo) const {
    ClearanceSpec::Key key;
    key.reserve(combo.phases.size());
    for (std::size_t p : combo.phases) key.push_back(phases.at(p).id);
    std::sort(key.begin(), key.end());
    return key;
}

std::string IntersectionLayout::combo_name(const PhaseCombo& combo) const {
    std::string name;
    for (int id : combo_key(combo)) {
        if (!name.empty()) name += '+';
        name += std::to_string(id);
    }
    return name;
}

std::vector<std::string> validate_layout(const IntersectionLayout& layout) {
    std::vector<std::string> issues;
    const std::size_t n = layout.phases.size();

    std::set<int> lane_ids;
    for (const Lane& lane : layout.lanes) {
        if (!lane_ids.insert(lane.id).second) issues.push_back("duplicate lane id " + std::to_string(lane.id));
        if (std::find(layout.roads.begin(), layout.roads.end(), lane.road) == layout.roads.end())
            issues.push_back("lane " + std::to_string(lane.id) + " references unknown road '" + lane.road + "'");
    }

    std::set<int> phase_ids;
    for (const Phase& phase : layout.phases) {
        const std::string tag = "phase " + std::to_string(phase.id);
        if (!phase_ids.insert(phase.id).second) issues.push_back("duplicate " + tag);
        if (phase.served_lanes.empty()) issues.push_back(tag + " serves no lanes");
        for (int lane : phase.served_lanes) {
            if (!layout.lane_position(lane))
                issues.push_back(tag + " references unknown lane " + std::to_string(lane));
        }
        if (std::find(layout.roads.begin(), layout.roads.end(), phase.road) == layout.roads.end())
            issues.push_back(tag + " references unknown road '" + phase.road + "'");
    }

    if (layout.conflicts.size() != n) {
        issues.push_back("conflict matrix size does not match phase count");
    } else {
        bool symmetric = true;
        for (std::size_t a = 0; a < n; ++a) {
            if (layout.conflicts.conflicts(a, a))
                issues.push_back("conflict matrix diagonal set for phase " + std::to_string(layout.phases[a].id));
            for (std::size_t b = a + 1; b < n; ++b) {
                if (layout.conflicts.conflicts(a, b) != layout.conflicts.conflicts(b, a)) symmetric = false;
            }
        }
        if (!symmetric) issues.push_back("conflict matrix not symmetric");
    }

    for (const PhaseCombo& combo : layout.combos) {
        const std::string tag = "combo " + std::to_string(combo.index);
        if (combo.phases.empty()) {
            issues.push_back(tag + " is empty");
            continue;
        }
        if (combo.phases.size() > 2) issues.push_back(tag + " larger than a pair");
        bool in_range = true;
        for (std::size_t p : combo.phases) {
            if (p >= n) in_range = false;
        }
        if (!in_range) {
            issues.push_back(tag + " references unknown phase");
            continue;
        }
        if (layout.conflicts.size() != n) continue;
        for (std::size_t i = 0; i < combo.phases.size(); ++i) {
            for (std::size_t j = i + 1; j < combo.phases.size(); ++j) {
                const std::size_t a = combo.phases[i];
                const std::size_t b = combo.phases[j];
                if (a == b) issues.push_back(tag + " repeats a phase");
                else if (layout.conflicts.conflicts(a, b) || layout.conflicts.conflicts(b, a))
                    issues.push_back("conflicting pair in combo " + layout.combo_name(combo));
            }
        }
    }

    const ClearanceSpec& spec = layout.clearance;
    if (spec.full_duration < 0 || spec.partial_duration < 0 || spec.permissive_duration < 0)
        issues.push_back("clearance durations must be non-negative");
    if (!(spec.permissive_duration < spec.partial_duration))
        issues.push_back("permissive clearance must be shorter than partial clearance");
    for (const auto& [key, cases] : spec.table) {
        for (const auto* side : {&key.first, &key.second}) {
            for (int id : *side) {
                if (!layout.phase_position(id))
                    issues.push_back("clearance table references unknown phase " + std::to_string(id));
            }
        }
    }
    return issues;
}

std::vector<PhaseCombo> enumerate_combos(const IntersectionLayout& layout) {
    const std::size_t n = layout.phases.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return layout.phases[a].id < layout.phases[b].id; });

    std::vector<PhaseCombo> combos;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = order[i];
        bool paired = false;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t b = order[j];
            if (a == b || layout.conflicts.conflicts(a, b)) continue;
            paired = true;
            if (j > i) combos.push_back(PhaseCombo{{a, b}, 0});
        }
        if (!paired && layout.allow_singletons) combos.push_back(PhaseCombo{{a}, 0});
    }

    std::sort(combos.begin(), combos.end(), [&](const PhaseCombo& x, const PhaseCombo& y) {
        return layout.combo_key(x) < layout.combo_key(y);
    });
    for (std::size_t k = 0; k < combos.size(); ++k) combos[k].index = k;
    return combos;
}

ClearanceDecision classify_clearance(const IntersectionLayout& layout, const PhaseCombo& current,
                                     const PhaseCombo& next) {
    const auto from = layout.combo_key(current);
    const auto to = layout.combo_key(next);
    if (from == to) return {ClearanceFlags::from_case(ClearanceCase::None), 0.0};

    const std::vector<ClearanceCase>* cases = nullptr;
    if (auto it = layout.clearance.table.find({from, to}); it != layout.clearance.table.end()) {
        cases = &it->second;
    } else if (layout.clearance.default_cases) {
        cases = &*layout.clearance.default_cases;
    } else {
        throw Error("clearance spec incomplete: no entry for " + layout.combo_name(current) + " -> " +
                    layout.combo_name(next));
    }

    ClearanceCase winner = ClearanceCase::None;
    for (ClearanceCase c : *cases) winner = std::min(winner, c);
    return {ClearanceFlags::from_case(winner), layout.clearance.duration(winner)};
}

std::size_t param_count(const IntersectionLayout& layout) {
    std::size_t total = 0;
    for (const PhaseCombo& combo : layout.combos) total += 12 * combo.phases.size() + 8;
    return total;
}

const PhaseCombo& find_combo(const IntersectionLayout& layout, const ClearanceSpec::Key& phase_ids) {
    ClearanceSpec::Key sorted = phase_ids;
    std::sort(sorted.begin(), sorted.end());
    for (const PhaseCombo& combo : layout.combos) {
        if (layout.combo_key(combo) == sorted) return combo;
    }
    std::ostringstream msg;
    msg << "no combo with phases";
    for (int id : sorted) msg << ' ' << id;
    throw Error(msg.str());
}

} // namespace regsig
