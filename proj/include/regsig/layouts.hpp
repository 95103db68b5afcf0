#pragma once

#include "regsig/intersection.hpp"
#include "regsig/regulatable.hpp"
#include "regsig/random.hpp"
#include "regsig/simulator.hpp"

#include <string>
#include <vector>

namespace regsig {

/// Rule-based clearance table over every ordered pair of enumerated combos:
///   no shared phase                                   -> Full
///   a shared phase, a permissive left gained or lost  -> Permissive
///   a shared phase otherwise                          -> Partial
void fill_standard_clearance(IntersectionLayout& layout);

/// Dual-ring eight-phase intersection. Phases 1,5 are the north/south protected lefts, 2,6 the
/// north/south throughs, 3,7 and 4,8 the same on the east-west road. Eight combos.
IntersectionLayout eight_phase_layout();

/// eight_phase_layout plus phase 9 (northbound permissive left) and phase 10 (southbound
/// permissive left). Eleven combos.
IntersectionLayout ten_phase_layout();

/// Two roads, one through phase each, conflicting: two singleton combos.
IntersectionLayout two_road_layout();

/// Named preset: "eight-phase", "ten-phase" or "two-road".
IntersectionLayout preset_layout(const std::string& name);

/// Random observations for audits and property tests. Phase variables are non-negative, about a
/// quarter of them exactly zero; clearance cases and the current combo are drawn uniformly.
std::vector<Observation> random_observations(const IntersectionLayout& layout, std::size_t count, Rng& rng,
                                             double scale = 5.0);

/// Random parameters: exponents uniform in the bounds, state weights uniform in
/// [-weight_range, weight_range], clearance weights uniform in [clearance_weight_min, weight_range].
ThetaPrime random_theta(const IntersectionLayout& layout, Rng& rng, const ThetaBounds& bounds = {},
                        double weight_range = 2.0);

} // namespace regsig
