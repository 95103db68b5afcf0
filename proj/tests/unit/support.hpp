#pragma once

#include "regsig/demand.hpp"
#include "regsig/intersection.hpp"
#include "regsig/layouts.hpp"
#include "regsig/simulator.hpp"

#include <memory>

namespace regsig::test {

inline std::shared_ptr<const IntersectionLayout> shared(IntersectionLayout layout) {
    return std::make_shared<const IntersectionLayout>(std::move(layout));
}

/// `bins` five-minute bins with no arrivals.
inline DemandProfile empty_demand(const IntersectionLayout& layout, std::size_t bins = 1) {
    DemandProfile d;
    d.movements = movement_tokens(layout);
    d.counts.assign(bins, std::vector<std::uint32_t>(d.movements.size(), 0));
    return d;
}

/// Every movement gets `count` vehicles per bin.
inline DemandProfile flat_demand(const IntersectionLayout& layout, std::uint32_t count, std::size_t bins = 1) {
    DemandProfile d = empty_demand(layout, bins);
    for (auto& row : d.counts)
        for (auto& c : row) c = count;
    return d;
}

inline Observation zero_observation(const IntersectionLayout& layout) {
    Observation obs;
    obs.phase.assign(layout.phases.size(), PhaseVariables{});
    obs.clearance.assign(layout.combos.size(), ClearanceCase::None);
    return obs;
}

} // namespace regsig::test
