#pragma once

#include "regsig/intersection.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace regsig {

/// Distinct lane movement tokens of a layout, in first-appearance order. Demand is indexed by these.
std::vector<std::string> movement_tokens(const IntersectionLayout& layout);

/// Vehicle counts per (5-minute bin, movement).
struct DemandProfile {
    double bin_length = 300.0;
    std::vector<std::string> movements;
    std::vector<std::vector<std::uint32_t>> counts;  // [bin][movement]

    std::size_t bins() const noexcept { return counts.size(); }
    double horizon() const noexcept { return bin_length * static_cast<double>(counts.size()); }
    std::uint32_t count(std::size_t bin, std::size_t movement) const;
    std::uint64_t total() const;
    /// Every count multiplied by `factor`.
    DemandProfile scaled(std::uint32_t factor) const;
};

/// Parses `bin,movement,count` rows. Missing (bin, movement) pairs are zero.
DemandProfile parse_demand(std::istream& in, const IntersectionLayout& layout);
DemandProfile load_demand(const std::filesystem::path& path, const IntersectionLayout& layout);

struct Arrival {
    std::size_t movement = 0;
    std::size_t lane = 0;  // lane position in the layout
    double spawn_time = 0.0;
};

/// Spawns exactly the binned count per movement, uniformly over [bin_start, bin_end), lanes drawn
/// uniformly among the movement's lanes. Each (bin, movement) uses its own stream derived from
/// `seed`, so raising a count keeps the earlier draws unchanged.
std::vector<Arrival> spawn_arrivals(const DemandProfile& profile, std::size_t bin,
                                    const IntersectionLayout& layout, std::uint64_t seed);

} // namespace regsig
