#pragma once

#include "regsig/intersection.hpp"
#include "regsig/neural.hpp"
#include "regsig/simulator.hpp"

#include <array>
#include <span>
#include <vector>

namespace regsig {

/// Fixed divisors applied to the state variables before they reach a learner.
struct FeatureScales {
    std::array<double, 6> phase{10.0, 10.0, 500.0, 60.0, 10.0, 15.0};
    double green_time = 60.0;
};

/// Turns an Observation into network inputs. Inputs are laid out road by road (the six scaled
/// variables of every phase on that road), followed by one global block: clearance flags of every
/// candidate combo, a one-hot of the current combo, and the scaled green time.
class FeatureEncoder {
public:
    FeatureEncoder() = default;
    FeatureEncoder(const IntersectionLayout& layout, FeatureScales scales);

    std::size_t size() const { return size_; }
    std::size_t combo_count() const { return combos_; }

    void encode(const Observation& obs, std::span<double> out) const;
    std::vector<double> encode(const Observation& obs) const;

    /// Copy with every phase variable divided by its scale; the input of the precedence function.
    Observation scaled(const Observation& obs) const;

    /// Input groups of the grouped first layer: one per road plus the global block. `units` hidden
    /// units are split across groups as evenly as possible.
    std::vector<InputGroup> groups(std::size_t units) const;

    /// `layers` hidden layers of `units` (first one grouped by road), linear head of `outputs`.
    std::vector<LayerSpec> network(std::size_t units, std::size_t layers, std::size_t outputs) const;

    const FeatureScales& scales() const { return scales_; }

private:
    FeatureScales scales_;
    std::vector<std::vector<std::size_t>> road_phases_;  // phase positions per road
    std::size_t combos_ = 0;
    std::size_t size_ = 0;
};

} // namespace regsig
