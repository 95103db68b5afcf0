#include "regsig/features.hpp"

#include "regsig/error.hpp"

namespace regsig {

FeatureEncoder::FeatureEncoder(const IntersectionLayout& layout, FeatureScales scales)
    : scales_(scales), road_phases_(layout.roads.size()), combos_(layout.combos.size()) {
    for (std::size_t p = 0; p < layout.phases.size(); ++p) {
        road_phases_[layout.road_position(layout.phases[p].road)].push_back(p);
    }
    size_ = layout.phases.size() * kStateVariables + combos_ * 5 + 1;
    for (double s : scales_.phase) {
        if (!(s > 0.0)) throw Error("feature scales must be positive");
    }
    if (!(scales_.green_time > 0.0)) throw Error("feature scales must be positive");
}

void FeatureEncoder::encode(const Observation& obs, std::span<double> out) const {
    if (out.size() != size_) throw Error("feature buffer size mismatch");
    std::size_t k = 0;
    for (const auto& phases : road_phases_) {
        for (std::size_t p : phases) {
            for (std::size_t i = 0; i < kStateVariables; ++i) out[k++] = obs.phase[p][i] / scales_.phase[i];
        }
    }
    for (std::size_t c = 0; c < combos_; ++c) {
        const ClearanceFlags f = obs.flags(c);
        for (double v : f.f) out[k++] = v;
    }
    for (std::size_t c = 0; c < combos_; ++c) out[k++] = c == obs.current_combo ? 1.0 : 0.0;
    out[k++] = obs.green_time / scales_.green_time;
}

std::vector<double> FeatureEncoder::encode(const Observation& obs) const {
    std::vector<double> out(size_);
    encode(obs, out);
    return out;
}

Observation FeatureEncoder::scaled(const Observation& obs) const {
    Observation out = obs;
    for (auto& s : out.phase) {
        for (std::size_t i = 0; i < kStateVariables; ++i) s[i] /= scales_.phase[i];
    }
    return out;
}

std::vector<InputGroup> FeatureEncoder::groups(std::size_t units) const {
    std::vector<std::size_t> widths;
    for (const auto& phases : road_phases_) {
        if (!phases.empty()) widths.push_back(phases.size() * kStateVariables);
    }
    widths.push_back(combos_ * 5 + 1);
    if (units < widths.size()) throw Error("too few hidden units for the road groups");

    std::vector<InputGroup> groups;
    std::size_t in = 0, out = 0;
    for (std::size_t g = 0; g < widths.size(); ++g) {
        const std::size_t share = units / widths.size() + (g < units % widths.size() ? 1 : 0);
        groups.push_back(InputGroup{in, in + widths[g], out, out + share});
        in += widths[g];
        out += share;
    }
    return groups;
}

std::vector<LayerSpec> FeatureEncoder::network(std::size_t units, std::size_t layers, std::size_t outputs) const {
    if (layers == 0) throw Error("network needs a hidden layer");
    std::vector<LayerSpec> specs;
    specs.push_back(LayerSpec{size_, units, true, groups(units)});
    for (std::size_t l = 1; l < layers; ++l) specs.push_back(LayerSpec{units, units, true, {}});
    specs.push_back(LayerSpec{units, outputs, false, {}});
    return specs;
}

} // namespace regsig
