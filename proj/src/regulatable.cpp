#include "regsig/regulatable.hpp"

#include "regsig/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace regsig {

double spow(double x, double p) {
    if (x == 0.0) return 0.0;
    const double mag = std::pow(std::abs(x), p);
    return x > 0.0 ? mag : -mag;
}

namespace {

/// d spow(x, p) / dx, with the conventions of the public gradient functions at x = 0.
double spow_dx(double x, double p) {
    if (x == 0.0) return p == 1.0 ? 1.0 : 0.0;
    return p * std::pow(std::abs(x), p - 1.0);
}

double spow_dp(double x, double p) {
    if (x == 0.0) return 0.0;
    return spow(x, p) * std::log(std::abs(x));
}

void require_finite_block(const ThetaPrime& theta, std::size_t combo) {
    const auto [begin, end] = theta.combo_block(combo);
    const auto values = theta.values();
    for (std::size_t k = begin; k < end; ++k) {
        if (!std::isfinite(values[k])) throw Error("theta not finite");
    }
}

double inner_sum(const Observation& obs, std::size_t combo, const ThetaPrime& theta) {
    const auto& members = theta.combo_phases(combo);
    double inner = 0.0;
    for (std::size_t m = 0; m < members.size(); ++m) {
        const PhaseVariables& s = obs.phase[members[m]];
        for (std::size_t i = 0; i < kStateVariables; ++i) inner += spow(theta.w(combo, m, i) * s[i], theta.p(combo, m, i));
    }
    return inner;
}

} // namespace

ThetaPrime::ThetaPrime(const IntersectionLayout& layout, double fill) {
    std::size_t offset = 0;
    for (const PhaseCombo& combo : layout.combos) {
        offsets_.push_back(offset);
        members_.push_back(combo.phases);
        offset += 12 * combo.phases.size() + 8;
    }
    values_.assign(offset, fill);
}

void ThetaPrime::assign(std::span<const double> flat) {
    if (flat.size() != values_.size())
        throw Error("theta size mismatch: expected " + std::to_string(values_.size()) + ", got " +
                    std::to_string(flat.size()));
    std::copy(flat.begin(), flat.end(), values_.begin());
}

bool ThetaPrime::is_exponent(std::size_t k) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), k);
    const auto combo = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    const std::size_t local = k - offsets_[combo];
    const std::size_t state_block = members_[combo].size() * 12;
    if (local < state_block) return local % 12 >= 6;
    return local - state_block >= 4;
}

bool ThetaPrime::is_clearance_weight(std::size_t k) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), k);
    const auto combo = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    const std::size_t local = k - offsets_[combo];
    const std::size_t state_block = members_[combo].size() * 12;
    return local >= state_block && local - state_block < 4;
}

std::size_t ThetaPrime::project(const ThetaBounds& bounds) {
    std::size_t changed = 0;
    for (std::size_t c = 0; c < offsets_.size(); ++c) {
        for (std::size_t m = 0; m < members_[c].size(); ++m) {
            for (std::size_t i = 0; i < kStateVariables; ++i) {
                double& e = p(c, m, i);
                const double clamped = std::clamp(e, bounds.exponent_min, bounds.exponent_max);
                if (clamped != e) ++changed;
                e = clamped;
            }
        }
        for (std::size_t j = 0; j < 4; ++j) {
            double& e = pc(c, j);
            const double clamped = std::clamp(e, bounds.exponent_min, bounds.exponent_max);
            if (clamped != e) ++changed;
            e = clamped;
            double& weight = wc(c, j);
            if (weight < bounds.clearance_weight_min) {
                weight = bounds.clearance_weight_min;
                ++changed;
            }
        }
    }
    return changed;
}

double clearance_factor(const ThetaPrime& theta, std::size_t combo, const ClearanceFlags& flags) {
    double factor = 0.0;
    for (std::size_t j = 0; j < 4; ++j) factor += spow(theta.wc(combo, j) * flags.f[j], theta.pc(combo, j));
    return factor;
}

double precedence(const Observation& obs, std::size_t combo, const ClearanceFlags& flags, const ThetaPrime& theta) {
    require_finite_block(theta, combo);
    return inner_sum(obs, combo, theta) * clearance_factor(theta, combo, flags);
}

std::vector<double> precedences(const Observation& obs, const ThetaPrime& theta) {
    std::vector<double> g(theta.combo_count());
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = precedence(obs, c, obs.flags(c), theta);
    return g;
}

std::size_t select_action(const Observation& obs, const ThetaPrime& theta) {
    const auto g = precedences(obs, theta);
    std::size_t best = 0;
    for (std::size_t c = 1; c < g.size(); ++c) {
        if (g[c] > g[best]) best = c;
    }
    return best;
}

void accumulate_grad_theta(const Observation& obs, std::size_t combo, const ClearanceFlags& flags,
                           const ThetaPrime& theta, double scale, std::span<double> out) {
    const auto& members = theta.combo_phases(combo);
    const double factor = clearance_factor(theta, combo, flags);
    double inner = 0.0;
    for (std::size_t m = 0; m < members.size(); ++m) {
        const PhaseVariables& s = obs.phase[members[m]];
        for (std::size_t i = 0; i < kStateVariables; ++i) {
            const double w = theta.w(combo, m, i);
            const double p = theta.p(combo, m, i);
            const double x = w * s[i];
            inner += spow(x, p);
            out[theta.w_index(combo, m, i)] += scale * factor * spow_dx(x, p) * s[i];
            out[theta.p_index(combo, m, i)] += scale * factor * spow_dp(x, p);
        }
    }
    for (std::size_t j = 0; j < 4; ++j) {
        const double u = theta.wc(combo, j) * flags.f[j];
        const double p = theta.pc(combo, j);
        out[theta.wc_index(combo, j)] += scale * inner * spow_dx(u, p) * flags.f[j];
        out[theta.pc_index(combo, j)] += scale * inner * spow_dp(u, p);
    }
}

std::vector<double> grad_theta(const Observation& obs, std::size_t combo, const ClearanceFlags& flags,
                               const ThetaPrime& theta) {
    std::vector<double> grad(theta.size(), 0.0);
    accumulate_grad_theta(obs, combo, flags, theta, 1.0, grad);
    return grad;
}

double state_partial(const Observation& obs, std::size_t combo, std::size_t member, std::size_t var,
                     const ThetaPrime& theta) {
    const double factor = clearance_factor(theta, combo, obs.flags(combo));
    const double w = theta.w(combo, member, var);
    const double p = theta.p(combo, member, var);
    if (w == 0.0 || factor == 0.0) return 0.0;
    const double x = w * obs.phase[theta.combo_phases(combo)[member]][var];
    if (x == 0.0) {
        if (p > 1.0) return 0.0;
        if (p == 1.0) return w * factor;
        const bool positive = (w > 0.0) == (factor > 0.0);
        return positive ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    }
    return factor * p * std::pow(std::abs(x), p - 1.0) * w;
}

std::string to_string(SignVerdict v) {
    switch (v) {
    case SignVerdict::Zero: return "zero";
    case SignVerdict::NonNegative: return "non-negative";
    case SignVerdict::NonPositive: return "non-positive";
    case SignVerdict::Mixed: return "mixed";
    }
    return "?";
}

std::size_t MonotonicityReport::mixed() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(),
                                                  [](const auto& e) { return e.verdict == SignVerdict::Mixed; }));
}

MonotonicityReport monotonicity_audit(const ThetaPrime& theta, std::span<const Observation> samples) {
    MonotonicityReport report;
    report.samples = samples.size();
    for (std::size_t c = 0; c < theta.combo_count(); ++c) {
        const auto& members = theta.combo_phases(c);
        for (std::size_t m = 0; m < members.size(); ++m) {
            for (std::size_t i = 0; i < kStateVariables; ++i) {
                MonotonicityEntry entry;
                entry.combo = c;
                entry.phase = members[m];
                entry.var = i;
                for (const Observation& obs : samples) {
                    const double d = state_partial(obs, c, m, i, theta);
                    if (d > 0.0) ++entry.positive;
                    else if (d < 0.0) ++entry.negative;
                    else ++entry.zero;
                }
                if (entry.positive > 0 && entry.negative > 0) entry.verdict = SignVerdict::Mixed;
                else if (entry.positive > 0) entry.verdict = SignVerdict::NonNegative;
                else if (entry.negative > 0) entry.verdict = SignVerdict::NonPositive;
                else entry.verdict = SignVerdict::Zero;
                report.entries.push_back(entry);
            }
        }
    }
    return report;
}

PrecedenceReport explain(const Observation& obs, const ThetaPrime& theta, std::size_t chosen, std::size_t previous) {
    PrecedenceReport report;
    report.chosen = chosen;
    report.previous = previous;
    for (std::size_t c = 0; c < theta.combo_count(); ++c) {
        ComboTerms ct;
        ct.combo = c;
        ct.factor = clearance_factor(theta, c, obs.flags(c));
        ct.phases = theta.combo_phases(c);
        double inner = 0.0;
        for (std::size_t m = 0; m < ct.phases.size(); ++m) {
            std::array<double, 6> t{};
            const PhaseVariables& s = obs.phase[ct.phases[m]];
            for (std::size_t i = 0; i < kStateVariables; ++i) {
                t[i] = spow(theta.w(c, m, i) * s[i], theta.p(c, m, i));
                inner += t[i];
                ct.variable_totals[i] += t[i];
            }
            ct.terms.push_back(t);
        }
        for (double& v : ct.variable_totals) v *= ct.factor;
        ct.g = inner * ct.factor;
        report.combos.push_back(std::move(ct));
    }
    report.winner = 0;
    for (std::size_t c = 1; c < report.combos.size(); ++c) {
        if (report.combos[c].g > report.combos[report.winner].g) report.winner = c;
    }
    for (std::size_t i = 0; i < kStateVariables; ++i) {
        report.difference[i] =
            report.combos.at(chosen).variable_totals[i] - report.combos.at(previous).variable_totals[i];
    }
    return report;
}

std::string PrecedenceReport::to_text(const IntersectionLayout& layout) const {
    static const char* names[6] = {"stopped", "approaching", "cumulative wait", "average wait", "queue/lane", "approach speed"};
    std::ostringstream out;
    char buf[160];
    for (const ComboTerms& ct : combos) {
        std::snprintf(buf, sizeof buf, "combo %-6s g = %12.4f  (clearance factor %.4f)%s\n",
                      layout.combo_name(layout.combos[ct.combo]).c_str(), ct.g, ct.factor,
                      ct.combo == winner ? "  <- argmax" : "");
        out << buf;
        for (std::size_t m = 0; m < ct.phases.size(); ++m) {
            std::snprintf(buf, sizeof buf, "  phase %-3d", layout.phases[ct.phases[m]].id);
            out << buf;
            for (double t : ct.terms[m]) {
                std::snprintf(buf, sizeof buf, " %10.4f", t);
                out << buf;
            }
            out << '\n';
        }
    }
    out << "chosen " << layout.combo_name(layout.combos[chosen]) << " vs previous "
        << layout.combo_name(layout.combos[previous]) << ":\n";
    std::size_t top = 0;
    for (std::size_t i = 0; i < 6; ++i) {
        std::snprintf(buf, sizeof buf, "  %-16s %+12.4f\n", names[i], difference[i]);
        out << buf;
        if (std::abs(difference[i]) > std::abs(difference[top])) top = i;
    }
    if (chosen != previous) out << "largest contribution to the switch: " << names[top] << '\n';
    return out.str();
}

void save_theta(const std::filesystem::path& path, const ThetaPrime& theta) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    char buf[40];
    for (double v : theta.values()) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
}

ThetaPrime load_theta(const std::filesystem::path& path, const IntersectionLayout& layout) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<double> flat;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            std::size_t used = 0;
            flat.push_back(std::stod(line, &used));
        } catch (const std::exception&) {
            throw ParseError("bad theta value '" + line + "'", line_no);
        }
    }
    ThetaPrime theta(layout);
    theta.assign(flat);
    return theta;
}

} // namespace regsig
