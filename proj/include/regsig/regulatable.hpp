#pragma once

#include "regsig/intersection.hpp"
#include "regsig/simulator.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace regsig {

/// Signed power sign(x)|x|^p, with spow(0, p) = 0.
double spow(double x, double p);

/// Feasible region for the precedence parameters. Exponents live in [exponent_min, exponent_max];
/// clearance weights are kept non-negative so the clearance factor cannot flip sign between
/// signal states.
struct ThetaBounds {
    double exponent_min = 0.1;
    double exponent_max = 4.0;
    double clearance_weight_min = 0.0;
};

/// Parameters {w, p, w', p'} of the designed precedence function, stored as one flat vector.
///
/// Canonical order, combo by combo in combo_index order:
///   for each member phase (ascending phase id): w[1..6], then p[1..6]
///   then w'[1..4], then p'[1..4]
/// The flat text checkpoint and the CMA-ES search vector use exactly this order.
class ThetaPrime {
public:
    ThetaPrime() = default;
    explicit ThetaPrime(const IntersectionLayout& layout, double fill = 1.0);

    std::size_t size() const noexcept { return values_.size(); }
    std::size_t combo_count() const noexcept { return offsets_.size(); }
    const std::vector<std::size_t>& combo_phases(std::size_t combo) const { return members_.at(combo); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    /// Flat indices of individual parameters.
    std::size_t w_index(std::size_t combo, std::size_t member, std::size_t var) const {
        return offsets_[combo] + member * 12 + var;
    }
    std::size_t p_index(std::size_t combo, std::size_t member, std::size_t var) const {
        return offsets_[combo] + member * 12 + 6 + var;
    }
    std::size_t wc_index(std::size_t combo, std::size_t flag) const {
        return offsets_[combo] + members_[combo].size() * 12 + flag;
    }
    std::size_t pc_index(std::size_t combo, std::size_t flag) const { return wc_index(combo, flag) + 4; }
    /// [begin, end) of the block owned by `combo`.
    std::pair<std::size_t, std::size_t> combo_block(std::size_t combo) const {
        return {offsets_[combo], offsets_[combo] + members_[combo].size() * 12 + 8};
    }

    double& w(std::size_t c, std::size_t m, std::size_t i) { return values_[w_index(c, m, i)]; }
    double& p(std::size_t c, std::size_t m, std::size_t i) { return values_[p_index(c, m, i)]; }
    double& wc(std::size_t c, std::size_t j) { return values_[wc_index(c, j)]; }
    double& pc(std::size_t c, std::size_t j) { return values_[pc_index(c, j)]; }
    double w(std::size_t c, std::size_t m, std::size_t i) const { return values_[w_index(c, m, i)]; }
    double p(std::size_t c, std::size_t m, std::size_t i) const { return values_[p_index(c, m, i)]; }
    double wc(std::size_t c, std::size_t j) const { return values_[wc_index(c, j)]; }
    double pc(std::size_t c, std::size_t j) const { return values_[pc_index(c, j)]; }

    /// Replaces all values; the size must match.
    void assign(std::span<const double> flat);
    /// Clamps every entry into `bounds`. Returns the number of entries changed.
    std::size_t project(const ThetaBounds& bounds);
    bool is_exponent(std::size_t flat_index) const;
    bool is_clearance_weight(std::size_t flat_index) const;

private:
    std::vector<double> values_;
    std::vector<std::size_t> offsets_;
    std::vector<std::vector<std::size_t>> members_;
};

/// Clearance factor sum_j spow(w'_j f_j, p'_j) of one combo.
double clearance_factor(const ThetaPrime& theta, std::size_t combo, const ClearanceFlags& flags);

/// g(s, combo; theta). `obs` carries the (already scaled) phase variables.
double precedence(const Observation& obs, std::size_t combo, const ClearanceFlags& flags, const ThetaPrime& theta);

/// g for every combo, flags taken from the observation.
std::vector<double> precedences(const Observation& obs, const ThetaPrime& theta);

/// argmax over combos; ties go to the lowest combo index.
std::size_t select_action(const Observation& obs, const ThetaPrime& theta);

/// Adds scale * dg/dtheta for one combo into `out` (sized theta.size()).
void accumulate_grad_theta(const Observation& obs, std::size_t combo, const ClearanceFlags& flags,
                           const ThetaPrime& theta, double scale, std::span<double> out);

/// dg/dtheta over the whole parameter vector; entries of other combos are zero.
std::vector<double> grad_theta(const Observation& obs, std::size_t combo, const ClearanceFlags& flags,
                               const ThetaPrime& theta);

/// dg/ds_phi[var] for the member phase `member` of `combo`. At s = 0 with exponent < 1 this is the
/// one-sided limit, an infinity carrying the derivative's sign.
double state_partial(const Observation& obs, std::size_t combo, std::size_t member, std::size_t var,
                     const ThetaPrime& theta);

enum class SignVerdict { Zero, NonNegative, NonPositive, Mixed };
std::string to_string(SignVerdict v);

struct MonotonicityEntry {
    std::size_t combo = 0;
    std::size_t phase = 0;  // phase position
    std::size_t var = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;
    std::size_t zero = 0;
    SignVerdict verdict = SignVerdict::Zero;
};

struct MonotonicityReport {
    std::vector<MonotonicityEntry> entries;
    std::size_t samples = 0;

    std::size_t mixed() const;
};

/// Sign of dg/ds_phi[i] over the sample states, per (combo, phase, variable).
MonotonicityReport monotonicity_audit(const ThetaPrime& theta, std::span<const Observation> samples);

struct ComboTerms {
    std::size_t combo = 0;
    double factor = 0.0;
    double g = 0.0;
    std::vector<std::size_t> phases;                 // phase positions
    std::vector<std::array<double, 6>> terms;        // spow(w s, p), without the clearance factor
    std::array<double, 6> variable_totals{};         // factor * sum over member phases, per variable
};

struct PrecedenceReport {
    std::vector<ComboTerms> combos;
    std::size_t winner = 0;
    std::size_t chosen = 0;
    std::size_t previous = 0;
    /// Per variable: chosen total minus previous total.
    std::array<double, 6> difference{};

    std::string to_text(const IntersectionLayout& layout) const;
};

PrecedenceReport explain(const Observation& obs, const ThetaPrime& theta, std::size_t chosen, std::size_t previous);

/// One value per line, canonical order (see ThetaPrime).
void save_theta(const std::filesystem::path& path, const ThetaPrime& theta);
ThetaPrime load_theta(const std::filesystem::path& path, const IntersectionLayout& layout);

} // namespace regsig
