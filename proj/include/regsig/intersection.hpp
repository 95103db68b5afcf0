#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace regsig {

enum class Turn { Through, ProtectedLeft, PermissiveLeft };

std::string to_string(Turn turn);
Turn turn_from_string(const std::string& text);

/// One physical approach lane. `movement` is the demand token it carries, e.g. "NB_L".
struct Lane {
    int id = 0;
    std::string road;
    std::string movement;
};

struct Phase {
    int id = 0;
    std::string road;
    Turn turn = Turn::Through;
    std::vector<int> served_lanes;
};

/// Symmetric conflict relation over phase positions (not ids).
class ConflictMatrix {
public:
    ConflictMatrix() = default;
    explicit ConflictMatrix(std::size_t phase_count);

    std::size_t size() const noexcept { return n_; }
    bool conflicts(std::size_t a, std::size_t b) const { return cells_.at(a * n_ + b) != 0; }
    /// Sets one directed cell. Use set_pair for the usual symmetric edit.
    void set(std::size_t a, std::size_t b, bool value) { cells_.at(a * n_ + b) = value ? 1 : 0; }
    void set_pair(std::size_t a, std::size_t b, bool value) {
        set(a, b, value);
        set(b, a, value);
    }

private:
    std::size_t n_ = 0;
    std::vector<std::uint8_t> cells_;
};

/// A set of mutually compatible phases granted right-of-way together. This is the action space.
struct PhaseCombo {
    std::vector<std::size_t> phases;  // positions into IntersectionLayout::phases, ascending by phase id
    std::size_t index = 0;
};

/// Clearance cases in flag order; a lower value wins when several apply.
enum class ClearanceCase : std::uint8_t { Full = 0, Partial = 1, Permissive = 2, None = 3 };

std::string to_string(ClearanceCase c);
ClearanceCase clearance_case_from_string(const std::string& text);

/// Exactly one of f_1..f_4 is set.
struct ClearanceFlags {
    std::array<double, 4> f{0.0, 0.0, 0.0, 1.0};

    static ClearanceFlags from_case(ClearanceCase c) {
        ClearanceFlags flags;
        flags.f = {0.0, 0.0, 0.0, 0.0};
        flags.f[static_cast<std::size_t>(c)] = 1.0;
        return flags;
    }
    ClearanceCase active() const;
};

/// Clearance table between phase sets, keyed by sorted phase ids. Cases listed for a pair are the
/// ones the transition triggers; an empty list means no clearance.
struct ClearanceSpec {
    using Key = std::vector<int>;

    double full_duration = 2.0;
    double partial_duration = 1.5;
    double permissive_duration = 1.0;
    std::map<std::pair<Key, Key>, std::vector<ClearanceCase>> table;
    std::optional<std::vector<ClearanceCase>> default_cases;

    double duration(ClearanceCase c) const;
};

struct IntersectionLayout {
    std::vector<std::string> roads;
    std::vector<Lane> lanes;
    std::vector<Phase> phases;
    ConflictMatrix conflicts;
    bool allow_singletons = true;
    ClearanceSpec clearance;
    /// Empty until enumerate_combos (or an explicit declaration) fills it.
    std::vector<PhaseCombo> combos;

    std::optional<std::size_t> phase_position(int phase_id) const;
    std::optional<std::size_t> lane_position(int lane_id) const;
    std::size_t road_position(const std::string& road) const;
    /// Sorted ids of the member phases.
    ClearanceSpec::Key combo_key(const PhaseCombo& combo) const;
    std::string combo_name(const PhaseCombo& combo) const;
};

/// Problems found by validate_layout. An empty list means the layout is usable.
std::vector<std::string> validate_layout(const IntersectionLayout& layout);

/// All non-conflicting phase pairs, plus singletons for phases that pair with nothing when
/// `allow_singletons` is set. Ordered lexicographically by member phase ids.
std::vector<PhaseCombo> enumerate_combos(const IntersectionLayout& layout);

struct ClearanceDecision {
    ClearanceFlags flags;
    double duration = 0.0;
};

/// Throws Error("clearance spec incomplete") when the pair is absent and no default exists.
ClearanceDecision classify_clearance(const IntersectionLayout& layout, const PhaseCombo& current,
                                     const PhaseCombo& next);

/// Number of tunable scalars of the designed precedence function: sum over combos of 12|combo| + 8.
std::size_t param_count(const IntersectionLayout& layout);

/// Looks up a combo by its sorted member phase ids. Throws if no such combo exists.
const PhaseCombo& find_combo(const IntersectionLayout& layout, const ClearanceSpec::Key& phase_ids);

} // namespace regsig
