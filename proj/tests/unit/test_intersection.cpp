#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "regsig/error.hpp"
#include "regsig/regulatable.hpp"
#include "support.hpp"

#include <algorithm>

using namespace regsig;

namespace {

std::size_t pos(const IntersectionLayout& l, int id) { return *l.phase_position(id); }

bool has_issue(const std::vector<std::string>& issues, const std::string& needle) {
    return std::any_of(issues.begin(), issues.end(),
                       [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

IntersectionLayout single_phase_layout() {
    IntersectionLayout l;
    l.roads = {"A"};
    l.lanes = {{1, "A", "A_T"}};
    l.phases = {{1, "A", Turn::Through, {1}}};
    l.conflicts = ConflictMatrix(1);
    l.combos = enumerate_combos(l);
    l.clearance.default_cases = std::vector<ClearanceCase>{};
    return l;
}

} // namespace

TEST_CASE("well-formed presets validate cleanly") {
    for (const char* name : {"eight-phase", "ten-phase", "two-road"}) {
        CAPTURE(name);
        CHECK(validate_layout(preset_layout(name)).empty());
    }
}

TEST_CASE("validation catches conflicting combos and asymmetric conflicts") {
    IntersectionLayout l = eight_phase_layout();
    l.combos.push_back(PhaseCombo{{pos(l, 1), pos(l, 2)}, l.combos.size()});
    CHECK(has_issue(validate_layout(l), "conflicting pair in combo"));

    IntersectionLayout a = eight_phase_layout();
    a.conflicts.set(pos(a, 1), pos(a, 3), !a.conflicts.conflicts(pos(a, 1), pos(a, 3)));
    CHECK(has_issue(validate_layout(a), "conflict matrix not symmetric"));
}

TEST_CASE("combo enumeration") {
    const IntersectionLayout eight = eight_phase_layout();
    const auto combos = enumerate_combos(eight);
    REQUIRE(combos.size() == 8);
    std::vector<ClearanceSpec::Key> keys;
    for (const auto& c : combos) keys.push_back(eight.combo_key(c));
    const std::vector<ClearanceSpec::Key> expected{{1, 5}, {1, 6}, {2, 5}, {2, 6}, {3, 7}, {3, 8}, {4, 7}, {4, 8}};
    CHECK(keys == expected);
    for (std::size_t k = 0; k < combos.size(); ++k) CHECK(combos[k].index == k);

    CHECK(enumerate_combos(ten_phase_layout()).size() == 11);
    const auto single = enumerate_combos(single_phase_layout());
    REQUIRE(single.size() == 1);
    CHECK(single[0].phases.size() == 1);
}

TEST_CASE("no enumerated combo holds a conflicting pair") {
    for (const char* name : {"eight-phase", "ten-phase", "two-road"}) {
        const IntersectionLayout l = preset_layout(name);
        for (const auto& c : l.combos)
            for (std::size_t a : c.phases)
                for (std::size_t b : c.phases) CHECK_FALSE(l.conflicts.conflicts(a, b));
    }
}

TEST_CASE("clearance classification") {
    IntersectionLayout l = eight_phase_layout();
    const PhaseCombo& c15 = find_combo(l, {1, 5});
    const PhaseCombo& c16 = find_combo(l, {1, 6});
    const PhaseCombo& c37 = find_combo(l, {3, 7});

    const auto self = classify_clearance(l, c15, c15);
    CHECK(self.flags.active() == ClearanceCase::None);
    CHECK(self.duration == 0.0);
    CHECK(self.flags.f == std::array<double, 4>{0, 0, 0, 1});

    l.clearance.table[{{1, 5}, {3, 7}}] = {ClearanceCase::Full};
    const auto full = classify_clearance(l, c15, c37);
    CHECK(full.flags.f == std::array<double, 4>{1, 0, 0, 0});
    CHECK(full.duration == l.clearance.full_duration);

    l.clearance.table[{{1, 5}, {1, 6}}] = {ClearanceCase::Permissive, ClearanceCase::Partial};
    const auto both = classify_clearance(l, c15, c16);
    CHECK(both.flags.f == std::array<double, 4>{0, 1, 0, 0});
    CHECK(both.duration == l.clearance.partial_duration);

    l.clearance.table.clear();
    l.clearance.default_cases.reset();
    CHECK_THROWS_AS(classify_clearance(l, c15, c16), Error);
}

TEST_CASE("exactly one clearance flag for every ordered combo pair") {
    for (const char* name : {"eight-phase", "ten-phase", "two-road"}) {
        const IntersectionLayout l = preset_layout(name);
        for (const auto& a : l.combos) {
            for (const auto& b : l.combos) {
                const auto d = classify_clearance(l, a, b);
                double sum = 0;
                for (double f : d.flags.f) {
                    CHECK((f == 0.0 || f == 1.0));
                    sum += f;
                }
                CHECK(sum == 1.0);
            }
        }
    }
}

TEST_CASE("parameter counts") {
    CHECK(param_count(eight_phase_layout()) == 256);
    CHECK(param_count(ten_phase_layout()) == 352);
    CHECK(param_count(single_phase_layout()) == 20);
    for (const char* name : {"eight-phase", "ten-phase", "two-road"}) {
        const IntersectionLayout l = preset_layout(name);
        CHECK(ThetaPrime(l).size() == param_count(l));
    }
    CHECK(ThetaPrime(single_phase_layout()).size() == 20);
}

TEST_CASE("turn and clearance names round-trip") {
    for (Turn t : {Turn::Through, Turn::ProtectedLeft, Turn::PermissiveLeft}) CHECK(turn_from_string(to_string(t)) == t);
    for (ClearanceCase c : {ClearanceCase::Full, ClearanceCase::Partial, ClearanceCase::Permissive, ClearanceCase::None})
        CHECK(clearance_case_from_string(to_string(c)) == c);
    CHECK_THROWS_AS(turn_from_string("sideways"), ParseError);
}
