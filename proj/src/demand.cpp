#include "regsig/demand.hpp"

#include "regsig/error.hpp"
#include "regsig/random.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

namespace regsig {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

long long parse_integer(const std::string& field, const char* what, std::size_t line) {
    long long value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || field.empty())
        throw ParseError(std::string("bad ") + what + " '" + field + "'", line);
    return value;
}

} // namespace

std::vector<std::string> movement_tokens(const IntersectionLayout& layout) {
    std::vector<std::string> tokens;
    for (const Lane& lane : layout.lanes) {
        if (std::find(tokens.begin(), tokens.end(), lane.movement) == tokens.end()) tokens.push_back(lane.movement);
    }
    return tokens;
}

std::uint32_t DemandProfile::count(std::size_t bin, std::size_t movement) const {
    if (bin >= counts.size()) return 0;
    return counts[bin].at(movement);
}

std::uint64_t DemandProfile::total() const {
    std::uint64_t sum = 0;
    for (const auto& row : counts) {
        for (std::uint32_t c : row) sum += c;
    }
    return sum;
}

DemandProfile DemandProfile::scaled(std::uint32_t factor) const {
    DemandProfile out = *this;
    for (auto& row : out.counts) {
        for (auto& c : row) c *= factor;
    }
    return out;
}

DemandProfile parse_demand(std::istream& in, const IntersectionLayout& layout) {
    DemandProfile profile;
    profile.movements = movement_tokens(layout);

    std::string raw;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            header_seen = true;
            if (line == "bin,movement,count") continue;
            throw ParseError("expected header 'bin,movement,count'", line_no);
        }

        std::vector<std::string> fields;
        std::stringstream row(line);
        std::string field;
        while (std::getline(row, field, ',')) fields.push_back(trim(field));
        if (fields.size() != 3) throw ParseError("expected 3 fields, got " + std::to_string(fields.size()), line_no);

        const long long bin = parse_integer(fields[0], "bin", line_no);
        const long long count = parse_integer(fields[2], "count", line_no);
        if (bin < 0) throw ParseError("negative bin", line_no);
        if (count < 0) throw ParseError("negative count", line_no);

        auto it = std::find(profile.movements.begin(), profile.movements.end(), fields[1]);
        if (it == profile.movements.end())
            throw Error("line " + std::to_string(line_no) + ": unknown movement '" + fields[1] + "'");
        const auto movement = static_cast<std::size_t>(it - profile.movements.begin());

        const auto b = static_cast<std::size_t>(bin);
        if (profile.counts.size() <= b)
            profile.counts.resize(b + 1, std::vector<std::uint32_t>(profile.movements.size(), 0));
        profile.counts[b][movement] += static_cast<std::uint32_t>(count);
    }
    return profile;
}

DemandProfile load_demand(const std::filesystem::path& path, const IntersectionLayout& layout) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open demand file " + path.string());
    return parse_demand(in, layout);
}

std::vector<Arrival> spawn_arrivals(const DemandProfile& profile, std::size_t bin,
                                    const IntersectionLayout& layout, std::uint64_t seed) {
    std::vector<Arrival> arrivals;
    if (bin >= profile.bins()) return arrivals;
    const double start = profile.bin_length * static_cast<double>(bin);

    for (std::size_t m = 0; m < profile.movements.size(); ++m) {
        const std::uint32_t count = profile.counts[bin][m];
        if (count == 0) continue;
        std::vector<std::size_t> lanes;
        for (std::size_t l = 0; l < layout.lanes.size(); ++l) {
            if (layout.lanes[l].movement == profile.movements[m]) lanes.push_back(l);
        }
        if (lanes.empty()) throw Error("movement '" + profile.movements[m] + "' has no lanes");

        Rng rng = derive_rng(seed, {0x5350'4157ULL, bin, m});
        for (std::uint32_t k = 0; k < count; ++k) {
            const double u = uniform01(rng);
            const std::size_t lane = lanes[rng() % lanes.size()];
            arrivals.push_back(Arrival{m, lane, start + u * profile.bin_length});
        }
    }
    return arrivals;
}

} // namespace regsig
