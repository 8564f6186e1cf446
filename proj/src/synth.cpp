#include "interlock/synth.hpp"

#include "interlock/error.hpp"
#include "interlock/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

namespace interlock {

namespace {

constexpr std::array<const char*, 16> kCountries = {"GB", "DE", "FR", "US", "JP", "BR", "IN", "ZA",
                                                     "RU", "CN", "AU", "ES", "IT", "NL", "SE", "CA"};
constexpr std::array<const char*, 6> kSuffixes = {"North", "South", "East", "West", "Port", "Airport"};
constexpr std::array<RoleKind, 6> kSeniorRoles = {
    RoleKind::ChiefExecutive,   RoleKind::HighestExecutive, RoleKind::SupervisoryBoard,
    RoleKind::ExecutiveBoard,   RoleKind::BoardOfDirectors, RoleKind::CommitteeMember,
};

std::string make_id(char prefix, std::size_t n, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, width, n);
    return buf;
}

std::string country_code(std::size_t k) {
    if (k < kCountries.size()) return kCountries[k];
    // Beyond the named list fall back to synthetic two-letter codes.
    const std::size_t j = k - kCountries.size();
    return {static_cast<char>('Q' + (j / 26) % 10), static_cast<char>('A' + j % 26)};
}

struct City {
    GeoPoint point;
    std::uint32_t community = 0;
    std::string country;
    std::vector<std::pair<std::string, GeoPoint>> locations;
};

// Visits every j in [begin, end) independently with probability p, in
// increasing order, by geometric skipping.
template <typename Fn>
void bernoulli_range(Rng& rng, std::size_t begin, std::size_t end, double p, Fn&& fn) {
    if (p <= 0.0 || begin >= end) return;
    if (p >= 1.0) {
        for (std::size_t j = begin; j < end; ++j) fn(j);
        return;
    }
    const double log_q = std::log1p(-p);
    double j = static_cast<double>(begin);
    for (;;) {
        j += std::floor(std::log1p(-rng.uniform()) / log_q);
        if (j >= static_cast<double>(end)) return;
        fn(static_cast<std::size_t>(j));
        j += 1.0;
    }
}

// k distinct values from [0, n) in draw order.
std::vector<std::size_t> sample_distinct(Rng& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    k = std::min(k, n);
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(n - i)]);
    pool.resize(k);
    return pool;
}

RoleKind random_role(Rng& rng) { return kSeniorRoles[rng.below(kSeniorRoles.size())]; }

}  // namespace

PlantedConfig PlantedConfig::uniform(std::size_t communities, std::size_t cities, std::size_t firms_per_city,
                                     double p_in, double p_out, std::uint64_t seed) {
    PlantedConfig cfg;
    for (std::size_t k = 0; k < communities; ++k) {
        CommunitySpec spec;
        spec.cities = cities;
        spec.center = {-40.0 + 12.0 * static_cast<double>((k / 8) % 7),
                       -150.0 + 36.0 * static_cast<double>(k % 8)};
        spec.countries = {country_code(k)};
        cfg.communities.push_back(spec);
    }
    cfg.firms_per_city = firms_per_city;
    cfg.p_in = p_in;
    cfg.p_out = p_out;
    cfg.seed = seed;
    return cfg;
}

void PlantedConfig::validate() const {
    if (communities.empty()) throw ParameterError("synth: at least one community required");
    if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0)) {
        throw ParameterError("synth: probabilities must lie in [0,1]");
    }
    std::size_t cities = 0;
    for (const auto& c : communities) {
        if (c.countries.empty()) throw ParameterError("synth: community without countries");
        if (!(c.spread >= 0.0)) throw ParameterError("synth: negative spread");
        cities += c.cities;
    }
    if (city_size_exponent < 0.0) throw ParameterError("synth: city_size_exponent must be >= 0");
    if (locations_per_city == 0 && cities > 0) throw ParameterError("synth: locations_per_city must be >= 1");
    if (!(location_spread >= 0.0) || !(min_city_separation >= 0.0)) {
        throw ParameterError("synth: negative geographic distance");
    }
    const std::size_t min_firms = cities * firms_per_city;
    if (min_firms == 0 && (p_in > 0.0 || p_out > 0.0)) {
        throw ParameterError("synth: interlock probabilities are positive but there are no firms");
    }
    if (mega_directors > 0 && mega_director_positions > min_firms) {
        throw ParameterError("synth: mega_director_positions exceeds the number of firms");
    }
    if ((inactive_firms > 0 || noise_positions > 0 || ownership_noise > 0) && min_firms < 2) {
        throw ParameterError("synth: noise injection needs at least two firms");
    }
    if (missing_coordinate_firms > min_firms) {
        throw ParameterError("synth: more missing-coordinate firms than firms");
    }
}

SyntheticDataset generate_planted(const PlantedConfig& config) {
    config.validate();
    Rng rng(config.seed);
    SyntheticDataset out;

    // Cities, with rejection sampling to keep them apart.
    std::vector<City> cities;
    for (std::uint32_t k = 0; k < config.communities.size(); ++k) {
        const auto& spec = config.communities[k];
        for (std::size_t i = 0; i < spec.cities; ++i) {
            City city;
            city.community = k;
            bool placed = false;
            for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
                const GeoPoint p{spec.center.latitude + spec.spread * rng.normal(),
                                 spec.center.longitude + spec.spread * rng.normal()};
                if (std::abs(p.latitude) > 85.0 || std::abs(p.longitude) > 179.0) continue;
                placed = std::none_of(cities.begin(), cities.end(), [&](const City& other) {
                    return std::hypot(other.point.latitude - p.latitude,
                                      other.point.longitude - p.longitude) < config.min_city_separation;
                });
                if (placed) city.point = p;
            }
            if (!placed) throw ParameterError("synth: cannot place cities with the requested separation");
            city.country = spec.countries[rng.below(spec.countries.size())];
            const std::string base = "Town " + std::to_string(cities.size());
            for (std::size_t l = 0; l < config.locations_per_city; ++l) {
                const double r = config.location_spread * std::sqrt(rng.uniform());
                const double theta = 2.0 * std::numbers::pi * rng.uniform();
                std::string name = l == 0 ? base : base + " " + kSuffixes[(l - 1) % kSuffixes.size()];
                if (l > kSuffixes.size()) name += " " + std::to_string(l);
                city.locations.emplace_back(
                    std::move(name), GeoPoint{city.point.latitude + r * std::cos(theta),
                                              city.point.longitude + r * std::sin(theta)}.canonical());
            }
            cities.push_back(std::move(city));
        }
    }
    for (const auto& c : cities) out.truth_city_community.push_back(c.community);

    // Active firms, grouped by community (cities are already in community order).
    std::vector<std::size_t> community_end(config.communities.size(), 0);
    for (std::uint32_t c = 0; c < cities.size(); ++c) {
        std::size_t count = config.firms_per_city;
        if (config.city_size_exponent > 0.0 && count > 0) {
            double u = rng.uniform();
            while (u <= 0.0) u = rng.uniform();
            const double drawn = static_cast<double>(count) * std::pow(u, -1.0 / config.city_size_exponent);
            count = static_cast<std::size_t>(
                std::min(std::floor(drawn), static_cast<double>(config.max_firms_per_city)));
            count = std::max(count, config.firms_per_city);
        }
        for (std::size_t f = 0; f < count; ++f) {
            const auto& [name, loc] = cities[c].locations[rng.below(cities[c].locations.size())];
            FirmRecord firm;
            firm.firm_id = make_id('F', out.firms.size(), 7);
            firm.name = "Firm " + std::to_string(out.firms.size());
            firm.status = FirmStatus::Active;
            firm.city_name = name;
            firm.country = cities[c].country;
            firm.coordinates = loc;
            out.truth_firm_ids.push_back(firm.firm_id);
            out.truth_firm_city.push_back(c);
            out.firms.push_back(std::move(firm));
        }
        community_end[cities[c].community] = out.firms.size();
    }
    const std::size_t active = out.firms.size();
    for (std::size_t i : sample_distinct(rng, active, config.missing_coordinate_firms)) {
        out.firms[i].coordinates.reset();
    }

    std::size_t person = 0;
    auto add_position = [&](std::size_t firm, const std::string& person_id, RoleKind role,
                            PositionStatus status, bool expected) {
        PositionRecord rec{out.firms[firm].firm_id, person_id, role, status};
        if (expected) out.expected_positions.push_back(rec);
        out.positions.push_back(std::move(rec));
    };

    // Planted interlocks: one fresh two-seat person per pair.
    std::size_t firm_community = 0;
    for (std::size_t i = 0; i < active; ++i) {
        while (i >= community_end[firm_community]) ++firm_community;
        const std::size_t block_end = community_end[firm_community];
        auto link = [&](std::size_t j) {
            const std::string pid = make_id('P', person++, 8);
            add_position(i, pid, random_role(rng), PositionStatus::Current, true);
            add_position(j, pid, random_role(rng), PositionStatus::Current, true);
            out.planted_pairs.emplace_back(out.firms[i].firm_id, out.firms[j].firm_id);
        };
        bernoulli_range(rng, i + 1, block_end, config.p_in, [&](std::size_t j) {
            link(j);
            ++out.intra_pairs;
        });
        bernoulli_range(rng, block_end, active, config.p_out, [&](std::size_t j) {
            link(j);
            ++out.inter_pairs;
        });
    }

    for (std::size_t i = 0; i < active; ++i) {
        for (std::size_t d = 0; d < config.directors_per_firm; ++d) {
            add_position(i, make_id('P', person++, 8), random_role(rng), PositionStatus::Current, true);
        }
    }

    // Noise: one seat is past or non-senior, so no interlock survives.
    for (std::size_t n = 0; n < config.noise_positions; ++n) {
        const auto pair = sample_distinct(rng, active, 2);
        const std::string pid = make_id('P', person++, 8);
        add_position(pair[0], pid, random_role(rng), PositionStatus::Current, true);
        if (rng.bernoulli(0.5)) {
            add_position(pair[1], pid, random_role(rng), PositionStatus::Past, false);
        } else {
            add_position(pair[1], pid, RoleKind::Other, PositionStatus::Current, false);
        }
    }

    // Inactive firms, each tied to two active firms.
    for (std::size_t n = 0; n < config.inactive_firms; ++n) {
        const auto& city = cities[rng.below(cities.size())];
        const auto& [name, loc] = city.locations[rng.below(city.locations.size())];
        FirmRecord firm;
        firm.firm_id = make_id('F', out.firms.size(), 7);
        firm.name = "Firm " + std::to_string(out.firms.size());
        firm.status = FirmStatus::Inactive;
        firm.city_name = name;
        firm.country = city.country;
        firm.coordinates = loc;
        out.firms.push_back(std::move(firm));
        const std::size_t inactive_index = out.firms.size() - 1;
        for (std::size_t target : sample_distinct(rng, active, 2)) {
            const std::string pid = make_id('P', person++, 8);
            add_position(inactive_index, pid, random_role(rng), PositionStatus::Current, false);
            add_position(target, pid, random_role(rng), PositionStatus::Current, true);
        }
    }

    for (std::size_t n = 0; n < config.mega_directors; ++n) {
        const std::string pid = make_id('M', n, 6);
        out.mega_director_ids.push_back(pid);
        for (std::size_t firm : sample_distinct(rng, active, config.mega_director_positions)) {
            add_position(firm, pid, random_role(rng), PositionStatus::Current, false);
        }
    }

    std::set<std::pair<std::string, std::string>> owned;
    for (std::size_t idx : sample_distinct(rng, out.planted_pairs.size(), config.ownership_ties)) {
        const auto& [a, b] = out.planted_pairs[idx];
        const double fraction = 0.5 + 0.5 * (1.0 - rng.uniform());  // (0.5, 1]
        if (rng.bernoulli(0.5)) {
            out.ownership.push_back({a, b, fraction});
        } else {
            out.ownership.push_back({b, a, fraction});
        }
        out.owned_pairs.emplace_back(a, b);
        owned.emplace(a, b);
    }
    for (std::size_t n = 0; n < config.ownership_noise; ++n) {
        const auto pair = sample_distinct(rng, active, 2);
        std::string a = out.firms[pair[0]].firm_id;
        std::string b = out.firms[pair[1]].firm_id;
        if (owned.contains({std::min(a, b), std::max(a, b)})) continue;
        const double fraction = n == 0 ? 0.5 : 0.5 * rng.uniform();
        out.ownership.push_back({std::move(a), std::move(b), fraction});
    }
    return out;
}

void write_truth_city(std::ostream& out, const SyntheticDataset& data) {
    out << "firm_id,city_id\n";
    for (std::size_t i = 0; i < data.truth_firm_ids.size(); ++i) {
        out << data.truth_firm_ids[i] << ',' << data.truth_firm_city[i] << '\n';
    }
}

void write_truth_community(std::ostream& out, const SyntheticDataset& data) {
    out << "city_id,community_id\n";
    for (std::size_t c = 0; c < data.truth_city_community.size(); ++c) {
        out << c << ',' << data.truth_city_community[c] << '\n';
    }
}

void write_dataset(const SyntheticDataset& data, const std::string& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    auto open = [&](const char* name) {
        std::ofstream f(fs::path(directory) / name, std::ios::binary);
        if (!f) throw IoError("cannot write " + (fs::path(directory) / name).string());
        return f;
    };
    {
        auto f = open("firms.csv");
        write_firms(f, data.firms);
    }
    {
        auto f = open("positions.csv");
        write_positions(f, data.positions);
    }
    {
        auto f = open("ownership.csv");
        write_ownership(f, data.ownership);
    }
    {
        auto f = open("truth_city.csv");
        write_truth_city(f, data);
    }
    {
        auto f = open("truth_community.csv");
        write_truth_community(f, data);
    }
}

RecoveryScore score_recovery(std::span<const std::uint32_t> found, std::span<const std::uint32_t> truth) {
    if (found.size() != truth.size()) {
        throw ContractViolation("score_recovery: partitions cover different node sets");
    }
    RecoveryScore score;
    score.nmi = normalized_mutual_information(found, truth);
    score.exact_match = normalize_labels(found) == normalize_labels(truth);
    return score;
}

}  // namespace interlock
