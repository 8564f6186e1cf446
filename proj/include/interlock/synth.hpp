#pragma once

#include "interlock/community.hpp"
#include "interlock/ingest.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace interlock {

struct CommunitySpec {
    std::size_t cities = 20;
    GeoPoint center;
    double spread = 2.0;  // std deviation of city placement around the center, degrees
    std::vector<std::string> countries = {"GB"};  // each city draws one uniformly
};

struct PlantedConfig {
    std::vector<CommunitySpec> communities;

    std::size_t firms_per_city = 10;
    // > 0 draws firms per city from a Pareto tail with this exponent and
    // minimum firms_per_city, capped at max_firms_per_city.
    double city_size_exponent = 0.0;
    std::size_t max_firms_per_city = 1000;

    // Each city has several named locations (name variants, suburbs) jittered
    // within location_spread degrees of the city point.
    std::size_t locations_per_city = 3;
    double location_spread = 0.02;
    double min_city_separation = 0.5;

    std::size_t directors_per_firm = 1;  // single-seat directors, no interlocks

    double p_in = 0.3;   // per firm pair within a community
    double p_out = 0.005;  // per firm pair across communities

    std::size_t mega_directors = 0;
    std::size_t mega_director_positions = 120;
    std::size_t ownership_ties = 0;   // fraction > 0.5 over interlocked pairs
    std::size_t ownership_noise = 0;  // fraction <= 0.5, the first exactly 0.5
    std::size_t inactive_firms = 0;   // interlocked to active firms, must vanish
    std::size_t missing_coordinate_firms = 0;
    std::size_t noise_positions = 0;  // past or non-senior would-be interlocks

    std::uint64_t seed = 1;

    // k communities of `cities` cities, centers on a grid 12 x 36 degrees apart,
    // one country per community.
    static PlantedConfig uniform(std::size_t communities, std::size_t cities, std::size_t firms_per_city,
                                 double p_in, double p_out, std::uint64_t seed);

    // Throws ParameterError describing the first invalid field.
    void validate() const;
};

struct SyntheticDataset {
    std::vector<FirmRecord> firms;
    std::vector<PositionRecord> positions;
    std::vector<OwnershipLink> ownership;

    std::vector<std::string> truth_firm_ids;        // analyzable firms (active)
    std::vector<std::uint32_t> truth_firm_city;     // parallel to truth_firm_ids
    std::vector<std::uint32_t> truth_city_community;  // indexed by city id

    // Interlock pairs as generated (firm ids, first < second).
    std::vector<std::pair<std::string, std::string>> planted_pairs;
    std::size_t intra_pairs = 0;
    std::size_t inter_pairs = 0;
    std::vector<std::pair<std::string, std::string>> owned_pairs;  // fraction > 0.5
    std::vector<std::string> mega_director_ids;

    // What clean_tables() must produce from `positions`.
    std::vector<PositionRecord> expected_positions;
};

SyntheticDataset generate_planted(const PlantedConfig& config);

void write_truth_city(std::ostream& out, const SyntheticDataset& data);
void write_truth_community(std::ostream& out, const SyntheticDataset& data);

// Writes firms.csv, positions.csv, ownership.csv, truth_city.csv
// (`firm_id,city_id`) and truth_community.csv (`city_id,community_id`).
void write_dataset(const SyntheticDataset& data, const std::string& directory);

struct RecoveryScore {
    double nmi = 0.0;
    bool exact_match = false;
};

// Throws ContractViolation on a size mismatch.
RecoveryScore score_recovery(std::span<const std::uint32_t> found, std::span<const std::uint32_t> truth);
inline RecoveryScore score_recovery(const Partition& found, std::span<const std::uint32_t> truth) {
    return score_recovery(found.membership, truth);
}

}  // namespace interlock
