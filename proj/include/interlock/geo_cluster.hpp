#pragma once

#include "interlock/ingest.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace interlock {

enum class GeoMetric {
    Euclidean,  // plain distance on (lat, lon) degrees
    Haversine,  // great-circle central angle, also in degrees
};

double geo_distance(const GeoPoint& a, const GeoPoint& b, GeoMetric metric) noexcept;

struct MeanShiftOptions {
    double bandwidth = 0.1;
    GeoMetric metric = GeoMetric::Euclidean;
    double tolerance = 1e-7;
    int max_iterations = 300;
};

struct MeanShiftResult {
    std::vector<std::uint32_t> labels;  // per input point
    std::vector<GeoPoint> modes;         // indexed by label
    std::vector<GeoPoint> converged;     // per input point, before merging
};

// Flat-kernel mean shift seeded at every point. Converged positions closer
// than bandwidth/2 share a mode; modes are processed in decreasing order of
// the number of points within bandwidth. Labels are renumbered by first
// appearance in input order. Throws ParameterError on a non-positive bandwidth
// and ContractViolation on empty input.
MeanShiftResult mean_shift(std::span<const GeoPoint> points, const MeanShiftOptions& options);

struct CityMember {
    std::string city_name;
    std::string country;
    GeoPoint location;

    friend bool operator==(const CityMember&, const CityMember&) = default;
    friend auto operator<=>(const CityMember&, const CityMember&) = default;
};

struct CityCluster {
    std::uint32_t cluster_id = 0;
    GeoPoint centroid;
    // Single country after border splitting; before that, the most common
    // member country (ties by code).
    std::string country;
    std::vector<CityMember> members;  // sorted
    // Cluster id before border splitting; equals cluster_id when not split.
    std::uint32_t origin_id = 0;

    // Most frequent member name, ties by lexicographic order.
    std::string label() const;
};

enum class UnassignedReason { NoCoordinates };

struct ClusterAssignment {
    std::map<std::string, std::uint32_t> firm_cluster;
    std::map<std::string, UnassignedReason> unassigned;

    std::size_t firm_count() const noexcept { return firm_cluster.size() + unassigned.size(); }
    std::optional<std::uint32_t> cluster_of(const std::string& firm_id) const;
};

struct GeoClustering {
    std::vector<CityCluster> clusters;  // indexed by cluster_id
    ClusterAssignment assignment;
};

struct ClusterOptions {
    double bandwidth = 0.1;
    GeoMetric metric = GeoMetric::Euclidean;
};

// Clusters distinct (city, country, location) tuples; firms take their
// location's cluster, firms without coordinates are unassigned.
GeoClustering cluster_cities(const std::vector<FirmRecord>& firms, const ClusterOptions& options = {});

// Partitions every multi-country cluster by country. New ids are contiguous,
// ordered by (origin id, country); centroids are per-part member means.
std::vector<CityCluster> split_border_clusters(const std::vector<CityCluster>& clusters);

// Split that also re-targets the firm assignment, using each firm's country.
GeoClustering split_border_clusters(const GeoClustering& clustering,
                                    const std::vector<FirmRecord>& firms);

// CSV exports: `cluster_id,label,country,lat,lon,origin_id`,
// `cluster_id,city,country,lat,lon` and `firm_id,cluster_id,reason` (cluster
// empty and reason `no_coordinates` for unassigned firms).
void write_clusters(std::ostream& out, const std::vector<CityCluster>& clusters);
void write_cluster_members(std::ostream& out, const std::vector<CityCluster>& clusters);
void write_assignment(std::ostream& out, const ClusterAssignment& assignment);
// Throws SchemaError on malformed rows or dangling cluster ids.
GeoClustering read_clustering(std::istream& clusters, std::istream& members, std::istream& assignment);

// Key-value coordinate cache `city,country,lat,lon` that an external geocoder
// may populate. Lookup is case-insensitive on city and country.
class Gazetteer {
public:
    static Gazetteer read(std::istream& in);
    void add(const std::string& city, const std::string& country, GeoPoint location);
    std::optional<GeoPoint> lookup(const std::string& city, const std::string& country) const;
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::map<std::pair<std::string, std::string>, GeoPoint> entries_;
};

// Fills absent coordinates from the gazetteer. Returns the number resolved.
std::size_t resolve_missing_coordinates(std::vector<FirmRecord>& firms, const Gazetteer& gazetteer);

}  // namespace interlock
