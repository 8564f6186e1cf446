#include "interlock/geo_cluster.hpp"

#include "interlock/csv.hpp"
#include "interlock/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <numbers>
#include <unordered_map>

namespace interlock {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Uniform grid over (lat, lon) with cell side = bandwidth. Only valid for the
// Euclidean metric, where a ball of radius r touches at most the 3x3 cells
// around its center.
class PointGrid {
public:
    PointGrid(std::span<const GeoPoint> points, double cell) : points_(points), cell_(cell) {
        for (std::uint32_t i = 0; i < points.size(); ++i) cells_[key_of(points[i])].push_back(i);
    }

    template <typename Fn>
    void for_each_within(const GeoPoint& center, double radius, Fn&& fn) const {
        const auto cx = cell_index(center.latitude);
        const auto cy = cell_index(center.longitude);
        const double r2 = radius * radius;
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                auto it = cells_.find(pack(cx + dx, cy + dy));
                if (it == cells_.end()) continue;
                for (std::uint32_t i : it->second) {
                    const double a = points_[i].latitude - center.latitude;
                    const double b = points_[i].longitude - center.longitude;
                    if (a * a + b * b <= r2) fn(i);
                }
            }
        }
    }

private:
    std::int64_t cell_index(double x) const { return static_cast<std::int64_t>(std::floor(x / cell_)); }
    static std::uint64_t pack(std::int64_t x, std::int64_t y) {
        return (static_cast<std::uint64_t>(x + (1LL << 31)) << 32) ^
               static_cast<std::uint64_t>(y + (1LL << 31));
    }
    std::uint64_t key_of(const GeoPoint& p) const {
        return pack(cell_index(p.latitude), cell_index(p.longitude));
    }

    std::span<const GeoPoint> points_;
    double cell_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

GeoPoint mean_of(std::span<const GeoPoint> points) {
    double lat = 0.0, lon = 0.0;
    for (const auto& p : points) {
        lat += p.latitude;
        lon += p.longitude;
    }
    const auto n = static_cast<double>(points.size());
    return {lat / n, lon / n};
}

std::string most_common(const std::vector<std::string>& values) {
    std::map<std::string, std::size_t> counts;
    for (const auto& v : values) ++counts[v];
    std::string best;
    std::size_t best_count = 0;
    for (const auto& [value, count] : counts) {
        if (count > best_count) {
            best = value;
            best_count = count;
        }
    }
    return best;
}

CityCluster make_cluster(std::uint32_t id, std::uint32_t origin, std::vector<CityMember> members) {
    std::sort(members.begin(), members.end());
    CityCluster c;
    c.cluster_id = id;
    c.origin_id = origin;
    std::vector<GeoPoint> locs;
    std::vector<std::string> countries;
    for (const auto& m : members) {
        locs.push_back(m.location);
        countries.push_back(m.country);
    }
    c.centroid = mean_of(locs);
    c.country = most_common(countries);
    c.members = std::move(members);
    return c;
}

}  // namespace

double geo_distance(const GeoPoint& a, const GeoPoint& b, GeoMetric metric) noexcept {
    if (metric == GeoMetric::Euclidean) {
        return std::hypot(a.latitude - b.latitude, a.longitude - b.longitude);
    }
    const double phi1 = a.latitude * kDegToRad;
    const double phi2 = b.latitude * kDegToRad;
    const double dphi = phi2 - phi1;
    const double dlambda = (b.longitude - a.longitude) * kDegToRad;
    const double h = std::sin(dphi / 2) * std::sin(dphi / 2) +
                     std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
    return 2.0 * std::asin(std::sqrt(std::min(1.0, h))) / kDegToRad;
}

MeanShiftResult mean_shift(std::span<const GeoPoint> points, const MeanShiftOptions& options) {
    if (!(options.bandwidth > 0.0) || !std::isfinite(options.bandwidth)) {
        throw ParameterError("mean_shift: bandwidth must be positive");
    }
    if (points.empty()) throw ContractViolation("mean_shift: no points");

    const double bw = options.bandwidth;
    const std::size_t n = points.size();
    std::optional<PointGrid> grid;
    if (options.metric == GeoMetric::Euclidean) grid.emplace(points, bw);

    auto for_each_within = [&](const GeoPoint& center, double radius, auto&& fn) {
        if (grid) {
            grid->for_each_within(center, radius, fn);
        } else {
            for (std::uint32_t i = 0; i < n; ++i) {
                if (geo_distance(points[i], center, options.metric) <= radius) fn(i);
            }
        }
    };

    MeanShiftResult out;
    out.converged.resize(n);
    std::vector<std::size_t> intensity(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        GeoPoint x = points[i];
        for (int iter = 0; iter < options.max_iterations; ++iter) {
            double lat = 0.0, lon = 0.0;
            std::size_t count = 0;
            for_each_within(x, bw, [&](std::uint32_t j) {
                lat += points[j].latitude;
                lon += points[j].longitude;
                ++count;
            });
            if (count == 0) break;
            const GeoPoint next{lat / static_cast<double>(count), lon / static_cast<double>(count)};
            const double shift = geo_distance(next, x, options.metric);
            x = next;
            if (shift < options.tolerance) break;
        }
        out.converged[i] = x;
        for_each_within(x, bw, [&](std::uint32_t) { ++intensity[i]; });
    }

    // Merge converged positions into modes, densest first.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return intensity[a] > intensity[b]; });

    std::vector<GeoPoint> raw_modes;
    std::vector<std::uint32_t> raw_label(n);
    // Euclidean modes are bucketed in cells of side bandwidth/2; other metrics
    // scan every mode.
    const double mode_cell = bw / 2;
    auto mode_cell_key = [&](const GeoPoint& p, std::int64_t dx, std::int64_t dy) {
        const auto x = static_cast<std::int64_t>(std::floor(p.latitude / mode_cell)) + dx;
        const auto y = static_cast<std::int64_t>(std::floor(p.longitude / mode_cell)) + dy;
        return (static_cast<std::uint64_t>(x + (1LL << 31)) << 32) ^
               static_cast<std::uint64_t>(y + (1LL << 31));
    };
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> mode_cells;
    for (std::size_t i : order) {
        const GeoPoint& x = out.converged[i];
        std::optional<std::uint32_t> best;
        double best_dist = 0.0;
        auto consider = [&](std::uint32_t m) {
            const double d = geo_distance(raw_modes[m], x, options.metric);
            if (d <= bw / 2 && (!best || d < best_dist || (d == best_dist && m < *best))) {
                best = m;
                best_dist = d;
            }
        };
        if (grid) {
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                for (std::int64_t dy = -1; dy <= 1; ++dy) {
                    auto it = mode_cells.find(mode_cell_key(x, dx, dy));
                    if (it == mode_cells.end()) continue;
                    for (std::uint32_t m : it->second) consider(m);
                }
            }
        } else {
            for (std::uint32_t m = 0; m < raw_modes.size(); ++m) consider(m);
        }
        if (!best) {
            best = static_cast<std::uint32_t>(raw_modes.size());
            raw_modes.push_back(x);
            if (grid) mode_cells[mode_cell_key(x, 0, 0)].push_back(*best);
        }
        raw_label[i] = *best;
    }

    constexpr std::uint32_t kUnset = static_cast<std::uint32_t>(-1);
    std::vector<std::uint32_t> renumber(raw_modes.size(), kUnset);
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& r = renumber[raw_label[i]];
        if (r == kUnset) {
            r = static_cast<std::uint32_t>(out.modes.size());
            out.modes.push_back(raw_modes[raw_label[i]]);
        }
        out.labels[i] = r;
    }
    return out;
}

std::string CityCluster::label() const {
    std::vector<std::string> names;
    for (const auto& m : members) names.push_back(m.city_name);
    return most_common(names);
}

std::optional<std::uint32_t> ClusterAssignment::cluster_of(const std::string& firm_id) const {
    auto it = firm_cluster.find(firm_id);
    if (it == firm_cluster.end()) return std::nullopt;
    return it->second;
}

GeoClustering cluster_cities(const std::vector<FirmRecord>& firms, const ClusterOptions& options) {
    std::map<CityMember, std::uint32_t> locations;
    for (const auto& f : firms) {
        if (f.coordinates) locations.emplace(CityMember{f.city_name, f.country, f.coordinates->canonical()}, 0);
    }

    GeoClustering out;
    std::vector<GeoPoint> points;
    points.reserve(locations.size());
    for (const auto& [member, _] : locations) points.push_back(member.location);

    if (!points.empty()) {
        const auto ms = mean_shift(points, {.bandwidth = options.bandwidth, .metric = options.metric});
        std::vector<std::vector<CityMember>> grouped(ms.modes.size());
        std::size_t i = 0;
        for (auto& [member, label] : locations) {
            label = ms.labels[i++];
            grouped[label].push_back(member);
        }
        for (std::uint32_t c = 0; c < grouped.size(); ++c) {
            out.clusters.push_back(make_cluster(c, c, std::move(grouped[c])));
        }
    }

    for (const auto& f : firms) {
        if (!f.coordinates) {
            out.assignment.unassigned[f.firm_id] = UnassignedReason::NoCoordinates;
            continue;
        }
        out.assignment.firm_cluster[f.firm_id] =
            locations.at(CityMember{f.city_name, f.country, f.coordinates->canonical()});
    }
    return out;
}

std::vector<CityCluster> split_border_clusters(const std::vector<CityCluster>& clusters) {
    std::vector<CityCluster> out;
    for (const auto& c : clusters) {
        std::map<std::string, std::vector<CityMember>> by_country;
        for (const auto& m : c.members) by_country[m.country].push_back(m);
        for (auto& [country, members] : by_country) {
            out.push_back(make_cluster(static_cast<std::uint32_t>(out.size()), c.cluster_id,
                                       std::move(members)));
        }
    }
    return out;
}

GeoClustering split_border_clusters(const GeoClustering& clustering,
                                    const std::vector<FirmRecord>& firms) {
    GeoClustering out;
    out.clusters = split_border_clusters(clustering.clusters);
    std::map<std::pair<std::uint32_t, std::string>, std::uint32_t> target;
    for (const auto& c : out.clusters) target[{c.origin_id, c.country}] = c.cluster_id;

    out.assignment.unassigned = clustering.assignment.unassigned;
    for (const auto& f : firms) {
        auto old = clustering.assignment.cluster_of(f.firm_id);
        if (!old) continue;
        auto it = target.find({*old, f.country});
        if (it == target.end()) {
            throw ContractViolation("split_border_clusters: firm " + f.firm_id +
                                    " has a country absent from its cluster");
        }
        out.assignment.firm_cluster[f.firm_id] = it->second;
    }
    if (out.assignment.firm_cluster.size() != clustering.assignment.firm_cluster.size()) {
        throw ContractViolation("split_border_clusters: firm table does not cover the assignment");
    }
    return out;
}

void write_clusters(std::ostream& out, const std::vector<CityCluster>& clusters) {
    out << "cluster_id,label,country,lat,lon,origin_id\n";
    for (const auto& c : clusters) {
        csv::write_row(out, {std::to_string(c.cluster_id), c.label(), c.country,
                             csv::format_double(c.centroid.latitude), csv::format_double(c.centroid.longitude),
                             std::to_string(c.origin_id)});
    }
}

void write_cluster_members(std::ostream& out, const std::vector<CityCluster>& clusters) {
    out << "cluster_id,city,country,lat,lon\n";
    for (const auto& c : clusters) {
        for (const auto& m : c.members) {
            csv::write_row(out, {std::to_string(c.cluster_id), m.city_name, m.country,
                                 csv::format_double(m.location.latitude),
                                 csv::format_double(m.location.longitude)});
        }
    }
}

void write_assignment(std::ostream& out, const ClusterAssignment& assignment) {
    out << "firm_id,cluster_id,reason\n";
    // Merge the two sorted maps so the file is ordered by firm id.
    auto a = assignment.firm_cluster.begin();
    auto u = assignment.unassigned.begin();
    while (a != assignment.firm_cluster.end() || u != assignment.unassigned.end()) {
        if (u == assignment.unassigned.end() || (a != assignment.firm_cluster.end() && a->first < u->first)) {
            csv::write_row(out, {a->first, std::to_string(a->second), ""});
            ++a;
        } else {
            csv::write_row(out, {u->first, "", "no_coordinates"});
            ++u;
        }
    }
}

GeoClustering read_clustering(std::istream& clusters_in, std::istream& members_in,
                              std::istream& assignment_in) {
    GeoClustering out;
    std::vector<std::string> f;
    auto bad = [](const char* what, std::size_t line) {
        return SchemaError(std::string(what) + ": bad row at line " + std::to_string(line));
    };
    auto parse_id = [](const std::string& s) -> std::optional<std::uint32_t> {
        const auto v = csv::parse_int(s);
        if (!v || *v < 0 || *v > 0xFFFFFFFFLL) return std::nullopt;
        return static_cast<std::uint32_t>(*v);
    };

    csv::Reader cr(clusters_in);
    csv::expect_header(cr, {"cluster_id", "label", "country", "lat", "lon", "origin_id"}, "clusters");
    while (cr.next(f)) {
        if (f.size() == 1 && f[0].empty()) continue;
        if (f.size() != 6) throw bad("clusters", cr.line());
        const auto id = parse_id(f[0]);
        const auto origin = parse_id(f[5]);
        const auto lat = csv::parse_double(f[3]);
        const auto lon = csv::parse_double(f[4]);
        if (!id || !origin || !lat || !lon || *id != out.clusters.size()) throw bad("clusters", cr.line());
        CityCluster c;
        c.cluster_id = *id;
        c.origin_id = *origin;
        c.country = f[2];
        c.centroid = {*lat, *lon};
        out.clusters.push_back(std::move(c));
    }

    csv::Reader mr(members_in);
    csv::expect_header(mr, {"cluster_id", "city", "country", "lat", "lon"}, "cluster members");
    while (mr.next(f)) {
        if (f.size() == 1 && f[0].empty()) continue;
        if (f.size() != 5) throw bad("cluster members", mr.line());
        const auto id = parse_id(f[0]);
        const auto lat = csv::parse_double(f[3]);
        const auto lon = csv::parse_double(f[4]);
        if (!id || *id >= out.clusters.size() || !lat || !lon) throw bad("cluster members", mr.line());
        out.clusters[*id].members.push_back({f[1], f[2], {*lat, *lon}});
    }
    for (auto& c : out.clusters) std::sort(c.members.begin(), c.members.end());

    csv::Reader ar(assignment_in);
    csv::expect_header(ar, {"firm_id", "cluster_id", "reason"}, "assignment");
    while (ar.next(f)) {
        if (f.size() == 1 && f[0].empty()) continue;
        if (f.size() != 3 || f[0].empty()) throw bad("assignment", ar.line());
        if (f[1].empty()) {
            if (f[2] != "no_coordinates") throw bad("assignment", ar.line());
            out.assignment.unassigned[f[0]] = UnassignedReason::NoCoordinates;
            continue;
        }
        const auto id = parse_id(f[1]);
        if (!id || *id >= out.clusters.size()) throw bad("assignment", ar.line());
        out.assignment.firm_cluster[f[0]] = *id;
    }
    return out;
}

Gazetteer Gazetteer::read(std::istream& in) {
    csv::Reader reader(in);
    csv::expect_header(reader, {"city", "country", "lat", "lon"}, "gazetteer");
    Gazetteer g;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() != 4) continue;
        const auto lat = csv::parse_double(fields[2]);
        const auto lon = csv::parse_double(fields[3]);
        if (!lat || !lon) continue;
        const GeoPoint p{*lat, *lon};
        if (p.valid()) g.add(fields[0], fields[1], p);
    }
    return g;
}

void Gazetteer::add(const std::string& city, const std::string& country, GeoPoint location) {
    entries_[{csv::to_lower(csv::trim(city)), csv::to_lower(csv::trim(country))}] = location;
}

std::optional<GeoPoint> Gazetteer::lookup(const std::string& city, const std::string& country) const {
    auto it = entries_.find({csv::to_lower(csv::trim(city)), csv::to_lower(csv::trim(country))});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::size_t resolve_missing_coordinates(std::vector<FirmRecord>& firms, const Gazetteer& gazetteer) {
    std::size_t resolved = 0;
    for (auto& f : firms) {
        if (f.coordinates || f.city_name.empty()) continue;
        if (auto p = gazetteer.lookup(f.city_name, f.country)) {
            f.coordinates = *p;
            ++resolved;
        }
    }
    return resolved;
}

}  // namespace interlock
