#include "interlock/city_graph.hpp"
#include "interlock/error.hpp"
#include "interlock/geo_cluster.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

using namespace interlock;

namespace {

FirmRecord firm(std::string id, std::string city, std::string country, std::optional<GeoPoint> p) {
    return {std::move(id), "", FirmStatus::Active, std::move(city), std::move(country), p};
}

// Two partitions are equal up to relabeling.
bool same_partition(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    if (a.size() != b.size()) return false;
    std::map<std::uint32_t, std::uint32_t> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
        if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
    }
    return true;
}

std::vector<GeoPoint> scatter(const std::vector<GeoPoint>& centers, std::size_t per, double radius, Rng& rng,
                              std::vector<std::uint32_t>* truth) {
    std::vector<GeoPoint> out;
    for (std::uint32_t c = 0; c < centers.size(); ++c) {
        for (std::size_t i = 0; i < per; ++i) {
            const double r = radius * std::sqrt(rng.uniform());
            const double t = 2 * std::numbers::pi * rng.uniform();
            out.push_back({centers[c].latitude + r * std::cos(t), centers[c].longitude + r * std::sin(t)});
            if (truth) truth->push_back(c);
        }
    }
    return out;
}

FirmGraph firm_graph(std::vector<std::string> ids, const std::vector<Edge>& edges) {
    FirmGraph g;
    g.firm_ids = std::move(ids);
    g.graph = WeightedGraph::from_edges(g.firm_ids.size(), edges);
    return g;
}

GeoClustering manual_clustering(const std::map<std::string, std::uint32_t>& assignment, std::size_t clusters) {
    GeoClustering c;
    for (std::uint32_t i = 0; i < clusters; ++i) {
        CityCluster cc;
        cc.cluster_id = i;
        cc.origin_id = i;
        cc.country = "GB";
        cc.centroid = {static_cast<double>(i), 0.0};
        cc.members.push_back({"City" + std::to_string(i), "GB", cc.centroid});
        c.clusters.push_back(cc);
    }
    c.assignment.firm_cluster = assignment;
    return c;
}

}  // namespace

TEST_CASE("mean_shift: two far-apart groups give two labels") {
    const std::vector<GeoPoint> pts = {{0, 0}, {0.01, 0}, {0, 0.02}, {10, 10}, {10.01, 10}, {10, 9.99}};
    const auto r = mean_shift(pts, {.bandwidth = 1.0});
    CHECK(r.modes.size() == 2);
    CHECK(r.labels == std::vector<std::uint32_t>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("mean_shift: identical points give one label") {
    const std::vector<GeoPoint> pts(7, GeoPoint{3.5, -2.25});
    const auto r = mean_shift(pts, {.bandwidth = 0.1});
    CHECK(r.modes.size() == 1);
    CHECK(r.modes[0] == GeoPoint{3.5, -2.25});
}

TEST_CASE("mean_shift: 50 points around 3 separated centers recover the generator") {
    Rng rng(17);
    std::vector<std::uint32_t> truth;
    const auto pts = scatter({{0, 0}, {6, 0}, {0, 7}}, 50, 0.01, rng, &truth);
    const auto r = mean_shift(pts, {.bandwidth = 1.0});
    CHECK(r.labels == truth);
}

TEST_CASE("mean_shift rejects a non-positive bandwidth and empty input") {
    const std::vector<GeoPoint> pts = {{0, 0}};
    CHECK_THROWS_AS(mean_shift(pts, {.bandwidth = 0.0}), ParameterError);
    CHECK_THROWS_AS(mean_shift(pts, {.bandwidth = -1.0}), ParameterError);
    CHECK_THROWS_AS(mean_shift(std::vector<GeoPoint>{}, {.bandwidth = 1.0}), ContractViolation);
}

TEST_CASE("property: mean_shift label validity and translation invariance") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<GeoPoint> centers;
        for (int c = 0; c < 4; ++c) centers.push_back({rng.uniform() * 20 - 10, rng.uniform() * 40 - 20});
        const auto pts = scatter(centers, 15, 0.3, rng, nullptr);
        const double bw = 0.5;
        const auto r = mean_shift(pts, {.bandwidth = bw});
        for (std::size_t i = 0; i < pts.size(); ++i) {
            CHECK(geo_distance(r.converged[i], r.modes[r.labels[i]], GeoMetric::Euclidean) <= bw);
        }
        std::vector<GeoPoint> shifted;
        for (const auto& p : pts) shifted.push_back({p.latitude + 3.25, p.longitude - 1.5});
        CHECK(same_partition(mean_shift(shifted, {.bandwidth = bw}).labels, r.labels));
    }
}

TEST_CASE("haversine metric measures degrees of arc") {
    CHECK(geo_distance({0, 0}, {0, 1}, GeoMetric::Haversine) == doctest::Approx(1.0));
    CHECK(geo_distance({60, 0}, {60, 1}, GeoMetric::Haversine) == doctest::Approx(0.5).epsilon(0.01));
    CHECK(geo_distance({0, 179.95}, {0, -179.95}, GeoMetric::Haversine) == doctest::Approx(0.1));
    const std::vector<GeoPoint> pts = {{0, 179.98}, {0, -179.98}, {30, 30}};
    const auto r = mean_shift(pts, {.bandwidth = 0.1, .metric = GeoMetric::Haversine});
    CHECK(r.labels[0] == r.labels[1]);
    CHECK(r.labels[2] != r.labels[0]);
}

TEST_CASE("cluster_cities: name variants at identical coordinates share a cluster") {
    const std::vector<FirmRecord> firms = {firm("F1", "Brussel", "BE", GeoPoint{50.8503, 4.3517}),
                                           firm("F2", "Bruxelles", "BE", GeoPoint{50.8503, 4.3517}),
                                           firm("F3", "Antwerpen", "BE", GeoPoint{51.2194, 4.4025})};
    const auto c = cluster_cities(firms);
    CHECK(c.clusters.size() == 2);
    CHECK(c.assignment.cluster_of("F1") == c.assignment.cluster_of("F2"));
    CHECK(c.assignment.cluster_of("F1") != c.assignment.cluster_of("F3"));
    const auto& brussels = c.clusters[*c.assignment.cluster_of("F1")];
    CHECK(brussels.members.size() == 2);
}

TEST_CASE("cluster_cities: firm without coordinates is unassigned") {
    const std::vector<FirmRecord> firms = {firm("F1", "London", "GB", GeoPoint{51.5, -0.12}),
                                           firm("F2", "Panama", "PA", std::nullopt)};
    const auto c = cluster_cities(firms);
    CHECK(c.assignment.unassigned.at("F2") == UnassignedReason::NoCoordinates);
    CHECK(c.assignment.firm_count() == firms.size());
    CHECK_FALSE(c.assignment.cluster_of("F2"));
}

TEST_CASE("cluster_cities: suburb at 0.02 degrees merges at bandwidth 0.1") {
    const std::vector<FirmRecord> firms = {firm("F1", "Metropole", "FR", GeoPoint{48.85, 2.35}),
                                           firm("F2", "Suburb", "FR", GeoPoint{48.87, 2.35})};
    const std::vector<GeoPoint> pts = {{48.85, 2.35}, {48.87, 2.35}};
    const auto oracle_labels = mean_shift(pts, {.bandwidth = 0.1}).labels;
    CHECK(oracle_labels[0] == oracle_labels[1]);
    const auto c = cluster_cities(firms);
    CHECK(c.clusters.size() == 1);
    CHECK(c.clusters[0].centroid.latitude == doctest::Approx(48.86));
}

TEST_CASE("cluster_cities: one point per distinct location, not per firm") {
    // 50 firms stacked on A must not drag the mode toward A and away from B.
    std::vector<FirmRecord> firms;
    for (int i = 0; i < 50; ++i) firms.push_back(firm("A" + std::to_string(i), "A", "GB", GeoPoint{0.0, 0.0}));
    firms.push_back(firm("B", "B", "GB", GeoPoint{0.0, 0.08}));
    const auto c = cluster_cities(firms);
    REQUIRE(c.clusters.size() == 1);
    CHECK(c.clusters[0].centroid.longitude == doctest::Approx(0.04));
}

TEST_CASE("split_border_clusters") {
    auto cluster = [](std::vector<CityMember> members) {
        CityCluster c;
        c.members = std::move(members);
        std::sort(c.members.begin(), c.members.end());
        return c;
    };
    SUBCASE("single country unchanged") {
        const auto in = cluster({{"a", "GB", {1, 1}}, {"b", "GB", {1, 1.02}}});
        const auto out = split_border_clusters({in});
        REQUIRE(out.size() == 1);
        CHECK(out[0].members == in.members);
    }
    SUBCASE("two countries give two clusters") {
        const auto out = split_border_clusters({cluster({{"x", "DE", {0, 0}}, {"y", "FR", {0, 0.05}}})});
        REQUIRE(out.size() == 2);
        CHECK(out[0].country == "DE");
        CHECK(out[1].country == "FR");
    }
    SUBCASE("{DE,DE,FR} recomputes per-country centroids") {
        const auto out =
            split_border_clusters({cluster({{"a", "DE", {1, 2}}, {"b", "DE", {3, 4}}, {"c", "FR", {5, 6}}})});
        REQUIRE(out.size() == 2);
        CHECK(out[0].members.size() == 2);
        CHECK(out[0].centroid == GeoPoint{2, 3});
        CHECK(out[1].members.size() == 1);
        CHECK(out[1].centroid == GeoPoint{5, 6});
        for (const auto& c : out) {
            for (const auto& m : c.members) CHECK(m.country == c.country);
        }
    }
}

TEST_CASE("split_border_clusters remaps firm assignments by country") {
    const std::vector<FirmRecord> firms = {firm("F1", "Basel", "CH", GeoPoint{47.56, 7.59}),
                                           firm("F2", "Saint-Louis", "FR", GeoPoint{47.59, 7.56}),
                                           firm("F3", "Weil", "DE", GeoPoint{47.59, 7.61}),
                                           firm("F4", "Nowhere", "CH", std::nullopt)};
    const auto before = cluster_cities(firms);
    REQUIRE(before.clusters.size() == 1);
    const auto after = split_border_clusters(before, firms);
    CHECK(after.clusters.size() == 3);
    CHECK(after.assignment.firm_count() == firms.size());
    for (const auto& f : firms) {
        if (auto c = after.assignment.cluster_of(f.firm_id)) CHECK(after.clusters[*c].country == f.country);
    }
}

TEST_CASE("gazetteer fills missing coordinates case-insensitively") {
    std::istringstream in("city,country,lat,lon\nPanama City,PA,8.98,-79.52\nbad,row\n");
    const auto gz = Gazetteer::read(in);
    CHECK(gz.size() == 1);
    std::vector<FirmRecord> firms = {firm("F1", "panama city", "pa", std::nullopt),
                                     firm("F2", "Colon", "PA", std::nullopt)};
    CHECK(resolve_missing_coordinates(firms, gz) == 1);
    CHECK(firms[0].coordinates == GeoPoint{8.98, -79.52});
    CHECK_FALSE(firms[1].coordinates);
}

TEST_CASE("clustering CSV round-trip") {
    const std::vector<FirmRecord> firms = {firm("F1", "Basel", "CH", GeoPoint{47.56, 7.59}),
                                           firm("F2", "Saint-Louis", "FR", GeoPoint{47.59, 7.56}),
                                           firm("F3", "Paris, centre", "FR", GeoPoint{48.85, 2.35}),
                                           firm("F4", "Nowhere", "CH", std::nullopt)};
    const auto c = split_border_clusters(cluster_cities(firms), firms);
    std::stringstream cl, mem, asg;
    write_clusters(cl, c.clusters);
    write_cluster_members(mem, c.clusters);
    write_assignment(asg, c.assignment);
    const auto back = read_clustering(cl, mem, asg);
    REQUIRE(back.clusters.size() == c.clusters.size());
    for (std::size_t i = 0; i < c.clusters.size(); ++i) {
        CHECK(back.clusters[i].cluster_id == c.clusters[i].cluster_id);
        CHECK(back.clusters[i].centroid == c.clusters[i].centroid);
        CHECK(back.clusters[i].members == c.clusters[i].members);
        CHECK(back.clusters[i].country == c.clusters[i].country);
    }
    CHECK(back.assignment.firm_cluster == c.assignment.firm_cluster);
    CHECK(back.assignment.unassigned == c.assignment.unassigned);
}

TEST_CASE("aggregate_to_cities: direct aggregation") {
    const auto g = firm_graph({"A", "B", "C"}, {{0, 1, 2}, {1, 2, 1}});
    const auto city = aggregate_to_cities(g, manual_clustering({{"A", 0}, {"B", 0}, {"C", 1}}, 2));
    REQUIRE(city.node_count() == 2);
    CHECK(city.graph.self_loop(0) == 2);
    CHECK(city.graph.edge_weight(0, 1) == 1);
    CHECK(city.graph.self_loop(1) == 0);
}

TEST_CASE("aggregate_to_cities: all firms in one city") {
    const auto g = firm_graph({"A", "B", "C"}, {{0, 1, 2}, {1, 2, 1}, {0, 2, 4}});
    const auto city = aggregate_to_cities(g, manual_clustering({{"A", 0}, {"B", 0}, {"C", 0}}, 1));
    REQUIRE(city.node_count() == 1);
    CHECK(city.graph.self_loop(0) == 7);
    CHECK(city.graph.edge_count() == 0);
}

TEST_CASE("aggregate_to_cities: unassigned firms contribute nothing and are reported") {
    const auto g = firm_graph({"A", "B", "C"}, {{0, 1, 2}, {1, 2, 3}});
    AggregationReport report;
    const auto city = aggregate_to_cities(g, manual_clustering({{"A", 0}, {"B", 1}}, 3), &report);
    CHECK(city.node_count() == 2);  // cluster 2 has no interlocks
    CHECK(city.graph.total_weight() == 2);
    CHECK(report.firms_unassigned == 1);
    CHECK(report.weight_dropped == 3);
    CHECK(report.weight_kept == 2);
}

TEST_CASE("property: aggregation matches the brute-force double loop") {
    Rng rng(29);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 50;
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i) ids.push_back("F" + std::to_string(1000 + i));
        FirmGraph g;
        g.firm_ids = ids;
        g.graph = oracle::erdos_renyi(n, 0.1, rng, 5);
        std::map<std::string, std::uint32_t> assign;
        std::vector<int> city_of(n);
        for (std::size_t i = 0; i < n; ++i) {
            city_of[i] = rng.bernoulli(0.1) ? -1 : static_cast<int>(rng.below(5));
            if (city_of[i] >= 0) assign[ids[i]] = static_cast<std::uint32_t>(city_of[i]);
        }
        const auto city = aggregate_to_cities(g, manual_clustering(assign, 5));

        std::map<std::pair<int, int>, Weight> expected;
        Weight assigned_weight = 0;
        for (NodeId i = 0; i < n; ++i) {
            for (NodeId j = i + 1; j < n; ++j) {
                const Weight w = g.graph.edge_weight(i, j);
                if (w == 0 || city_of[i] < 0 || city_of[j] < 0) continue;
                expected[{std::min(city_of[i], city_of[j]), std::max(city_of[i], city_of[j])}] += w;
                assigned_weight += w;
            }
        }
        CHECK(city.graph.total_weight() == assigned_weight);
        for (const auto& [pair, w] : expected) {
            const auto a = city.index_of_cluster(static_cast<std::uint32_t>(pair.first));
            const auto b = city.index_of_cluster(static_cast<std::uint32_t>(pair.second));
            REQUIRE(a);
            REQUIRE(b);
            CHECK((*a == *b ? city.graph.self_loop(*a) : city.graph.edge_weight(*a, *b)) == w);
        }
        std::size_t crossing = 0;
        for (const auto& [pair, _] : expected) crossing += pair.first != pair.second;
        CHECK(city.graph.edge_count() == crossing);
        for (const Edge& e : city.graph.edges()) CHECK(e.weight > 0);
    }
}

TEST_CASE("strip_self_loops") {
    const auto g = firm_graph({"A", "B", "C", "D"}, {{0, 1, 5}, {1, 2, 1}, {2, 3, 4}});
    const auto city = aggregate_to_cities(g, manual_clustering({{"A", 0}, {"B", 0}, {"C", 1}, {"D", 2}}, 3));
    CHECK(city.graph.self_loop(0) == 5);
    const auto stripped = strip_self_loops(city);
    CHECK(stripped.graph.total_self_loop_weight() == 0);
    CHECK(stripped.graph.edges() == city.graph.edges());
    CHECK(stripped.graph.total_weight() == city.graph.total_weight() - city.graph.total_self_loop_weight());
    CHECK(strip_self_loops(stripped) == stripped);
}

TEST_CASE("strip_self_loops drops cities with only self-loop weight") {
    const auto g = firm_graph({"A", "B", "C", "D"}, {{0, 1, 5}, {2, 3, 1}});
    const auto city = aggregate_to_cities(g, manual_clustering({{"A", 0}, {"B", 0}, {"C", 1}, {"D", 2}}, 3));
    CHECK(city.node_count() == 3);
    CHECK(strip_self_loops(city).node_count() == 2);
}

TEST_CASE("giant_city_component reports broken connectivity") {
    const auto g = firm_graph({"A", "B", "C", "D"}, {{0, 1, 5}, {2, 3, 1}});
    const auto city =
        aggregate_to_cities(g, manual_clustering({{"A", 0}, {"B", 1}, {"C", 2}, {"D", 3}}, 4));
    bool connected = true;
    const auto giant = giant_city_component(city, &connected);
    CHECK_FALSE(connected);
    CHECK(giant.node_count() == 2);
    CHECK(giant.nodes[0].cluster_id == 0);
}

TEST_CASE("city graph CSV round-trip") {
    const auto g = firm_graph({"A", "B", "C", "D"}, {{0, 1, 5}, {1, 2, 1}, {2, 3, 4}});
    const auto city = aggregate_to_cities(g, manual_clustering({{"A", 0}, {"B", 0}, {"C", 1}, {"D", 2}}, 3));
    std::stringstream nodes, edges, loops;
    write_city_nodes(nodes, city);
    write_city_edges(edges, city);
    write_city_self_loops(loops, city);
    CHECK(edges.str().rfind("src_cluster,dst_cluster,weight\n", 0) == 0);
    CHECK(loops.str().rfind("cluster,self_weight\n", 0) == 0);
    CHECK(nodes.str().rfind("cluster_id,label,country,lat,lon\n", 0) == 0);
    CHECK(read_city_graph(nodes, edges, loops) == city);
}
