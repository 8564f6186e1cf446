#pragma once

#include "interlock/city_graph.hpp"
#include "interlock/community.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace interlock {

enum class TieLabel { Local, Nonlocal };

struct TieClassification {
    std::vector<Edge> edges;        // graph.edges() order
    std::vector<TieLabel> labels;   // parallel to edges
    // Binary: over distinct city pairs, self-loops excluded.
    double binary_local = 1.0;
    double binary_nonlocal = 0.0;
    // Weighted: over summed weights, self-loops counted as local.
    double weighted_local = 1.0;
    double weighted_nonlocal = 0.0;
    // Weighted fractions with self-loops left out of the denominator.
    double weighted_local_no_self = 1.0;
    double weighted_nonlocal_no_self = 0.0;
    Weight local_weight = 0;  // edges only
    Weight nonlocal_weight = 0;
    Weight self_loop_weight = 0;
};

// An edge is Local iff both endpoints share a community. Fractions of an
// empty denominator are reported as fully local.
TieClassification classify_ties(const WeightedGraph& graph, const Partition& partition);
inline TieClassification classify_ties(const CityGraph& graph, const Partition& partition) {
    return classify_ties(graph.graph, partition);
}

// Community-level graph: node c is community c; edge weights sum crossing
// city edges; self-loops hold intra-community weight including city self-loops.
struct CommunityGraph {
    WeightedGraph graph;
    std::vector<std::size_t> sizes;      // cities per community
    std::vector<GeoPoint> layout;        // mean member coordinates, for plotting
};

CommunityGraph community_graph(const CityGraph& graph, const Partition& partition);

struct HubReport {
    std::vector<std::size_t> nonlocal_neighbors;  // per city
    std::vector<NodeId> hubs;                     // sorted
    CityGraph subgraph;                           // hubs, inter-community edges only
};

inline constexpr std::size_t kDefaultHubThreshold = 1000;

// Hubs are cities with at least `threshold` distinct neighbours in other
// communities. Throws ParameterError if threshold < 1.
HubReport nonlocal_hubs(const CityGraph& graph, const Partition& partition,
                        std::size_t threshold = kDefaultHubThreshold);

struct CommunityComposition {
    std::map<std::string, std::size_t> countries;
    std::string dominant;  // highest count, ties by code
    double entropy_bits = 0.0;
    std::size_t size = 0;
};

struct CompositionTable {
    std::vector<CommunityComposition> communities;  // indexed by community id
};

// Throws ContractViolation if `country_of` does not cover the partition.
CompositionTable community_composition(const Partition& partition,
                                       const std::vector<std::string>& country_of);

// `edge,src,dst,weight,label` where src/dst are cluster ids.
void write_tie_classification(std::ostream& out, const CityGraph& graph, const TieClassification& ties);
// `src_community,dst_community,weight` plus `community,self_weight` rows in a
// second file.
void write_community_edges(std::ostream& out, const CommunityGraph& cg);
void write_community_self_loops(std::ostream& out, const CommunityGraph& cg);
// `city,nonlocal_neighbor_count` for every city (cluster id).
void write_hubs(std::ostream& out, const CityGraph& graph, const HubReport& hubs);
// `community,country,count`.
void write_composition(std::ostream& out, const CompositionTable& table);

// GeoJSON FeatureCollection of city points carrying their community index.
std::string cities_geojson(const CityGraph& graph, const Partition& partition);
// GeoJSON FeatureCollection of LineStrings between community layout points.
std::string community_arcs_geojson(const CommunityGraph& cg);

}  // namespace interlock
