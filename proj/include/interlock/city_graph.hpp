#pragma once

#include "interlock/geo_cluster.hpp"
#include "interlock/graph.hpp"
#include "interlock/interlock_graph.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace interlock {

// Metadata attached to a city-graph node.
struct CityNode {
    std::uint32_t cluster_id = 0;
    std::string label;
    std::string country;
    GeoPoint centroid;

    friend bool operator==(const CityNode&, const CityNode&) = default;
};

// Citycluster-level interlock graph. Node i carries nodes[i]; nodes are
// ordered by cluster id. Intra-city interlocks are the graph's self-loops.
struct CityGraph {
    std::vector<CityNode> nodes;
    WeightedGraph graph;

    std::size_t node_count() const noexcept { return nodes.size(); }
    std::optional<NodeId> index_of_cluster(std::uint32_t cluster_id) const;

    friend bool operator==(const CityGraph&, const CityGraph&) = default;
};

struct AggregationReport {
    std::size_t firms_in_graph = 0;
    std::size_t firms_unassigned = 0;
    std::size_t edges_dropped = 0;  // at least one endpoint unassigned
    Weight weight_dropped = 0;
    Weight weight_kept = 0;
};

// Sums firm-edge weights per cluster pair; edges inside one cluster become
// that cluster's self-loop. Nodes are the clusters with at least one incident
// interlock (self-loops included).
CityGraph aggregate_to_cities(const FirmGraph& firm_graph, const GeoClustering& clustering,
                              AggregationReport* report = nullptr);

// Removes all self-loops, then drops nodes left without edges.
CityGraph strip_self_loops(const CityGraph& graph);

// Induced subgraph on the largest connected component; `was_connected`
// reports whether anything had to be dropped.
CityGraph giant_city_component(const CityGraph& graph, bool* was_connected = nullptr);

CityGraph induced_city_subgraph(const CityGraph& graph, std::span<const NodeId> nodes);

// `src_cluster,dst_cluster,weight` with src_cluster < dst_cluster.
void write_city_edges(std::ostream& out, const CityGraph& graph);
// `cluster,self_weight`, only nonzero entries.
void write_city_self_loops(std::ostream& out, const CityGraph& graph);
// `cluster_id,label,country,lat,lon`.
void write_city_nodes(std::ostream& out, const CityGraph& graph);

// Rebuilds a city graph from the three files above.
CityGraph read_city_graph(std::istream& nodes, std::istream& edges, std::istream& self_loops);

}  // namespace interlock
