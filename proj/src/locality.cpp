#include "interlock/locality.hpp"

#include "interlock/csv.hpp"
#include "interlock/error.hpp"

#include <json.hpp>

#include <cmath>
#include <ostream>

namespace interlock {

namespace {

void require_cover(std::size_t nodes, const Partition& partition, const char* what) {
    if (partition.membership.size() != nodes) {
        throw ContractViolation(std::string(what) + ": partition does not cover the graph");
    }
}

double fraction(Weight part, Weight whole, double if_empty) {
    return whole == 0 ? if_empty : static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

TieClassification classify_ties(const WeightedGraph& graph, const Partition& partition) {
    require_cover(graph.node_count(), partition, "classify_ties");
    TieClassification out;
    out.edges = graph.edges();
    out.labels.reserve(out.edges.size());
    std::size_t local_edges = 0;
    for (const Edge& e : out.edges) {
        const bool local = partition.membership[e.src] == partition.membership[e.dst];
        out.labels.push_back(local ? TieLabel::Local : TieLabel::Nonlocal);
        if (local) {
            ++local_edges;
            out.local_weight += e.weight;
        } else {
            out.nonlocal_weight += e.weight;
        }
    }
    out.self_loop_weight = graph.total_self_loop_weight();

    const auto edges = static_cast<Weight>(out.edges.size());
    out.binary_local = fraction(static_cast<Weight>(local_edges), edges, 1.0);
    out.binary_nonlocal = 1.0 - out.binary_local;

    const Weight with_self = out.local_weight + out.nonlocal_weight + out.self_loop_weight;
    out.weighted_local = fraction(out.local_weight + out.self_loop_weight, with_self, 1.0);
    out.weighted_nonlocal = 1.0 - out.weighted_local;

    const Weight without_self = out.local_weight + out.nonlocal_weight;
    out.weighted_local_no_self = fraction(out.local_weight, without_self, 1.0);
    out.weighted_nonlocal_no_self = 1.0 - out.weighted_local_no_self;
    return out;
}

CommunityGraph community_graph(const CityGraph& graph, const Partition& partition) {
    require_cover(graph.node_count(), partition, "community_graph");
    const std::size_t k = partition.community_count;
    CommunityGraph out;
    out.sizes.assign(k, 0);
    std::vector<Weight> loops(k, 0);
    std::vector<double> lat(k, 0.0), lon(k, 0.0);
    for (NodeId v = 0; v < graph.node_count(); ++v) {
        const auto c = partition.membership[v];
        ++out.sizes[c];
        loops[c] += graph.graph.self_loop(v);
        lat[c] += graph.nodes[v].centroid.latitude;
        lon[c] += graph.nodes[v].centroid.longitude;
    }
    std::vector<Edge> edges;
    for (const Edge& e : graph.graph.edges()) {
        edges.push_back({partition.membership[e.src], partition.membership[e.dst], e.weight});
    }
    // from_edges folds same-community edges into the self-loop array.
    out.graph = WeightedGraph::from_edges(k, edges, loops);
    out.layout.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        if (out.sizes[c] > 0) {
            const auto n = static_cast<double>(out.sizes[c]);
            out.layout[c] = {lat[c] / n, lon[c] / n};
        }
    }
    return out;
}

HubReport nonlocal_hubs(const CityGraph& graph, const Partition& partition, std::size_t threshold) {
    if (threshold < 1) throw ParameterError("nonlocal_hubs: threshold must be at least 1");
    require_cover(graph.node_count(), partition, "nonlocal_hubs");
    HubReport out;
    out.nonlocal_neighbors.assign(graph.node_count(), 0);
    for (NodeId v = 0; v < graph.node_count(); ++v) {
        for (NodeId w : graph.graph.neighbors(v)) {
            if (partition.membership[w] != partition.membership[v]) ++out.nonlocal_neighbors[v];
        }
        if (out.nonlocal_neighbors[v] >= threshold) out.hubs.push_back(v);
    }
    out.subgraph = induced_city_subgraph(graph, out.hubs);
    std::vector<Edge> crossing;
    for (const Edge& e : out.subgraph.graph.edges()) {
        if (partition.membership[out.hubs[e.src]] != partition.membership[out.hubs[e.dst]]) {
            crossing.push_back(e);
        }
    }
    out.subgraph.graph = WeightedGraph::from_edges(out.hubs.size(), crossing);
    return out;
}

CompositionTable community_composition(const Partition& partition,
                                       const std::vector<std::string>& country_of) {
    if (country_of.size() != partition.membership.size()) {
        throw ContractViolation("community_composition: metadata does not cover the partition");
    }
    CompositionTable table;
    table.communities.resize(partition.community_count);
    for (std::size_t v = 0; v < country_of.size(); ++v) {
        auto& c = table.communities.at(partition.membership[v]);
        ++c.countries[country_of[v]];
        ++c.size;
    }
    for (auto& c : table.communities) {
        std::size_t best = 0;
        for (const auto& [country, count] : c.countries) {
            if (count > best) {
                best = count;
                c.dominant = country;
            }
            const double p = static_cast<double>(count) / static_cast<double>(c.size);
            c.entropy_bits -= p * std::log2(p);
        }
        if (c.entropy_bits < 0.0) c.entropy_bits = 0.0;  // -0.0 from a single country
    }
    return table;
}

void write_tie_classification(std::ostream& out, const CityGraph& graph, const TieClassification& ties) {
    out << "edge,src,dst,weight,label\n";
    for (std::size_t i = 0; i < ties.edges.size(); ++i) {
        const Edge& e = ties.edges[i];
        out << i << ',' << graph.nodes[e.src].cluster_id << ',' << graph.nodes[e.dst].cluster_id << ','
            << e.weight << ',' << (ties.labels[i] == TieLabel::Local ? "local" : "nonlocal") << '\n';
    }
}

void write_community_edges(std::ostream& out, const CommunityGraph& cg) {
    out << "src_community,dst_community,weight\n";
    for (const Edge& e : cg.graph.edges()) out << e.src << ',' << e.dst << ',' << e.weight << '\n';
}

void write_community_self_loops(std::ostream& out, const CommunityGraph& cg) {
    out << "community,self_weight\n";
    for (NodeId c = 0; c < cg.graph.node_count(); ++c) {
        out << c << ',' << cg.graph.self_loop(c) << '\n';
    }
}

void write_hubs(std::ostream& out, const CityGraph& graph, const HubReport& hubs) {
    out << "city,nonlocal_neighbor_count\n";
    for (NodeId v = 0; v < graph.node_count(); ++v) {
        out << graph.nodes[v].cluster_id << ',' << hubs.nonlocal_neighbors[v] << '\n';
    }
}

void write_composition(std::ostream& out, const CompositionTable& table) {
    out << "community,country,count\n";
    for (std::size_t c = 0; c < table.communities.size(); ++c) {
        for (const auto& [country, count] : table.communities[c].countries) {
            csv::write_row(out, {std::to_string(c), country, std::to_string(count)});
        }
    }
}

std::string cities_geojson(const CityGraph& graph, const Partition& partition) {
    require_cover(graph.node_count(), partition, "cities_geojson");
    nlohmann::json features = nlohmann::json::array();
    for (NodeId v = 0; v < graph.node_count(); ++v) {
        const auto& n = graph.nodes[v];
        features.push_back({
            {"type", "Feature"},
            {"geometry", {{"type", "Point"}, {"coordinates", {n.centroid.longitude, n.centroid.latitude}}}},
            {"properties",
             {{"cluster_id", n.cluster_id},
              {"label", n.label},
              {"country", n.country},
              {"community", partition.membership[v]},
              {"self_weight", graph.graph.self_loop(v)}}},
        });
    }
    return nlohmann::json{{"type", "FeatureCollection"}, {"features", features}}.dump();
}

std::string community_arcs_geojson(const CommunityGraph& cg) {
    nlohmann::json features = nlohmann::json::array();
    for (const Edge& e : cg.graph.edges()) {
        const auto& a = cg.layout[e.src];
        const auto& b = cg.layout[e.dst];
        features.push_back({
            {"type", "Feature"},
            {"geometry",
             {{"type", "LineString"},
              {"coordinates", {{a.longitude, a.latitude}, {b.longitude, b.latitude}}}}},
            {"properties", {{"src", e.src}, {"dst", e.dst}, {"weight", e.weight}}},
        });
    }
    return nlohmann::json{{"type", "FeatureCollection"}, {"features", features}}.dump();
}

}  // namespace interlock
