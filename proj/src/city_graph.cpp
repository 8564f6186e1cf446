#include "interlock/city_graph.hpp"

#include "interlock/csv.hpp"
#include "interlock/error.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

namespace interlock {

namespace {

constexpr std::uint32_t kNoCluster = static_cast<std::uint32_t>(-1);

CityNode node_from_cluster(const CityCluster& c) {
    return {c.cluster_id, c.label(), c.country, c.centroid};
}

}  // namespace

std::optional<NodeId> CityGraph::index_of_cluster(std::uint32_t cluster_id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), cluster_id,
                               [](const CityNode& n, std::uint32_t id) { return n.cluster_id < id; });
    if (it == nodes.end() || it->cluster_id != cluster_id) return std::nullopt;
    return static_cast<NodeId>(it - nodes.begin());
}

CityGraph aggregate_to_cities(const FirmGraph& firm_graph, const GeoClustering& clustering,
                              AggregationReport* report) {
    const std::size_t cluster_count = clustering.clusters.size();
    for (std::size_t c = 0; c < cluster_count; ++c) {
        if (clustering.clusters[c].cluster_id != c) {
            throw ContractViolation("aggregate_to_cities: clusters must be indexed by cluster_id");
        }
    }

    AggregationReport local;
    local.firms_in_graph = firm_graph.node_count();
    std::vector<std::uint32_t> cluster_of(firm_graph.node_count(), kNoCluster);
    for (NodeId v = 0; v < firm_graph.node_count(); ++v) {
        if (auto c = clustering.assignment.cluster_of(firm_graph.firm_ids[v])) {
            if (*c >= cluster_count) throw ContractViolation("assignment refers to unknown cluster");
            cluster_of[v] = *c;
        } else {
            ++local.firms_unassigned;
        }
    }

    std::vector<Weight> self(cluster_count, 0);
    std::unordered_map<std::uint64_t, Weight> cross;
    for (const Edge& e : firm_graph.graph.edges()) {
        std::uint32_t a = cluster_of[e.src];
        std::uint32_t b = cluster_of[e.dst];
        if (a == kNoCluster || b == kNoCluster) {
            ++local.edges_dropped;
            local.weight_dropped += e.weight;
            continue;
        }
        local.weight_kept += e.weight;
        if (a == b) {
            self[a] += e.weight;
        } else {
            if (a > b) std::swap(a, b);
            cross[(static_cast<std::uint64_t>(a) << 32) | b] += e.weight;
        }
    }
    // Firm-level self-loops never occur after projection but are carried if present.
    for (NodeId v = 0; v < firm_graph.node_count(); ++v) {
        if (firm_graph.graph.self_loop(v) > 0 && cluster_of[v] != kNoCluster) {
            self[cluster_of[v]] += firm_graph.graph.self_loop(v);
            local.weight_kept += firm_graph.graph.self_loop(v);
        }
    }

    std::vector<bool> present(cluster_count, false);
    for (std::uint32_t c = 0; c < cluster_count; ++c) present[c] = self[c] > 0;
    for (const auto& [key, w] : cross) {
        present[key >> 32] = true;
        present[key & 0xFFFFFFFFu] = true;
    }

    CityGraph out;
    std::vector<NodeId> index(cluster_count, 0);
    std::vector<Weight> loops;
    for (std::uint32_t c = 0; c < cluster_count; ++c) {
        if (!present[c]) continue;
        index[c] = static_cast<NodeId>(out.nodes.size());
        out.nodes.push_back(node_from_cluster(clustering.clusters[c]));
        loops.push_back(self[c]);
    }
    std::vector<Edge> edges;
    edges.reserve(cross.size());
    for (const auto& [key, w] : cross) {
        edges.push_back({index[key >> 32], index[key & 0xFFFFFFFFu], w});
    }
    out.graph = WeightedGraph::from_edges(out.nodes.size(), edges, loops);
    if (report) *report = local;
    return out;
}

CityGraph induced_city_subgraph(const CityGraph& graph, std::span<const NodeId> nodes) {
    CityGraph out;
    out.nodes.reserve(nodes.size());
    for (NodeId v : nodes) out.nodes.push_back(graph.nodes.at(v));
    out.graph = graph.graph.induced_subgraph(nodes);
    return out;
}

CityGraph strip_self_loops(const CityGraph& graph) {
    std::vector<NodeId> keep;
    for (NodeId v = 0; v < graph.node_count(); ++v) {
        if (graph.graph.degree(v) > 0) keep.push_back(v);
    }
    CityGraph out = induced_city_subgraph(graph, keep);
    out.graph = out.graph.without_self_loops();
    return out;
}

CityGraph giant_city_component(const CityGraph& graph, bool* was_connected) {
    if (graph.node_count() == 0) {
        if (was_connected) *was_connected = true;
        return graph;
    }
    const auto nodes = giant_component_nodes(graph.graph);
    if (was_connected) *was_connected = nodes.size() == graph.node_count();
    if (nodes.size() == graph.node_count()) return graph;
    return induced_city_subgraph(graph, nodes);
}

void write_city_edges(std::ostream& out, const CityGraph& graph) {
    out << "src_cluster,dst_cluster,weight\n";
    for (const Edge& e : graph.graph.edges()) {
        out << graph.nodes[e.src].cluster_id << ',' << graph.nodes[e.dst].cluster_id << ','
            << e.weight << '\n';
    }
}

void write_city_self_loops(std::ostream& out, const CityGraph& graph) {
    out << "cluster,self_weight\n";
    for (NodeId v = 0; v < graph.node_count(); ++v) {
        if (graph.graph.self_loop(v) > 0) {
            out << graph.nodes[v].cluster_id << ',' << graph.graph.self_loop(v) << '\n';
        }
    }
}

void write_city_nodes(std::ostream& out, const CityGraph& graph) {
    out << "cluster_id,label,country,lat,lon\n";
    for (const auto& n : graph.nodes) {
        csv::write_row(out, {std::to_string(n.cluster_id), n.label, n.country,
                             csv::format_double(n.centroid.latitude),
                             csv::format_double(n.centroid.longitude)});
    }
}

CityGraph read_city_graph(std::istream& nodes_in, std::istream& edges_in, std::istream& loops_in) {
    CityGraph out;
    std::vector<std::string> f;

    csv::Reader nodes(nodes_in);
    csv::expect_header(nodes, {"cluster_id", "label", "country", "lat", "lon"}, "city nodes");
    while (nodes.next(f)) {
        if (f.size() == 1 && f[0].empty()) continue;
        auto bad_row = [&] { return SchemaError("city nodes: bad row at line " + std::to_string(nodes.line())); };
        if (f.size() != 5) throw bad_row();
        const auto id = csv::parse_int(f[0]);
        const auto lat = csv::parse_double(f[3]);
        const auto lon = csv::parse_double(f[4]);
        if (!id || *id < 0 || !lat || !lon) throw bad_row();
        out.nodes.push_back({static_cast<std::uint32_t>(*id), f[1], f[2], {*lat, *lon}});
    }
    if (!std::is_sorted(out.nodes.begin(), out.nodes.end(),
                        [](const CityNode& a, const CityNode& b) { return a.cluster_id < b.cluster_id; })) {
        throw SchemaError("city nodes: cluster ids must be ascending");
    }

    auto node_of = [&](std::int64_t cluster, const char* what) {
        auto idx = cluster >= 0 ? out.index_of_cluster(static_cast<std::uint32_t>(cluster)) : std::nullopt;
        if (!idx) throw SchemaError(std::string(what) + ": unknown cluster " + std::to_string(cluster));
        return *idx;
    };

    std::vector<Edge> edges;
    csv::Reader er(edges_in);
    csv::expect_header(er, {"src_cluster", "dst_cluster", "weight"}, "city edges");
    while (er.next(f)) {
        if (f.size() == 1 && f[0].empty()) continue;
        auto bad_row = [&] { return SchemaError("city edges: bad row at line " + std::to_string(er.line())); };
        if (f.size() != 3) throw bad_row();
        const auto a = csv::parse_int(f[0]);
        const auto b = csv::parse_int(f[1]);
        const auto w = csv::parse_int(f[2]);
        if (!a || !b || !w || *w <= 0) throw bad_row();
        edges.push_back({node_of(*a, "city edges"), node_of(*b, "city edges"), *w});
    }

    std::vector<Weight> loops(out.nodes.size(), 0);
    csv::Reader lr(loops_in);
    csv::expect_header(lr, {"cluster", "self_weight"}, "city self-loops");
    while (lr.next(f)) {
        if (f.size() == 1 && f[0].empty()) continue;
        const auto c = f.size() == 2 ? csv::parse_int(f[0]) : std::nullopt;
        const auto w = f.size() == 2 ? csv::parse_int(f[1]) : std::nullopt;
        if (!c || !w || *w < 0) {
            throw SchemaError("city self-loops: bad row at line " + std::to_string(lr.line()));
        }
        loops[node_of(*c, "city self-loops")] += *w;
    }
    out.graph = WeightedGraph::from_edges(out.nodes.size(), edges, loops);
    return out;
}

}  // namespace interlock
