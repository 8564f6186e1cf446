#include "interlock/interlock_graph.hpp"

#include "interlock/csv.hpp"
#include "interlock/error.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

namespace interlock {

namespace {

std::uint64_t pair_key(NodeId a, NodeId b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Drops nodes without edges or self-loops and renumbers the rest.
FirmGraph drop_isolated(FirmGraph g) {
    std::vector<NodeId> keep;
    for (NodeId v = 0; v < g.node_count(); ++v) {
        if (g.graph.degree(v) > 0 || g.graph.self_loop(v) > 0) keep.push_back(v);
    }
    if (keep.size() == g.node_count()) return g;
    FirmGraph out;
    out.firm_ids.reserve(keep.size());
    for (NodeId v : keep) out.firm_ids.push_back(std::move(g.firm_ids[v]));
    out.graph = g.graph.induced_subgraph(keep);
    return out;
}

template <typename T>
void put_le(std::ostream& out, T value) {
    std::array<char, sizeof(T)> bytes{};
    auto u = static_cast<std::make_unsigned_t<T>>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<char>(u & 0xFF);
        u = static_cast<decltype(u)>(u >> 8);
    }
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw SchemaError("firm graph cache: truncated");
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<decltype(u)>((u << 8) | bytes[i]);
    return static_cast<T>(u);
}

constexpr std::array<char, 8> kBinaryMagic = {'I', 'L', 'F', 'G', 'R', 'P', 'H', '1'};

}  // namespace

std::optional<NodeId> FirmGraph::index_of(const std::string& firm_id) const {
    auto it = std::lower_bound(firm_ids.begin(), firm_ids.end(), firm_id);
    if (it == firm_ids.end() || *it != firm_id) return std::nullopt;
    return static_cast<NodeId>(it - firm_ids.begin());
}

FirmGraph project_interlocks(const PositionTable& positions, ProjectionOptions options) {
    const auto& records = positions.records();

    FirmGraph out;
    out.firm_ids.reserve(records.size());
    for (const auto& r : records) out.firm_ids.push_back(r.firm_id);
    std::sort(out.firm_ids.begin(), out.firm_ids.end());
    out.firm_ids.erase(std::unique(out.firm_ids.begin(), out.firm_ids.end()), out.firm_ids.end());

    // Records are grouped by person; collect each person's distinct firms and
    // expand the clique.
    std::vector<std::uint64_t> pairs;
    std::vector<NodeId> firms;
    for (std::size_t i = 0; i < records.size();) {
        std::size_t j = i;
        firms.clear();
        while (j < records.size() && records[j].person_id == records[i].person_id) {
            firms.push_back(*out.index_of(records[j].firm_id));
            ++j;
        }
        std::sort(firms.begin(), firms.end());
        firms.erase(std::unique(firms.begin(), firms.end()), firms.end());
        for (std::size_t a = 0; a < firms.size(); ++a) {
            for (std::size_t b = a + 1; b < firms.size(); ++b) {
                pairs.push_back(pair_key(firms[a], firms[b]));
            }
        }
        i = j;
    }
    std::sort(pairs.begin(), pairs.end());

    std::vector<Edge> edges;
    for (std::size_t i = 0; i < pairs.size();) {
        std::size_t j = i;
        while (j < pairs.size() && pairs[j] == pairs[i]) ++j;
        edges.push_back({static_cast<NodeId>(pairs[i] >> 32),
                         static_cast<NodeId>(pairs[i] & 0xFFFFFFFFu),
                         static_cast<Weight>(j - i)});
        i = j;
    }
    std::vector<std::uint64_t>().swap(pairs);
    out.graph = WeightedGraph::from_edges(out.firm_ids.size(), edges);
    return options.keep_isolated ? out : drop_isolated(std::move(out));
}

FirmGraph remove_ownership_ties(const FirmGraph& graph, const std::vector<OwnershipLink>& ownership,
                                double threshold, OwnershipFilterReport* report) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ParameterError("ownership threshold must lie in [0,1]");
    }
    OwnershipFilterReport local;
    std::unordered_set<std::uint64_t> banned;
    for (const auto& link : ownership) {
        ++local.links_seen;
        const auto parent = graph.index_of(link.parent_firm_id);
        const auto child = graph.index_of(link.child_firm_id);
        if (!parent || !child) {
            ++local.links_unknown_firm;
            continue;
        }
        if (link.fraction > threshold && *parent != *child) {
            ++local.links_above_threshold;
            banned.insert(pair_key(*parent, *child));
        }
    }

    std::vector<Edge> kept;
    for (const Edge& e : graph.graph.edges()) {
        if (banned.contains(pair_key(e.src, e.dst))) {
            ++local.edges_removed;
            local.weight_removed += e.weight;
        } else {
            kept.push_back(e);
        }
    }
    FirmGraph out;
    out.firm_ids = graph.firm_ids;
    std::vector<Weight> loops(graph.graph.self_loops().begin(), graph.graph.self_loops().end());
    out.graph = WeightedGraph::from_edges(graph.node_count(), kept, loops);
    if (report) *report = local;
    return out;
}

ComponentResult connected_components(const FirmGraph& graph) {
    auto labeling = label_components(graph.graph);
    ComponentResult out;
    out.labels = std::move(labeling.labels);
    out.stats.component_count = labeling.sizes.size();
    out.stats.sizes = labeling.sizes;
    if (!labeling.sizes.empty()) {
        auto sorted = labeling.sizes;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        out.stats.giant_size = sorted[0];
        out.stats.second_size = sorted.size() > 1 ? sorted[1] : 0;
        const std::size_t others = sorted.size() - 1;
        if (others > 0) {
            const auto small = static_cast<std::size_t>(
                std::count_if(sorted.begin() + 1, sorted.end(), [](std::size_t s) { return s < 20; }));
            out.stats.fraction_small = static_cast<double>(small) / static_cast<double>(others);
        }
    }
    return out;
}

FirmGraph giant_component(const FirmGraph& graph) {
    if (graph.node_count() == 0) throw ContractViolation("giant_component: empty graph");
    const auto nodes = giant_component_nodes(graph.graph);
    FirmGraph out;
    out.firm_ids.reserve(nodes.size());
    for (NodeId v : nodes) out.firm_ids.push_back(graph.firm_ids[v]);
    out.graph = graph.graph.induced_subgraph(nodes);
    return out;
}

void write_firm_edges(std::ostream& out, const FirmGraph& graph) {
    out << "src_id,dst_id,weight\n";
    for (const Edge& e : graph.graph.edges()) {
        // Node order is lexicographic, so src < dst holds for ids as well.
        csv::write_row(out, {graph.firm_ids[e.src], graph.firm_ids[e.dst], std::to_string(e.weight)});
    }
}

FirmGraph read_firm_edges(std::istream& in) {
    csv::Reader reader(in);
    csv::expect_header(reader, {"src_id", "dst_id", "weight"}, "firm graph");
    struct Raw {
        std::string src, dst;
        Weight weight;
    };
    std::vector<Raw> raw;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        const auto w = fields.size() == 3 ? csv::parse_int(fields[2]) : std::nullopt;
        if (!w || *w <= 0 || fields[0] == fields[1]) {
            throw SchemaError("firm graph: bad row at line " + std::to_string(reader.line()));
        }
        raw.push_back({fields[0], fields[1], *w});
    }
    FirmGraph out;
    for (const auto& r : raw) {
        out.firm_ids.push_back(r.src);
        out.firm_ids.push_back(r.dst);
    }
    std::sort(out.firm_ids.begin(), out.firm_ids.end());
    out.firm_ids.erase(std::unique(out.firm_ids.begin(), out.firm_ids.end()), out.firm_ids.end());
    std::vector<Edge> edges;
    edges.reserve(raw.size());
    for (const auto& r : raw) edges.push_back({*out.index_of(r.src), *out.index_of(r.dst), r.weight});
    out.graph = WeightedGraph::from_edges(out.firm_ids.size(), edges);
    return out;
}

void write_firm_graph_binary(std::ostream& out, const FirmGraph& graph) {
    out.write(kBinaryMagic.data(), kBinaryMagic.size());
    put_le<std::uint64_t>(out, graph.node_count());
    for (const auto& id : graph.firm_ids) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    const auto edges = graph.graph.edges();
    put_le<std::uint64_t>(out, edges.size());
    for (const Edge& e : edges) {
        put_le<std::uint32_t>(out, e.src);
        put_le<std::uint32_t>(out, e.dst);
        put_le<std::int64_t>(out, e.weight);
    }
}

FirmGraph read_firm_graph_binary(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kBinaryMagic) throw SchemaError("firm graph cache: bad magic");
    FirmGraph out;
    const auto n = get_le<std::uint64_t>(in);
    out.firm_ids.resize(n);
    for (auto& id : out.firm_ids) {
        const auto len = get_le<std::uint32_t>(in);
        id.resize(len);
        in.read(id.data(), len);
        if (!in) throw SchemaError("firm graph cache: truncated");
    }
    if (!std::is_sorted(out.firm_ids.begin(), out.firm_ids.end())) {
        throw SchemaError("firm graph cache: ids not sorted");
    }
    const auto m = get_le<std::uint64_t>(in);
    std::vector<Edge> edges(m);
    for (auto& e : edges) {
        e.src = get_le<std::uint32_t>(in);
        e.dst = get_le<std::uint32_t>(in);
        e.weight = get_le<std::int64_t>(in);
    }
    out.graph = WeightedGraph::from_edges(n, edges);
    return out;
}

}  // namespace interlock
