#include "interlock/graph.hpp"

#include "interlock/error.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace interlock {

WeightedGraph WeightedGraph::from_edges(std::size_t node_count, std::span<const Edge> edges,
                                        std::span<const Weight> self_loops) {
    if (!self_loops.empty() && self_loops.size() != node_count) {
        throw ContractViolation("self-loop array size does not match node count");
    }

    WeightedGraph g;
    g.self_loops_.assign(node_count, 0);
    for (std::size_t v = 0; v < self_loops.size(); ++v) {
        if (self_loops[v] < 0) throw ContractViolation("negative self-loop weight");
        g.self_loops_[v] = self_loops[v];
    }

    std::vector<std::size_t> counts(node_count + 1, 0);
    for (const Edge& e : edges) {
        if (e.src >= node_count || e.dst >= node_count) {
            throw ContractViolation("edge endpoint out of range: " + std::to_string(e.src) + "-" +
                                    std::to_string(e.dst));
        }
        if (e.weight < 0) throw ContractViolation("negative edge weight");
        if (e.weight == 0) continue;
        if (e.src == e.dst) {
            g.self_loops_[e.src] += e.weight;
            continue;
        }
        ++counts[e.src + 1];
        ++counts[e.dst + 1];
    }
    std::partial_sum(counts.begin(), counts.end(), counts.begin());

    // Scatter both directions, then sort and merge duplicates per row.
    std::vector<NodeId> raw_targets(counts.back());
    std::vector<Weight> raw_weights(counts.back());
    std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
    for (const Edge& e : edges) {
        if (e.weight == 0 || e.src == e.dst) continue;
        raw_targets[cursor[e.src]] = e.dst;
        raw_weights[cursor[e.src]++] = e.weight;
        raw_targets[cursor[e.dst]] = e.src;
        raw_weights[cursor[e.dst]++] = e.weight;
    }

    g.offsets_.assign(node_count + 1, 0);
    g.targets_.reserve(raw_targets.size());
    g.weights_.reserve(raw_targets.size());
    std::vector<std::pair<NodeId, Weight>> row;
    for (std::size_t v = 0; v < node_count; ++v) {
        row.clear();
        for (std::size_t i = counts[v]; i < counts[v + 1]; ++i) {
            row.emplace_back(raw_targets[i], raw_weights[i]);
        }
        std::sort(row.begin(), row.end());
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (!g.targets_.empty() && g.targets_.size() > g.offsets_[v] &&
                g.targets_.back() == row[i].first) {
                g.weights_.back() += row[i].second;
            } else {
                g.targets_.push_back(row[i].first);
                g.weights_.push_back(row[i].second);
            }
        }
        g.offsets_[v + 1] = g.targets_.size();
    }

    for (std::size_t v = 0; v < node_count; ++v) {
        for (std::size_t i = g.offsets_[v]; i < g.offsets_[v + 1]; ++i) {
            if (g.targets_[i] > v) g.edge_total_ += g.weights_[i];
        }
        g.self_loop_total_ += g.self_loops_[v];
    }
    return g;
}

Weight WeightedGraph::edge_weight(NodeId u, NodeId v) const noexcept {
    if (u >= node_count() || v >= node_count()) return 0;
    if (u == v) return self_loop(u);
    auto nbrs = neighbors(u);
    auto it = std::lower_bound(nbrs.begin(), nbrs.end(), v);
    if (it == nbrs.end() || *it != v) return 0;
    return weights_[offsets_[u] + static_cast<std::size_t>(it - nbrs.begin())];
}

Weight WeightedGraph::weighted_degree(NodeId v) const noexcept {
    Weight total = 0;
    for (Weight w : neighbor_weights(v)) total += w;
    return total;
}

std::vector<Edge> WeightedGraph::edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count());
    for (NodeId v = 0; v < node_count(); ++v) {
        for (std::size_t i = offsets_[v]; i < offsets_[v + 1]; ++i) {
            if (targets_[i] > v) out.push_back({v, targets_[i], weights_[i]});
        }
    }
    return out;
}

WeightedGraph WeightedGraph::without_self_loops() const {
    WeightedGraph g = *this;
    std::fill(g.self_loops_.begin(), g.self_loops_.end(), 0);
    g.self_loop_total_ = 0;
    return g;
}

WeightedGraph WeightedGraph::induced_subgraph(std::span<const NodeId> nodes) const {
    constexpr NodeId kAbsent = static_cast<NodeId>(-1);
    std::vector<NodeId> remap(node_count(), kAbsent);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i] >= node_count() || (i > 0 && nodes[i] <= nodes[i - 1])) {
            throw ContractViolation("induced_subgraph: node list must be sorted, unique, in range");
        }
        remap[nodes[i]] = static_cast<NodeId>(i);
    }
    std::vector<Edge> edges;
    std::vector<Weight> loops(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const NodeId v = nodes[i];
        loops[i] = self_loop(v);
        auto nbrs = neighbors(v);
        auto ws = neighbor_weights(v);
        for (std::size_t j = 0; j < nbrs.size(); ++j) {
            if (nbrs[j] > v && remap[nbrs[j]] != kAbsent) {
                edges.push_back({static_cast<NodeId>(i), remap[nbrs[j]], ws[j]});
            }
        }
    }
    return from_edges(nodes.size(), edges, loops);
}

std::uint32_t ComponentLabeling::giant_label() const noexcept {
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < sizes.size(); ++c) {
        if (sizes[c] > sizes[best]) best = c;
    }
    return best;
}

ComponentLabeling label_components(const WeightedGraph& graph) {
    constexpr std::uint32_t kUnset = static_cast<std::uint32_t>(-1);
    const std::size_t n = graph.node_count();
    ComponentLabeling out;
    out.labels.assign(n, kUnset);
    std::vector<NodeId> queue;
    queue.reserve(n);
    for (NodeId start = 0; start < n; ++start) {
        if (out.labels[start] != kUnset) continue;
        const auto label = static_cast<std::uint32_t>(out.sizes.size());
        queue.clear();
        queue.push_back(start);
        out.labels[start] = label;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            for (NodeId w : graph.neighbors(queue[head])) {
                if (out.labels[w] == kUnset) {
                    out.labels[w] = label;
                    queue.push_back(w);
                }
            }
        }
        out.sizes.push_back(queue.size());
    }
    return out;
}

bool is_connected(const WeightedGraph& graph) {
    return graph.node_count() <= 1 || label_components(graph).count() == 1;
}

std::vector<NodeId> giant_component_nodes(const WeightedGraph& graph) {
    if (graph.node_count() == 0) return {};
    const auto labeling = label_components(graph);
    const auto giant = labeling.giant_label();
    std::vector<NodeId> nodes;
    nodes.reserve(labeling.sizes[giant]);
    for (NodeId v = 0; v < graph.node_count(); ++v) {
        if (labeling.labels[v] == giant) nodes.push_back(v);
    }
    return nodes;
}

std::vector<std::int32_t> bfs_distances(const WeightedGraph& graph, NodeId source) {
    std::vector<std::int32_t> dist(graph.node_count(), -1);
    std::vector<NodeId> queue;
    queue.reserve(graph.node_count());
    dist[source] = 0;
    queue.push_back(source);
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const NodeId v = queue[head];
        for (NodeId w : graph.neighbors(v)) {
            if (dist[w] < 0) {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    return dist;
}

}  // namespace interlock
