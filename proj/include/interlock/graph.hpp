#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace interlock {

using NodeId = std::uint32_t;
using Weight = std::int64_t;

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    Weight weight = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

// Undirected weighted graph in compressed sparse row form. Every undirected
// edge is stored in both adjacency lists; self-loops live in a separate
// per-node array so that path-based algorithms never see them. Immutable
// once built.
class WeightedGraph {
public:
    WeightedGraph() = default;

    // Builds from an edge list. Parallel edges are merged by summing weights,
    // src == dst entries are folded into the self-loop array, and zero-weight
    // entries are dropped. Throws ContractViolation on out-of-range ids or
    // negative weights.
    static WeightedGraph from_edges(std::size_t node_count, std::span<const Edge> edges,
                                    std::span<const Weight> self_loops = {});

    std::size_t node_count() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    // Distinct undirected edges, self-loops excluded.
    std::size_t edge_count() const noexcept { return targets_.size() / 2; }

    std::span<const NodeId> neighbors(NodeId v) const noexcept {
        return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
    }
    std::span<const Weight> neighbor_weights(NodeId v) const noexcept {
        return {weights_.data() + offsets_[v], weights_.data() + offsets_[v + 1]};
    }
    std::size_t degree(NodeId v) const noexcept { return offsets_[v + 1] - offsets_[v]; }

    Weight self_loop(NodeId v) const noexcept { return self_loops_.empty() ? 0 : self_loops_[v]; }
    std::span<const Weight> self_loops() const noexcept { return self_loops_; }
    bool has_self_loops() const noexcept { return self_loop_total_ != 0; }

    // Weight of edge (u,v), 0 if absent. Binary search over u's sorted list.
    Weight edge_weight(NodeId u, NodeId v) const noexcept;

    // Sum over distinct edges, each counted once.
    Weight total_edge_weight() const noexcept { return edge_total_; }
    Weight total_self_loop_weight() const noexcept { return self_loop_total_; }
    Weight total_weight() const noexcept { return edge_total_ + self_loop_total_; }

    // Sum of incident edge weights (self-loops excluded).
    Weight weighted_degree(NodeId v) const noexcept;

    // Each undirected edge once with src < dst, ordered by (src, dst).
    std::vector<Edge> edges() const;

    WeightedGraph without_self_loops() const;

    // Subgraph induced by `nodes` (which must be sorted and unique), nodes
    // renumbered by their position in `nodes`.
    WeightedGraph induced_subgraph(std::span<const NodeId> nodes) const;

    friend bool operator==(const WeightedGraph&, const WeightedGraph&) = default;

private:
    std::vector<std::size_t> offsets_;
    std::vector<NodeId> targets_;
    std::vector<Weight> weights_;
    std::vector<Weight> self_loops_;
    Weight edge_total_ = 0;
    Weight self_loop_total_ = 0;
};

// Connected components by BFS. Labels are numbered in order of the smallest
// node id they contain, so label 0 always holds node 0.
struct ComponentLabeling {
    std::vector<std::uint32_t> labels;
    std::vector<std::size_t> sizes;  // indexed by label

    std::size_t count() const noexcept { return sizes.size(); }
    // Largest component; ties go to the lowest label, i.e. smallest min node id.
    std::uint32_t giant_label() const noexcept;
};

ComponentLabeling label_components(const WeightedGraph& graph);

bool is_connected(const WeightedGraph& graph);

// Sorted node ids of the largest component (tie-break as in giant_label).
std::vector<NodeId> giant_component_nodes(const WeightedGraph& graph);

// Hop distances from `source`; unreachable nodes get -1.
std::vector<std::int32_t> bfs_distances(const WeightedGraph& graph, NodeId source);

}  // namespace interlock
