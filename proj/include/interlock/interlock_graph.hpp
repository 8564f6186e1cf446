#pragma once

#include "interlock/graph.hpp"
#include "interlock/ingest.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace interlock {

// Firm-by-firm interlock graph. Node i is the firm `firm_ids[i]`; ids are
// sorted lexicographically, so the smallest node index is the smallest id.
struct FirmGraph {
    std::vector<std::string> firm_ids;
    WeightedGraph graph;

    std::size_t node_count() const noexcept { return firm_ids.size(); }
    std::optional<NodeId> index_of(const std::string& firm_id) const;

    friend bool operator==(const FirmGraph&, const FirmGraph&) = default;
};

struct ProjectionOptions {
    bool keep_isolated = false;
};

// One-mode projection: weight(A,B) = number of distinct persons holding
// positions at both A and B.
FirmGraph project_interlocks(const PositionTable& positions, ProjectionOptions options = {});

struct OwnershipFilterReport {
    std::size_t links_seen = 0;
    std::size_t links_above_threshold = 0;
    std::size_t links_unknown_firm = 0;
    std::size_t edges_removed = 0;
    Weight weight_removed = 0;
};

inline constexpr double kDefaultOwnershipThreshold = 0.5;

// Deletes every edge whose endpoints are directly linked, in either direction,
// by ownership strictly above `threshold`. Node set is unchanged.
FirmGraph remove_ownership_ties(const FirmGraph& graph, const std::vector<OwnershipLink>& ownership,
                                double threshold = kDefaultOwnershipThreshold,
                                OwnershipFilterReport* report = nullptr);

struct ComponentStats {
    std::size_t component_count = 0;
    std::vector<std::size_t> sizes;  // indexed by component label
    std::size_t giant_size = 0;
    std::size_t second_size = 0;
    // Share of the non-giant components with fewer than 20 nodes (0 when the
    // giant is the only component).
    double fraction_small = 0.0;
};

struct ComponentResult {
    ComponentStats stats;
    std::vector<std::uint32_t> labels;  // per node
};

ComponentResult connected_components(const FirmGraph& graph);

// Induced subgraph on the largest component; equal sizes resolve to the
// component holding the smallest firm id. Throws ContractViolation on an
// empty graph.
FirmGraph giant_component(const FirmGraph& graph);

// `src_id,dst_id,weight`, one line per edge with src_id < dst_id.
void write_firm_edges(std::ostream& out, const FirmGraph& graph);
// Reads the edge list back. Isolated nodes are not representable.
FirmGraph read_firm_edges(std::istream& in);

// Compact binary cache: node ids and CSR edges, little-endian.
void write_firm_graph_binary(std::ostream& out, const FirmGraph& graph);
FirmGraph read_firm_graph_binary(std::istream& in);

}  // namespace interlock
