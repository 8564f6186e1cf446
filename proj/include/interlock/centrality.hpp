#pragma once

#include "interlock/city_graph.hpp"
#include "interlock/graph.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace interlock {

// All path-based measures below use unweighted hops; self-loops are ignored.

struct CentralityReport {
    std::vector<std::size_t> degree;        // distinct neighbors
    std::vector<Weight> weighted_degree;    // sum of incident edge weights
    std::vector<double> betweenness;        // empty until computed

    // Node ids by decreasing value; ties by ascending node id.
    std::vector<NodeId> degree_ranking() const;
    std::vector<NodeId> weighted_degree_ranking() const;
    std::vector<NodeId> betweenness_ranking() const;
};

CentralityReport degree_centrality(const WeightedGraph& graph);

// Brandes accumulation over all sources. Unnormalized, each unordered pair
// counted once, endpoints excluded. Deterministic for any thread count.
std::vector<double> betweenness(const WeightedGraph& graph);

enum class EccentricityStrategy {
    Alternating,  // alternate largest upper bound and smallest lower bound
    LargestUpper,
    SmallestLower,
    // Cycles largest upper, smallest lower, and the uncovered node farthest
    // from the first BFS source (which feeds the reference bound).
    Sweep,
};

struct EccentricityResult {
    std::vector<std::uint32_t> eccentricity;
    std::uint32_t radius = 0;
    std::uint32_t diameter = 0;
    std::vector<NodeId> center;
    std::vector<NodeId> periphery;
    std::size_t bfs_count = 0;
    // Per-node component label when computed per component; empty otherwise.
    std::vector<std::uint32_t> component;

    // eccentricity value -> node count
    std::map<std::uint32_t, std::size_t> distribution() const;
};

struct EccentricityOptions {
    EccentricityStrategy strategy = EccentricityStrategy::Alternating;
    // Without this flag a disconnected graph is a contract violation. With it,
    // eccentricities are within each component and radius/diameter/center/
    // periphery describe the largest component.
    bool per_component = false;
};

// Exact eccentricities by bound pruning: each BFS from a selected node v
// tightens every unresolved node w to
//   lower(w) >= max(ecc(v) - d(v,w), d(v,w)),  upper(w) <= ecc(v) + d(v,w)
// and nodes whose bounds meet are resolved without their own BFS. A reference
// bound from the first source tightens upper bounds as the periphery is
// covered. Degree-1 nodes are never BFS sources.
EccentricityResult eccentricity_exact(const WeightedGraph& graph, const EccentricityOptions& options = {});

struct DistanceStats {
    double average = 0.0;
    // hop count -> pair count. Unordered pairs when exact; (source, target)
    // pairs over the sampled sources otherwise.
    std::map<std::uint32_t, std::uint64_t> histogram;
    bool exact = true;
    std::size_t sources = 0;
};

struct DistanceMode {
    static DistanceMode exact() { return {}; }
    static DistanceMode sampled(std::size_t k, std::uint64_t seed) { return {k, seed}; }

    std::optional<std::size_t> sample_size;
    std::uint64_t seed = 0;
};

// Exact: all-pairs BFS. Sampled: BFS from k distinct uniformly drawn sources,
// averaging the per-source mean distance. Throws ContractViolation on a
// disconnected graph.
DistanceStats distance_stats(const WeightedGraph& graph, DistanceMode mode = DistanceMode::exact());

struct DegreeDistribution {
    std::map<std::size_t, std::size_t> frequency;  // degree -> node count
    // bins[k] counts degrees in [2^k, 2^(k+1)); degree 0 is counted separately.
    std::vector<std::size_t> log2_bins;
    std::size_t zero_degree = 0;
};

DegreeDistribution degree_distribution(const WeightedGraph& graph);

// Center nodes of `ecc`, keeping only edges heavier than min_edge_weight.
CityGraph center_subgraph(const CityGraph& graph, const EccentricityResult& ecc,
                          Weight min_edge_weight = 20);

}  // namespace interlock
