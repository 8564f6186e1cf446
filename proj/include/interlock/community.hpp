#pragma once

#include "interlock/city_graph.hpp"
#include "interlock/graph.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace interlock {

enum class SelfLoopMode { Included, Excluded };

std::string_view self_loop_mode_name(SelfLoopMode mode) noexcept;

struct Partition {
    std::vector<std::uint32_t> membership;  // node -> community, ids contiguous from 0
    std::size_t community_count = 0;
    double modularity = 0.0;
    double resolution = 1.0;
    SelfLoopMode self_loop_mode = SelfLoopMode::Included;

    std::vector<std::size_t> community_sizes() const;
};

// Renumbers labels contiguously by first appearance.
std::vector<std::uint32_t> normalize_labels(std::span<const std::uint32_t> labels);

// Q = sum_c [ w_c / m - resolution * (d_c / 2m)^2 ]. A self-loop of weight w
// adds w to m and to its community's internal weight, and 2w to its node's
// degree. Excluded mode ignores self-loops. Returns 0 when m = 0. Throws
// ContractViolation when membership does not cover the graph.
double modularity(const WeightedGraph& graph, std::span<const std::uint32_t> membership,
                  double resolution = 1.0, SelfLoopMode mode = SelfLoopMode::Included);

// Uses the partition's own self-loop mode.
double modularity(const CityGraph& graph, const Partition& partition, double resolution = 1.0);

// Builds a Partition from arbitrary labels, normalizing ids and computing Q.
Partition make_partition(const WeightedGraph& graph, std::span<const std::uint32_t> labels,
                         double resolution = 1.0, SelfLoopMode mode = SelfLoopMode::Included);

struct Dendrogram {
    // Level 0 is the finest. Every level partitions the original nodes.
    std::vector<Partition> levels;
    // level_maps[k][c] = community at level k+1 containing community c of level k.
    std::vector<std::vector<std::uint32_t>> level_maps;
    // Modularity after every local-moving pass, in execution order.
    std::vector<double> pass_modularity;
    std::uint64_t seed = 0;

    const Partition& top() const { return levels.back(); }
};

struct LouvainOptions {
    double resolution = 1.0;
    std::uint64_t seed = 0;
    SelfLoopMode self_loop_mode = SelfLoopMode::Excluded;
    // A move must beat staying put by more than this, and a pass must raise
    // Q by more than this for another pass to run.
    double min_gain = 1e-9;
};

// Two-phase Louvain: local moving in seeded random order, then aggregation,
// until no level changes the partition. Ties between candidate communities go
// to the lowest community id.
Dendrogram louvain(const WeightedGraph& graph, const LouvainOptions& options = {});
inline Dendrogram louvain(const CityGraph& graph, const LouvainOptions& options = {}) {
    return louvain(graph.graph, options);
}

struct BestOfRuns {
    Dendrogram dendrogram;
    std::size_t seed_index = 0;       // into the seeds given
    std::vector<double> modularities;  // top-level Q per seed
};

// Runs louvain once per seed (concurrently) and keeps the run with the highest
// top-level modularity; ties go to the earlier seed. Throws ParameterError on
// an empty seed list.
BestOfRuns louvain_best(const WeightedGraph& graph, const LouvainOptions& options,
                        std::span<const std::uint64_t> seeds);

// Normalized mutual information with arithmetic-mean normalization. Two
// single-community partitions score 1; otherwise zero entropy on either side
// scores 0. Throws ContractViolation on a size mismatch.
double normalized_mutual_information(std::span<const std::uint32_t> a,
                                     std::span<const std::uint32_t> b);

struct StabilityReport {
    std::vector<std::uint64_t> seeds;
    std::vector<double> modularities;  // per seed
    std::vector<std::size_t> community_counts;
    double min_modularity = 0.0;
    double max_modularity = 0.0;
    double mean_modularity = 0.0;
    std::vector<std::vector<double>> nmi;  // seeds x seeds
    double mean_pairwise_nmi = 1.0;
};

// Runs louvain once per seed (concurrently) and compares the top partitions.
// Throws ParameterError with fewer than two seeds.
StabilityReport stability_check(const WeightedGraph& graph, double resolution,
                                std::span<const std::uint64_t> seeds,
                                SelfLoopMode mode = SelfLoopMode::Excluded);

struct CrosswalkMatrix {
    std::size_t rows = 0;  // communities of a
    std::size_t cols = 0;  // communities of b
    std::vector<std::size_t> counts;  // row-major
    bool refinement = false;          // every row hits exactly one column

    std::size_t at(std::size_t r, std::size_t c) const { return counts[r * cols + c]; }
    std::size_t row_sum(std::size_t r) const;
    std::size_t col_sum(std::size_t c) const;
    std::size_t total() const;
};

// Contingency of shared nodes between two partitions of the same node set.
CrosswalkMatrix crosswalk(const Partition& a, const Partition& b);

}  // namespace interlock
