#include "interlock/centrality.hpp"

#include "interlock/error.hpp"
#include "interlock/parallel.hpp"
#include "interlock/random.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace interlock {

namespace {

template <typename T>
std::vector<NodeId> rank_descending(const std::vector<T>& values) {
    std::vector<NodeId> order(values.size());
    std::iota(order.begin(), order.end(), NodeId{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](NodeId a, NodeId b) { return values[a] > values[b]; });
    return order;
}

constexpr std::size_t kBetweennessChunks = 64;

// Exact eccentricities of a connected graph.
//
// Besides the two-sided bounds from each BFS, the first BFS source r serves as
// a reference: once every node farther than R from r has been a BFS source (or
// is a leaf of one), any node w satisfies
//   ecc(w) <= max(reach(w), d(r,w) + R)
// where reach(w) is the largest distance from w to a source seen so far.
EccentricityResult eccentricity_connected(const WeightedGraph& g, EccentricityStrategy strategy) {
    const std::size_t n = g.node_count();
    EccentricityResult out;
    out.eccentricity.assign(n, 0);
    if (n <= 1) return out;

    constexpr std::uint32_t kInf = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> lower(n, 0), upper(n, kInf), reach(n, 0);
    std::vector<bool> candidate(n, true), covered(n, false);
    std::size_t remaining = n;

    // A leaf's eccentricity follows from its neighbour's: every path from the
    // leaf leaves through that neighbour.
    const bool prune_leaves = n > 2;
    std::vector<NodeId> leaves;
    if (prune_leaves) {
        for (NodeId v = 0; v < n; ++v) {
            if (g.degree(v) == 1) {
                leaves.push_back(v);
                candidate[v] = false;
                --remaining;
            }
        }
    }
    std::vector<std::vector<NodeId>> leaves_of(n);
    for (NodeId leaf : leaves) leaves_of[g.neighbors(leaf)[0]].push_back(leaf);

    std::vector<std::int32_t> ref_dist;
    std::vector<NodeId> by_ref_dist;  // decreasing distance from the reference
    std::size_t far = 0;

    auto pick_bound = [&](bool pick_upper) {
        NodeId v = 0;
        bool found = false;
        for (NodeId w = 0; w < n; ++w) {
            if (!candidate[w]) continue;
            if (!found) {
                v = w;
                found = true;
                continue;
            }
            const bool better = pick_upper
                                    ? (upper[w] > upper[v] || (upper[w] == upper[v] && g.degree(w) > g.degree(v)))
                                    : (lower[w] < lower[v] || (lower[w] == lower[v] && g.degree(w) > g.degree(v)));
            if (better) v = w;
        }
        return v;
    };

    std::size_t turn = 0;
    while (remaining > 0) {
        NodeId v = 0;
        switch (strategy) {
            case EccentricityStrategy::LargestUpper: v = pick_bound(true); break;
            case EccentricityStrategy::SmallestLower: v = pick_bound(false); break;
            case EccentricityStrategy::Alternating: v = pick_bound(turn % 2 == 0); break;
            case EccentricityStrategy::Sweep:
                if (turn % 3 == 2 && far < n) {
                    v = by_ref_dist[far];
                    if (prune_leaves && g.degree(v) == 1) v = g.neighbors(v)[0];
                } else {
                    v = pick_bound(turn % 3 == 0);
                }
                break;
        }
        ++turn;

        const auto dist = bfs_distances(g, v);
        ++out.bfs_count;
        const auto ecc_v = static_cast<std::uint32_t>(*std::max_element(dist.begin(), dist.end()));
        out.eccentricity[v] = ecc_v;
        if (candidate[v]) {
            candidate[v] = false;
            --remaining;
        }
        covered[v] = true;
        for (NodeId leaf : leaves_of[v]) covered[leaf] = true;
        const bool has_leaves = !leaves_of[v].empty();

        if (ref_dist.empty()) {
            ref_dist = dist;
            by_ref_dist.resize(n);
            std::iota(by_ref_dist.begin(), by_ref_dist.end(), NodeId{0});
            std::stable_sort(by_ref_dist.begin(), by_ref_dist.end(),
                             [&](NodeId a, NodeId b) { return ref_dist[a] > ref_dist[b]; });
        }
        while (far < n && covered[by_ref_dist[far]]) ++far;
        const bool all_covered = far == n;
        const auto ref_radius = all_covered ? 0u : static_cast<std::uint32_t>(ref_dist[by_ref_dist[far]]);

        for (NodeId w = 0; w < n; ++w) {
            if (!candidate[w]) continue;
            const auto d = static_cast<std::uint32_t>(dist[w]);
            // Leaves hanging off v sit one hop beyond it.
            reach[w] = std::max(reach[w], has_leaves ? d + 1 : d);
            lower[w] = std::max({lower[w], ecc_v > d ? ecc_v - d : 0u, reach[w]});
            const std::uint32_t cap =
                all_covered ? reach[w] : std::max(reach[w], static_cast<std::uint32_t>(ref_dist[w]) + ref_radius);
            upper[w] = std::min({upper[w], ecc_v + d, cap});
            if (lower[w] == upper[w]) {
                out.eccentricity[w] = lower[w];
                candidate[w] = false;
                --remaining;
            }
        }
    }

    for (NodeId leaf : leaves) {
        const NodeId hub = g.neighbors(leaf)[0];
        // In a connected graph with n > 2 the hub is not a leaf, so it was resolved.
        out.eccentricity[leaf] = out.eccentricity[hub] == 1 ? 2 : out.eccentricity[hub] + 1;
    }
    return out;
}

void finish_summary(EccentricityResult& out, const std::vector<NodeId>& scope) {
    out.radius = std::numeric_limits<std::uint32_t>::max();
    out.diameter = 0;
    for (NodeId v : scope) {
        out.radius = std::min(out.radius, out.eccentricity[v]);
        out.diameter = std::max(out.diameter, out.eccentricity[v]);
    }
    if (scope.empty()) out.radius = 0;
    out.center.clear();
    out.periphery.clear();
    for (NodeId v : scope) {
        if (out.eccentricity[v] == out.radius) out.center.push_back(v);
        if (out.eccentricity[v] == out.diameter) out.periphery.push_back(v);
    }
}

}  // namespace

std::vector<NodeId> CentralityReport::degree_ranking() const { return rank_descending(degree); }
std::vector<NodeId> CentralityReport::weighted_degree_ranking() const {
    return rank_descending(weighted_degree);
}
std::vector<NodeId> CentralityReport::betweenness_ranking() const { return rank_descending(betweenness); }

CentralityReport degree_centrality(const WeightedGraph& graph) {
    CentralityReport r;
    r.degree.resize(graph.node_count());
    r.weighted_degree.resize(graph.node_count());
    for (NodeId v = 0; v < graph.node_count(); ++v) {
        r.degree[v] = graph.degree(v);
        r.weighted_degree[v] = graph.weighted_degree(v);
    }
    return r;
}

std::vector<double> betweenness(const WeightedGraph& graph) {
    const std::size_t n = graph.node_count();
    const std::size_t chunks = std::min(kBetweennessChunks, std::max<std::size_t>(n, 1));
    std::vector<std::vector<double>> partial(chunks, std::vector<double>(n, 0.0));

    parallel_for(chunks, [&](std::size_t chunk) {
        std::vector<double>& acc = partial[chunk];
        std::vector<std::int32_t> dist(n);
        std::vector<double> sigma(n), delta(n);
        std::vector<NodeId> order;
        order.reserve(n);
        for (std::size_t s = chunk; s < n; s += chunks) {
            std::fill(dist.begin(), dist.end(), -1);
            std::fill(sigma.begin(), sigma.end(), 0.0);
            std::fill(delta.begin(), delta.end(), 0.0);
            order.clear();
            dist[s] = 0;
            sigma[s] = 1.0;
            order.push_back(static_cast<NodeId>(s));
            for (std::size_t head = 0; head < order.size(); ++head) {
                const NodeId v = order[head];
                for (NodeId w : graph.neighbors(v)) {
                    if (dist[w] < 0) {
                        dist[w] = dist[v] + 1;
                        order.push_back(w);
                    }
                    if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
                }
            }
            // Dependencies in reverse BFS order; predecessors are the
            // neighbours one hop closer to s.
            for (std::size_t i = order.size(); i-- > 1;) {
                const NodeId w = order[i];
                for (NodeId v : graph.neighbors(w)) {
                    if (dist[v] == dist[w] - 1) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                }
                acc[w] += delta[w];
            }
        }
    });

    std::vector<double> out(n, 0.0);
    for (const auto& p : partial) {
        for (std::size_t v = 0; v < n; ++v) out[v] += p[v];
    }
    for (auto& b : out) b /= 2.0;
    return out;
}

std::map<std::uint32_t, std::size_t> EccentricityResult::distribution() const {
    std::map<std::uint32_t, std::size_t> d;
    for (auto e : eccentricity) ++d[e];
    return d;
}

EccentricityResult eccentricity_exact(const WeightedGraph& graph, const EccentricityOptions& options) {
    const std::size_t n = graph.node_count();
    const auto labeling = label_components(graph);
    if (labeling.count() <= 1) {
        auto out = eccentricity_connected(graph, options.strategy);
        std::vector<NodeId> all(n);
        std::iota(all.begin(), all.end(), NodeId{0});
        finish_summary(out, all);
        return out;
    }
    if (!options.per_component) {
        throw ContractViolation("eccentricity_exact: graph is disconnected (" +
                                std::to_string(labeling.count()) + " components)");
    }

    EccentricityResult out;
    out.eccentricity.assign(n, 0);
    out.component = labeling.labels;
    std::vector<std::vector<NodeId>> members(labeling.count());
    for (NodeId v = 0; v < n; ++v) members[labeling.labels[v]].push_back(v);
    for (const auto& nodes : members) {
        const auto sub = graph.induced_subgraph(nodes);
        const auto part = eccentricity_connected(sub, options.strategy);
        out.bfs_count += part.bfs_count;
        for (std::size_t i = 0; i < nodes.size(); ++i) out.eccentricity[nodes[i]] = part.eccentricity[i];
    }
    finish_summary(out, members[labeling.giant_label()]);
    return out;
}

DistanceStats distance_stats(const WeightedGraph& graph, DistanceMode mode) {
    const std::size_t n = graph.node_count();
    if (!is_connected(graph)) throw ContractViolation("distance_stats: graph is disconnected");
    DistanceStats out;
    if (n <= 1) return out;

    if (!mode.sample_size) {
        std::uint64_t total = 0;
        for (NodeId s = 0; s < n; ++s) {
            const auto dist = bfs_distances(graph, s);
            for (NodeId t = s + 1; t < n; ++t) {
                total += static_cast<std::uint64_t>(dist[t]);
                ++out.histogram[static_cast<std::uint32_t>(dist[t])];
            }
        }
        out.exact = true;
        out.sources = n;
        out.average = static_cast<double>(total) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
        return out;
    }

    const std::size_t k = std::min(*mode.sample_size, n);
    if (k == 0) throw ParameterError("distance_stats: sample size must be positive");
    std::vector<NodeId> nodes(n);
    std::iota(nodes.begin(), nodes.end(), NodeId{0});
    Rng rng(mode.seed);
    for (std::size_t i = 0; i < k; ++i) std::swap(nodes[i], nodes[i + rng.below(n - i)]);

    double sum_of_means = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const auto dist = bfs_distances(graph, nodes[i]);
        std::uint64_t total = 0;
        for (NodeId t = 0; t < n; ++t) {
            if (t == nodes[i]) continue;
            total += static_cast<std::uint64_t>(dist[t]);
            ++out.histogram[static_cast<std::uint32_t>(dist[t])];
        }
        sum_of_means += static_cast<double>(total) / static_cast<double>(n - 1);
    }
    out.exact = false;
    out.sources = k;
    out.average = sum_of_means / static_cast<double>(k);
    return out;
}

DegreeDistribution degree_distribution(const WeightedGraph& graph) {
    DegreeDistribution out;
    for (NodeId v = 0; v < graph.node_count(); ++v) {
        const std::size_t d = graph.degree(v);
        ++out.frequency[d];
        if (d == 0) {
            ++out.zero_degree;
            continue;
        }
        std::size_t bin = 0;
        while ((std::size_t{2} << bin) <= d) ++bin;
        if (out.log2_bins.size() <= bin) out.log2_bins.resize(bin + 1, 0);
        ++out.log2_bins[bin];
    }
    return out;
}

CityGraph center_subgraph(const CityGraph& graph, const EccentricityResult& ecc, Weight min_edge_weight) {
    if (ecc.eccentricity.size() != graph.node_count()) {
        throw ContractViolation("center_subgraph: eccentricities computed on a different graph");
    }
    std::vector<NodeId> center = ecc.center;
    std::sort(center.begin(), center.end());
    CityGraph sub = induced_city_subgraph(graph, center);
    std::vector<Edge> heavy;
    for (const Edge& e : sub.graph.edges()) {
        if (e.weight > min_edge_weight) heavy.push_back(e);
    }
    sub.graph = WeightedGraph::from_edges(sub.node_count(), heavy);
    return sub;
}

}  // namespace interlock
