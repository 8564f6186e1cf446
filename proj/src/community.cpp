#include "interlock/community.hpp"

#include "interlock/error.hpp"
#include "interlock/parallel.hpp"
#include "interlock/random.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <numeric>

namespace interlock {

namespace {

// Working graph of one Louvain level: CSR adjacency without self-loops plus
// per-node self-loop weight. Weights are doubles so that aggregation never
// overflows and the gain arithmetic stays in one type.
struct LevelGraph {
    std::vector<std::size_t> offsets;
    std::vector<std::uint32_t> targets;
    std::vector<double> weights;
    std::vector<double> self_loop;
    std::vector<double> degree;  // incident weight + 2 * self-loop
    double total = 0.0;          // m

    std::size_t size() const { return self_loop.size(); }
};

LevelGraph level_from(const WeightedGraph& g, SelfLoopMode mode) {
    LevelGraph lg;
    const std::size_t n = g.node_count();
    lg.offsets.assign(n + 1, 0);
    lg.self_loop.assign(n, 0.0);
    lg.degree.assign(n, 0.0);
    for (NodeId v = 0; v < n; ++v) {
        auto nbrs = g.neighbors(v);
        auto ws = g.neighbor_weights(v);
        for (std::size_t i = 0; i < nbrs.size(); ++i) {
            lg.targets.push_back(nbrs[i]);
            lg.weights.push_back(static_cast<double>(ws[i]));
            lg.degree[v] += static_cast<double>(ws[i]);
        }
        lg.offsets[v + 1] = lg.targets.size();
        if (mode == SelfLoopMode::Included) {
            lg.self_loop[v] = static_cast<double>(g.self_loop(v));
            lg.degree[v] += 2.0 * lg.self_loop[v];
        }
    }
    lg.total = static_cast<double>(g.total_edge_weight()) +
               (mode == SelfLoopMode::Included ? static_cast<double>(g.total_self_loop_weight()) : 0.0);
    return lg;
}

// Contracts communities into nodes; intra-community weight becomes self-loop.
LevelGraph aggregate(const LevelGraph& g, const std::vector<std::uint32_t>& community,
                     std::size_t count) {
    LevelGraph out;
    out.self_loop.assign(count, 0.0);
    out.degree.assign(count, 0.0);
    out.total = g.total;
    std::vector<std::map<std::uint32_t, double>> rows(count);
    for (std::uint32_t v = 0; v < g.size(); ++v) {
        const std::uint32_t cv = community[v];
        out.self_loop[cv] += g.self_loop[v];
        out.degree[cv] += g.degree[v];
        for (std::size_t i = g.offsets[v]; i < g.offsets[v + 1]; ++i) {
            const std::uint32_t cw = community[g.targets[i]];
            if (cw == cv) {
                // Each internal edge is seen from both ends.
                out.self_loop[cv] += g.weights[i] / 2.0;
            } else {
                rows[cv][cw] += g.weights[i];
            }
        }
    }
    out.offsets.assign(count + 1, 0);
    for (std::uint32_t c = 0; c < count; ++c) {
        for (const auto& [t, w] : rows[c]) {
            out.targets.push_back(t);
            out.weights.push_back(w);
        }
        out.offsets[c + 1] = out.targets.size();
    }
    return out;
}

struct CommunityState {
    std::vector<std::uint32_t> of;  // node -> community
    std::vector<double> tot;         // total degree per community
    std::vector<double> in;          // internal weight per community (edges once + self-loops)

    double quality(double m, double resolution) const {
        if (m <= 0.0) return 0.0;
        double q = 0.0;
        for (std::size_t c = 0; c < tot.size(); ++c) {
            if (tot[c] == 0.0 && in[c] == 0.0) continue;
            const double share = tot[c] / (2.0 * m);
            q += in[c] / m - resolution * share * share;
        }
        return q;
    }
};

// Local moving phase. Returns true if any node changed community.
bool local_moving(const LevelGraph& g, CommunityState& state, const LouvainOptions& options,
                  Rng& rng, std::vector<double>& pass_trace) {
    const std::size_t n = g.size();
    const double m = g.total;
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);

    std::vector<double> link(n, -1.0);  // weight from current node to community, -1 = untouched
    std::vector<std::uint32_t> touched;

    bool any_move = false;
    double q = state.quality(m, options.resolution);
    for (;;) {
        rng.shuffle(std::span<std::uint32_t>(order));
        std::size_t moves = 0;
        const double q_before = q;
        for (std::uint32_t v : order) {
            const std::uint32_t own = state.of[v];
            const double kv = g.degree[v];

            touched.clear();
            link[own] = 0.0;
            touched.push_back(own);
            for (std::size_t i = g.offsets[v]; i < g.offsets[v + 1]; ++i) {
                const std::uint32_t c = state.of[g.targets[i]];
                if (link[c] < 0.0) {
                    link[c] = 0.0;
                    touched.push_back(c);
                }
                link[c] += g.weights[i];
            }

            state.tot[own] -= kv;
            state.in[own] -= link[own] + g.self_loop[v];

            auto gain = [&](std::uint32_t c) {
                return link[c] / m - options.resolution * state.tot[c] * kv / (2.0 * m * m);
            };
            const double own_gain = gain(own);
            std::uint32_t best = own;
            double best_gain = own_gain;
            std::sort(touched.begin(), touched.end());
            for (std::uint32_t c : touched) {
                if (c == own) continue;
                const double gc = gain(c);
                if (gc > own_gain + options.min_gain && (best == own || gc > best_gain)) {
                    best = c;
                    best_gain = gc;
                }
            }

            state.tot[best] += kv;
            state.in[best] += link[best] + g.self_loop[v];
            state.of[v] = best;
            if (best != own) ++moves;

            for (std::uint32_t c : touched) link[c] = -1.0;
        }
        q = state.quality(m, options.resolution);
        pass_trace.push_back(q);
        // Every accepted move has positive gain, so Q cannot drop.
        assert(q >= q_before - 1e-9);
        if (moves > 0) any_move = true;
        if (moves == 0 || q - q_before <= options.min_gain) break;
    }
    return any_move;
}

}  // namespace

std::string_view self_loop_mode_name(SelfLoopMode mode) noexcept {
    return mode == SelfLoopMode::Included ? "included" : "excluded";
}

std::vector<std::size_t> Partition::community_sizes() const {
    std::vector<std::size_t> sizes(community_count, 0);
    for (auto c : membership) ++sizes[c];
    return sizes;
}

std::vector<std::uint32_t> normalize_labels(std::span<const std::uint32_t> labels) {
    std::map<std::uint32_t, std::uint32_t> renumber;
    std::vector<std::uint32_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = renumber.emplace(labels[i], static_cast<std::uint32_t>(renumber.size()));
        out[i] = it->second;
    }
    return out;
}

double modularity(const WeightedGraph& graph, std::span<const std::uint32_t> membership,
                  double resolution, SelfLoopMode mode) {
    if (membership.size() != graph.node_count()) {
        throw ContractViolation("modularity: partition does not cover the graph");
    }
    if (!(resolution > 0.0)) throw ParameterError("modularity: resolution must be positive");
    const bool loops = mode == SelfLoopMode::Included;
    const double m = static_cast<double>(graph.total_edge_weight()) +
                     (loops ? static_cast<double>(graph.total_self_loop_weight()) : 0.0);
    if (m <= 0.0) return 0.0;

    std::uint32_t max_label = 0;
    for (auto c : membership) max_label = std::max(max_label, c);
    std::vector<double> internal(max_label + 1, 0.0), degree(max_label + 1, 0.0);
    for (NodeId v = 0; v < graph.node_count(); ++v) {
        const auto cv = membership[v];
        auto nbrs = graph.neighbors(v);
        auto ws = graph.neighbor_weights(v);
        for (std::size_t i = 0; i < nbrs.size(); ++i) {
            degree[cv] += static_cast<double>(ws[i]);
            if (membership[nbrs[i]] == cv && nbrs[i] > v) internal[cv] += static_cast<double>(ws[i]);
        }
        if (loops) {
            internal[cv] += static_cast<double>(graph.self_loop(v));
            degree[cv] += 2.0 * static_cast<double>(graph.self_loop(v));
        }
    }
    double q = 0.0;
    for (std::size_t c = 0; c <= max_label; ++c) {
        const double share = degree[c] / (2.0 * m);
        q += internal[c] / m - resolution * share * share;
    }
    return q;
}

double modularity(const CityGraph& graph, const Partition& partition, double resolution) {
    return modularity(graph.graph, partition.membership, resolution, partition.self_loop_mode);
}

Partition make_partition(const WeightedGraph& graph, std::span<const std::uint32_t> labels,
                         double resolution, SelfLoopMode mode) {
    Partition p;
    p.membership = normalize_labels(labels);
    p.community_count = 0;
    for (auto c : p.membership) p.community_count = std::max<std::size_t>(p.community_count, c + 1);
    p.resolution = resolution;
    p.self_loop_mode = mode;
    p.modularity = modularity(graph, p.membership, resolution, mode);
    return p;
}

Dendrogram louvain(const WeightedGraph& graph, const LouvainOptions& options) {
    if (!(options.resolution > 0.0)) throw ParameterError("louvain: resolution must be positive");
    const std::size_t n = graph.node_count();

    Dendrogram out;
    out.seed = options.seed;
    Rng rng(options.seed);

    LevelGraph level = level_from(graph, options.self_loop_mode);
    // Original node -> current level node.
    std::vector<std::uint32_t> node_to_level(n);
    std::iota(node_to_level.begin(), node_to_level.end(), 0u);

    for (;;) {
        CommunityState state;
        state.of.resize(level.size());
        std::iota(state.of.begin(), state.of.end(), 0u);
        state.tot = level.degree;
        state.in = level.self_loop;

        const bool moved = level.total > 0.0 &&
                           local_moving(level, state, options, rng, out.pass_modularity);

        // Renumber surviving communities by first appearance.
        std::vector<std::uint32_t> renumbered = normalize_labels(state.of);
        std::size_t count = 0;
        for (auto c : renumbered) count = std::max<std::size_t>(count, c + 1);

        if (!moved || count == level.size()) {
            if (out.levels.empty()) {
                // Nothing merged at all: report the singleton partition.
                std::vector<std::uint32_t> labels(n);
                for (std::size_t v = 0; v < n; ++v) labels[v] = node_to_level[v];
                out.levels.push_back(make_partition(graph, labels, options.resolution,
                                                    options.self_loop_mode));
            }
            break;
        }

        std::vector<std::uint32_t> labels(n);
        for (std::size_t v = 0; v < n; ++v) {
            node_to_level[v] = renumbered[node_to_level[v]];
            labels[v] = node_to_level[v];
        }
        Partition p = make_partition(graph, labels, options.resolution, options.self_loop_mode);

        if (!out.levels.empty()) {
            // Map previous level's communities to this level's.
            const Partition& prev = out.levels.back();
            std::vector<std::uint32_t> map(prev.community_count, 0);
            for (std::size_t v = 0; v < n; ++v) map[prev.membership[v]] = p.membership[v];
            out.level_maps.push_back(std::move(map));
        }
        out.levels.push_back(std::move(p));
        level = aggregate(level, renumbered, count);
    }
    return out;
}

BestOfRuns louvain_best(const WeightedGraph& graph, const LouvainOptions& options,
                        std::span<const std::uint64_t> seeds) {
    if (seeds.empty()) throw ParameterError("louvain_best: no seeds");
    std::vector<Dendrogram> runs(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) {
        LouvainOptions o = options;
        o.seed = seeds[i];
        runs[i] = louvain(graph, o);
    });
    BestOfRuns out;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        out.modularities.push_back(runs[i].top().modularity);
        if (runs[i].top().modularity > runs[out.seed_index].top().modularity) out.seed_index = i;
    }
    out.dendrogram = std::move(runs[out.seed_index]);
    return out;
}

double normalized_mutual_information(std::span<const std::uint32_t> a,
                                     std::span<const std::uint32_t> b) {
    if (a.size() != b.size()) throw ContractViolation("NMI: partitions cover different node sets");
    if (a.empty()) return 1.0;
    const auto n = static_cast<double>(a.size());
    std::map<std::uint32_t, double> pa, pb;
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> joint;
    for (std::size_t i = 0; i < a.size(); ++i) {
        pa[a[i]] += 1.0;
        pb[b[i]] += 1.0;
        joint[{a[i], b[i]}] += 1.0;
    }
    auto entropy = [n](const std::map<std::uint32_t, double>& counts) {
        double h = 0.0;
        for (const auto& [_, c] : counts) h -= (c / n) * std::log(c / n);
        return h;
    };
    const double ha = entropy(pa);
    const double hb = entropy(pb);
    if (pa.size() == 1 && pb.size() == 1) return 1.0;
    if (ha <= 0.0 || hb <= 0.0) return 0.0;
    double mi = 0.0;
    for (const auto& [key, c] : joint) {
        mi += (c / n) * std::log(c * n / (pa[key.first] * pb[key.second]));
    }
    const double nmi = mi / ((ha + hb) / 2.0);
    return std::clamp(nmi, 0.0, 1.0);
}

StabilityReport stability_check(const WeightedGraph& graph, double resolution,
                                std::span<const std::uint64_t> seeds, SelfLoopMode mode) {
    if (seeds.size() < 2) throw ParameterError("stability_check: at least two seeds required");
    StabilityReport report;
    report.seeds.assign(seeds.begin(), seeds.end());
    std::vector<Partition> tops(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) {
        tops[i] = louvain(graph, {.resolution = resolution, .seed = seeds[i], .self_loop_mode = mode})
                      .top();
    });

    const std::size_t k = seeds.size();
    report.nmi.assign(k, std::vector<double>(k, 1.0));
    double nmi_sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        report.modularities.push_back(tops[i].modularity);
        report.community_counts.push_back(tops[i].community_count);
        for (std::size_t j = i + 1; j < k; ++j) {
            const double v = normalized_mutual_information(tops[i].membership, tops[j].membership);
            report.nmi[i][j] = report.nmi[j][i] = v;
            nmi_sum += v;
        }
    }
    report.min_modularity = *std::min_element(report.modularities.begin(), report.modularities.end());
    report.max_modularity = *std::max_element(report.modularities.begin(), report.modularities.end());
    report.mean_modularity =
        std::accumulate(report.modularities.begin(), report.modularities.end(), 0.0) / static_cast<double>(k);
    report.mean_pairwise_nmi = nmi_sum / static_cast<double>(k * (k - 1) / 2);
    return report;
}

std::size_t CrosswalkMatrix::row_sum(std::size_t r) const {
    std::size_t s = 0;
    for (std::size_t c = 0; c < cols; ++c) s += at(r, c);
    return s;
}

std::size_t CrosswalkMatrix::col_sum(std::size_t c) const {
    std::size_t s = 0;
    for (std::size_t r = 0; r < rows; ++r) s += at(r, c);
    return s;
}

std::size_t CrosswalkMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

CrosswalkMatrix crosswalk(const Partition& a, const Partition& b) {
    if (a.membership.size() != b.membership.size()) {
        throw ContractViolation("crosswalk: partitions cover different node sets");
    }
    CrosswalkMatrix cw;
    cw.rows = a.community_count;
    cw.cols = b.community_count;
    cw.counts.assign(cw.rows * cw.cols, 0);
    for (std::size_t v = 0; v < a.membership.size(); ++v) {
        if (a.membership[v] >= cw.rows || b.membership[v] >= cw.cols) {
            throw ContractViolation("crosswalk: community id out of range");
        }
        ++cw.counts[a.membership[v] * cw.cols + b.membership[v]];
    }
    cw.refinement = true;
    for (std::size_t r = 0; r < cw.rows; ++r) {
        std::size_t hit = 0;
        for (std::size_t c = 0; c < cw.cols; ++c) hit += cw.at(r, c) > 0 ? 1 : 0;
        if (hit != 1) cw.refinement = false;
    }
    return cw;
}

}  // namespace interlock
