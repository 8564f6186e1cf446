#include "interlock/pipeline.hpp"

#include "interlock/centrality.hpp"
#include "interlock/city_graph.hpp"
#include "interlock/csv.hpp"
#include "interlock/error.hpp"
#include "interlock/interlock_graph.hpp"
#include "interlock/locality.hpp"
#include "interlock/parallel.hpp"

#include <openssl/evp.h>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace interlock {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 10> kStageNames = {
    "synth", "ingest", "project", "components", "geocluster",
    "aggregate", "communities", "centrality", "locality", "report",
};

std::string name_of(Stage s) { return std::string(stage_name(s)); }

// ---- strict JSON field access ----

class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) throw ParameterError(where_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const char* key, T& target) {
        used_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        const json& v = *it;
        const std::string path = where_ + "." + key;
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ParameterError(path + ": expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ParameterError(path + ": expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
                    throw ParameterError(path + ": must not be negative");
                }
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ParameterError(path + ": expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ParameterError(path + ": expected a string");
        }
        try {
            target = v.get<T>();
        } catch (const json::exception& e) {
            throw ParameterError(path + ": " + e.what());
        }
    }

    const json* raw(const char* key) {
        used_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (!used_.contains(key)) throw ParameterError(where_ + ": unknown key '" + key + "'");
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

std::string metric_name(GeoMetric m) { return m == GeoMetric::Euclidean ? "euclidean" : "haversine"; }

GeoMetric parse_metric(const std::string& s) {
    if (s == "euclidean") return GeoMetric::Euclidean;
    if (s == "haversine") return GeoMetric::Haversine;
    throw ParameterError("metric must be 'euclidean' or 'haversine', got '" + s + "'");
}

SelfLoopMode parse_self_loop_mode(const std::string& s) {
    if (s == "included") return SelfLoopMode::Included;
    if (s == "excluded") return SelfLoopMode::Excluded;
    throw ParameterError("self_loop_mode must be 'included' or 'excluded', got '" + s + "'");
}

// ---- file helpers ----

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::string slurp(const fs::path& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(slurp(path));
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

template <typename Fn>
std::string render(Fn&& fn) {
    std::ostringstream out;
    fn(out);
    return out.str();
}

fs::path resolve(const fs::path& run, const std::string& key) {
    const fs::path p(key);
    return p.is_absolute() ? p : run / p;
}

// ---- stage parameters recorded in the manifest ----

json stage_parameters(Stage stage, const PipelineConfig& c) {
    switch (stage) {
        case Stage::Synth: {
            json j = to_json(c.synth);
            j["seed"] = c.seed;
            return j;
        }
        case Stage::Ingest: {
            if (c.inputs.synthetic()) return {{"max_positions", c.max_positions}, {"inputs", "synth"}};
            auto abs = [](const std::string& p) {
                return p.empty() ? p : fs::absolute(p).lexically_normal().string();
            };
            return {{"max_positions", c.max_positions},
                    {"inputs",
                     {{"firms", abs(c.inputs.firms)},
                      {"positions", abs(c.inputs.positions)},
                      {"ownership", abs(c.inputs.ownership)}}}};
        }
        case Stage::Project: return {{"ownership_threshold", c.ownership_threshold}};
        case Stage::Components: return json::object();
        case Stage::GeoCluster:
            return {{"bandwidth", c.bandwidth},
                    {"metric", metric_name(c.metric)},
                    {"split_borders", c.split_borders},
                    {"gazetteer", c.inputs.gazetteer}};
        case Stage::Aggregate: return json::object();
        case Stage::Communities:
            return {{"resolution", c.resolution},
                    {"seed", c.seed},
                    {"restarts", c.restarts},
                    {"self_loop_mode", self_loop_mode_name(c.self_loop_mode)},
                    {"stability_seeds", c.stability_seeds}};
        case Stage::Centrality:
            return {{"top_k", c.top_k},
                    {"distance_exact_limit", c.distance_exact_limit},
                    {"distance_samples", c.distance_samples},
                    {"seed", c.seed},
                    {"center_min_weight", c.center_min_weight}};
        case Stage::Locality:
            return {{"hub_threshold", c.hub_threshold}, {"self_loop_mode", self_loop_mode_name(c.self_loop_mode)}};
        case Stage::Report: return json::object();
    }
    return json::object();
}

// ---- upstream verification ----

class Verifier {
public:
    Verifier(fs::path run, const ArtifactManifest& manifest) : run_(std::move(run)), manifest_(manifest) {
        for (std::size_t s = 0; s < kStageNames.size(); ++s) {
            if (const auto* rec = manifest_.find(static_cast<Stage>(s))) {
                for (const auto& [path, _] : rec->outputs) producer_[path] = static_cast<Stage>(s);
            }
        }
    }

    const std::string& hash(const fs::path& path) {
        auto it = cache_.find(path.string());
        if (it != cache_.end()) return it->second;
        return cache_[path.string()] = sha256_file(path);
    }

    void verify(Stage stage) {
        if (done_.contains(stage)) return;
        const std::string name = name_of(stage);
        const StageRecord* rec = manifest_.find(stage);
        if (!rec) {
            throw StalenessError(name, "stage '" + name + "' has not been run in " + run_.string());
        }
        for (const auto& [rel, expected] : rec->outputs) {
            const fs::path p = resolve(run_, rel);
            if (!fs::exists(p)) {
                throw StalenessError(name, "output " + rel + " of stage '" + name + "' is missing");
            }
            if (hash(p) != expected) {
                throw StalenessError(name, "output " + rel + " of stage '" + name + "' was modified");
            }
        }
        for (const auto& [key, expected] : rec->inputs) {
            const fs::path p = resolve(run_, key);
            if (!fs::exists(p) || hash(p) != expected) {
                throw StalenessError(name, "input " + key + " changed since stage '" + name + "' ran");
            }
        }
        done_.insert(stage);
        for (const auto& [key, _] : rec->inputs) {
            auto it = producer_.find(key);
            if (it != producer_.end()) verify(it->second);
        }
    }

private:
    fs::path run_;
    const ArtifactManifest& manifest_;
    std::map<std::string, Stage> producer_;
    std::map<std::string, std::string> cache_;
    std::set<Stage> done_;
};

// Collects inputs and buffers outputs; nothing touches disk until commit().
class StageContext {
public:
    StageContext(const PipelineConfig& config, fs::path run, Verifier& verifier)
        : config(config), run(std::move(run)), verifier_(verifier) {}

    fs::path artifact(const std::string& rel) {
        const fs::path p = run / rel;
        record.inputs[rel] = verifier_.hash(p);
        return p;
    }

    fs::path user_input(const std::string& path, const std::string& what) {
        if (path.empty() || !fs::exists(path)) throw UsageError(what + " input not found: '" + path + "'");
        const fs::path abs = fs::absolute(path).lexically_normal();
        record.inputs[abs.string()] = verifier_.hash(abs);
        return abs;
    }

    void emit(const std::string& rel, std::string content) {
        record.outputs[rel] = sha256_bytes(content);
        pending_.emplace_back(rel, std::move(content));
    }

    void commit() {
        for (const auto& [rel, content] : pending_) write_atomic(run / rel, content);
        pending_.clear();
    }

    const PipelineConfig& config;
    fs::path run;
    StageRecord record;
    std::vector<std::string> warnings;

private:
    Verifier& verifier_;
    std::vector<std::pair<std::string, std::string>> pending_;
};

// ---- shared artifact loaders ----

FirmGraph load_firm_graph(StageContext& ctx, const std::string& rel) {
    auto in = open_in(ctx.artifact(rel));
    return read_firm_graph_binary(in);
}

CityGraph load_city_graph(StageContext& ctx) {
    auto nodes = open_in(ctx.artifact("aggregate/city_nodes.csv"));
    auto edges = open_in(ctx.artifact("aggregate/city_edges.csv"));
    auto loops = open_in(ctx.artifact("aggregate/city_self_loops.csv"));
    return read_city_graph(nodes, edges, loops);
}

// Downstream analyses run on the giant city component.
CityGraph load_analysis_graph(StageContext& ctx) { return giant_city_component(load_city_graph(ctx)); }

Partition load_partition(StageContext& ctx, const CityGraph& graph) {
    auto in = open_in(ctx.artifact("communities/partitions.csv"));
    csv::Reader reader(in);
    csv::expect_header(reader, {"cluster_id", "included", "excluded"}, "partitions");
    const std::size_t column = ctx.config.self_loop_mode == SelfLoopMode::Included ? 1 : 2;
    std::vector<std::uint32_t> labels;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() == 1 && f[0].empty()) continue;
        const auto id = f.size() == 3 ? csv::parse_int(f[0]) : std::nullopt;
        const auto label = f.size() == 3 ? csv::parse_int(f[column]) : std::nullopt;
        if (!id || !label || *label < 0 || labels.size() >= graph.node_count() ||
            graph.nodes[labels.size()].cluster_id != *id) {
            throw SchemaError("partitions: row at line " + std::to_string(reader.line()) +
                              " does not match the city graph");
        }
        labels.push_back(static_cast<std::uint32_t>(*label));
    }
    if (labels.size() != graph.node_count()) throw SchemaError("partitions: does not cover the city graph");
    return make_partition(graph.graph, labels, ctx.config.resolution, ctx.config.self_loop_mode);
}

json graph_counts(const WeightedGraph& g) {
    return {{"nodes", g.node_count()},
            {"edges", g.edge_count()},
            {"edge_weight", g.total_edge_weight()},
            {"self_loop_weight", g.total_self_loop_weight()}};
}

json parse_report_json(const ParseReport& r) {
    return {{"rows", r.rows}, {"malformed", r.malformed}, {"malformed_lines", r.malformed_lines}};
}

double median(std::vector<std::size_t> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? static_cast<double>(values[n / 2])
                 : 0.5 * static_cast<double>(values[n / 2 - 1] + values[n / 2]);
}

// ---- stages ----

void run_synth(StageContext& ctx) {
    PlantedConfig planted = ctx.config.synth;
    planted.seed = ctx.config.seed;
    const SyntheticDataset data = generate_planted(planted);
    ctx.emit("synth/firms.csv", render([&](std::ostream& o) { write_firms(o, data.firms); }));
    ctx.emit("synth/positions.csv", render([&](std::ostream& o) { write_positions(o, data.positions); }));
    ctx.emit("synth/ownership.csv", render([&](std::ostream& o) { write_ownership(o, data.ownership); }));
    ctx.emit("synth/truth_city.csv", render([&](std::ostream& o) { write_truth_city(o, data); }));
    ctx.emit("synth/truth_community.csv", render([&](std::ostream& o) { write_truth_community(o, data); }));
    ctx.record.counts = {{"firms", data.firms.size()},
                         {"positions", data.positions.size()},
                         {"ownership_links", data.ownership.size()},
                         {"planted_pairs", data.planted_pairs.size()},
                         {"cities", data.truth_city_community.size()}};
}

void run_ingest(StageContext& ctx) {
    const auto& in = ctx.config.inputs;
    fs::path firms_path, positions_path, ownership_path;
    if (in.synthetic()) {
        firms_path = ctx.artifact("synth/firms.csv");
        positions_path = ctx.artifact("synth/positions.csv");
        ownership_path = ctx.artifact("synth/ownership.csv");
    } else {
        firms_path = ctx.user_input(in.firms, "firms");
        positions_path = ctx.user_input(in.positions, "positions");
        if (!in.ownership.empty()) ownership_path = ctx.user_input(in.ownership, "ownership");
    }

    const auto firms = read_firms(firms_path.string());
    const auto positions = read_positions(positions_path.string());
    Parsed<OwnershipLink> ownership;
    if (!ownership_path.empty()) ownership = read_ownership(ownership_path.string());
    for (const ParseReport* r : std::array<const ParseReport*, 3>{&firms.report, &positions.report, &ownership.report}) {
        if (r->malformed > 0) ctx.warnings.push_back(std::to_string(r->malformed) + " malformed rows skipped");
    }

    const auto active = filter_firms(firms.records);
    const auto senior = filter_positions(positions.records);
    const auto at_active = restrict_positions_to_firms(senior, active);
    const auto cleaned = filter_mega_directors(at_active, ctx.config.max_positions);
    std::size_t mega = 0;
    for (const auto& [person, count] : at_active.person_firm_counts()) mega += count > ctx.config.max_positions;
    std::size_t interlocking = 0;
    for (const auto& [person, count] : cleaned.person_firm_counts()) interlocking += count >= 2;

    ctx.emit("ingest/firms.csv", render([&](std::ostream& o) { write_firms(o, active); }));
    ctx.emit("ingest/positions.csv", render([&](std::ostream& o) { write_positions(o, cleaned.records()); }));
    ctx.emit("ingest/ownership.csv", render([&](std::ostream& o) { write_ownership(o, ownership.records); }));
    ctx.emit("ingest/summary.json",
             dump({{"parse",
                    {{"firms", parse_report_json(firms.report)},
                     {"positions", parse_report_json(positions.report)},
                     {"ownership", parse_report_json(ownership.report)}}},
                   {"firms_read", firms.records.size()},
                   {"firms_active", active.size()},
                   {"positions_read", positions.records.size()},
                   {"positions_current_senior", senior.size()},
                   {"positions_at_active_firms", at_active.size()},
                   {"mega_directors_removed", mega},
                   {"positions_kept", cleaned.size()},
                   {"persons_kept", cleaned.person_firm_counts().size()},
                   {"interlocking_persons", interlocking},
                   {"ownership_links", ownership.records.size()}}));
    ctx.record.counts = {{"firms", active.size()},
                         {"positions", cleaned.size()},
                         {"ownership_links", ownership.records.size()}};
}

void run_project(StageContext& ctx) {
    auto positions = read_positions(ctx.artifact("ingest/positions.csv").string());
    auto ownership = read_ownership(ctx.artifact("ingest/ownership.csv").string());
    const FirmGraph projected = project_interlocks(PositionTable(std::move(positions.records)));
    OwnershipFilterReport report;
    const FirmGraph graph =
        remove_ownership_ties(projected, ownership.records, ctx.config.ownership_threshold, &report);
    if (report.links_unknown_firm > 0) {
        ctx.warnings.push_back(std::to_string(report.links_unknown_firm) +
                               " ownership links reference firms outside the graph");
    }
    ctx.emit("project/firm_edges.csv", render([&](std::ostream& o) { write_firm_edges(o, graph); }));
    ctx.emit("project/firm_graph.bin", render([&](std::ostream& o) { write_firm_graph_binary(o, graph); }));
    ctx.emit("project/summary.json",
             dump({{"projected", graph_counts(projected.graph)},
                   {"graph", graph_counts(graph.graph)},
                   {"ownership",
                    {{"links_seen", report.links_seen},
                     {"links_above_threshold", report.links_above_threshold},
                     {"links_unknown_firm", report.links_unknown_firm},
                     {"edges_removed", report.edges_removed},
                     {"weight_removed", report.weight_removed}}}}));
    ctx.record.counts = graph_counts(graph.graph);
}

void run_components(StageContext& ctx) {
    const FirmGraph graph = load_firm_graph(ctx, "project/firm_graph.bin");
    const ComponentResult comps = connected_components(graph);
    const FirmGraph giant = giant_component(graph);
    std::map<std::size_t, std::size_t> size_histogram;
    for (std::size_t s : comps.stats.sizes) ++size_histogram[s];
    json hist = json::array();
    for (const auto& [size, count] : size_histogram) hist.push_back({{"size", size}, {"count", count}});

    ctx.emit("components/giant_edges.csv", render([&](std::ostream& o) { write_firm_edges(o, giant); }));
    ctx.emit("components/giant_graph.bin", render([&](std::ostream& o) { write_firm_graph_binary(o, giant); }));
    ctx.emit("components/summary.json",
             dump({{"component_count", comps.stats.component_count},
                   {"giant_size", comps.stats.giant_size},
                   {"second_size", comps.stats.second_size},
                   {"fraction_small", comps.stats.fraction_small},
                   {"size_histogram", hist},
                   {"giant", graph_counts(giant.graph)}}));
    ctx.record.counts = graph_counts(giant.graph);
}

void run_geocluster(StageContext& ctx) {
    const FirmGraph giant = load_firm_graph(ctx, "components/giant_graph.bin");
    const auto all_firms = read_firms(ctx.artifact("ingest/firms.csv").string());
    std::vector<FirmRecord> firms;
    for (const auto& f : all_firms.records) {
        if (std::binary_search(giant.firm_ids.begin(), giant.firm_ids.end(), f.firm_id)) firms.push_back(f);
    }
    if (firms.size() != giant.node_count()) {
        throw SchemaError("geocluster: the firm table does not cover the giant component");
    }
    std::size_t resolved = 0;
    if (!ctx.config.inputs.gazetteer.empty()) {
        auto in = open_in(ctx.user_input(ctx.config.inputs.gazetteer, "gazetteer"));
        resolved = resolve_missing_coordinates(firms, Gazetteer::read(in));
    }

    GeoClustering clustering =
        cluster_cities(firms, {.bandwidth = ctx.config.bandwidth, .metric = ctx.config.metric});
    const std::size_t before_split = clustering.clusters.size();
    if (ctx.config.split_borders) clustering = split_border_clusters(clustering, firms);
    if (!clustering.assignment.unassigned.empty()) {
        ctx.warnings.push_back(std::to_string(clustering.assignment.unassigned.size()) +
                               " giant-component firms lack coordinates and are excluded");
    }

    ctx.emit("geocluster/clusters.csv", render([&](std::ostream& o) { write_clusters(o, clustering.clusters); }));
    ctx.emit("geocluster/members.csv",
             render([&](std::ostream& o) { write_cluster_members(o, clustering.clusters); }));
    ctx.emit("geocluster/assignment.csv",
             render([&](std::ostream& o) { write_assignment(o, clustering.assignment); }));
    ctx.emit("geocluster/summary.json",
             dump({{"firms", firms.size()},
                   {"assigned", clustering.assignment.firm_cluster.size()},
                   {"unassigned_no_coordinates", clustering.assignment.unassigned.size()},
                   {"resolved_by_gazetteer", resolved},
                   {"clusters_before_split", before_split},
                   {"clusters", clustering.clusters.size()}}));
    ctx.record.counts = {{"clusters", clustering.clusters.size()},
                         {"assigned", clustering.assignment.firm_cluster.size()},
                         {"unassigned", clustering.assignment.unassigned.size()}};
}

void run_aggregate(StageContext& ctx) {
    const FirmGraph giant = load_firm_graph(ctx, "components/giant_graph.bin");
    auto clusters = open_in(ctx.artifact("geocluster/clusters.csv"));
    auto members = open_in(ctx.artifact("geocluster/members.csv"));
    auto assignment = open_in(ctx.artifact("geocluster/assignment.csv"));
    const GeoClustering clustering = read_clustering(clusters, members, assignment);

    AggregationReport report;
    const CityGraph city = aggregate_to_cities(giant, clustering, &report);
    bool connected = true;
    const CityGraph analysis = giant_city_component(city, &connected);
    if (!connected) {
        ctx.warnings.push_back("city graph is not connected; analyses use its giant component of " +
                               std::to_string(analysis.node_count()) + " of " +
                               std::to_string(city.node_count()) + " cities");
    }
    std::size_t loop_only = 0;
    for (NodeId v = 0; v < city.node_count(); ++v) loop_only += city.graph.degree(v) == 0;

    ctx.emit("aggregate/city_nodes.csv", render([&](std::ostream& o) { write_city_nodes(o, city); }));
    ctx.emit("aggregate/city_edges.csv", render([&](std::ostream& o) { write_city_edges(o, city); }));
    ctx.emit("aggregate/city_self_loops.csv", render([&](std::ostream& o) { write_city_self_loops(o, city); }));
    ctx.emit("aggregate/summary.json",
             dump({{"city_graph", graph_counts(city.graph)},
                   {"total_weight", city.graph.total_weight()},
                   {"firms_in_graph", report.firms_in_graph},
                   {"firms_unassigned", report.firms_unassigned},
                   {"firm_edges_dropped", report.edges_dropped},
                   {"firm_weight_dropped", report.weight_dropped},
                   {"firm_weight_kept", report.weight_kept},
                   {"self_loop_only_cities", loop_only},
                   {"connected", connected},
                   {"analysis_graph", graph_counts(analysis.graph)}}));
    ctx.record.counts = graph_counts(city.graph);
}

json partition_json(const Dendrogram& d) {
    const Partition& top = d.top();
    json levels = json::array();
    for (const auto& level : d.levels) {
        levels.push_back({{"communities", level.community_count}, {"modularity", level.modularity}});
    }
    return {{"modularity", top.modularity},
            {"community_count", top.community_count},
            {"sizes", top.community_sizes()},
            {"levels", levels}};
}

void run_communities(StageContext& ctx) {
    const CityGraph graph = load_analysis_graph(ctx);
    const auto& c = ctx.config;
    std::vector<std::uint64_t> seeds(c.restarts);
    std::iota(seeds.begin(), seeds.end(), c.seed);
    const BestOfRuns best_included =
        louvain_best(graph.graph, {.resolution = c.resolution, .self_loop_mode = SelfLoopMode::Included}, seeds);
    const BestOfRuns best_excluded =
        louvain_best(graph.graph, {.resolution = c.resolution, .self_loop_mode = SelfLoopMode::Excluded}, seeds);
    const Dendrogram& included = best_included.dendrogram;
    const Dendrogram& excluded = best_excluded.dendrogram;
    const Dendrogram& primary = c.self_loop_mode == SelfLoopMode::Included ? included : excluded;
    const CrosswalkMatrix cw = crosswalk(included.top(), excluded.top());

    json stability = nullptr;
    if (c.stability_seeds.size() >= 2) {
        const StabilityReport s = stability_check(graph.graph, c.resolution, c.stability_seeds, c.self_loop_mode);
        stability = {{"seeds", s.seeds},
                     {"modularities", s.modularities},
                     {"community_counts", s.community_counts},
                     {"min_modularity", s.min_modularity},
                     {"max_modularity", s.max_modularity},
                     {"mean_modularity", s.mean_modularity},
                     {"nmi", s.nmi},
                     {"mean_pairwise_nmi", s.mean_pairwise_nmi}};
    }

    json counts = json::array();
    for (std::size_t r = 0; r < cw.rows; ++r) {
        json row = json::array();
        for (std::size_t col = 0; col < cw.cols; ++col) row.push_back(cw.at(r, col));
        counts.push_back(std::move(row));
    }
    json row_sums = json::array(), col_sums = json::array();
    for (std::size_t r = 0; r < cw.rows; ++r) row_sums.push_back(cw.row_sum(r));
    for (std::size_t col = 0; col < cw.cols; ++col) col_sums.push_back(cw.col_sum(col));

    ctx.emit("communities/partitions.csv", render([&](std::ostream& o) {
                 o << "cluster_id,included,excluded\n";
                 for (NodeId v = 0; v < graph.node_count(); ++v) {
                     o << graph.nodes[v].cluster_id << ',' << included.top().membership[v] << ','
                       << excluded.top().membership[v] << '\n';
                 }
             }));
    ctx.emit("communities/dendrogram.csv", render([&](std::ostream& o) {
                 o << "cluster_id";
                 for (std::size_t l = 0; l < primary.levels.size(); ++l) o << ",level_" << l;
                 o << '\n';
                 for (NodeId v = 0; v < graph.node_count(); ++v) {
                     o << graph.nodes[v].cluster_id;
                     for (const auto& level : primary.levels) o << ',' << level.membership[v];
                     o << '\n';
                 }
             }));
    ctx.emit("communities/crosswalk.csv", render([&](std::ostream& o) {
                 o << "included_community,excluded_community,cities\n";
                 for (std::size_t r = 0; r < cw.rows; ++r) {
                     for (std::size_t col = 0; col < cw.cols; ++col) {
                         if (cw.at(r, col) > 0) o << r << ',' << col << ',' << cw.at(r, col) << '\n';
                     }
                 }
             }));
    ctx.emit("communities/summary.json",
             dump({{"primary_mode", self_loop_mode_name(c.self_loop_mode)},
                   {"resolution", c.resolution},
                   {"seeds", seeds},
                   {"chosen_seed", {{"included", seeds[best_included.seed_index]},
                                    {"excluded", seeds[best_excluded.seed_index]}}},
                   {"restart_modularities", {{"included", best_included.modularities},
                                             {"excluded", best_excluded.modularities}}},
                   {"cities", graph.node_count()},
                   {"included", partition_json(included)},
                   {"excluded", partition_json(excluded)},
                   {"stability", stability},
                   {"crosswalk",
                    {{"rows", cw.rows},
                     {"cols", cw.cols},
                     {"refinement", cw.refinement},
                     {"total", cw.total()},
                     {"row_sums", row_sums},
                     {"col_sums", col_sums},
                     {"counts", counts}}}}));
    ctx.record.counts = {{"nodes", graph.node_count()},
                         {"communities", primary.top().community_count},
                         {"modularity", primary.top().modularity}};
}

void run_centrality(StageContext& ctx) {
    const CityGraph graph = load_analysis_graph(ctx);
    const auto& c = ctx.config;
    const WeightedGraph& g = graph.graph;
    CentralityReport report = degree_centrality(g);
    report.betweenness = betweenness(g);
    const EccentricityResult ecc = eccentricity_exact(g);
    const DistanceStats dist = g.node_count() <= c.distance_exact_limit
                                   ? distance_stats(g)
                                   : distance_stats(g, DistanceMode::sampled(c.distance_samples, c.seed));
    const DegreeDistribution dd = degree_distribution(g);
    const CityGraph center = center_subgraph(graph, ecc, c.center_min_weight);

    auto top = [&](const std::vector<NodeId>& ranking, auto value) {
        json out = json::array();
        for (std::size_t i = 0; i < std::min(c.top_k, ranking.size()); ++i) {
            const NodeId v = ranking[i];
            out.push_back({{"rank", i + 1},
                           {"cluster_id", graph.nodes[v].cluster_id},
                           {"label", graph.nodes[v].label},
                           {"country", graph.nodes[v].country},
                           {"value", value(v)}});
        }
        return out;
    };
    json degree_hist = json::array(), distance_hist = json::array(), ecc_dist = json::array();
    for (const auto& [d, n] : dd.frequency) degree_hist.push_back({{"degree", d}, {"count", n}});
    for (const auto& [d, n] : dist.histogram) distance_hist.push_back({{"distance", d}, {"pairs", n}});
    for (const auto& [e, n] : ecc.distribution()) ecc_dist.push_back({{"eccentricity", e}, {"count", n}});
    const std::size_t max_degree = report.degree.empty() ? 0 : *std::max_element(report.degree.begin(), report.degree.end());

    ctx.emit("centrality/centrality.csv", render([&](std::ostream& o) {
                 o << "node,degree,weighted_degree,betweenness,eccentricity\n";
                 for (NodeId v = 0; v < g.node_count(); ++v) {
                     o << graph.nodes[v].cluster_id << ',' << report.degree[v] << ',' << report.weighted_degree[v]
                       << ',' << csv::format_double(report.betweenness[v]) << ',' << ecc.eccentricity[v] << '\n';
                 }
             }));
    ctx.emit("centrality/center_nodes.csv", render([&](std::ostream& o) { write_city_nodes(o, center); }));
    ctx.emit("centrality/center_edges.csv", render([&](std::ostream& o) { write_city_edges(o, center); }));
    ctx.emit("centrality/summary.json",
             dump({{"nodes", g.node_count()},
                   {"edges", g.edge_count()},
                   {"radius", ecc.radius},
                   {"diameter", ecc.diameter},
                   {"center_size", ecc.center.size()},
                   {"periphery_size", ecc.periphery.size()},
                   {"eccentricity_bfs_count", ecc.bfs_count},
                   {"eccentricity_distribution", ecc_dist},
                   {"average_distance", dist.average},
                   {"distance_exact", dist.exact},
                   {"distance_sources", dist.sources},
                   {"distance_histogram", distance_hist},
                   {"degree_histogram", degree_hist},
                   {"degree_log2_bins", dd.log2_bins},
                   {"max_degree", max_degree},
                   {"median_degree", median(report.degree)},
                   {"center_subgraph", graph_counts(center.graph)},
                   {"top_k",
                    {{"degree", top(report.degree_ranking(), [&](NodeId v) { return json(report.degree[v]); })},
                     {"weighted_degree",
                      top(report.weighted_degree_ranking(), [&](NodeId v) { return json(report.weighted_degree[v]); })},
                     {"betweenness",
                      top(report.betweenness_ranking(), [&](NodeId v) { return json(report.betweenness[v]); })}}}}));
    ctx.record.counts = graph_counts(g);
}

void run_locality(StageContext& ctx) {
    const CityGraph graph = load_analysis_graph(ctx);
    const Partition partition = load_partition(ctx, graph);
    const TieClassification ties = classify_ties(graph, partition);
    const CommunityGraph cg = community_graph(graph, partition);
    const HubReport hubs = nonlocal_hubs(graph, partition, ctx.config.hub_threshold);
    std::vector<std::string> country_of;
    for (const auto& n : graph.nodes) country_of.push_back(n.country);
    const CompositionTable composition = community_composition(partition, country_of);

    json comp = json::array();
    for (std::size_t k = 0; k < composition.communities.size(); ++k) {
        const auto& cc = composition.communities[k];
        comp.push_back({{"community", k},
                        {"size", cc.size},
                        {"dominant", cc.dominant},
                        {"entropy_bits", cc.entropy_bits},
                        {"countries", cc.countries}});
    }
    json cg_nodes = json::array(), cg_edges = json::array();
    for (NodeId k = 0; k < cg.graph.node_count(); ++k) {
        cg_nodes.push_back({{"community", k},
                            {"cities", cg.sizes[k]},
                            {"self_weight", cg.graph.self_loop(k)},
                            {"lat", cg.layout[k].latitude},
                            {"lon", cg.layout[k].longitude}});
    }
    for (const Edge& e : cg.graph.edges()) cg_edges.push_back({{"src", e.src}, {"dst", e.dst}, {"weight", e.weight}});
    json hub_nodes = json::array(), hub_edges = json::array();
    for (NodeId h : hubs.hubs) {
        hub_nodes.push_back({{"cluster_id", graph.nodes[h].cluster_id},
                             {"label", graph.nodes[h].label},
                             {"community", partition.membership[h]},
                             {"nonlocal_neighbors", hubs.nonlocal_neighbors[h]}});
    }
    for (const Edge& e : hubs.subgraph.graph.edges()) {
        hub_edges.push_back({{"src", hubs.subgraph.nodes[e.src].cluster_id},
                             {"dst", hubs.subgraph.nodes[e.dst].cluster_id},
                             {"weight", e.weight}});
    }

    ctx.emit("locality/ties.csv", render([&](std::ostream& o) { write_tie_classification(o, graph, ties); }));
    ctx.emit("locality/community_edges.csv", render([&](std::ostream& o) { write_community_edges(o, cg); }));
    ctx.emit("locality/community_self_loops.csv",
             render([&](std::ostream& o) { write_community_self_loops(o, cg); }));
    ctx.emit("locality/hubs.csv", render([&](std::ostream& o) { write_hubs(o, graph, hubs); }));
    ctx.emit("locality/hub_edges.csv", render([&](std::ostream& o) { write_city_edges(o, hubs.subgraph); }));
    ctx.emit("locality/composition.csv", render([&](std::ostream& o) { write_composition(o, composition); }));
    ctx.emit("locality/cities.geojson", cities_geojson(graph, partition) + "\n");
    ctx.emit("locality/community_arcs.geojson", community_arcs_geojson(cg) + "\n");
    ctx.emit("locality/summary.json",
             dump({{"self_loop_mode", self_loop_mode_name(partition.self_loop_mode)},
                   {"edges", ties.edges.size()},
                   {"binary_local", ties.binary_local},
                   {"binary_nonlocal", ties.binary_nonlocal},
                   {"weighted_local", ties.weighted_local},
                   {"weighted_nonlocal", ties.weighted_nonlocal},
                   {"weighted_local_no_self", ties.weighted_local_no_self},
                   {"weighted_nonlocal_no_self", ties.weighted_nonlocal_no_self},
                   {"local_weight", ties.local_weight},
                   {"nonlocal_weight", ties.nonlocal_weight},
                   {"self_loop_weight", ties.self_loop_weight},
                   {"community_graph",
                    {{"nodes", cg_nodes}, {"edges", cg_edges}, {"total_weight", cg.graph.total_weight()}}},
                   {"hub_threshold", ctx.config.hub_threshold},
                   {"hubs", hub_nodes},
                   {"hub_edges", hub_edges},
                   {"composition", comp}}));
    ctx.record.counts = {{"ties", ties.edges.size()},
                         {"communities", partition.community_count},
                         {"hubs", hubs.hubs.size()}};
}

constexpr std::array kAnalysisStages = {Stage::Ingest,     Stage::Project,    Stage::Components,
                                        Stage::GeoCluster, Stage::Aggregate,  Stage::Communities,
                                        Stage::Centrality, Stage::Locality};

json assemble_report(const fs::path& run, const std::function<fs::path(const std::string&)>& input) {
    const json centrality = read_json(input("centrality/summary.json"));
    const json communities = read_json(input("communities/summary.json"));
    const json locality = read_json(input("locality/summary.json"));
    const json aggregate = read_json(input("aggregate/summary.json"));
    const json components = read_json(input("components/summary.json"));
    const json ingest = read_json(input("ingest/summary.json"));
    (void)run;

    json bundle;
    bundle["histograms"] = {{"degree", centrality["degree_histogram"]},
                            {"degree_log2_bins", centrality["degree_log2_bins"]},
                            {"max_degree", centrality["max_degree"]},
                            {"median_degree", centrality["median_degree"]},
                            {"distance", centrality["distance_histogram"]},
                            {"average_distance", centrality["average_distance"]},
                            {"distance_exact", centrality["distance_exact"]}};
    bundle["eccentricity"] = {{"distribution", centrality["eccentricity_distribution"]},
                              {"radius", centrality["radius"]},
                              {"diameter", centrality["diameter"]},
                              {"center_size", centrality["center_size"]},
                              {"periphery_size", centrality["periphery_size"]},
                              {"bfs_count", centrality["eccentricity_bfs_count"]}};
    bundle["centrality_top_k"] = centrality["top_k"];
    bundle["partition"] = {{"primary_mode", communities["primary_mode"]},
                           {"resolution", communities["resolution"]},
                           {"cities", communities["cities"]},
                           {"included", communities["included"]},
                           {"excluded", communities["excluded"]},
                           {"stability", communities["stability"]}};
    bundle["crosswalk"] = communities["crosswalk"];
    bundle["composition"] = locality["composition"];
    bundle["community_graph"] = locality["community_graph"];
    bundle["hub_network"] = {{"threshold", locality["hub_threshold"]},
                             {"hubs", locality["hubs"]},
                             {"edges", locality["hub_edges"]}};
    bundle["locality"] = {{"edges", locality["edges"]},
                          {"binary_local", locality["binary_local"]},
                          {"binary_nonlocal", locality["binary_nonlocal"]},
                          {"weighted_local", locality["weighted_local"]},
                          {"weighted_nonlocal", locality["weighted_nonlocal"]},
                          {"weighted_local_no_self", locality["weighted_local_no_self"]},
                          {"weighted_nonlocal_no_self", locality["weighted_nonlocal_no_self"]},
                          {"local_weight", locality["local_weight"]},
                          {"nonlocal_weight", locality["nonlocal_weight"]},
                          {"self_loop_weight", locality["self_loop_weight"]}};
    bundle["network"] = {{"firms_active", ingest["firms_active"]},
                         {"positions_kept", ingest["positions_kept"]},
                         {"firm_components", components["component_count"]},
                         {"giant_firms", components["giant_size"]},
                         {"city_graph", aggregate["city_graph"]},
                         {"analysis_graph", aggregate["analysis_graph"]},
                         {"city_graph_connected", aggregate["connected"]}};
    return bundle;
}

std::string csv_from(const json& rows, const std::vector<std::string>& columns) {
    std::ostringstream out;
    csv::write_row(out, columns);
    for (const auto& row : rows) {
        std::vector<std::string> fields;
        for (const auto& col : columns) {
            const json& v = row.at(col);
            fields.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        }
        csv::write_row(out, fields);
    }
    return out.str();
}

void run_report(StageContext& ctx) {
    const json bundle = assemble_report(ctx.run, [&](const std::string& rel) { return ctx.artifact(rel); });
    ctx.emit("report/bundle.json", dump(bundle));
    ctx.emit("report/degree_histogram.csv", csv_from(bundle["histograms"]["degree"], {"degree", "count"}));
    ctx.emit("report/distance_histogram.csv", csv_from(bundle["histograms"]["distance"], {"distance", "pairs"}));
    ctx.emit("report/eccentricity.csv",
             csv_from(bundle["eccentricity"]["distribution"], {"eccentricity", "count"}));
    json top_rows = json::array();
    for (const auto& [metric, rows] : bundle["centrality_top_k"].items()) {
        for (json r : rows) {
            r["metric"] = metric;
            top_rows.push_back(std::move(r));
        }
    }
    ctx.emit("report/top_centrality.csv",
             csv_from(top_rows, {"metric", "rank", "cluster_id", "label", "country", "value"}));
    json locality_rows = json::array();
    for (const auto& [k, v] : bundle["locality"].items()) locality_rows.push_back({{"measure", k}, {"value", v}});
    ctx.emit("report/locality.csv", csv_from(locality_rows, {"measure", "value"}));
    ctx.record.counts = {{"sections", 9}};
}

}  // namespace

std::string_view stage_name(Stage stage) noexcept { return kStageNames[static_cast<std::size_t>(stage)]; }

std::optional<Stage> parse_stage(std::string_view name) {
    for (std::size_t i = 0; i < kStageNames.size(); ++i) {
        if (kStageNames[i] == name) return static_cast<Stage>(i);
    }
    return std::nullopt;
}

std::vector<Stage> stage_dependencies(Stage stage, bool synthetic_inputs) {
    switch (stage) {
        case Stage::Synth: return {};
        case Stage::Ingest: return synthetic_inputs ? std::vector{Stage::Synth} : std::vector<Stage>{};
        case Stage::Project: return {Stage::Ingest};
        case Stage::Components: return {Stage::Project};
        case Stage::GeoCluster: return {Stage::Components, Stage::Ingest};
        case Stage::Aggregate: return {Stage::Components, Stage::GeoCluster};
        case Stage::Communities: return {Stage::Aggregate};
        case Stage::Centrality: return {Stage::Aggregate};
        case Stage::Locality: return {Stage::Aggregate, Stage::Communities};
        case Stage::Report: return {kAnalysisStages.begin(), kAnalysisStages.end()};
    }
    return {};
}

void PipelineConfig::validate() const {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ParameterError("bandwidth must be positive");
    if (!(resolution > 0.0) || !std::isfinite(resolution)) throw ParameterError("resolution must be positive");
    if (max_positions < 1) throw ParameterError("max_positions must be at least 1");
    if (!(ownership_threshold >= 0.0 && ownership_threshold <= 1.0)) {
        throw ParameterError("ownership_threshold must lie in [0, 1]");
    }
    if (hub_threshold < 1) throw ParameterError("hub_threshold must be at least 1");
    if (center_min_weight < 0) throw ParameterError("center_min_weight must not be negative");
    if (top_k < 1) throw ParameterError("top_k must be at least 1");
    if (stability_seeds.size() == 1) throw ParameterError("stability_seeds needs zero or at least two seeds");
    if (distance_samples < 1) throw ParameterError("distance_samples must be at least 1");
    if (restarts < 1) throw ParameterError("restarts must be at least 1");
    if (output_dir.empty()) throw ParameterError("output_dir must not be empty");
    const bool any = !inputs.firms.empty() || !inputs.positions.empty() || !inputs.ownership.empty();
    if (any && (inputs.firms.empty() || inputs.positions.empty())) {
        throw ParameterError("inputs: firms and positions must both be given");
    }
    synth.validate();
}

nlohmann::json to_json(const PlantedConfig& c) {
    json communities = json::array();
    for (const auto& s : c.communities) {
        communities.push_back({{"cities", s.cities},
                               {"center", {s.center.latitude, s.center.longitude}},
                               {"spread", s.spread},
                               {"countries", s.countries}});
    }
    return {{"communities", communities},
            {"firms_per_city", c.firms_per_city},
            {"city_size_exponent", c.city_size_exponent},
            {"max_firms_per_city", c.max_firms_per_city},
            {"locations_per_city", c.locations_per_city},
            {"location_spread", c.location_spread},
            {"min_city_separation", c.min_city_separation},
            {"directors_per_firm", c.directors_per_firm},
            {"p_in", c.p_in},
            {"p_out", c.p_out},
            {"mega_directors", c.mega_directors},
            {"mega_director_positions", c.mega_director_positions},
            {"ownership_ties", c.ownership_ties},
            {"ownership_noise", c.ownership_noise},
            {"inactive_firms", c.inactive_firms},
            {"missing_coordinate_firms", c.missing_coordinate_firms},
            {"noise_positions", c.noise_positions},
            {"seed", c.seed}};
}

PlantedConfig planted_from_json(const nlohmann::json& j) {
    PlantedConfig c;
    ObjectReader r(j, "synth");
    if (const json* comms = r.raw("communities")) {
        if (!comms->is_array()) throw ParameterError("synth.communities: expected an array");
        c.communities.clear();
        for (const auto& item : *comms) {
            CommunitySpec s;
            ObjectReader cr(item, "synth.communities[]");
            cr.get("cities", s.cities);
            cr.get("spread", s.spread);
            cr.get("countries", s.countries);
            if (const json* center = cr.raw("center")) {
                if (!center->is_array() || center->size() != 2 || !(*center)[0].is_number() ||
                    !(*center)[1].is_number()) {
                    throw ParameterError("synth.communities[].center: expected [lat, lon]");
                }
                s.center = {(*center)[0].get<double>(), (*center)[1].get<double>()};
            }
            cr.finish();
            c.communities.push_back(std::move(s));
        }
    }
    r.get("firms_per_city", c.firms_per_city);
    r.get("city_size_exponent", c.city_size_exponent);
    r.get("max_firms_per_city", c.max_firms_per_city);
    r.get("locations_per_city", c.locations_per_city);
    r.get("location_spread", c.location_spread);
    r.get("min_city_separation", c.min_city_separation);
    r.get("directors_per_firm", c.directors_per_firm);
    r.get("p_in", c.p_in);
    r.get("p_out", c.p_out);
    r.get("mega_directors", c.mega_directors);
    r.get("mega_director_positions", c.mega_director_positions);
    r.get("ownership_ties", c.ownership_ties);
    r.get("ownership_noise", c.ownership_noise);
    r.get("inactive_firms", c.inactive_firms);
    r.get("missing_coordinate_firms", c.missing_coordinate_firms);
    r.get("noise_positions", c.noise_positions);
    r.get("seed", c.seed);
    r.finish();
    return c;
}

nlohmann::json to_json(const PipelineConfig& c) {
    json synth = to_json(c.synth);
    synth.erase("seed");  // the pipeline seed drives generation
    return {{"inputs",
             {{"firms", c.inputs.firms},
              {"positions", c.inputs.positions},
              {"ownership", c.inputs.ownership},
              {"gazetteer", c.inputs.gazetteer}}},
            {"output_dir", c.output_dir},
            {"bandwidth", c.bandwidth},
            {"metric", metric_name(c.metric)},
            {"split_borders", c.split_borders},
            {"resolution", c.resolution},
            {"seed", c.seed},
            {"restarts", c.restarts},
            {"stability_seeds", c.stability_seeds},
            {"self_loop_mode", self_loop_mode_name(c.self_loop_mode)},
            {"max_positions", c.max_positions},
            {"ownership_threshold", c.ownership_threshold},
            {"hub_threshold", c.hub_threshold},
            {"center_min_weight", c.center_min_weight},
            {"top_k", c.top_k},
            {"distance_exact_limit", c.distance_exact_limit},
            {"distance_samples", c.distance_samples},
            {"threads", c.threads},
            {"synth", synth}};
}

PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    ObjectReader r(j, "config");
    if (const json* in = r.raw("inputs")) {
        ObjectReader ir(*in, "config.inputs");
        ir.get("firms", c.inputs.firms);
        ir.get("positions", c.inputs.positions);
        ir.get("ownership", c.inputs.ownership);
        ir.get("gazetteer", c.inputs.gazetteer);
        ir.finish();
    }
    r.get("output_dir", c.output_dir);
    r.get("bandwidth", c.bandwidth);
    std::string metric = metric_name(c.metric);
    r.get("metric", metric);
    c.metric = parse_metric(metric);
    r.get("split_borders", c.split_borders);
    r.get("resolution", c.resolution);
    r.get("seed", c.seed);
    if (const json* seeds = r.raw("stability_seeds")) {
        if (!seeds->is_array()) throw ParameterError("config.stability_seeds: expected an array");
        c.stability_seeds.clear();
        for (const auto& s : *seeds) {
            if (!s.is_number_unsigned()) throw ParameterError("config.stability_seeds: expected unsigned integers");
            c.stability_seeds.push_back(s.get<std::uint64_t>());
        }
    }
    std::string mode(self_loop_mode_name(c.self_loop_mode));
    r.get("self_loop_mode", mode);
    c.self_loop_mode = parse_self_loop_mode(mode);
    r.get("restarts", c.restarts);
    r.get("max_positions", c.max_positions);
    r.get("ownership_threshold", c.ownership_threshold);
    r.get("hub_threshold", c.hub_threshold);
    r.get("center_min_weight", c.center_min_weight);
    r.get("top_k", c.top_k);
    r.get("distance_exact_limit", c.distance_exact_limit);
    r.get("distance_samples", c.distance_samples);
    r.get("threads", c.threads);
    if (const json* synth = r.raw("synth")) c.synth = planted_from_json(*synth);
    r.finish();
    c.validate();
    return c;
}

PipelineConfig load_config(const std::string& path) {
    if (!fs::exists(path)) throw UsageError("config file not found: " + path);
    json j;
    try {
        j = json::parse(slurp(path));
    } catch (const json::parse_error& e) {
        throw ParameterError(path + ": " + e.what());
    }
    return config_from_json(j);
}

std::string sha256_bytes(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_bytes(slurp(path)); }

void write_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

ArtifactManifest ArtifactManifest::load(const fs::path& run_dir) {
    const fs::path p = run_dir / "manifest.json";
    if (!fs::exists(p)) return {};
    return from_json(read_json(p));
}

void ArtifactManifest::save(const fs::path& run_dir) const {
    write_atomic(run_dir / "manifest.json", dump(to_json()));
}

const StageRecord* ArtifactManifest::find(Stage stage) const {
    auto it = stages_.find(name_of(stage));
    return it == stages_.end() ? nullptr : &it->second;
}

void ArtifactManifest::put(Stage stage, StageRecord record) { stages_[name_of(stage)] = std::move(record); }

void ArtifactManifest::erase(Stage stage) { stages_.erase(name_of(stage)); }

std::map<std::string, std::string> ArtifactManifest::output_hashes() const {
    std::map<std::string, std::string> out;
    for (const auto& [_, rec] : stages_) out.insert(rec.outputs.begin(), rec.outputs.end());
    return out;
}

nlohmann::json ArtifactManifest::to_json() const {
    json stages = json::object();
    for (const auto& [name, rec] : stages_) {
        stages[name] = {{"inputs", rec.inputs},
                        {"outputs", rec.outputs},
                        {"parameters", rec.parameters},
                        {"counts", rec.counts},
                        {"wall_clock_seconds", rec.wall_clock_seconds}};
    }
    return {{"version", 1}, {"stages", stages}};
}

ArtifactManifest ArtifactManifest::from_json(const nlohmann::json& j) {
    ArtifactManifest m;
    try {
        for (const auto& [name, rec] : j.at("stages").items()) {
            if (!parse_stage(name)) throw SchemaError("manifest: unknown stage '" + name + "'");
            StageRecord r;
            r.inputs = rec.at("inputs").get<std::map<std::string, std::string>>();
            r.outputs = rec.at("outputs").get<std::map<std::string, std::string>>();
            r.parameters = rec.at("parameters");
            r.counts = rec.at("counts");
            r.wall_clock_seconds = rec.at("wall_clock_seconds").get<double>();
            m.stages_[name] = std::move(r);
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("manifest: ") + e.what());
    }
    return m;
}

RunLock::RunLock(const fs::path& run_dir) {
    fs::create_directories(run_dir);
    const fs::path p = run_dir / ".lock";
    fd_ = ::open(p.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + p.string());
    if (::flock(fd_, LOCK_EX) != 0) {
        ::close(fd_);
        throw IoError("cannot lock " + p.string());
    }
}

RunLock::~RunLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

StageResult run_stage(Stage stage, const PipelineConfig& config) {
    config.validate();
    set_thread_count(config.threads);
    const fs::path run(config.output_dir);
    RunLock lock(run);
    ArtifactManifest manifest = ArtifactManifest::load(run);
    Verifier verifier(run, manifest);
    for (Stage dep : stage_dependencies(stage, config.inputs.synthetic())) verifier.verify(dep);

    StageContext ctx(config, run, verifier);
    const auto start = std::chrono::steady_clock::now();
    switch (stage) {
        case Stage::Synth: run_synth(ctx); break;
        case Stage::Ingest: run_ingest(ctx); break;
        case Stage::Project: run_project(ctx); break;
        case Stage::Components: run_components(ctx); break;
        case Stage::GeoCluster: run_geocluster(ctx); break;
        case Stage::Aggregate: run_aggregate(ctx); break;
        case Stage::Communities: run_communities(ctx); break;
        case Stage::Centrality: run_centrality(ctx); break;
        case Stage::Locality: run_locality(ctx); break;
        case Stage::Report: run_report(ctx); break;
    }
    ctx.commit();
    ctx.record.parameters = stage_parameters(stage, config);
    ctx.record.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.put(stage, ctx.record);
    manifest.save(run);
    return {stage, std::move(ctx.record), std::move(ctx.warnings)};
}

std::vector<StageResult> run_all(const PipelineConfig& config) {
    std::vector<StageResult> out;
    if (config.inputs.synthetic()) out.push_back(run_stage(Stage::Synth, config));
    for (Stage s : kAnalysisStages) out.push_back(run_stage(s, config));
    out.push_back(run_stage(Stage::Report, config));
    return out;
}

nlohmann::json report(const fs::path& run_dir) {
    if (!fs::exists(run_dir / "manifest.json")) {
        throw StalenessError("report", "no manifest in " + run_dir.string());
    }
    const ArtifactManifest manifest = ArtifactManifest::load(run_dir);
    Verifier verifier(run_dir, manifest);
    for (Stage s : kAnalysisStages) verifier.verify(s);
    return assemble_report(run_dir, [&](const std::string& rel) { return run_dir / rel; });
}

}  // namespace interlock
