// Command-line front end: one subcommand per pipeline stage.

#include "interlock/error.hpp"
#include "interlock/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using namespace interlock;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitStale = 3;
constexpr int kExitData = 4;

struct Overrides {
    std::string config_path;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;

    std::optional<std::string> firms, positions, ownership, gazetteer;
    std::optional<std::size_t> max_positions;
    std::optional<double> ownership_threshold;
    std::optional<double> bandwidth;
    std::optional<std::string> metric;
    std::optional<bool> split_borders;
    std::optional<double> resolution;
    std::optional<std::size_t> restarts;
    std::optional<std::string> self_loop_mode;
    std::optional<std::size_t> hub_threshold;
    std::optional<std::int64_t> center_min_weight;
    std::optional<std::size_t> top_k;
    bool json_report = false;
};

PipelineConfig effective_config(const Overrides& o) {
    nlohmann::json j = o.config_path.empty() ? to_json(PipelineConfig{}) : to_json(load_config(o.config_path));
    if (o.out) j["output_dir"] = *o.out;
    if (o.seed) j["seed"] = *o.seed;
    if (o.threads) j["threads"] = *o.threads;
    if (o.firms) j["inputs"]["firms"] = *o.firms;
    if (o.positions) j["inputs"]["positions"] = *o.positions;
    if (o.ownership) j["inputs"]["ownership"] = *o.ownership;
    if (o.gazetteer) j["inputs"]["gazetteer"] = *o.gazetteer;
    if (o.max_positions) j["max_positions"] = *o.max_positions;
    if (o.ownership_threshold) j["ownership_threshold"] = *o.ownership_threshold;
    if (o.bandwidth) j["bandwidth"] = *o.bandwidth;
    if (o.metric) j["metric"] = *o.metric;
    if (o.split_borders) j["split_borders"] = *o.split_borders;
    if (o.resolution) j["resolution"] = *o.resolution;
    if (o.restarts) j["restarts"] = *o.restarts;
    if (o.self_loop_mode) j["self_loop_mode"] = *o.self_loop_mode;
    if (o.hub_threshold) j["hub_threshold"] = *o.hub_threshold;
    if (o.center_min_weight) j["center_min_weight"] = *o.center_min_weight;
    if (o.top_k) j["top_k"] = *o.top_k;
    return config_from_json(j);
}

void print_result(const StageResult& r) {
    std::cout << stage_name(r.stage) << ": " << r.record.counts.dump() << " in " << r.record.wall_clock_seconds
              << " s\n";
    for (const auto& w : r.warnings) std::cerr << "warning: " << stage_name(r.stage) << ": " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Board interlock network pipeline"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--config", o.config_path, "Pipeline configuration (JSON)");
    app.add_option("--out", o.out, "Run directory");
    app.add_option("--seed", o.seed, "Seed for generation and Louvain");
    app.add_option("--threads", o.threads, "Worker threads (0 = all cores)");

    struct Sub {
        CLI::App* app;
        std::optional<Stage> stage;  // empty for `all` and `config`
    };
    std::vector<Sub> subs;
    auto add = [&](const char* name, const char* help, std::optional<Stage> stage) {
        subs.push_back({app.add_subcommand(name, help), stage});
        return subs.back().app;
    };

    add("synth", "Generate a planted-partition dataset", Stage::Synth);
    auto* ingest = add("ingest", "Parse and filter firms, positions and ownership", Stage::Ingest);
    ingest->add_option("--firms", o.firms, "firms.csv");
    ingest->add_option("--positions", o.positions, "positions.csv");
    ingest->add_option("--ownership", o.ownership, "ownership.csv");
    ingest->add_option("--max-positions", o.max_positions, "Mega-director cutoff (distinct firms)");
    auto* project = add("project", "Project positions onto the firm interlock graph", Stage::Project);
    project->add_option("--ownership-threshold", o.ownership_threshold, "Remove ties above this ownership");
    add("components", "Extract the giant firm component", Stage::Components);
    auto* geo = add("geocluster", "Cluster firm locations into cityclusters", Stage::GeoCluster);
    geo->add_option("--bandwidth", o.bandwidth, "MeanShift bandwidth in degrees");
    geo->add_option("--metric", o.metric, "euclidean or haversine");
    geo->add_option("--split-borders", o.split_borders, "Split clusters spanning countries (true/false)");
    geo->add_option("--gazetteer", o.gazetteer, "city,country,lat,lon cache for missing coordinates");
    add("aggregate", "Aggregate the firm graph to cities", Stage::Aggregate);
    auto* comm = add("communities", "Louvain communities of the city graph", Stage::Communities);
    comm->add_option("--resolution", o.resolution, "Modularity resolution");
    comm->add_option("--self-loops", o.self_loop_mode, "included or excluded");
    comm->add_option("--restarts", o.restarts, "Louvain runs with consecutive seeds; the best is kept");
    auto* cent = add("centrality", "Degree, betweenness, eccentricity and distances", Stage::Centrality);
    cent->add_option("--top-k", o.top_k, "Rows in the top-k tables");
    cent->add_option("--center-weight", o.center_min_weight, "Center subgraph keeps edges above this weight");
    auto* loc = add("locality", "Local and nonlocal ties, community graph, hubs", Stage::Locality);
    loc->add_option("--hub-threshold", o.hub_threshold, "Nonlocal neighbor count for hubs")->capture_default_str();
    loc->add_option("--self-loops", o.self_loop_mode, "Partition to use: included or excluded");
    auto* rep = add("report", "Assemble the report bundle", Stage::Report);
    rep->add_flag("--print", o.json_report, "Also print the bundle to stdout");
    add("all", "Run every stage in order", std::nullopt);
    auto* cfg = add("config", "Print the effective configuration", std::nullopt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    }

    try {
        const PipelineConfig config = effective_config(o);
        for (const auto& s : subs) {
            if (!s.app->parsed()) continue;
            if (s.app == cfg) {
                std::cout << to_json(config).dump(2) << '\n';
            } else if (!s.stage) {
                for (const auto& r : run_all(config)) print_result(r);
            } else {
                print_result(run_stage(*s.stage, config));
                if (*s.stage == Stage::Report && o.json_report) {
                    std::cout << report(config.output_dir).dump(2) << '\n';
                }
            }
        }
        return kExitOk;
    } catch (const StalenessError& e) {
        std::cerr << "stale: " << e.stage() << ": " << e.what() << '\n';
        return kExitStale;
    } catch (const UsageError& e) {
        std::cerr << "usage: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParameterError& e) {
        std::cerr << "usage: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}
