#include "interlock/error.hpp"
#include "interlock/pipeline.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace interlock;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("interlock_pipeline_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

PipelineConfig small_config(const fs::path& run) {
    PipelineConfig c;
    c.output_dir = run.string();
    c.synth = PlantedConfig::uniform(3, 6, 5, 0.3, 0.01, 4);
    c.synth.mega_directors = 1;
    c.synth.mega_director_positions = 40;
    c.synth.ownership_ties = 3;
    c.hub_threshold = 2;
    c.center_min_weight = 1;
    c.stability_seeds = {0, 1, 2};
    return c;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(INTERLOCK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Three firms in three distant cities; two directors chain them into a path.
InputPaths path_inputs(const fs::path& dir) {
    write_file(dir / "firms.csv",
               "firm_id,name,status,city,country,lat,lon\n"
               "F1,Alpha,active,Aberdeen,GB,57.1,-2.1\n"
               "F2,Beta,active,Bristol,GB,51.4,-2.6\n"
               "F3,Gamma,active,Cardiff,GB,48.0,-3.2\n");
    write_file(dir / "positions.csv",
               "firm_id,person_id,role,status\n"
               "F1,p1,board of directors,current\n"
               "F2,p1,board of directors,current\n"
               "F2,p2,supervisory board,current\n"
               "F3,p2,board of directors,current\n");
    write_file(dir / "ownership.csv", "parent_id,child_id,fraction\n");
    return {(dir / "firms.csv").string(), (dir / "positions.csv").string(), (dir / "ownership.csv").string(), ""};
}

}  // namespace

TEST_CASE("config JSON round-trips and rejects unknown keys") {
    PipelineConfig c;
    c.resolution = 1.25;
    c.seed = 17;
    c.restarts = 3;
    c.metric = GeoMetric::Haversine;
    c.self_loop_mode = SelfLoopMode::Included;
    c.synth.seed = 99;
    const auto j = to_json(c);
    CHECK(to_json(config_from_json(j)) == j);

    auto bad = j;
    bad["resolutoin"] = 1.0;
    CHECK_THROWS_AS(config_from_json(bad), ParameterError);
    bad = j;
    bad["seed"] = "seven";
    CHECK_THROWS_AS(config_from_json(bad), ParameterError);
    bad = j;
    bad["restarts"] = 0;
    CHECK_THROWS_AS(config_from_json(bad), ParameterError);
    bad = j;
    bad["bandwidth"] = -0.1;
    CHECK_THROWS_AS(config_from_json(bad), ParameterError);

    // Missing keys keep defaults.
    const auto partial = config_from_json(nlohmann::json{{"seed", 5}});
    CHECK(partial.seed == 5);
    CHECK(partial.max_positions == 100);
}

TEST_CASE("sha256 and atomic writes") {
    CHECK(sha256_bytes("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const auto dir = scratch("atomic");
    write_atomic(dir / "x.txt", "abc");
    CHECK(slurp(dir / "x.txt") == "abc");
    CHECK(sha256_file(dir / "x.txt") == sha256_bytes("abc"));
    write_atomic(dir / "x.txt", "second");
    CHECK(slurp(dir / "x.txt") == "second");
    CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator()) == 1);
    CHECK_THROWS_AS(sha256_file(dir / "missing"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("manifest JSON round-trip") {
    ArtifactManifest m;
    StageRecord r;
    r.inputs = {{"in.csv", "aa"}};
    r.outputs = {{"ingest/firms.csv", "bb"}};
    r.parameters = {{"max_positions", 100}};
    r.counts = {{"firms", 3}};
    m.put(Stage::Ingest, r);
    const auto back = ArtifactManifest::from_json(m.to_json());
    REQUIRE(back.find(Stage::Ingest));
    CHECK(back.find(Stage::Ingest)->outputs == r.outputs);
    CHECK(back.find(Stage::Project) == nullptr);
    CHECK(back.output_hashes() == std::map<std::string, std::string>{{"ingest/firms.csv", "bb"}});
    m.erase(Stage::Ingest);
    CHECK(m.find(Stage::Ingest) == nullptr);
}

TEST_CASE("stage dependencies") {
    CHECK(stage_dependencies(Stage::Ingest, true) == std::vector<Stage>{Stage::Synth});
    CHECK(stage_dependencies(Stage::Ingest, false).empty());
    const auto comm = stage_dependencies(Stage::Communities, false);
    CHECK(std::find(comm.begin(), comm.end(), Stage::Aggregate) != comm.end());
    for (auto s : {Stage::Synth, Stage::Ingest, Stage::Report}) CHECK(parse_stage(stage_name(s)) == s);
    CHECK_FALSE(parse_stage("nope"));
}

TEST_CASE("synthetic run: deterministic hashes, full report, staleness") {
    const auto root = scratch("full");
    const auto a = small_config(root / "a");
    const auto b = small_config(root / "b");
    const auto results = run_all(a);
    CHECK(results.back().stage == Stage::Report);
    run_all(b);
    const auto ha = ArtifactManifest::load(a.output_dir).output_hashes();
    CHECK_FALSE(ha.empty());
    CHECK(ha == ArtifactManifest::load(b.output_dir).output_hashes());

    const auto bundle = report(a.output_dir);
    for (const char* section : {"histograms", "eccentricity", "centrality_top_k", "partition", "crosswalk",
                                "composition", "community_graph", "hub_network", "locality"}) {
        CHECK_MESSAGE(bundle.contains(section), section);
        CHECK_FALSE(bundle[section].is_null());
    }
    const auto& loc = bundle["locality"];
    CHECK(loc["binary_local"].get<double>() + loc["binary_nonlocal"].get<double>() == doctest::Approx(1.0));
    CHECK(loc["weighted_local"].get<double>() + loc["weighted_nonlocal"].get<double>() == doctest::Approx(1.0));
    CHECK(slurp(fs::path(a.output_dir) / "report" / "bundle.json") == bundle.dump(2) + "\n");

    SUBCASE("tampered upstream artifact is stale") {
        write_file(fs::path(a.output_dir) / "aggregate" / "city_edges.csv", "src,dst,weight\n");
        CHECK_THROWS_AS(run_stage(Stage::Communities, a), StalenessError);
        CHECK_THROWS_AS(report(a.output_dir), StalenessError);
    }
    SUBCASE("changed parameters make downstream stages stale") {
        auto changed = a;
        changed.resolution = 1.5;
        run_stage(Stage::Communities, changed);
        CHECK_THROWS_AS(run_stage(Stage::Report, changed), StalenessError);
        run_stage(Stage::Centrality, changed);
        run_stage(Stage::Locality, changed);
        CHECK_NOTHROW(run_stage(Stage::Report, changed));
    }
    SUBCASE("rerunning a stage with the same inputs reproduces its outputs") {
        run_stage(Stage::Communities, a);
        CHECK(ArtifactManifest::load(a.output_dir).output_hashes() == ha);
    }
    fs::remove_all(root);
}

TEST_CASE("communities without aggregate is stale") {
    const auto root = scratch("nodeps");
    const auto c = small_config(root / "run");
    CHECK_THROWS_AS(run_stage(Stage::Communities, c), StalenessError);
    run_stage(Stage::Synth, c);
    run_stage(Stage::Ingest, c);
    CHECK_THROWS_AS(run_stage(Stage::Aggregate, c), StalenessError);
    fs::remove_all(root);
}

TEST_CASE("user inputs: path graph eccentricity table") {
    const auto root = scratch("path");
    PipelineConfig c;
    c.inputs = path_inputs(root);
    c.output_dir = (root / "run").string();
    c.stability_seeds = {};
    run_all(c);
    const auto bundle = report(c.output_dir);
    std::map<int, int> table;
    for (const auto& row : bundle["eccentricity"]["distribution"]) {
        table[row["eccentricity"].get<int>()] = row["count"].get<int>();
    }
    CHECK(table == std::map<int, int>{{1, 1}, {2, 2}});
    CHECK(bundle["eccentricity"]["radius"] == 1);
    CHECK(bundle["eccentricity"]["diameter"] == 2);

    PipelineConfig missing = c;
    missing.inputs.firms = (root / "nope.csv").string();
    missing.output_dir = (root / "run2").string();
    CHECK_THROWS_AS(run_stage(Stage::Ingest, missing), UsageError);
    fs::remove_all(root);
}

TEST_CASE("CLI exit codes") {
    const auto root = scratch("cli");
    const auto run = (root / "run").string();
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("") == 2);
    CHECK(run_cli("bogus") == 2);
    CHECK(run_cli("--out " + run + " communities --resolution -1") == 2);
    CHECK(run_cli("--out " + run + " communities") == 3);

    write_file(root / "bad.json", "{\"unknown\": 1}");
    CHECK(run_cli("--config " + (root / "bad.json").string() + " config") == 2);

    write_file(root / "firms.csv", "not,a,firms,header\n");
    write_file(root / "positions.csv", "firm_id,person_id,role,status\n");
    write_file(root / "ownership.csv", "parent_id,child_id,fraction\n");
    CHECK(run_cli("--out " + run + " ingest --firms " + (root / "firms.csv").string() + " --positions " +
                  (root / "positions.csv").string() + " --ownership " + (root / "ownership.csv").string()) == 4);

    const auto inputs = path_inputs(root);
    CHECK(run_cli("--out " + run + " ingest --firms " + inputs.firms + " --positions " + inputs.positions +
                  " --ownership " + inputs.ownership) == 0);
    CHECK(run_cli("--out " + run + " project") == 0);
    fs::remove_all(root);
}
