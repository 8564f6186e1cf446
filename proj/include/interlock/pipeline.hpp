#pragma once

#include "interlock/community.hpp"
#include "interlock/geo_cluster.hpp"
#include "interlock/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace interlock {

enum class Stage {
    Synth,
    Ingest,
    Project,
    Components,
    GeoCluster,
    Aggregate,
    Communities,
    Centrality,
    Locality,
    Report,
};

std::string_view stage_name(Stage stage) noexcept;
std::optional<Stage> parse_stage(std::string_view name);

// Stages whose outputs `stage` reads. Ingest depends on Synth only when no
// input paths are configured.
std::vector<Stage> stage_dependencies(Stage stage, bool synthetic_inputs);

struct InputPaths {
    std::string firms;
    std::string positions;
    std::string ownership;
    std::string gazetteer;  // optional `city,country,lat,lon` cache

    // No firms/positions/ownership paths: ingest reads the synth stage output.
    bool synthetic() const noexcept { return firms.empty() && positions.empty() && ownership.empty(); }
};

struct PipelineConfig {
    InputPaths inputs;
    std::string output_dir = "run";

    double bandwidth = 0.1;
    GeoMetric metric = GeoMetric::Euclidean;
    bool split_borders = true;

    double resolution = 1.0;
    std::uint64_t seed = 0;
    // Louvain runs with seeds seed, seed+1, ...; the highest-modularity
    // partition is kept.
    std::size_t restarts = 5;
    std::vector<std::uint64_t> stability_seeds = {0, 1, 2, 3, 4};
    SelfLoopMode self_loop_mode = SelfLoopMode::Excluded;

    std::size_t max_positions = 100;
    double ownership_threshold = 0.5;
    std::size_t hub_threshold = 1000;
    std::int64_t center_min_weight = 20;

    std::size_t top_k = 20;
    std::size_t distance_exact_limit = 5000;  // above this node count, sample sources
    std::size_t distance_samples = 500;

    std::size_t threads = 0;

    PlantedConfig synth = PlantedConfig::uniform(6, 20, 10, 0.3, 0.005, 0);

    // Throws ParameterError naming the first out-of-range field.
    void validate() const;
};

nlohmann::json to_json(const PipelineConfig& config);
// Unknown keys and wrongly typed values throw ParameterError. Missing keys
// keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::string& path);

nlohmann::json to_json(const PlantedConfig& config);
PlantedConfig planted_from_json(const nlohmann::json& j);

// Lowercase hex SHA-256 of a file's bytes. Throws IoError.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view bytes);

// Writes `content` to a sibling temporary file, flushes and renames it over
// `path`, so readers see either the old file or the complete new one.
void write_atomic(const std::filesystem::path& path, std::string_view content);

struct StageRecord {
    std::map<std::string, std::string> inputs;   // path -> sha256
    std::map<std::string, std::string> outputs;  // run-dir relative path -> sha256
    nlohmann::json parameters;
    nlohmann::json counts;
    double wall_clock_seconds = 0.0;
};

// manifest.json in the run directory; one record per completed stage.
class ArtifactManifest {
public:
    static ArtifactManifest load(const std::filesystem::path& run_dir);
    void save(const std::filesystem::path& run_dir) const;

    const StageRecord* find(Stage stage) const;
    void put(Stage stage, StageRecord record);
    void erase(Stage stage);

    // Hash of every stage output, for determinism comparisons.
    std::map<std::string, std::string> output_hashes() const;

    nlohmann::json to_json() const;
    static ArtifactManifest from_json(const nlohmann::json& j);

private:
    std::map<std::string, StageRecord> stages_;
};

// Exclusive per-run-directory lock held for the lifetime of the object.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    int fd_ = -1;
};

struct StageResult {
    Stage stage;
    StageRecord record;
    std::vector<std::string> warnings;
};

// Verifies upstream artifacts, runs one stage, writes its outputs atomically
// and records it in the manifest. Throws UsageError for missing user inputs
// and StalenessError when an upstream stage is missing or its artifacts no
// longer match the manifest.
StageResult run_stage(Stage stage, const PipelineConfig& config);

// Runs every stage in order (Synth only for synthetic inputs).
std::vector<StageResult> run_all(const PipelineConfig& config);

// Assembles the report bundle from a completed run directory without
// writing anything. Throws StalenessError for an incomplete run.
nlohmann::json report(const std::filesystem::path& run_dir);

}  // namespace interlock
