#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "synergy/recommender.hpp"

namespace synergy::pipeline {

/// Flat key/value settings, read from a JSON object whose keys are the
/// dotted names below. Unknown keys are rejected.
struct Config {
    double radius_km = 100.0;
    double max_score = 1.25;
    std::size_t k_per_activity = 5;
    double min_intensity = 0.01;
    std::size_t top_k = 20;
    int mds_m = 8;
    int mds_max_iters = 500;
    double mds_rel_tol = 1e-7;
    int mds_restarts = 8;
    std::uint64_t seed = 42;
    double rca_threshold = 1.0;
    std::string country = "FRA";
    std::string rank_by = "coefficient";
    std::optional<std::string> territory;
    std::string geocoder_url;
    std::size_t geocoder_concurrency = 4;
    std::string api_host = "127.0.0.1";
    int api_port = 8080;
    std::string cors_origin = "*";

    static Config load(const std::filesystem::path& path);
    static Config from_json(const nlohmann::json& doc);

    recommender::RecommendConfig recommend_config() const;
};

/// A stage cannot run because an upstream artifact has not been built.
class MissingUpstreamError : public std::runtime_error {
public:
    MissingUpstreamError(const std::string& artifact, const std::string& stage)
        : std::runtime_error("missing artifact '" + artifact + "': run `build " + stage + "` first"),
          stage_(stage) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// An artifact's bytes no longer match the hash recorded in the manifest.
class CorruptionError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArtifactRecord {
    std::string path;
    std::string hash;
    std::string stage;
    nlohmann::json params;
    /// Hashes of every input file and upstream artifact the stage read.
    std::map<std::string, std::string> upstream;
    /// Extra facts about the run (final stress, counts); not part of the cache key.
    nlohmann::json metadata;
};

/// Artifacts under <data-dir>/artifacts with a manifest.json index.
class ArtifactStore {
public:
    explicit ArtifactStore(std::filesystem::path data_dir);

    const std::filesystem::path& data_dir() const noexcept { return data_dir_; }
    std::filesystem::path root() const { return data_dir_ / "artifacts"; }
    std::filesystem::path manifest_path() const { return root() / "manifest.json"; }

    const std::map<std::string, ArtifactRecord>& artifacts() const noexcept { return artifacts_; }
    const ArtifactRecord* find(const std::string& name) const;

    /// Path of a recorded artifact after checking its bytes against the
    /// manifest. Throws MissingUpstreamError or CorruptionError.
    std::filesystem::path verified(const std::string& name) const;

    void record(const std::string& name, ArtifactRecord rec);
    void set_seed(std::uint64_t seed) { seed_ = seed; }
    std::optional<std::uint64_t> seed() const { return seed_; }
    void save() const;

private:
    std::filesystem::path data_dir_;
    std::map<std::string, ArtifactRecord> artifacts_;
    std::optional<std::uint64_t> seed_;
};

/// Exclusive ownership of a store for one pipeline run.
class StoreLock {
public:
    explicit StoreLock(const std::filesystem::path& root);
    ~StoreLock();
    StoreLock(const StoreLock&) = delete;
    StoreLock& operator=(const StoreLock&) = delete;

private:
    std::filesystem::path path_;
};

/// Stage names in dependency order.
const std::vector<std::string>& stage_names();

struct StageOutcome {
    std::string stage;
    bool cache_hit = false;
    std::map<std::string, std::string> outputs;
};

struct RunOptions {
    bool force = false;
};

/// Runs one stage, or reuses its outputs when parameters and upstream hashes
/// are unchanged. Throws ConfigError for an unknown stage name.
StageOutcome run_stage(ArtifactStore& store, const std::string& name, const Config& cfg, const RunOptions& opts = {});

/// Every stage in order.
std::vector<StageOutcome> run_all(ArtifactStore& store, const Config& cfg, const RunOptions& opts = {});

/// Recommendation engine over the built artifacts.
recommender::Engine load_engine(const ArtifactStore& store);

}  // namespace synergy::pipeline
