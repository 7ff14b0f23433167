#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "synergy/error.hpp"
#include "synergy/hash.hpp"
#include "synergy/pipeline.hpp"
#include "synergy/serialize.hpp"

using namespace synergy;
using namespace synergy::pipeline;
namespace fs = std::filesystem;

namespace {

Config desk_config() { return Config::load(testing::desk_fixture() / "config.json"); }

std::string cli(const fs::path& dir, const std::string& args) {
    return "--config \"" + (dir / "config.json").string() + "\" --data-dir \"" + dir.string() + "\" " + args;
}

std::map<std::string, std::string> hashes(const ArtifactStore& store) {
    std::map<std::string, std::string> out;
    for (const auto& [name, rec] : store.artifacts()) out[name] = rec.hash;
    return out;
}

}  // namespace

TEST_CASE("config") {
    const auto c = desk_config();
    CHECK(c.radius_km == 100.0);
    CHECK(c.mds_m == 8);
    CHECK(c.seed == 42);
    CHECK(c.country == "FRA");
    const auto rc = c.recommend_config();
    CHECK(rc.radius_km == 100.0);
    CHECK(rc.max_score == 1.25);
    CHECK(rc.k_per_activity == 5);

    CHECK_THROWS_AS(Config::from_json(nlohmann::json{{"bogus", 1}}), ConfigError);
    CHECK_THROWS_AS(Config::from_json(nlohmann::json{{"radius_km", "far"}}), ConfigError);
    CHECK_THROWS_AS(Config::from_json(nlohmann::json{{"radius_km", -1}}), ConfigError);
    CHECK_THROWS_AS(Config::from_json(nlohmann::json{{"rank_by", "vibes"}}), ConfigError);
    CHECK_THROWS_AS(Config::from_json(nlohmann::json{{"mds.restarts", 0}}), ConfigError);
    CHECK(Config::from_json(nlohmann::json{{"territory", "74"}}).recommend_config().territory == "74");
    CHECK(Config::from_json(nlohmann::json::object()).top_k == 20);
}

TEST_CASE("stage caching") {
    testing::TempDir dir;
    testing::copy_desk(dir.path());
    ArtifactStore store(dir.path());
    auto cfg = desk_config();

    CHECK_THROWS_AS(run_stage(store, "nope", cfg), ConfigError);
    try {
        run_stage(store, "embed", cfg);
        FAIL("expected MissingUpstreamError");
    } catch (const MissingUpstreamError& e) {
        CHECK(e.stage() == "proximity");
        CHECK(std::string(e.what()).find("build proximity") != std::string::npos);
    }

    CHECK_FALSE(run_stage(store, "proximity", cfg).cache_hit);
    const auto first = store.find("proximity.csv")->hash;
    CHECK(run_stage(store, "proximity", cfg).cache_hit);

    SUBCASE("forced recompute reproduces the cached bytes") {
        const auto forced = run_stage(store, "proximity", cfg, {.force = true});
        CHECK_FALSE(forced.cache_hit);
        CHECK(store.find("proximity.csv")->hash == first);
    }
    SUBCASE("parameter change misses") {
        cfg.rca_threshold = 2.0;
        CHECK_FALSE(run_stage(store, "proximity", cfg).cache_hit);
        CHECK(store.find("proximity.csv")->params["rca_threshold"] == 2.0);
    }
    SUBCASE("input change misses") {
        std::ofstream(dir.path() / "exports.csv", std::ios::app) << "FRA,0201,1000\n";
        CHECK_FALSE(run_stage(store, "proximity", cfg).cache_hit);
    }
    SUBCASE("downstream reruns after upstream changes") {
        CHECK_FALSE(run_stage(store, "embed", cfg).cache_hit);
        CHECK(run_stage(store, "embed", cfg).cache_hit);
        cfg.seed = 7;
        CHECK_FALSE(run_stage(store, "embed", cfg).cache_hit);
        cfg.seed = 42;
        cfg.rca_threshold = 0.5;
        run_stage(store, "proximity", cfg);
        CHECK_FALSE(run_stage(store, "embed", cfg).cache_hit);
    }
    SUBCASE("corruption is detected") {
        std::ofstream(store.root() / "proximity.csv", std::ios::app) << "tampered\n";
        CHECK_THROWS_AS(run_stage(store, "embed", cfg), CorruptionError);
        CHECK_THROWS_AS(store.verified("proximity.csv"), CorruptionError);
    }
    SUBCASE("manifest persists") {
        const ArtifactStore reopened(dir.path());
        REQUIRE(reopened.find("proximity.csv"));
        CHECK(reopened.find("proximity.csv")->hash == first);
        CHECK(sha256_file(reopened.root() / "proximity.csv") == first);
        CHECK(reopened.find("proximity.csv")->upstream.count("input:exports.csv") == 1);
    }
}

TEST_CASE("full pipeline, determinism and cache soundness") {
    testing::TempDir a, b;
    testing::copy_desk(a.path());
    testing::copy_desk(b.path());
    const auto cfg = desk_config();
    ArtifactStore sa(a.path()), sb(b.path());

    const auto outcomes = run_all(sa, cfg);
    CHECK(outcomes.size() == stage_names().size());
    for (const auto& o : outcomes) CHECK_FALSE(o.cache_hit);
    run_all(sb, cfg);
    CHECK(hashes(sa) == hashes(sb));
    CHECK(testing::read_file(sa.root() / "graph.json") == testing::read_file(sb.root() / "graph.json"));
    CHECK(sa.seed() == 42u);
    CHECK(sa.find("embedding.csv")->params["seed"] == 42);

    for (const auto& o : run_all(sa, cfg)) CHECK(o.cache_hit);

    const auto before = hashes(sa);
    for (const auto& stage : stage_names()) run_stage(sa, stage, cfg, {.force = true});
    CHECK(hashes(sa) == before);

    const auto graph = serialize::graph_from_json(testing::read_file(sa.root() / "graph.json"));
    CHECK(graph.nodes.size() == 30);
    CHECK_FALSE(graph.edges.empty());

    const auto engine = load_engine(sa);
    CHECK(engine.registry().size() == 30);
    CHECK(engine.registry().find("F03")->activity_code == "22.29");
    CHECK(engine.registry().find("F24")->quality == facilities::GeocodeQuality::failed);
    CHECK(engine.index().size() == 29);
    CHECK(engine.relations().suppliers("32.30") != nullptr);
    CHECK(engine.space().contains("22.29"));

    const auto report = testing::read_file(sa.root() / "ingest_report.csv");
    CHECK(report.find("F05") != std::string::npos);
    CHECK(report.find("F31") != std::string::npos);
    const auto unmapped = testing::read_file(sa.root() / "unmapped.csv");
    CHECK(unmapped.find("111200") != std::string::npos);
}

TEST_CASE("store lock") {
    testing::TempDir dir;
    const ArtifactStore store(dir.path());
    {
        StoreLock held(store.root());
        CHECK_THROWS(StoreLock(store.root()));
        CHECK(fs::exists(store.root() / ".lock"));
    }
    CHECK_FALSE(fs::exists(store.root() / ".lock"));
    StoreLock again(store.root());
}

TEST_CASE("command line") {
    testing::TempDir dir;
    testing::copy_desk(dir.path());
    const auto& d = dir.path();

    CHECK(testing::run_cli(cli(d, "recommend F01 2>/dev/null")).exit_code == 2);
    CHECK(testing::run_cli(cli(d, "build nope 2>/dev/null")).exit_code == 2);
    CHECK(testing::run_cli(cli(d, "build embed 2>/dev/null")).exit_code == 2);
    CHECK(testing::run_cli("--data-dir \"" + d.string() + "\" --config /no/such/config.json build all 2>/dev/null").exit_code != 0);

    testing::write_file(d / "bad.json", R"({"radius": 5})");
    CHECK(testing::run_cli("--config \"" + (d / "bad.json").string() + "\" --data-dir \"" + d.string() +
                           "\" build all 2>/dev/null")
              .exit_code == 2);

    REQUIRE(testing::run_cli(cli(d, "--seed 42 build all 2>/dev/null")).exit_code == 0);
    CHECK_FALSE(fs::exists(d / "artifacts" / ".lock"));

    SUBCASE("golden recommendation") {
        const auto r = testing::run_cli(cli(d, "recommend F01 2>/dev/null"));
        CHECK(r.exit_code == 0);
        CHECK(r.out == testing::read_file(fs::path(SYNERGY_SOURCE_DIR) / "tests" / "golden" / "recommend_F01.json"));
    }
    SUBCASE("bad input exits 2") {
        CHECK(testing::run_cli(cli(d, "recommend NOPE 2>/dev/null")).exit_code == 2);
        CHECK(testing::run_cli(cli(d, "recommend F01 --radius-km -1 2>/dev/null")).exit_code == 2);
        CHECK(testing::run_cli(cli(d, "recommend F01 --radius-km abc 2>/dev/null")).exit_code == 2);
        CHECK(testing::run_cli(cli(d, "export-graph --format xml 2>/dev/null")).exit_code == 2);
    }
    SUBCASE("isolated facility at radius 0") {
        const auto r = testing::run_cli(cli(d, "recommend F08 --radius-km 0 2>/dev/null"));
        CHECK(r.exit_code == 0);
        const auto doc = nlohmann::json::parse(r.out);
        CHECK(doc["buyer"] == "F08");
        CHECK(doc["direct"].empty());
        CHECK(doc["alternative"].empty());
    }
    SUBCASE("facility without coordinates uses its territory") {
        const auto r = testing::run_cli(cli(d, "recommend F24 2>/dev/null"));
        CHECK(r.exit_code == 0);
        const auto doc = nlohmann::json::parse(r.out);
        for (const auto& e : doc["direct"]) CHECK(e["distance_km"].is_null());
    }
    SUBCASE("export graph") {
        const auto json = testing::run_cli(cli(d, "export-graph 2>/dev/null"));
        CHECK(json.exit_code == 0);
        CHECK(json.out == testing::read_file(d / "artifacts" / "graph.json"));
        const auto csv = testing::run_cli(cli(d, "export-graph --format csv 2>/dev/null"));
        CHECK(csv.out.rfind("source,target,kind,weight,score\n", 0) == 0);
    }
    SUBCASE("a held lock blocks a build") {
        testing::write_file(d / "artifacts" / ".lock", "1\n");
        CHECK(testing::run_cli(cli(d, "build all --force 2>/dev/null")).exit_code == 1);
        fs::remove(d / "artifacts" / ".lock");
    }
    SUBCASE("second build is cached") {
        const auto r = testing::run_cli(cli(d, "build all 2>&1"));
        CHECK(r.exit_code == 0);
        CHECK(r.out.find("built") == std::string::npos);
        CHECK(r.out.find("graph: cached") != std::string::npos);
    }
    SUBCASE("corrupted artifact is reported") {
        std::ofstream(d / "artifacts" / "registry.csv", std::ios::app) << "X,1,2\n";
        CHECK(testing::run_cli(cli(d, "recommend F01 2>/dev/null")).exit_code == 1);
    }
}
