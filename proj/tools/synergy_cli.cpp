// synergy: build pipeline artifacts, query recommendations, serve the API.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "synergy/api.hpp"
#include "synergy/error.hpp"
#include "synergy/pipeline.hpp"
#include "synergy/serialize.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInternal = 1;
constexpr int kBadInput = 2;

synergy::api::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    using namespace synergy;

    CLI::App app{"Local supplier and productive-jump recommendation engine"};
    app.require_subcommand(1);
    std::string config_path;
    std::string data_dir = ".";
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "Flat JSON config file");
    app.add_option("--data-dir", data_dir, "Directory holding inputs and the artifacts/ store");
    app.add_option("--seed", seed, "Seed for every randomized stage (recorded in the manifest)");

    auto* build = app.add_subcommand("build", "Build a pipeline stage, or `all`");
    std::string stage;
    bool force = false;
    build->add_option("stage", stage, "Stage name or `all`")->required();
    build->add_flag("--force", force, "Recompute even when the cache is fresh");

    auto* recommend = app.add_subcommand("recommend", "Print the recommendation set of a facility as JSON");
    std::string facility_id;
    std::optional<double> radius_km, max_score;
    std::optional<std::size_t> k_per_activity;
    std::optional<std::string> territory;
    recommend->add_option("facility-id", facility_id)->required();
    recommend->add_option("--radius-km", radius_km);
    recommend->add_option("--max-score", max_score);
    recommend->add_option("--k", k_per_activity, "Neighbour activities considered per supplier activity");
    recommend->add_option("--territory", territory);

    auto* export_graph = app.add_subcommand("export-graph", "Print the synergy graph");
    std::string format = "json";
    export_graph->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));

    auto* serve = app.add_subcommand("serve", "Serve the read-only HTTP API");
    std::optional<std::string> host;
    std::optional<int> port;
    serve->add_option("--host", host);
    serve->add_option("--port", port);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kBadInput;
    }

    try {
        auto cfg = config_path.empty() ? pipeline::Config{} : pipeline::Config::load(config_path);
        if (seed) cfg.seed = *seed;
        pipeline::ArtifactStore store(data_dir);

        if (*build) {
            pipeline::StoreLock lock(store.root());
            std::vector<pipeline::StageOutcome> outcomes;
            if (stage == "all") {
                outcomes = pipeline::run_all(store, cfg, {force});
            } else {
                outcomes.push_back(pipeline::run_stage(store, stage, cfg, {force}));
            }
            for (const auto& o : outcomes)
                std::cerr << o.stage << ": " << (o.cache_hit ? "cached" : "built") << '\n';
            return kOk;
        }

        if (*recommend) {
            const auto engine = pipeline::load_engine(store);
            auto rc = cfg.recommend_config();
            if (radius_km) rc.radius_km = *radius_km;
            if (max_score) rc.max_score = *max_score;
            if (k_per_activity) rc.k_per_activity = *k_per_activity;
            if (territory) rc.territory = *territory;
            if (rc.radius_km && *rc.radius_km < 0.0) {
                std::cerr << "error: --radius-km must be non-negative\n";
                return kBadInput;
            }
            if (!engine.registry().find(facility_id)) {
                std::cerr << "error: unknown facility '" << facility_id << "'\n";
                return kBadInput;
            }
            const auto set = engine.recommend(facility_id, rc);
            for (const auto& note : set.notes) std::cerr << "note: " << note << '\n';
            std::cout << serialize::dump(serialize::to_json(set));
            return kOk;
        }

        if (*export_graph) {
            std::ifstream in(store.verified(format == "json" ? "graph.json" : "graph_edges.csv"), std::ios::binary);
            std::cout << in.rdbuf();
            return kOk;
        }

        if (*serve) {
            auto state = std::make_shared<const api::ApiState>(api::load_state(store, cfg));
            api::Server server(state);
            const auto bound = server.bind(host.value_or(cfg.api_host), port.value_or(cfg.api_port));
            if (bound < 0) {
                std::cerr << "error: cannot bind " << host.value_or(cfg.api_host) << ':'
                          << port.value_or(cfg.api_port) << '\n';
                return kInternal;
            }
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << host.value_or(cfg.api_host) << ':' << bound << '\n';
            server.run();
            g_server = nullptr;
            return kOk;
        }
    } catch (const pipeline::MissingUpstreamError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInternal;
    }
    return kOk;
}
