#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "synergy/pipeline.hpp"
#include "synergy/recommender.hpp"

namespace synergy::api {

inline constexpr std::size_t kMaxPageSize = 1000;
inline constexpr std::size_t kDefaultPageSize = 100;

/// Everything the service reads. Built once at startup, never mutated.
struct ApiState {
    recommender::Engine engine;
    std::optional<recommender::SynergyGraph> graph;
    pipeline::Config config;
    std::map<std::string, std::string> artifact_hashes;
    std::string version;
};

/// Loads the engine and graph from a built store. The graph is optional; the
/// engine artifacts are required.
ApiState load_state(const pipeline::ArtifactStore& store, const pipeline::Config& config);

struct Response {
    int status = 200;
    std::string body;
    std::map<std::string, std::string> headers;
};

using Query = std::map<std::string, std::string>;

/// Routes a GET request. Pure: identical requests give identical responses.
Response handle(const ApiState& state, std::string_view path, const Query& query);

/// Blocking HTTP front end for `handle`.
class Server {
public:
    explicit Server(std::shared_ptr<const ApiState> state);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    bool run();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace synergy::api
