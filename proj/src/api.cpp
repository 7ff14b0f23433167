#include "synergy/api.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <cmath>
#include <set>

#include "httplib.h"
#include "synergy/error.hpp"
#include "synergy/facilities.hpp"
#include "synergy/serialize.hpp"

namespace synergy::api {

using serialize::Json;

ApiState load_state(const pipeline::ArtifactStore& store, const pipeline::Config& config) {
    ApiState state{pipeline::load_engine(store), std::nullopt, config, {}, SYNERGY_VERSION};
    if (store.find("graph.json")) {
        std::ifstream in(store.verified("graph.json"));
        std::ostringstream s;
        s << in.rdbuf();
        state.graph = serialize::graph_from_json(s.str());
    }
    for (const auto& [name, rec] : store.artifacts()) state.artifact_hashes[name] = rec.hash;
    return state;
}

namespace {

constexpr const char* kJson = "application/json; charset=utf-8";

struct BadRequest {
    std::string message;
};

Response json_response(int status, const Json& body) {
    return {status, serialize::dump(body), {{"Content-Type", kJson}}};
}

Response error(int status, const std::string& message) { return json_response(status, {{"error", message}}); }

std::optional<std::string> param(const Query& q, const std::string& key) {
    auto it = q.find(key);
    if (it == q.end()) return std::nullopt;
    return it->second;
}

std::size_t count_param(const Query& q, const std::string& key, std::size_t fallback) {
    auto v = param(q, key);
    if (!v) return fallback;
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (v->empty() || ec != std::errc() || ptr != v->data() + v->size())
        throw BadRequest{"'" + key + "' must be a non-negative integer"};
    return out;
}

double number_param(const Query& q, const std::string& key, double fallback) {
    auto v = param(q, key);
    if (!v) return fallback;
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (v->empty() || ec != std::errc() || ptr != v->data() + v->size() || !std::isfinite(out))
        throw BadRequest{"'" + key + "' must be a number"};
    return out;
}

// Splits "/a/b/c" into {"a","b","c"}.
std::vector<std::string_view> segments(std::string_view path) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < path.size()) {
        if (path[i] == '/') {
            ++i;
            continue;
        }
        auto j = path.find('/', i);
        if (j == std::string_view::npos) j = path.size();
        out.push_back(path.substr(i, j - i));
        i = j;
    }
    return out;
}

Response health(const ApiState& s) {
    Json hashes = Json::object();
    for (const auto& [name, hash] : s.artifact_hashes) hashes[name] = hash;
    return json_response(200, {{"status", "ok"}, {"version", s.version}, {"artifact_hashes", std::move(hashes)}});
}

Response list_facilities(const ApiState& s, const Query& q) {
    const auto limit = std::min(count_param(q, "limit", kDefaultPageSize), kMaxPageSize);
    const auto offset = count_param(q, "offset", 0);
    const auto territory = param(q, "territory");
    auto activity = param(q, "activity");
    if (activity)
        if (auto norm = facilities::normalize_activity_code(*activity)) activity = *norm;

    std::vector<const facilities::Facility*> matches;
    for (const auto& f : s.engine.registry().all()) {
        if (territory && f.territory != *territory) continue;
        if (activity && f.activity_code != *activity) continue;
        matches.push_back(&f);
    }
    Json items = Json::array();
    for (std::size_t i = offset; i < matches.size() && i - offset < limit; ++i)
        items.push_back(serialize::to_json(*matches[i]));
    auto r = json_response(200, {{"total", matches.size()}, {"limit", limit}, {"offset", offset}, {"items", items}});
    r.headers["X-Total-Count"] = std::to_string(matches.size());
    return r;
}

Response recommendations(const ApiState& s, std::string_view id, const Query& q) {
    auto cfg = s.config.recommend_config();
    cfg.radius_km = number_param(q, "radius_km", s.config.radius_km);
    if (*cfg.radius_km < 0.0) throw BadRequest{"'radius_km' must be non-negative"};
    cfg.max_score = number_param(q, "max_score", s.config.max_score);
    cfg.k_per_activity = count_param(q, "k", s.config.k_per_activity);
    if (auto t = param(q, "territory")) cfg.territory = *t;
    if (!s.engine.registry().find(id)) return error(404, "unknown facility '" + std::string(id) + "'");
    return json_response(200, serialize::to_json(s.engine.recommend(id, cfg)));
}

Response neighbors(const ApiState& s, std::string_view code, const Query& q) {
    const auto k = count_param(q, "k", s.config.k_per_activity);
    const auto max_score = number_param(q, "max_score", s.config.max_score);
    std::string activity(code);
    if (auto norm = facilities::normalize_activity_code(code)) activity = *norm;
    if (!s.engine.space().contains(activity)) return error(404, "activity '" + activity + "' has no vector");
    return json_response(200, serialize::to_json(s.engine.space().nearest(activity, k, max_score)));
}

Response graph(const ApiState& s, const Query& q) {
    const auto kind_text = param(q, "kind").value_or("all");
    std::optional<recommender::EdgeKind> kind;
    if (kind_text != "all") {
        kind = recommender::edge_kind_from_string(kind_text);
        if (!kind) throw BadRequest{"'kind' must be direct, alternative or all"};
    }
    if (!s.graph) return error(503, "graph artifact not built");
    const auto territory = param(q, "territory");

    recommender::SynergyGraph out;
    std::set<std::string_view> kept;
    for (const auto& n : s.graph->nodes) {
        if (territory) {
            const auto* f = s.engine.registry().find(n.id);
            if (!f || f->territory != *territory) continue;
        }
        kept.insert(n.id);
        out.nodes.push_back(n);
    }
    for (const auto& e : s.graph->edges) {
        if (kind && e.kind != *kind) continue;
        if (!kept.count(e.buyer) || !kept.count(e.supplier)) continue;
        out.edges.push_back(e);
    }
    return json_response(200, serialize::to_json(out));
}

}  // namespace

Response handle(const ApiState& state, std::string_view path, const Query& query) {
    try {
        const auto seg = segments(path);
        if (seg.size() == 1 && seg[0] == "health") return health(state);
        if (seg.size() == 1 && seg[0] == "facilities") return list_facilities(state, query);
        if (seg.size() == 3 && seg[0] == "facilities" && seg[2] == "recommendations")
            return recommendations(state, seg[1], query);
        if (seg.size() == 3 && seg[0] == "activities" && seg[2] == "neighbors") return neighbors(state, seg[1], query);
        if (seg.size() == 1 && seg[0] == "graph") return graph(state, query);
        return error(404, "no route for " + std::string(path));
    } catch (const BadRequest& e) {
        return error(400, e.message);
    } catch (const DomainError& e) {
        return error(400, e.what());
    } catch (const LookupError& e) {
        return error(404, e.what());
    }
}

struct Server::Impl {
    std::shared_ptr<const ApiState> state;
    httplib::Server http;
};

Server::Server(std::shared_ptr<const ApiState> state) : impl_(std::make_unique<Impl>()) {
    impl_->state = std::move(state);
    auto* impl = impl_.get();
    impl_->http.Get(R"(/.*)", [impl](const httplib::Request& req, httplib::Response& res) {
        Query q;
        for (const auto& [k, v] : req.params) q.emplace(k, v);
        Response r;
        try {
            r = handle(*impl->state, req.path, q);
        } catch (const std::exception& e) {
            r = error(500, e.what());
        }
        res.status = r.status;
        for (const auto& [k, v] : r.headers)
            if (k != "Content-Type") res.set_header(k, v);
        res.set_header("Access-Control-Allow-Origin", impl->state->config.cors_origin);
        res.set_content(r.body, kJson);
    });
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
    if (port == 0) return impl_->http.bind_to_any_port(host);
    return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool Server::run() { return impl_->http.listen_after_bind(); }

void Server::stop() { impl_->http.stop(); }

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace synergy::api
