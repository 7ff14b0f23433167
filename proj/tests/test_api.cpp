#include <regex>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "synergy/api.hpp"
#include "synergy/hash.hpp"
#include "synergy/serialize.hpp"
// After Eigen: <resolv.h> defines _res.
#include "httplib.h"

using namespace synergy;
using namespace synergy::api;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Enough of JSON Schema for the files under schemas/.
void validate(const json& schema, const json& v, const std::string& where, std::vector<std::string>& errors) {
    if (schema.contains("type")) {
        auto matches = [&](const std::string& t) {
            if (t == "object") return v.is_object();
            if (t == "array") return v.is_array();
            if (t == "string") return v.is_string();
            if (t == "integer") return v.is_number_integer();
            if (t == "number") return v.is_number();
            if (t == "null") return v.is_null();
            if (t == "boolean") return v.is_boolean();
            return false;
        };
        bool ok = false;
        if (schema["type"].is_array())
            for (const auto& t : schema["type"]) ok = ok || matches(t.get<std::string>());
        else
            ok = matches(schema["type"].get<std::string>());
        if (!ok) {
            errors.push_back(where + ": wrong type");
            return;
        }
    }
    if (schema.contains("enum") && std::find(schema["enum"].begin(), schema["enum"].end(), v) == schema["enum"].end())
        errors.push_back(where + ": not in enum");
    if (v.is_number()) {
        if (schema.contains("minimum") && v.get<double>() < schema["minimum"].get<double>())
            errors.push_back(where + ": below minimum");
        if (schema.contains("maximum") && v.get<double>() > schema["maximum"].get<double>())
            errors.push_back(where + ": above maximum");
    }
    if (v.is_string() && schema.contains("pattern") &&
        !std::regex_search(v.get<std::string>(), std::regex(schema["pattern"].get<std::string>())))
        errors.push_back(where + ": pattern mismatch");
    if (v.is_object()) {
        for (const auto& key : schema.value("required", json::array()))
            if (!v.contains(key.get<std::string>())) errors.push_back(where + ": missing " + key.get<std::string>());
        const auto props = schema.value("properties", json::object());
        for (const auto& [key, value] : v.items()) {
            if (props.contains(key)) validate(props[key], value, where + "." + key, errors);
            else if (schema.contains("additionalProperties")) {
                const auto& extra = schema["additionalProperties"];
                if (extra.is_boolean() && !extra.get<bool>()) errors.push_back(where + ": unexpected " + key);
                else if (extra.is_object()) validate(extra, value, where + "." + key, errors);
            }
        }
    }
    if (v.is_array() && schema.contains("items"))
        for (std::size_t i = 0; i < v.size(); ++i)
            validate(schema["items"], v[i], where + "[" + std::to_string(i) + "]", errors);
}

bool conforms(const std::string& schema_file, const std::string& body) {
    const auto schema = json::parse(testing::read_file(fs::path(SYNERGY_SOURCE_DIR) / "schemas" / schema_file));
    std::vector<std::string> errors;
    validate(schema, json::parse(body), "$", errors);
    for (const auto& e : errors) MESSAGE(schema_file << " " << e);
    return errors.empty();
}

// One built desk store shared by every test case.
struct Desk {
    testing::TempDir dir;
    pipeline::Config config;
    std::shared_ptr<const ApiState> state;

    Desk() {
        testing::copy_desk(dir.path());
        config = pipeline::Config::load(dir.path() / "config.json");
        pipeline::ArtifactStore store(dir.path());
        pipeline::run_all(store, config);
        state = std::make_shared<const ApiState>(load_state(store, config));
    }
    std::string cli(const std::string& args) const {
        return testing::run_cli("--config \"" + (dir.path() / "config.json").string() + "\" --data-dir \"" +
                                dir.path().string() + "\" " + args + " 2>/dev/null")
            .out;
    }
};

const Desk& desk() {
    static const Desk d;
    return d;
}

Response get(std::string_view path, const Query& q = {}) { return handle(*desk().state, path, q); }

}  // namespace

TEST_CASE("health") {
    const auto r = get("/health");
    CHECK(r.status == 200);
    CHECK(r.headers.at("Content-Type") == "application/json; charset=utf-8");
    CHECK(conforms("health.schema.json", r.body));
    const auto doc = json::parse(r.body);
    CHECK(doc["status"] == "ok");
    CHECK(doc["version"] == SYNERGY_VERSION);
    const auto manifest = json::parse(testing::read_file(desk().dir.path() / "artifacts" / "manifest.json"));
    CHECK(doc["artifact_hashes"].size() == manifest["artifacts"].size());
    for (const auto& [name, rec] : manifest["artifacts"].items()) {
        CHECK(doc["artifact_hashes"][name] == rec["hash"]);
        CHECK(sha256_file(desk().dir.path() / "artifacts" / name) == rec["hash"].get<std::string>());
    }
}

TEST_CASE("facilities") {
    const auto all = get("/facilities");
    CHECK(all.status == 200);
    CHECK(all.headers.at("X-Total-Count") == "30");
    CHECK(conforms("facility_page.schema.json", all.body));
    const auto doc = json::parse(all.body);
    CHECK(doc["items"].size() == 30);
    CHECK(doc["limit"] == kDefaultPageSize);
    std::vector<std::string> order;
    for (const auto& f : doc["items"]) order.push_back(f["id"]);
    CHECK(std::is_sorted(order.begin(), order.end()));

    const auto page = json::parse(get("/facilities", {{"limit", "7"}, {"offset", "25"}}).body);
    CHECK(page["items"].size() == 5);
    CHECK(page["items"][0]["id"] == "F26");

    const auto empty = get("/facilities", {{"limit", "0"}});
    CHECK(json::parse(empty.body)["items"].empty());
    CHECK(empty.headers.at("X-Total-Count") == "30");
    CHECK(json::parse(get("/facilities", {{"limit", "5000"}}).body)["limit"] == kMaxPageSize);

    const auto scoped = json::parse(get("/facilities", {{"territory", "74"}, {"activity", "22.29Z"}}).body);
    std::vector<std::string> expected;
    for (const auto& f : desk().state->engine.registry().all())
        if (f.territory == "74" && f.activity_code == "22.29") expected.push_back(f.id);
    std::vector<std::string> got;
    for (const auto& f : scoped["items"]) got.push_back(f["id"]);
    CHECK(got == expected);
    CHECK(got == std::vector<std::string>{"F03", "F24"});
    CHECK(scoped["items"][1]["lat"].is_null());

    for (const auto& [k, v] : std::map<std::string, std::string>{{"limit", "-1"}, {"offset", "x"}, {"limit", ""}}) {
        const auto bad = get("/facilities", {{k, v}});
        CHECK(bad.status == 400);
        CHECK(conforms("error.schema.json", bad.body));
    }
}

TEST_CASE("recommendations") {
    const auto r = get("/facilities/F01/recommendations");
    CHECK(r.status == 200);
    CHECK(conforms("recommendation_set.schema.json", r.body));
    CHECK(r.body == testing::read_file(fs::path(SYNERGY_SOURCE_DIR) / "tests" / "golden" / "recommend_F01.json"));
    CHECK(r.body == get("/facilities/F01/recommendations").body);

    CHECK(get("/facilities/NOPE/recommendations").status == 404);
    CHECK(get("/facilities/F01/recommendations", {{"radius_km", "-1"}}).status == 400);
    CHECK(get("/facilities/F01/recommendations", {{"radius_km", "far"}}).status == 400);
    CHECK(get("/facilities/F01/recommendations", {{"k", "-2"}}).status == 400);
    CHECK(get("/nowhere").status == 404);

    const auto narrow = get("/facilities/F01/recommendations", {{"radius_km", "0"}});
    const auto doc = json::parse(narrow.body);
    for (const auto& d : doc["direct"]) CHECK(d["distance_km"] == 0.0);
}

TEST_CASE("neighbors") {
    const auto& space = desk().state->engine.space();
    const auto r = get("/activities/22.29/neighbors", {{"k", "3"}, {"max_score", "1e6"}});
    CHECK(r.status == 200);
    CHECK(conforms("neighbors.schema.json", r.body));
    CHECK(r.body == serialize::dump(serialize::to_json(space.nearest("22.29", 3, 1e6))));

    // Brute force over every other embedded activity.
    std::vector<std::pair<double, std::string>> brute;
    const auto& vectors = space.vectors().vectors;
    const auto& self = vectors.at("22.29");
    for (const auto& [code, v] : vectors)
        if (code != "22.29")
            brute.emplace_back(testing::oracle_score(std::vector<double>(self.data(), self.data() + self.size()),
                                                     std::vector<double>(v.data(), v.data() + v.size())),
                               code);
    std::sort(brute.begin(), brute.end());
    const auto doc = json::parse(r.body);
    REQUIRE(doc.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(doc[i]["activity"] == brute[i].second);
        CHECK(doc[i]["score"] == brute[i].first);
    }

    CHECK(json::parse(get("/activities/22.29/neighbors", {{"k", "0"}}).body).empty());
    CHECK(get("/activities/2229/neighbors").status == 200);
    CHECK(get("/activities/99.99/neighbors").status == 404);
    CHECK(get("/activities/22.29/neighbors", {{"max_score", "x"}}).status == 400);
}

TEST_CASE("graph") {
    const auto all = get("/graph", {{"kind", "all"}});
    CHECK(all.status == 200);
    CHECK(conforms("graph.schema.json", all.body));
    CHECK(all.body == testing::read_file(desk().dir.path() / "artifacts" / "graph.json"));
    CHECK(get("/graph").body == all.body);

    const auto full = json::parse(all.body);
    const auto direct = json::parse(get("/graph", {{"kind", "direct"}}).body);
    json expected = json::array();
    for (const auto& e : full["edges"])
        if (e["kind"] == "direct") expected.push_back(e);
    CHECK(direct["edges"] == expected);
    CHECK(direct["nodes"] == full["nodes"]);
    const auto alternative = json::parse(get("/graph", {{"kind", "alternative"}}).body);
    CHECK(direct["edges"].size() + alternative["edges"].size() == full["edges"].size());

    const auto savoie = json::parse(get("/graph", {{"territory", "73"}}).body);
    for (const auto& n : savoie["nodes"]) CHECK(desk().state->engine.registry().find(n["id"].get<std::string>())->territory == "73");

    const auto none = get("/graph", {{"territory", "2A"}});
    CHECK(none.status == 200);
    CHECK(json::parse(none.body)["nodes"].empty());
    CHECK(get("/graph", {{"kind", "weird"}}).status == 400);

    ApiState bare{desk().state->engine, std::nullopt, desk().config, {}, "x"};
    CHECK(handle(bare, "/graph", {}).status == 503);
}

TEST_CASE("http server matches handle and the command line") {
    Server server(desk().state);
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread serving([&] { server.run(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    const auto r = client.Get("/facilities/F01/recommendations?radius_km=60&max_score=1.5");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->get_header_value("Content-Type") == "application/json; charset=utf-8");
    CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(r->body == get("/facilities/F01/recommendations", {{"radius_km", "60"}, {"max_score", "1.5"}}).body);
    CHECK(r->body == desk().cli("recommend F01 --radius-km 60 --max-score 1.5"));

    for (const char* id : {"F01", "F09", "F24", "F08"}) {
        const auto api = client.Get(std::string("/facilities/") + id + "/recommendations");
        REQUIRE(api);
        CHECK(api->body == desk().cli(std::string("recommend ") + id));
    }

    const auto page = client.Get("/facilities?territory=74");
    REQUIRE(page);
    CHECK(page->get_header_value("X-Total-Count") == "8");
    const auto missing = client.Get("/facilities/NOPE/recommendations");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(conforms("error.schema.json", missing->body));

    server.stop();
    serving.join();
}
