#include "synergy/serialize.hpp"

#include <cstdio>
#include <sstream>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy::serialize {
namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

Json to_json(const recommender::RecommendationSet& set) {
    Json direct = Json::array();
    for (const auto& d : set.direct)
        direct.push_back({{"facility", d.facility},
                          {"supplier_activity", d.supplier_activity},
                          {"intensity", d.intensity},
                          {"distance_km", optional_number(d.distance_km)}});
    Json alternative = Json::array();
    for (const auto& a : set.alternative)
        alternative.push_back({{"facility", a.facility},
                               {"own_activity", a.own_activity},
                               {"substituted_supplier_activity", a.substituted_supplier_activity},
                               {"proximity_score", a.proximity_score},
                               {"intensity", a.intensity},
                               {"distance_km", optional_number(a.distance_km)}});
    return {{"buyer", set.buyer}, {"direct", std::move(direct)}, {"alternative", std::move(alternative)}};
}

Json to_json(const facilities::Facility& f) {
    return {{"id", f.id},
            {"activity_code", f.activity_code},
            {"address", f.address},
            {"territory", f.territory},
            {"lat", f.coordinates ? Json(f.coordinates->lat) : Json(nullptr)},
            {"lon", f.coordinates ? Json(f.coordinates->lon) : Json(nullptr)},
            {"geocode_quality", std::string(facilities::to_string(f.quality))}};
}

Json to_json(const std::vector<embedding::Neighbor>& neighbors) {
    Json out = Json::array();
    for (const auto& n : neighbors) out.push_back({{"activity", n.activity}, {"score", n.score}});
    return out;
}

Json to_json(const recommender::SynergyGraph& g) {
    Json nodes = Json::array();
    for (const auto& n : g.nodes)
        nodes.push_back({{"id", n.id},
                         {"activity", n.activity},
                         {"lat", n.coordinates ? Json(n.coordinates->lat) : Json(nullptr)},
                         {"lon", n.coordinates ? Json(n.coordinates->lon) : Json(nullptr)}});
    Json edges = Json::array();
    for (const auto& e : g.edges) {
        Json edge = {{"source", e.supplier},
                     {"target", e.buyer},
                     {"kind", std::string(recommender::to_string(e.kind))},
                     {"weight", e.weight}};
        if (e.score) edge["score"] = *e.score;
        edges.push_back(std::move(edge));
    }
    return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

recommender::SynergyGraph graph_from_json(std::string_view text) {
    auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ParseError("graph: invalid JSON");
    recommender::SynergyGraph g;
    try {
        for (const auto& n : doc.at("nodes")) {
            recommender::GraphNode node{n.at("id").get<std::string>(), n.at("activity").get<std::string>(), {}};
            if (!n.at("lat").is_null()) node.coordinates = {n.at("lat").get<double>(), n.at("lon").get<double>()};
            g.nodes.push_back(std::move(node));
        }
        for (const auto& e : doc.at("edges")) {
            auto kind = recommender::edge_kind_from_string(e.at("kind").get<std::string>());
            if (!kind) throw ParseError("graph: unknown edge kind");
            recommender::GraphEdge edge{e.at("target").get<std::string>(), e.at("source").get<std::string>(), *kind,
                                        e.at("weight").get<double>(), std::nullopt};
            if (e.contains("score")) edge.score = e.at("score").get<double>();
            g.edges.push_back(std::move(edge));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("graph: ") + ex.what());
    }
    return g;
}

std::string graph_edges_csv(const recommender::SynergyGraph& g) {
    std::ostringstream out;
    out << "source,target,kind,weight,score\n";
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& e : g.edges)
        csv::write_row(out, {e.supplier, e.buyer, std::string(recommender::to_string(e.kind)), num(e.weight),
                             e.score ? num(*e.score) : ""});
    return out.str();
}

}  // namespace synergy::serialize
