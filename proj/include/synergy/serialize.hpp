#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "synergy/embedding.hpp"
#include "synergy/facilities.hpp"
#include "synergy/recommender.hpp"

// JSON bodies shared by the CLI and the HTTP service; the shapes are
// documented in schemas/.
namespace synergy::serialize {

using Json = nlohmann::ordered_json;

/// Pretty-printed document followed by a newline.
std::string dump(const Json& doc);

Json to_json(const recommender::RecommendationSet& set);
Json to_json(const facilities::Facility& f);
Json to_json(const std::vector<embedding::Neighbor>& neighbors);

/// Node-link form: {nodes:[{id,activity,lat,lon}], edges:[{source,target,kind,weight,score?}]}
/// with source = supplier and target = buyer.
Json to_json(const recommender::SynergyGraph& g);
recommender::SynergyGraph graph_from_json(std::string_view text);

/// `source,target,kind,weight,score`
std::string graph_edges_csv(const recommender::SynergyGraph& g);

}  // namespace synergy::serialize
