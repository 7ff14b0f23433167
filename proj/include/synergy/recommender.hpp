#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "synergy/embedding.hpp"
#include "synergy/facilities.hpp"
#include "synergy/ioanalysis.hpp"

namespace synergy::recommender {

/// Locality and productive-jump policy. When the buyer has coordinates and
/// radius_km is set, candidates are the indexed facilities within the radius.
/// A territory code restricts candidates further; a buyer without coordinates
/// (or with no radius) falls back to its own territory.
struct RecommendConfig {
    std::optional<double> radius_km = 100.0;
    std::optional<std::string> territory;
    double max_score = 1.25;
    std::size_t k_per_activity = 5;
};

struct DirectSupplier {
    std::string facility;
    std::string supplier_activity;
    double intensity = 0.0;
    /// Unknown when either side has no coordinates (territory mode only).
    std::optional<double> distance_km;

    friend bool operator==(const DirectSupplier&, const DirectSupplier&) = default;
};

struct AlternativeSupplier {
    std::string facility;
    std::string own_activity;
    std::string substituted_supplier_activity;
    double proximity_score = 0.0;
    double intensity = 0.0;
    std::optional<double> distance_km;

    friend bool operator==(const AlternativeSupplier&, const AlternativeSupplier&) = default;
};

struct RecommendationSet {
    std::string buyer;
    std::vector<DirectSupplier> direct;
    std::vector<AlternativeSupplier> alternative;
    /// Diagnostics (missing relations or vectors); not part of the JSON body.
    std::vector<std::string> notes;
};

enum class EdgeKind { direct, alternative };
std::string_view to_string(EdgeKind k);
std::optional<EdgeKind> edge_kind_from_string(std::string_view s);

struct GraphNode {
    std::string id;
    std::string activity;
    std::optional<facilities::Coordinates> coordinates;

    friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct GraphEdge {
    std::string buyer;
    std::string supplier;
    EdgeKind kind = EdgeKind::direct;
    /// Supplier-relation intensity.
    double weight = 0.0;
    /// Activity proximity score, alternative edges only.
    std::optional<double> score;

    friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

/// Nodes sorted by id; edges sorted by (buyer, supplier, kind).
struct SynergyGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;

    friend bool operator==(const SynergyGraph&, const SynergyGraph&) = default;
};

/// Immutable recommendation artifacts. Safe for concurrent queries.
class Engine {
public:
    Engine(facilities::Registry registry, ioanalysis::SupplierRelationTable relations,
           embedding::ActivitySpace space);

    const facilities::Registry& registry() const noexcept { return registry_; }
    const facilities::SpatialIndex& index() const noexcept { return index_; }
    const ioanalysis::SupplierRelationTable& relations() const noexcept { return relations_; }
    const embedding::ActivitySpace& space() const noexcept { return space_; }

    /// In-range facilities with a supplier activity of the buyer, ordered by
    /// descending intensity, ascending distance, id.
    std::vector<DirectSupplier> direct_suppliers(const facilities::Facility& buyer, const RecommendConfig& cfg,
                                                 std::vector<std::string>* notes = nullptr) const;

    /// In-range facilities whose activity is among the k_per_activity nearest
    /// activities (score <= max_score) of a supplier activity, minus the
    /// facilities in `direct`. One entry per facility, the best by the order:
    /// ascending score, descending intensity, ascending distance, id.
    std::vector<AlternativeSupplier> alternative_suppliers(const facilities::Facility& buyer,
                                                           const RecommendConfig& cfg,
                                                           const std::vector<DirectSupplier>& direct,
                                                           std::vector<std::string>* notes = nullptr) const;

    /// Throws LookupError for an unknown facility, DomainError for a negative radius.
    RecommendationSet recommend(std::string_view facility_id, const RecommendConfig& cfg) const;

    /// Runs recommend for every facility (of `territory` when given) on up to
    /// `threads` workers and merges the results in a fixed order.
    SynergyGraph build_synergy_graph(const RecommendConfig& cfg, const std::optional<std::string>& territory = {},
                                     unsigned threads = 0) const;

private:
    struct Candidate {
        const facilities::Facility* facility;
        std::optional<double> distance_km;
    };
    std::vector<Candidate> candidates(const facilities::Facility& buyer, const RecommendConfig& cfg) const;

    facilities::Registry registry_;
    facilities::SpatialIndex index_;
    ioanalysis::SupplierRelationTable relations_;
    embedding::ActivitySpace space_;
};

}  // namespace synergy::recommender
