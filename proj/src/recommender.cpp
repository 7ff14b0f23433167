#include "synergy/recommender.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <set>
#include <thread>
#include <tuple>

#include "synergy/error.hpp"

namespace synergy::recommender {

std::string_view to_string(EdgeKind k) { return k == EdgeKind::direct ? "direct" : "alternative"; }

std::optional<EdgeKind> edge_kind_from_string(std::string_view s) {
    if (s == "direct") return EdgeKind::direct;
    if (s == "alternative") return EdgeKind::alternative;
    return std::nullopt;
}

namespace {

// Unknown distances sort after every known one.
bool distance_less(const std::optional<double>& a, const std::optional<double>& b) {
    if (a && b) return *a < *b;
    return a.has_value() && !b.has_value();
}

bool direct_before(const DirectSupplier& a, const DirectSupplier& b) {
    if (a.intensity != b.intensity) return a.intensity > b.intensity;
    if (a.distance_km != b.distance_km) return distance_less(a.distance_km, b.distance_km);
    return a.facility < b.facility;
}

bool alternative_before(const AlternativeSupplier& a, const AlternativeSupplier& b) {
    if (a.proximity_score != b.proximity_score) return a.proximity_score < b.proximity_score;
    if (a.intensity != b.intensity) return a.intensity > b.intensity;
    if (a.distance_km != b.distance_km) return distance_less(a.distance_km, b.distance_km);
    if (a.facility != b.facility) return a.facility < b.facility;
    return a.substituted_supplier_activity < b.substituted_supplier_activity;
}

}  // namespace

Engine::Engine(facilities::Registry registry, ioanalysis::SupplierRelationTable relations,
               embedding::ActivitySpace space)
    : registry_(std::move(registry)),
      index_(registry_),
      relations_(std::move(relations)),
      space_(std::move(space)) {}

std::vector<Engine::Candidate> Engine::candidates(const facilities::Facility& buyer, const RecommendConfig& cfg) const {
    if (cfg.radius_km && !(*cfg.radius_km >= 0.0)) throw DomainError("radius_km must be non-negative");
    const bool spatial = cfg.radius_km.has_value() && buyer.coordinates.has_value();
    std::optional<std::string> territory = cfg.territory;
    if (!spatial && !territory) territory = buyer.territory;

    std::vector<Candidate> out;
    if (spatial) {
        for (const auto& hit : index_.radius_query(*buyer.coordinates, *cfg.radius_km)) {
            const auto* f = registry_.find(hit.id);
            if (f->id == buyer.id || (territory && f->territory != *territory)) continue;
            out.push_back({f, hit.distance_km});
        }
    } else {
        for (const auto& f : registry_.all()) {
            if (f.id == buyer.id || f.territory != *territory) continue;
            std::optional<double> d;
            if (buyer.coordinates && f.coordinates) d = facilities::haversine_km(*buyer.coordinates, *f.coordinates);
            out.push_back({&f, d});
        }
    }
    return out;
}

std::vector<DirectSupplier> Engine::direct_suppliers(const facilities::Facility& buyer, const RecommendConfig& cfg,
                                                     std::vector<std::string>* notes) const {
    std::vector<DirectSupplier> out;
    const auto* links = relations_.suppliers(buyer.activity_code);
    if (!links) {
        if (notes) notes->push_back("activity " + buyer.activity_code + " has no supplier relations");
        return out;
    }
    const auto pool = candidates(buyer, cfg);
    for (const auto& link : *links)
        for (const auto& c : pool)
            if (c.facility->activity_code == link.supplier)
                out.push_back({c.facility->id, link.supplier, link.intensity, c.distance_km});
    std::sort(out.begin(), out.end(), direct_before);
    return out;
}

std::vector<AlternativeSupplier> Engine::alternative_suppliers(const facilities::Facility& buyer,
                                                               const RecommendConfig& cfg,
                                                               const std::vector<DirectSupplier>& direct,
                                                               std::vector<std::string>* notes) const {
    std::vector<AlternativeSupplier> out;
    const auto* links = relations_.suppliers(buyer.activity_code);
    if (!links) return out;

    std::set<std::string_view> taken;
    for (const auto& d : direct) taken.insert(d.facility);
    const auto pool = candidates(buyer, cfg);

    std::map<std::string_view, AlternativeSupplier> best;
    for (const auto& link : *links) {
        if (!space_.contains(link.supplier)) {
            if (notes) notes->push_back("supplier activity " + link.supplier + " has no vector");
            continue;
        }
        for (const auto& nb : space_.nearest(link.supplier, cfg.k_per_activity, cfg.max_score)) {
            for (const auto& c : pool) {
                if (c.facility->activity_code != nb.activity || taken.count(c.facility->id)) continue;
                AlternativeSupplier a{c.facility->id, nb.activity, link.supplier, nb.score, link.intensity,
                                      c.distance_km};
                auto [it, inserted] = best.try_emplace(c.facility->id, a);
                if (!inserted && alternative_before(a, it->second)) it->second = std::move(a);
            }
        }
    }
    for (auto& [id, a] : best) out.push_back(std::move(a));
    std::sort(out.begin(), out.end(), alternative_before);
    return out;
}

RecommendationSet Engine::recommend(std::string_view facility_id, const RecommendConfig& cfg) const {
    const auto* buyer = registry_.find(facility_id);
    if (!buyer) throw LookupError("unknown facility '" + std::string(facility_id) + "'");
    RecommendationSet set;
    set.buyer = buyer->id;
    set.direct = direct_suppliers(*buyer, cfg, &set.notes);
    set.alternative = alternative_suppliers(*buyer, cfg, set.direct, &set.notes);
    return set;
}

SynergyGraph Engine::build_synergy_graph(const RecommendConfig& cfg, const std::optional<std::string>& territory,
                                         unsigned threads) const {
    std::vector<const facilities::Facility*> buyers;
    for (const auto& f : registry_.all())
        if (!territory || f.territory == *territory) buyers.push_back(&f);

    std::vector<RecommendationSet> results(buyers.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < buyers.size();) results[i] = recommend(buyers[i]->id, cfg);
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    {
        std::vector<std::jthread> pool;
        const auto n = std::min<std::size_t>(threads, buyers.size());
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    }

    SynergyGraph g;
    std::set<std::string> node_ids;
    for (const auto* b : buyers) node_ids.insert(b->id);
    for (const auto& r : results) {
        for (const auto& d : r.direct) {
            node_ids.insert(d.facility);
            g.edges.push_back({r.buyer, d.facility, EdgeKind::direct, d.intensity, std::nullopt});
        }
        for (const auto& a : r.alternative) {
            node_ids.insert(a.facility);
            g.edges.push_back({r.buyer, a.facility, EdgeKind::alternative, a.intensity, a.proximity_score});
        }
    }
    for (const auto& id : node_ids) {
        const auto* f = registry_.find(id);
        g.nodes.push_back({f->id, f->activity_code, f->coordinates});
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
        return std::tie(a.buyer, a.supplier, a.kind) < std::tie(b.buyer, b.supplier, b.kind);
    });
    return g;
}

}  // namespace synergy::recommender
