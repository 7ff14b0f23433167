#include "synergy/nomenclature.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <numeric>
#include <ostream>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy::nomenclature {

std::string normalize_code(std::string_view code) {
    std::string out;
    out.reserve(code.size());
    for (unsigned char c : code) {
        if (std::isspace(c)) continue;
        out += static_cast<char>(std::toupper(c));
    }
    return out;
}

const std::set<std::string>& known_systems() {
    static const std::set<std::string> systems{"BEA",   "NAICS", "NACE2",  "CPA21",
                                               "HS1992", "HS2017", "ISIC4", "NAF2"};
    return systems;
}

namespace {

void require_known(const std::string& system) {
    if (!known_systems().count(system)) throw ConfigError("unknown classification system '" + system + "'");
}

// Counts per source, then per (source, target).
struct OccurrenceTable {
    std::map<std::string, std::map<std::string, double>> counts;
    std::map<std::string, double> totals;

    explicit OccurrenceTable(const RawCorrespondence& raw) {
        for (const auto& [s, t] : raw.pairs) {
            counts[s][t] += 1.0;
            totals[s] += 1.0;
        }
    }
};

}  // namespace

CodeSystem RawCorrespondence::source_codes() const {
    CodeSystem cs{source_system, {}};
    for (const auto& p : pairs) cs.codes.insert(p.first);
    return cs;
}

CodeSystem RawCorrespondence::target_codes() const {
    CodeSystem cs{target_system, {}};
    for (const auto& p : pairs) cs.codes.insert(p.second);
    return cs;
}

RawCorrespondence parse_correspondence(std::istream& in, const std::string& source_system,
                                       const std::string& target_system) {
    require_known(source_system);
    require_known(target_system);
    RawCorrespondence raw{source_system, target_system, {}};
    csv::Reader reader(in);
    csv::read_header(reader, {"source", "target"}, "correspondence");
    csv::Row row;
    while (reader.next(row)) {
        if (row.size() != 2)
            throw ParseError("expected 2 columns, got " + std::to_string(row.size()), reader.line());
        auto s = normalize_code(row[0]);
        auto t = normalize_code(row[1]);
        if (s.empty() || t.empty()) throw ParseError("empty code", reader.line());
        raw.pairs.emplace_back(std::move(s), std::move(t));
    }
    return raw;
}

WeightedMapping WeightedMapping::from_weights(std::string source_system, std::string target_system,
                                              const std::map<std::string, std::map<std::string, double>>& weights) {
    WeightedMapping m(std::move(source_system), std::move(target_system));
    for (const auto& [source, targets] : weights) {
        double sum = 0.0;
        for (const auto& [t, w] : targets)
            if (w > 0.0) sum += w;
        if (!(sum > 0.0)) continue;
        auto& list = m.entries_[source];
        for (const auto& [t, w] : targets)
            if (w > 0.0) list.push_back({t, w / sum});
    }
    return m;
}

WeightedMapping WeightedMapping::from_occurrences(const RawCorrespondence& raw) {
    OccurrenceTable occ(raw);
    return from_weights(raw.source_system, raw.target_system, occ.counts);
}

WeightedMapping WeightedMapping::identity(const std::string& system, const std::set<std::string>& codes) {
    WeightedMapping m(system, system);
    for (const auto& c : codes) m.entries_[c] = {{c, 1.0}};
    return m;
}

const std::vector<WeightedTarget>* WeightedMapping::targets(std::string_view source) const {
    auto it = entries_.find(source);
    return it == entries_.end() ? nullptr : &it->second;
}

double WeightedMapping::weight(std::string_view source, std::string_view target) const {
    const auto* list = targets(source);
    if (!list) return 0.0;
    for (const auto& wt : *list)
        if (wt.code == target) return wt.weight;
    return 0.0;
}

std::set<std::string> WeightedMapping::target_codes() const {
    std::set<std::string> out;
    for (const auto& [s, list] : entries_)
        for (const auto& wt : list) out.insert(wt.code);
    return out;
}

MappingResult build_weighted_chain(const RawCorrespondence& bea_to_naics, const RawCorrespondence& naics_to_nace) {
    if (bea_to_naics.target_system != naics_to_nace.source_system)
        throw ConfigError("correspondence chain mismatch: " + bea_to_naics.target_system + " vs " +
                          naics_to_nace.source_system);

    OccurrenceTable first(bea_to_naics);
    OccurrenceTable second(naics_to_nace);

    MappingResult result;
    std::map<std::string, std::map<std::string, double>> raw_weights;
    for (const auto& [bea, naics_counts] : first.counts) {
        const double n_naics = first.totals.at(bea);
        double reached = 0.0;
        std::vector<std::string> dead_ends;
        auto& out = raw_weights[bea];
        for (const auto& [naics, o_naics] : naics_counts) {
            auto it = second.counts.find(naics);
            if (it == second.counts.end()) {
                dead_ends.push_back(naics);
                continue;
            }
            const double n_nace = second.totals.at(naics);
            for (const auto& [nace, o_nace] : it->second) {
                const double w = (o_naics / n_naics) * (o_nace / n_nace);
                out[nace] += w;
                reached += w;
            }
        }
        if (out.empty()) {
            raw_weights.erase(bea);
            std::string via;
            for (const auto& d : dead_ends) via += (via.empty() ? "" : " ") + d;
            result.unmapped.push_back({bea, "no " + naics_to_nace.target_system + " code reachable via " +
                                                bea_to_naics.target_system + " " + via});
        } else if (reached < 1.0 - 1e-12) {
            result.lost_mass[bea] = 1.0 - reached;
        }
    }
    result.mapping =
        WeightedMapping::from_weights(bea_to_naics.source_system, naics_to_nace.target_system, raw_weights);
    return result;
}

MappingResult compose_mappings(const WeightedMapping& m1, const WeightedMapping& m2) {
    if (m1.target_system() != m2.source_system())
        throw ConfigError("cannot compose " + m1.source_system() + "->" + m1.target_system() + " with " +
                          m2.source_system() + "->" + m2.target_system());
    MappingResult result;
    std::map<std::string, std::map<std::string, double>> weights;
    for (const auto& [a, mids] : m1.entries()) {
        double reached = 0.0;
        std::map<std::string, double> out;
        for (const auto& mid : mids) {
            const auto* targets = m2.targets(mid.code);
            if (!targets) continue;
            for (const auto& t : *targets) {
                out[t.code] += mid.weight * t.weight;
                reached += mid.weight * t.weight;
            }
        }
        if (out.empty()) {
            result.unmapped.push_back({a, "no " + m2.target_system() + " code reachable via " + m1.target_system()});
            continue;
        }
        if (reached < 1.0 - 1e-12) result.lost_mass[a] = 1.0 - reached;
        weights[a] = std::move(out);
    }
    result.mapping = WeightedMapping::from_weights(m1.source_system(), m2.target_system(), weights);
    return result;
}

void write_mapping_csv(std::ostream& out, const WeightedMapping& m) {
    out << "source,target,weight\n";
    for (const auto& [s, list] : m.entries())
        for (const auto& t : list) csv::write_row(out, {s, t.code, csv::fixed(t.weight, 9)});
}

WeightedMapping read_mapping_csv(std::istream& in, const std::string& source_system,
                                 const std::string& target_system) {
    csv::Reader reader(in);
    csv::read_header(reader, {"source", "target", "weight"}, "mapping");
    std::map<std::string, std::map<std::string, double>> weights;
    csv::Row row;
    while (reader.next(row)) {
        if (row.size() != 3) throw ParseError("expected 3 columns", reader.line());
        const double w = csv::parse_double(row[2], reader.line());
        if (!(w > 0.0 && w <= 1.0 + 1e-9)) throw ParseError("weight outside (0,1]", reader.line());
        weights[normalize_code(row[0])][normalize_code(row[1])] += w;
    }
    return WeightedMapping::from_weights(source_system, target_system, weights);
}

void write_unmapped_csv(std::ostream& out, const std::vector<UnmappedEntry>& unmapped) {
    out << "source,reason\n";
    for (const auto& u : unmapped) csv::write_row(out, {u.source, u.reason});
}

ProductWeightResult product_weights(const complexity::ExportMatrix& exports,
                                    const WeightedMapping& activity_to_products, const std::string& country) {
    const auto row = exports.country_index(country);
    if (!row) throw LookupError("country '" + country + "' not in export matrix");

    ProductWeightResult result;
    result.table.country = country;
    for (const auto& [activity, products] : activity_to_products.entries()) {
        std::vector<double> x;
        x.reserve(products.size());
        for (const auto& p : products) {
            const auto col = exports.product_index(p.code);
            x.push_back(col ? exports.values(static_cast<Eigen::Index>(*row), static_cast<Eigen::Index>(*col)) : 0.0);
        }
        const double total = std::accumulate(x.begin(), x.end(), 0.0);
        auto& out = result.table.entries[activity];
        if (total > 0.0) {
            for (std::size_t i = 0; i < products.size(); ++i)
                if (x[i] > 0.0) out.push_back({products[i].code, x[i] / total});
        } else {
            result.uniform_fallback.push_back(activity);
            const double u = 1.0 / static_cast<double>(products.size());
            for (const auto& p : products) out.push_back({p.code, u});
        }
    }
    return result;
}

void write_product_weights_csv(std::ostream& out, const ProductWeightTable& table) {
    out << "activity,product,lambda\n";
    for (const auto& [a, list] : table.entries)
        for (const auto& p : list) csv::write_row(out, {a, p.code, csv::fixed(p.weight, 9)});
}

ProductWeightTable read_product_weights_csv(std::istream& in, const std::string& country) {
    csv::Reader reader(in);
    csv::read_header(reader, {"activity", "product", "lambda"}, "product weights");
    std::map<std::string, std::map<std::string, double>> weights;
    csv::Row row;
    while (reader.next(row)) {
        if (row.size() != 3) throw ParseError("expected 3 columns", reader.line());
        const double w = csv::parse_double(row[2], reader.line());
        if (w < 0.0) throw ParseError("negative lambda", reader.line());
        weights[normalize_code(row[0])][normalize_code(row[1])] += w;
    }
    ProductWeightTable table{country, {}};
    const auto normalized = WeightedMapping::from_weights("NACE2", "HS2017", weights);
    for (const auto& [a, list] : normalized.entries())
        table.entries[a] = list;
    return table;
}

}  // namespace synergy::nomenclature
