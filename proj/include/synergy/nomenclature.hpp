#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synergy/complexity.hpp"

namespace synergy::nomenclature {

/// Strips all whitespace and upper-cases letters; leading zeros are kept.
std::string normalize_code(std::string_view code);

/// Classification systems the engine accepts ("BEA", "NAICS", "NACE2", ...).
const std::set<std::string>& known_systems();

struct CodeSystem {
    std::string name;
    std::set<std::string> codes;
};

/// Pairs as they occur in a correspondence table. Repeated pairs are
/// meaningful: each row is one occurrence.
struct RawCorrespondence {
    std::string source_system;
    std::string target_system;
    std::vector<std::pair<std::string, std::string>> pairs;

    CodeSystem source_codes() const;
    CodeSystem target_codes() const;
};

/// Reads a `source,target` CSV. Throws ConfigError for an unknown system name
/// and ParseError (with line number) for a malformed row.
RawCorrespondence parse_correspondence(std::istream& in, const std::string& source_system,
                                       const std::string& target_system);

struct WeightedTarget {
    std::string code;
    double weight = 0.0;

    friend bool operator==(const WeightedTarget&, const WeightedTarget&) = default;
};

/// Many-to-many concordance. Every source with targets has strictly positive
/// weights summing to 1, targets sorted by code.
class WeightedMapping {
public:
    WeightedMapping() = default;
    WeightedMapping(std::string source_system, std::string target_system)
        : source_system_(std::move(source_system)), target_system_(std::move(target_system)) {}

    /// Normalizes each source's weights to sum to 1 and drops non-positive
    /// ones. Sources left with no positive weight are omitted.
    static WeightedMapping from_weights(std::string source_system, std::string target_system,
                                        const std::map<std::string, std::map<std::string, double>>& weights);

    /// Occurrence-share weights: w(s -> t) = count(s, t) / count(s).
    static WeightedMapping from_occurrences(const RawCorrespondence& raw);

    static WeightedMapping identity(const std::string& system, const std::set<std::string>& codes);

    const std::string& source_system() const noexcept { return source_system_; }
    const std::string& target_system() const noexcept { return target_system_; }
    using Entries = std::map<std::string, std::vector<WeightedTarget>, std::less<>>;
    const Entries& entries() const noexcept { return entries_; }

    /// Targets of `source`, or nullptr when unmapped.
    const std::vector<WeightedTarget>* targets(std::string_view source) const;
    double weight(std::string_view source, std::string_view target) const;
    std::set<std::string> target_codes() const;

    friend bool operator==(const WeightedMapping&, const WeightedMapping&) = default;

private:
    std::string source_system_;
    std::string target_system_;
    Entries entries_;
};

struct UnmappedEntry {
    std::string source;
    std::string reason;
};

struct MappingResult {
    WeightedMapping mapping;
    std::vector<UnmappedEntry> unmapped;
    /// Weight mass dropped before renormalization, per surviving source.
    std::map<std::string, double> lost_mass;
};

/// BEA -> NAICS -> NACE weighting. Each hop weighs a branch by its
/// occurrence share, so w_k = sum over NAICS x of (1/n_NAICS) (o_k / n_NACE(x)),
/// which is 1 for a unique chain, o_i / n for a single fan-out, and the
/// two-level product for a double fan-out. Weights are renormalized per BEA
/// code over the NACE codes actually reached.
MappingResult build_weighted_chain(const RawCorrespondence& bea_to_naics, const RawCorrespondence& naics_to_nace);

/// weight(a -> c) = sum_b weight(a -> b) weight(b -> c), renormalized over
/// the surviving mass. Throws ConfigError when m1's target system is not
/// m2's source system.
MappingResult compose_mappings(const WeightedMapping& m1, const WeightedMapping& m2);

void write_mapping_csv(std::ostream& out, const WeightedMapping& m);
WeightedMapping read_mapping_csv(std::istream& in, const std::string& source_system, const std::string& target_system);
void write_unmapped_csv(std::ostream& out, const std::vector<UnmappedEntry>& unmapped);

/// Export-share weights lambda of each product within an activity for one
/// country; per activity the lambdas sum to 1.
struct ProductWeightTable {
    std::string country;
    std::map<std::string, std::vector<WeightedTarget>> entries;
};

struct ProductWeightResult {
    ProductWeightTable table;
    /// Activities whose products have no exports; they received uniform weights.
    std::vector<std::string> uniform_fallback;
};

/// lambda(a, p) = X_cp / sum_{q in a} X_cq over the products `a` maps to.
/// Products missing from the export matrix count as zero exports. Throws
/// LookupError when `country` is not in the matrix.
ProductWeightResult product_weights(const complexity::ExportMatrix& exports,
                                    const WeightedMapping& activity_to_products, const std::string& country);

/// `activity,product,lambda` with 9 decimals.
void write_product_weights_csv(std::ostream& out, const ProductWeightTable& table);
ProductWeightTable read_product_weights_csv(std::istream& in, const std::string& country);

}  // namespace synergy::nomenclature
