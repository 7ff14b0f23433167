#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "synergy/nomenclature.hpp"

namespace synergy::ioanalysis {

/// Inter-industry flows z_ij (row i supplies column j), final demand F and
/// total output X over one classification.
struct IOTable {
    std::vector<std::string> industries;
    Eigen::MatrixXd flows;
    Eigen::VectorXd final_demand;
    Eigen::VectorXd total_output;
};

struct IOLoadReport {
    std::vector<std::string> dropped_zero_output;
    std::size_t clamped_negative_flows = 0;
};

struct IOTableLoad {
    IOTable table;
    IOLoadReport report;
};

/// Reads `supplier_industry,buyer_industry,value` flows plus the
/// `industry,total_output,final_demand` sidecar. Negative flows are clamped to
/// zero and industries with non-positive output are dropped; both are reported.
IOTableLoad read_io_table(std::istream& flows, std::istream& industries);

/// Square coefficient matrix over `industries`.
struct TechCoefMatrix {
    std::vector<std::string> industries;
    Eigen::MatrixXd a;
};

/// a_ij = z_ij / X_j. Throws DomainError naming any industry with X_j <= 0.
TechCoefMatrix technical_coefficients(const IOTable& t);

/// Industries whose coefficient column sums to 1 or more.
std::vector<std::string> invertibility_violations(const TechCoefMatrix& a);

/// Solves (I - A) X = F by LU; never forms the inverse. Throws NumericalError
/// when the condition estimate exceeds 1e12 or the relative residual stays
/// above 1e-9 after one refinement step.
Eigen::VectorXd leontief_output(const TechCoefMatrix& a, const Eigen::VectorXd& f);

struct Projection {
    TechCoefMatrix matrix;
    /// Source industries with no mapping entry; their rows and columns drop out.
    std::vector<std::string> unmapped;
};

/// a'_kl = sum_ij w_ik a_ij w_jl. Output axes are the target codes reachable
/// from the mapping. Works for any square matrix over the source codes (flows
/// as well as coefficients). Throws ConfigError for an empty mapping.
Projection project_to_nace(const TechCoefMatrix& a, const nomenclature::WeightedMapping& w);

struct SupplierLink {
    std::string supplier;
    double intensity = 0.0;

    friend bool operator==(const SupplierLink&, const SupplierLink&) = default;
};

/// Buyer activity -> suppliers by descending intensity.
struct SupplierRelationTable {
    std::map<std::string, std::vector<SupplierLink>, std::less<>> entries;

    /// Suppliers of `buyer`, or nullptr when the activity is unknown.
    const std::vector<SupplierLink>* suppliers(std::string_view buyer) const;

    friend bool operator==(const SupplierRelationTable&, const SupplierRelationTable&) = default;
};

/// For each buyer column j: activities i with a_ij >= min_intensity, sorted by
/// descending a_ij then code, truncated to top_k.
SupplierRelationTable supplier_relations(const TechCoefMatrix& a, double min_intensity, std::size_t top_k);

/// `{buyer: [{supplier, intensity}, ...]}`
std::string relations_to_json(const SupplierRelationTable& r);
SupplierRelationTable relations_from_json(std::string_view text);

}  // namespace synergy::ioanalysis
