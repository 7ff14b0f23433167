#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace synergy::complexity {

using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Country x product export values X_cp in currency units. Rows follow
/// `countries`, columns follow `products`; both code lists are kept sorted.
struct ExportMatrix {
    std::vector<std::string> countries;
    std::vector<std::string> products;
    Eigen::MatrixXd values;

    std::optional<std::size_t> country_index(std::string_view code) const;
    std::optional<std::size_t> product_index(std::string_view code) const;

    /// Builds a matrix from explicit axes; throws DomainError on negative or
    /// non-finite values or mismatched dimensions.
    static ExportMatrix make(std::vector<std::string> countries, std::vector<std::string> products,
                             Eigen::MatrixXd values);
};

/// Reads the long `country,product,value` CSV. Duplicate (country, product)
/// rows are summed.
ExportMatrix read_exports_csv(std::istream& in);

struct RcaMatrix {
    std::vector<std::string> countries;
    std::vector<std::string> products;
    Eigen::MatrixXd values;
};

struct BinaryExportMatrix {
    std::vector<std::string> countries;
    std::vector<std::string> products;
    BinaryMatrix values;
};

/// Symmetric co-export proximity between products, entries in [0, 1].
struct ProductProximityMatrix {
    std::vector<std::string> products;
    Eigen::MatrixXd phi;
};

/// Balassa index. Products nobody exports and countries exporting nothing
/// get RCA 0 instead of NaN. Throws DomainError on an empty or all-zero matrix.
RcaMatrix compute_rca(const ExportMatrix& x);

/// M_cp = 1 iff RCA_cp >= threshold.
BinaryExportMatrix binarize(const RcaMatrix& rca, double threshold = 1.0);

/// phi(p1, p2) = min(P(p1 | p2), P(p2 | p1)) over countries. Never-exported
/// products are isolated (phi = 0, including their diagonal).
ProductProximityMatrix product_proximity(const BinaryExportMatrix& m);

/// Upper triangle including the diagonal, `product_a,product_b,phi`.
void write_proximity_csv(std::ostream& out, const ProductProximityMatrix& p);
ProductProximityMatrix read_proximity_csv(std::istream& in);

}  // namespace synergy::complexity
