#include "synergy/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy::complexity {
namespace {

std::optional<std::size_t> find_sorted(const std::vector<std::string>& codes, std::string_view code) {
    auto it = std::lower_bound(codes.begin(), codes.end(), code);
    if (it == codes.end() || *it != code) return std::nullopt;
    return static_cast<std::size_t>(it - codes.begin());
}

}  // namespace

std::optional<std::size_t> ExportMatrix::country_index(std::string_view code) const {
    return find_sorted(countries, code);
}

std::optional<std::size_t> ExportMatrix::product_index(std::string_view code) const {
    return find_sorted(products, code);
}

ExportMatrix ExportMatrix::make(std::vector<std::string> countries, std::vector<std::string> products,
                                Eigen::MatrixXd values) {
    if (values.rows() != static_cast<Eigen::Index>(countries.size()) ||
        values.cols() != static_cast<Eigen::Index>(products.size()))
        throw DomainError("export matrix dimensions do not match code lists");
    if (!values.allFinite() || (values.size() > 0 && values.minCoeff() < 0.0))
        throw DomainError("export values must be finite and non-negative");

    // Keep both axes sorted so lookups are binary searches.
    auto order = [](const std::vector<std::string>& codes) {
        std::vector<Eigen::Index> idx(codes.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Eigen::Index>(i);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return codes[a] < codes[b]; });
        for (std::size_t i = 1; i < idx.size(); ++i)
            if (codes[idx[i]] == codes[idx[i - 1]]) throw DomainError("duplicate code " + codes[idx[i]]);
        return idx;
    };
    auto ri = order(countries);
    auto ci = order(products);
    ExportMatrix out;
    out.values.resize(values.rows(), values.cols());
    for (std::size_t r = 0; r < ri.size(); ++r) {
        out.countries.push_back(countries[ri[r]]);
        for (std::size_t c = 0; c < ci.size(); ++c) out.values(r, c) = values(ri[r], ci[c]);
    }
    for (auto c : ci) out.products.push_back(products[c]);
    return out;
}

ExportMatrix read_exports_csv(std::istream& in) {
    csv::Reader reader(in);
    csv::read_header(reader, {"country", "product", "value"}, "exports");
    std::map<std::pair<std::string, std::string>, double> cells;
    std::map<std::string, int> countries, products;
    csv::Row row;
    while (reader.next(row)) {
        if (row.size() != 3) throw ParseError("expected 3 columns", reader.line());
        auto country = csv::trim(row[0]);
        auto product = csv::trim(row[1]);
        if (country.empty() || product.empty()) throw ParseError("empty code", reader.line());
        double v = csv::parse_double(row[2], reader.line());
        if (!(v >= 0.0) || !std::isfinite(v)) throw ParseError("negative or non-finite export value", reader.line());
        cells[{country, product}] += v;
        countries[country] = 0;
        products[product] = 0;
    }
    ExportMatrix x;
    for (auto& [c, i] : countries) {
        i = static_cast<int>(x.countries.size());
        x.countries.push_back(c);
    }
    for (auto& [p, j] : products) {
        j = static_cast<int>(x.products.size());
        x.products.push_back(p);
    }
    x.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.countries.size()),
                                     static_cast<Eigen::Index>(x.products.size()));
    for (const auto& [key, v] : cells) x.values(countries[key.first], products[key.second]) = v;
    return x;
}

RcaMatrix compute_rca(const ExportMatrix& x) {
    if (x.values.size() == 0) throw DomainError("empty export matrix");
    const double total = x.values.sum();
    if (!(total > 0.0)) throw DomainError("export matrix grand total must be positive");

    const Eigen::VectorXd product_totals = x.values.colwise().sum().transpose();
    const Eigen::VectorXd country_totals = x.values.rowwise().sum();

    RcaMatrix r{x.countries, x.products, Eigen::MatrixXd::Zero(x.values.rows(), x.values.cols())};
    for (Eigen::Index c = 0; c < x.values.rows(); ++c) {
        if (country_totals(c) <= 0.0) continue;
        const double country_share = country_totals(c) / total;
        for (Eigen::Index p = 0; p < x.values.cols(); ++p) {
            if (product_totals(p) <= 0.0) continue;
            r.values(c, p) = (x.values(c, p) / product_totals(p)) / country_share;
        }
    }
    return r;
}

BinaryExportMatrix binarize(const RcaMatrix& rca, double threshold) {
    if (!(threshold > 0.0)) throw DomainError("RCA threshold must be positive");
    BinaryExportMatrix m{rca.countries, rca.products, BinaryMatrix::Zero(rca.values.rows(), rca.values.cols())};
    for (Eigen::Index c = 0; c < rca.values.rows(); ++c)
        for (Eigen::Index p = 0; p < rca.values.cols(); ++p)
            m.values(c, p) = rca.values(c, p) >= threshold ? 1 : 0;
    return m;
}

ProductProximityMatrix product_proximity(const BinaryExportMatrix& m) {
    const Eigen::Index nc = m.values.rows();
    const Eigen::Index np = m.values.cols();
    // Integer co-occurrence counts keep every entry exact.
    Eigen::MatrixXi cooc = Eigen::MatrixXi::Zero(np, np);
    for (Eigen::Index c = 0; c < nc; ++c)
        for (Eigen::Index a = 0; a < np; ++a) {
            if (!m.values(c, a)) continue;
            for (Eigen::Index b = a; b < np; ++b)
                if (m.values(c, b)) ++cooc(a, b);
        }

    ProductProximityMatrix out{m.products, Eigen::MatrixXd::Zero(np, np)};
    for (Eigen::Index a = 0; a < np; ++a) {
        const int ka = cooc(a, a);
        if (ka == 0) continue;
        for (Eigen::Index b = a; b < np; ++b) {
            const int kb = cooc(b, b);
            if (kb == 0) continue;
            const double both = cooc(a, b);
            const double phi = std::min(both / ka, both / kb);
            out.phi(a, b) = phi;
            out.phi(b, a) = phi;
        }
    }
    return out;
}

void write_proximity_csv(std::ostream& out, const ProductProximityMatrix& p) {
    out << "product_a,product_b,phi\n";
    const auto n = static_cast<Eigen::Index>(p.products.size());
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a; b < n; ++b)
            csv::write_row(out, {p.products[a], p.products[b], csv::fixed(p.phi(a, b), 9)});
}

ProductProximityMatrix read_proximity_csv(std::istream& in) {
    csv::Reader reader(in);
    csv::read_header(reader, {"product_a", "product_b", "phi"}, "proximity");
    std::vector<std::tuple<std::string, std::string, double>> rows;
    std::map<std::string, Eigen::Index> index;
    csv::Row row;
    while (reader.next(row)) {
        if (row.size() != 3) throw ParseError("expected 3 columns", reader.line());
        double phi = csv::parse_double(row[2], reader.line());
        if (!(phi >= 0.0 && phi <= 1.0)) throw ParseError("phi outside [0,1]", reader.line());
        rows.emplace_back(csv::trim(row[0]), csv::trim(row[1]), phi);
        index[std::get<0>(rows.back())] = 0;
        index[std::get<1>(rows.back())] = 0;
    }
    ProductProximityMatrix p;
    for (auto& [code, i] : index) {
        i = static_cast<Eigen::Index>(p.products.size());
        p.products.push_back(code);
    }
    const auto n = static_cast<Eigen::Index>(p.products.size());
    p.phi = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [a, b, phi] : rows) {
        p.phi(index[a], index[b]) = phi;
        p.phi(index[b], index[a]) = phi;
    }
    return p;
}

}  // namespace synergy::complexity
