#include "synergy/ioanalysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <set>

#include "json.hpp"

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy::ioanalysis {

IOTableLoad read_io_table(std::istream& flows, std::istream& industries) {
    using nomenclature::normalize_code;
    IOTableLoad load;

    std::map<std::string, std::pair<double, double>> sidecar;
    {
        csv::Reader reader(industries);
        csv::read_header(reader, {"industry", "total_output", "final_demand"}, "industries");
        csv::Row row;
        while (reader.next(row)) {
            if (row.size() != 3) throw ParseError("expected 3 columns", reader.line());
            auto code = normalize_code(row[0]);
            if (code.empty()) throw ParseError("empty industry code", reader.line());
            if (sidecar.count(code)) throw ParseError("duplicate industry " + code, reader.line());
            sidecar[code] = {csv::parse_double(row[1], reader.line()), csv::parse_double(row[2], reader.line())};
        }
    }

    std::map<std::string, Eigen::Index> index;
    for (const auto& [code, totals] : sidecar) {
        if (!(totals.first > 0.0)) {
            load.report.dropped_zero_output.push_back(code);
            continue;
        }
        index[code] = static_cast<Eigen::Index>(load.table.industries.size());
        load.table.industries.push_back(code);
    }
    const auto n = static_cast<Eigen::Index>(load.table.industries.size());
    load.table.flows = Eigen::MatrixXd::Zero(n, n);
    load.table.total_output.resize(n);
    load.table.final_demand.resize(n);
    for (const auto& [code, i] : index) {
        load.table.total_output(i) = sidecar[code].first;
        load.table.final_demand(i) = sidecar[code].second;
    }

    csv::Reader reader(flows);
    csv::read_header(reader, {"supplier_industry", "buyer_industry", "value"}, "io flows");
    csv::Row row;
    while (reader.next(row)) {
        if (row.size() != 3) throw ParseError("expected 3 columns", reader.line());
        auto s = normalize_code(row[0]);
        auto b = normalize_code(row[1]);
        double v = csv::parse_double(row[2], reader.line());
        if (!sidecar.count(s) || !sidecar.count(b))
            throw ParseError("industry not declared in sidecar: " + (sidecar.count(s) ? b : s), reader.line());
        auto is = index.find(s);
        auto ib = index.find(b);
        if (is == index.end() || ib == index.end()) continue;
        if (v < 0.0) {
            ++load.report.clamped_negative_flows;
            v = 0.0;
        }
        load.table.flows(is->second, ib->second) += v;
    }
    return load;
}

TechCoefMatrix technical_coefficients(const IOTable& t) {
    const auto n = static_cast<Eigen::Index>(t.industries.size());
    if (t.flows.rows() != n || t.flows.cols() != n || t.total_output.size() != n)
        throw DomainError("IO table dimensions inconsistent");
    for (Eigen::Index j = 0; j < n; ++j)
        if (!(t.total_output(j) > 0.0))
            throw DomainError("industry '" + t.industries[j] + "' has non-positive total output");
    TechCoefMatrix a{t.industries, t.flows};
    for (Eigen::Index j = 0; j < n; ++j) a.a.col(j) /= t.total_output(j);
    return a;
}

std::vector<std::string> invertibility_violations(const TechCoefMatrix& a) {
    std::vector<std::string> out;
    for (Eigen::Index j = 0; j < a.a.cols(); ++j)
        if (a.a.col(j).sum() >= 1.0) out.push_back(a.industries[j]);
    return out;
}

Eigen::VectorXd leontief_output(const TechCoefMatrix& a, const Eigen::VectorXd& f) {
    const Eigen::Index n = a.a.rows();
    if (a.a.cols() != n || f.size() != n) throw DomainError("Leontief system dimensions inconsistent");
    if (n == 0) return {};
    const Eigen::MatrixXd leontief = Eigen::MatrixXd::Identity(n, n) - a.a;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(leontief);
    const double rcond = lu.rcond();
    if (!(rcond >= 1e-12)) throw NumericalError("I - A is singular or ill-conditioned (rcond " + std::to_string(rcond) + ")");

    Eigen::VectorXd x = lu.solve(f);
    const double scale = f.lpNorm<Eigen::Infinity>();
    if (scale == 0.0) return Eigen::VectorXd::Zero(n);
    Eigen::VectorXd r = f - leontief * x;
    if (r.lpNorm<Eigen::Infinity>() / scale >= 1e-9) {
        x += lu.solve(r);
        r = f - leontief * x;
        if (r.lpNorm<Eigen::Infinity>() / scale >= 1e-9)
            throw NumericalError("Leontief solve residual above tolerance");
    }
    return x;
}

Projection project_to_nace(const TechCoefMatrix& a, const nomenclature::WeightedMapping& w) {
    if (w.entries().empty()) throw ConfigError("empty mapping for IO projection");
    Projection out;
    const auto targets = w.target_codes();
    out.matrix.industries.assign(targets.begin(), targets.end());
    std::map<std::string, Eigen::Index> tindex;
    for (const auto& code : out.matrix.industries)
        tindex.emplace(code, static_cast<Eigen::Index>(tindex.size()));

    // Sparse source -> target weight matrix W (n_source x n_target), a' = W^T A W.
    const auto ns = static_cast<Eigen::Index>(a.industries.size());
    Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(ns, static_cast<Eigen::Index>(targets.size()));
    for (Eigen::Index i = 0; i < ns; ++i) {
        const auto* list = w.targets(a.industries[i]);
        if (!list) {
            out.unmapped.push_back(a.industries[i]);
            continue;
        }
        for (const auto& t : *list) weights(i, tindex.at(t.code)) = t.weight;
    }
    out.matrix.a = weights.transpose() * a.a * weights;
    return out;
}

const std::vector<SupplierLink>* SupplierRelationTable::suppliers(std::string_view buyer) const {
    auto it = entries.find(buyer);
    return it == entries.end() ? nullptr : &it->second;
}

SupplierRelationTable supplier_relations(const TechCoefMatrix& a, double min_intensity, std::size_t top_k) {
    SupplierRelationTable table;
    const auto n = static_cast<Eigen::Index>(a.industries.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        std::vector<SupplierLink> links;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = a.a(i, j);
            if (v > 0.0 && v >= min_intensity) links.push_back({a.industries[i], v});
        }
        std::sort(links.begin(), links.end(), [](const SupplierLink& x, const SupplierLink& y) {
            return x.intensity != y.intensity ? x.intensity > y.intensity : x.supplier < y.supplier;
        });
        if (links.size() > top_k) links.resize(top_k);
        table.entries.emplace(a.industries[j], std::move(links));
    }
    return table;
}

std::string relations_to_json(const SupplierRelationTable& r) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto& [buyer, links] : r.entries) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& l : links) arr.push_back({{"supplier", l.supplier}, {"intensity", l.intensity}});
        doc[buyer] = std::move(arr);
    }
    return doc.dump(2) + "\n";
}

SupplierRelationTable relations_from_json(std::string_view text) {
    SupplierRelationTable r;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("supplier relations: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("supplier relations: expected an object");
    for (const auto& [buyer, arr] : doc.items()) {
        auto& links = r.entries[buyer];
        for (const auto& l : arr) links.push_back({l.at("supplier").get<std::string>(), l.at("intensity").get<double>()});
    }
    return r;
}

}  // namespace synergy::ioanalysis
