#include "synergy/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy::embedding {

DissimilarityMatrix to_dissimilarity(const complexity::ProductProximityMatrix& p) {
    DissimilarityMatrix d{p.products, Eigen::MatrixXd::Ones(p.phi.rows(), p.phi.cols()) - p.phi};
    d.delta.diagonal().setZero();
    return d;
}

std::optional<Eigen::VectorXd> Embedding::vector(std::string_view product) const {
    auto it = std::lower_bound(products.begin(), products.end(), product);
    if (it == products.end() || *it != product) return std::nullopt;
    return coords.row(it - products.begin()).transpose();
}

double raw_stress(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& delta) {
    const Eigen::Index n = coords.rows();
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double r = (coords.row(i) - coords.row(j)).norm() - delta(i, j);
            s += r * r;
        }
    return 2.0 * s;
}

double stress(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& delta) {
    return std::sqrt(raw_stress(coords, delta));
}

namespace {

void validate(const Eigen::MatrixXd& delta) {
    const Eigen::Index n = delta.rows();
    if (delta.cols() != n) throw DomainError("dissimilarity matrix must be square");
    if (n < 2) throw DomainError("need at least two points to embed");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (delta(i, i) != 0.0) throw DomainError("dissimilarity diagonal must be zero");
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!std::isfinite(delta(i, j)) || delta(i, j) < 0.0)
                throw DomainError("dissimilarities must be finite and non-negative");
            if (delta(i, j) != delta(j, i)) throw DomainError("dissimilarity matrix must be symmetric");
        }
    }
}

// Guttman transform X' = B(X) X / n for unit weights.
Eigen::MatrixXd guttman(const Eigen::MatrixXd& x, const Eigen::MatrixXd& delta) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dist = (x.row(i) - x.row(j)).norm();
            if (dist <= 0.0) continue;
            const double v = -delta(i, j) / dist;
            b(i, j) = v;
            b(j, i) = v;
        }
    for (Eigen::Index i = 0; i < n; ++i) b(i, i) = -b.row(i).sum();
    return (b * x) / static_cast<double>(n);
}

}  // namespace

namespace {

MdsResult smacof(const Eigen::MatrixXd& delta, int m, int max_iters, double rel_tol, std::uint64_t seed) {
    const Eigen::Index n = delta.rows();
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd x(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < m; ++k)
            x(i, k) = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;

    MdsResult result;
    double current = raw_stress(x, delta);
    result.raw_stress_history.push_back(current);
    while (result.iterations < max_iters) {
        if (current == 0.0) {
            result.converged = true;
            break;
        }
        Eigen::MatrixXd next = guttman(x, delta);
        const double s = raw_stress(next, delta);
        ++result.iterations;
        if (s > current) {
            // Majorization cannot increase stress; this is round-off at the fixed point.
            result.rejected_increase = (s - current) / result.raw_stress_history.front();
            result.converged = true;
            break;
        }
        x = std::move(next);
        const double decrease = (current - s) / current;
        current = s;
        result.raw_stress_history.push_back(current);
        if (decrease < rel_tol) {
            result.converged = true;
            break;
        }
    }
    result.embedding.coords = std::move(x);
    result.stress = std::sqrt(current);
    return result;
}

}  // namespace

MdsResult mds_embed(const DissimilarityMatrix& d, int m, const MdsOptions& opts) {
    if (m < 1) throw DomainError("embedding dimension must be >= 1");
    if (opts.restarts < 1) throw DomainError("need at least one MDS start");
    validate(d.delta);
    if (d.products.size() != static_cast<std::size_t>(d.delta.rows()))
        throw DomainError("product list does not match dissimilarity matrix");

    std::mt19937_64 seeds(opts.seed);
    MdsResult result;
    for (int start = 0; start < opts.restarts; ++start) {
        const std::uint64_t seed = start == 0 ? opts.seed : seeds();
        auto run = smacof(d.delta, m, opts.max_iters, opts.rel_tol, seed);
        run.start = start;
        if (start == 0 || run.raw_stress_history.back() < result.raw_stress_history.back()) result = std::move(run);
    }

    // Rows sorted by product code for lookup.
    const Eigen::Index n = d.delta.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return d.products[a] < d.products[b]; });
    const Eigen::MatrixXd x = std::move(result.embedding.coords);
    result.embedding.dimension = m;
    result.embedding.coords.resize(n, m);
    for (Eigen::Index r = 0; r < n; ++r) {
        result.embedding.products.push_back(d.products[order[r]]);
        result.embedding.coords.row(r) = x.row(order[r]);
    }
    return result;
}

ActivityVectorResult activity_vectors(const Embedding& e, const nomenclature::ProductWeightTable& w) {
    ActivityVectorResult result;
    result.set.dimension = e.dimension;
    for (const auto& [activity, products] : w.entries) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(e.dimension);
        double mass = 0.0;
        for (const auto& p : products) {
            auto pv = e.vector(p.code);
            if (!pv || p.weight <= 0.0) continue;
            v += p.weight * *pv;
            mass += p.weight;
        }
        // A zero vector has no direction to score against.
        if (mass <= 0.0 || v.isZero(0.0)) {
            result.omitted.push_back(activity);
            continue;
        }
        result.set.vectors.emplace(activity, v / mass);
    }
    return result;
}

double activity_proximity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw DomainError("activity vectors differ in dimension");
    // Plain left-to-right sums so scores do not depend on SIMD reduction order.
    double dot = 0.0, aa = 0.0, bb = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        dot += a(k) * b(k);
        aa += a(k) * a(k);
        bb += b(k) * b(k);
    }
    if (aa == 0.0 || bb == 0.0) throw DomainError("activity proximity undefined for a zero vector");
    const double cos = std::clamp(dot / (std::sqrt(aa) * std::sqrt(bb)), kCosineFloor, 1.0);
    return 1.0 / cos;
}

ActivitySpace::ActivitySpace(ActivityVectorSet set) : set_(std::move(set)) {}

bool ActivitySpace::contains(std::string_view activity) const {
    return set_.vectors.find(std::string(activity)) != set_.vectors.end();
}

std::vector<Neighbor> ActivitySpace::nearest(std::string_view activity, std::size_t k, double max_score) const {
    auto it = set_.vectors.find(std::string(activity));
    if (it == set_.vectors.end()) throw LookupError("activity '" + std::string(activity) + "' has no vector");
    std::vector<Neighbor> out;
    if (k == 0) return out;
    for (const auto& [code, v] : set_.vectors) {
        if (code == it->first) continue;
        const double s = activity_proximity(it->second, v);
        if (s <= max_score) out.push_back({code, s});
    }
    std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.score != b.score ? a.score < b.score : a.activity < b.activity;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

ActivityProximityMatrix activity_proximity_matrix(const ActivityVectorSet& set) {
    ActivityProximityMatrix p;
    for (const auto& [code, v] : set.vectors) p.activities.push_back(code);
    const auto n = static_cast<Eigen::Index>(p.activities.size());
    p.score = Eigen::MatrixXd::Ones(n, n);
    std::vector<const Eigen::VectorXd*> vs;
    for (const auto& [code, v] : set.vectors) vs.push_back(&v);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double s = activity_proximity(*vs[i], *vs[j]);
            p.score(i, j) = s;
            p.score(j, i) = s;
        }
    return p;
}

namespace {

std::string exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

csv::Row vector_header(const char* first, int m) {
    csv::Row h{first};
    for (int k = 0; k < m; ++k) h.push_back("dim" + std::to_string(k));
    return h;
}

std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_vectors(std::istream& in, const char* first,
                                                                                  const char* what) {
    csv::Reader reader(in);
    csv::Row header;
    if (!reader.next(header) || header.size() < 2 || csv::trim(header[0]) != first)
        throw ParseError(std::string(what) + ": bad header");
    const int m = static_cast<int>(header.size()) - 1;
    if (header != vector_header(first, m)) throw ParseError(std::string(what) + ": bad header", reader.line());
    std::vector<std::string> codes;
    std::vector<std::vector<double>> rows;
    csv::Row row;
    while (reader.next(row)) {
        if (row.size() != header.size()) throw ParseError("wrong column count", reader.line());
        codes.push_back(csv::trim(row[0]));
        std::vector<double> v;
        for (int k = 0; k < m; ++k) v.push_back(csv::parse_double(row[k + 1], reader.line()));
        rows.push_back(std::move(v));
    }
    return {codes, rows};
}

}  // namespace

void write_embedding_csv(std::ostream& out, const Embedding& e) {
    csv::write_row(out, vector_header("product", e.dimension));
    for (Eigen::Index i = 0; i < e.coords.rows(); ++i) {
        csv::Row row{e.products[i]};
        for (int k = 0; k < e.dimension; ++k) row.push_back(csv::fixed(e.coords(i, k), 9));
        csv::write_row(out, row);
    }
}

Embedding read_embedding_csv(std::istream& in) {
    auto [codes, rows] = read_vectors(in, "product", "embedding");
    Embedding e;
    e.dimension = rows.empty() ? 0 : static_cast<int>(rows.front().size());
    std::vector<std::size_t> order(codes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return codes[a] < codes[b]; });
    e.coords.resize(static_cast<Eigen::Index>(codes.size()), e.dimension);
    for (std::size_t r = 0; r < order.size(); ++r) {
        e.products.push_back(codes[order[r]]);
        for (int k = 0; k < e.dimension; ++k) e.coords(static_cast<Eigen::Index>(r), k) = rows[order[r]][k];
    }
    return e;
}

void write_activity_vectors_csv(std::ostream& out, const ActivityVectorSet& set) {
    csv::write_row(out, vector_header("activity", set.dimension));
    for (const auto& [code, v] : set.vectors) {
        csv::Row row{code};
        for (Eigen::Index k = 0; k < v.size(); ++k) row.push_back(exact(v(k)));
        csv::write_row(out, row);
    }
}

ActivityVectorSet read_activity_vectors_csv(std::istream& in) {
    auto [codes, rows] = read_vectors(in, "activity", "activity vectors");
    ActivityVectorSet set;
    set.dimension = rows.empty() ? 0 : static_cast<int>(rows.front().size());
    for (std::size_t i = 0; i < codes.size(); ++i)
        set.vectors.emplace(codes[i], Eigen::Map<const Eigen::VectorXd>(rows[i].data(), set.dimension));
    return set;
}

void write_activity_proximity_csv(std::ostream& out, const ActivityProximityMatrix& p) {
    out << "activity_a,activity_b,score\n";
    const auto n = static_cast<Eigen::Index>(p.activities.size());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j)
            csv::write_row(out, {p.activities[i], p.activities[j], csv::fixed(p.score(i, j), 9)});
}

}  // namespace synergy::embedding
