#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "synergy/complexity.hpp"
#include "synergy/nomenclature.hpp"

namespace synergy::embedding {

struct DissimilarityMatrix {
    std::vector<std::string> products;
    Eigen::MatrixXd delta;
};

/// delta = 1 - phi off the diagonal, 0 on it.
DissimilarityMatrix to_dissimilarity(const complexity::ProductProximityMatrix& p);

struct MdsOptions {
    int max_iters = 500;
    /// Stop once (s_prev - s) / s_prev < rel_tol on raw stress.
    double rel_tol = 1e-7;
    std::uint64_t seed = 42;
    /// Independent random starts; the lowest final stress wins. Start 0 is
    /// seeded with `seed` itself, later ones with draws from it.
    int restarts = 8;
};

/// Product coordinates, one row per product (row order follows `products`).
struct Embedding {
    int dimension = 0;
    std::vector<std::string> products;
    Eigen::MatrixXd coords;

    std::optional<Eigen::VectorXd> vector(std::string_view product) const;
};

struct MdsResult {
    Embedding embedding;
    /// sqrt of the raw stress of the returned configuration.
    double stress = 0.0;
    /// Raw stress sum_i sum_{j != i} (d_ij - delta_ij)^2, starting with the
    /// initial configuration; one entry per accepted Guttman update.
    std::vector<double> raw_stress_history;
    int iterations = 0;
    bool converged = false;
    /// Size of a rejected round-off level increase that ended the run,
    /// relative to the initial raw stress; 0 if none occurred.
    double rejected_increase = 0.0;
    /// Index of the start that produced this result.
    int start = 0;
};

/// Raw stress, counting every ordered pair.
double raw_stress(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& delta);
/// sigma(X) = sqrt(raw_stress).
double stress(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& delta);

/// Metric MDS by stress majorization (SMACOF) from seeded uniform random
/// starts in [-0.5, 0.5]^m. Throws DomainError for fewer than two points,
/// m < 1, restarts < 1, or a delta that is not symmetric, non-negative,
/// zero-diagonal.
MdsResult mds_embed(const DissimilarityMatrix& d, int m, const MdsOptions& opts = {});

struct ActivityVectorSet {
    int dimension = 0;
    std::map<std::string, Eigen::VectorXd> vectors;
};

struct ActivityVectorResult {
    ActivityVectorSet set;
    /// Activities with no embedded product.
    std::vector<std::string> omitted;
};

/// v_a = sum lambda_p v_p over the products of `a`, lambdas renormalized over
/// the products that have a vector.
ActivityVectorResult activity_vectors(const Embedding& e, const nomenclature::ProductWeightTable& w);

/// Cosine floor applied before inverting; scores lie in [1, 1 / kCosineFloor].
inline constexpr double kCosineFloor = 1e-6;

/// 1 / cos(a, b) with cos clamped to [kCosineFloor, 1]. Smaller is closer.
/// Throws DomainError for a zero vector or a dimension mismatch.
double activity_proximity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct Neighbor {
    std::string activity;
    double score = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Activity vectors indexed for neighbourhood queries.
class ActivitySpace {
public:
    ActivitySpace() = default;
    explicit ActivitySpace(ActivityVectorSet set);

    bool contains(std::string_view activity) const;
    const ActivityVectorSet& vectors() const noexcept { return set_; }

    /// Up to k activities other than `activity` with score <= max_score,
    /// ascending score then code. Throws LookupError for an unknown activity.
    std::vector<Neighbor> nearest(std::string_view activity, std::size_t k, double max_score) const;

private:
    ActivityVectorSet set_;
};

struct ActivityProximityMatrix {
    std::vector<std::string> activities;
    Eigen::MatrixXd score;
};

ActivityProximityMatrix activity_proximity_matrix(const ActivityVectorSet& set);

/// `product,dim0,...,dim{m-1}` with 9 decimals.
void write_embedding_csv(std::ostream& out, const Embedding& e);
Embedding read_embedding_csv(std::istream& in);

/// `activity,dim0,...` printed round-trip exact.
void write_activity_vectors_csv(std::ostream& out, const ActivityVectorSet& set);
ActivityVectorSet read_activity_vectors_csv(std::istream& in);

/// `activity_a,activity_b,score` upper triangle including the diagonal.
void write_activity_proximity_csv(std::ostream& out, const ActivityProximityMatrix& p);

}  // namespace synergy::embedding
