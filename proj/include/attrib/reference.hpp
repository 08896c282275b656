#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attrib/dataset.hpp"
#include "attrib/model.hpp"

namespace attrib {

enum class ReferencePolicy { random, boundary, tight, named_profile };

std::string to_string(ReferencePolicy p);
ReferencePolicy policy_from_string(const std::string& s);

/// K reference vectors in standardized space plus generation metadata.
/// boundary/tight members all satisfy |p_bad - 0.5| <= epsilon.
struct ReferenceSet {
    ReferencePolicy policy = ReferencePolicy::random;
    std::vector<std::vector<double>> references;
    std::vector<std::array<double, 2>> outputs;  // {p_good, p_bad} each
    std::vector<double> anchor;                  // tight policy only
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    double acceptance_rate = 1.0;                // boundary sampling only
    std::vector<std::string> names;              // named_profile only
};

/// Each coordinate uniform in the feature's raw [min, max], standardized.
/// A feature with min == max always yields that fixed point.
ReferenceSet random_references(const ScalerParams& scaler, std::size_t K,
                               std::uint64_t seed);

/// Rejection-sample random references, keeping those within epsilon of the
/// decision boundary, until K are found. Sampling is chunked with per-chunk
/// seeds and chunks are consumed in order, so the OpenMP and serial paths
/// return identical sets.
ReferenceSet boundary_references(const MlpModel& model,
                                 const ScalerParams& scaler, std::size_t K,
                                 double epsilon, std::uint64_t seed,
                                 std::size_t max_tries = 1000000);

ReferenceSet boundary_references_serial(const MlpModel& model,
                                        const ScalerParams& scaler,
                                        std::size_t K, double epsilon,
                                        std::uint64_t seed,
                                        std::size_t max_tries = 1000000);

/// Boundary-satisfying pool for the tight policy: dataset rows meeting the
/// epsilon constraint, topped up with rejection-sampled points when thin.
struct BoundaryPool {
    std::vector<std::vector<double>> points;
    double epsilon = 0.0;
    std::size_t n_from_table = 0;
    std::size_t n_sampled = 0;
};

BoundaryPool build_boundary_pool(const MlpModel& model,
                                 const FeatureTable& table,
                                 const ScalerParams& scaler, double epsilon,
                                 std::size_t min_size, std::uint64_t seed,
                                 std::size_t max_tries = 1000000);

/// The K pool members closest to x in standardized Euclidean distance,
/// ascending, ties broken by pool index. Records the pool's epsilon.
ReferenceSet tight_references(const MlpModel& model, const BoundaryPool& pool,
                              std::span<const double> x, std::size_t K = 10);

/// Convenience overload that builds a pool of at least max(K, 50) points.
ReferenceSet tight_references(const MlpModel& model, const FeatureTable& table,
                              const ScalerParams& scaler,
                              std::span<const double> x, std::size_t K = 10,
                              double epsilon = 0.01, std::uint64_t seed = 0);

/// One interpretable reference point with both coordinate systems.
struct NamedProfile {
    std::string name;
    std::vector<double> standardized;
    std::vector<double> raw;
    std::array<double, 2> output{0.0, 0.0};  // {p_good, p_bad}
};

/// The three catalog profiles: "unclassifiable" (a boundary point),
/// "average candidate" (per-feature mean), and "new candidate" (zero
/// credit history; percent of trades with balance takes the table median
/// since a fresh file has no trades to divide by).
std::vector<NamedProfile> profile_catalog(const MlpModel& model,
                                          const FeatureTable& table,
                                          const ScalerParams& scaler,
                                          double epsilon = 0.01,
                                          std::uint64_t seed = 0);

/// Plain-text table of the catalog in raw units: delinquencies, credit
/// history in years, total trades, percent of accounts with balance, and
/// recent inquiries, plus each profile's predicted pair.
std::string render_profile_table(const std::vector<NamedProfile>& profiles,
                                 const ScalerParams& scaler);

}  // namespace attrib
