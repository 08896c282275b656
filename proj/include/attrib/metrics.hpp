#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "attrib/attribution.hpp"

namespace attrib {

/// Per-feature entropy of normalized absolute attributions across the K
/// references. For each feature the |values| over references are scaled to
/// sum 1 and H = -(1/K) * sum p ln p, with 0 ln 0 taken as 0. A feature
/// whose attributions are all zero gets entropy 0 and a flag.
/// Range: [0, ln(K)/K]; the maximum is attained exactly at uniformity.
struct EntropyResult {
    std::vector<double> per_feature;
    std::vector<std::uint8_t> zero_flag;
};

EntropyResult attribution_entropy(const std::vector<Attribution>& attrs);

/// Per-feature population standard deviation of the signed attributions
/// across references.
std::vector<double> attribution_std(const std::vector<Attribution>& attrs);

/// Feature indices sorted descending by |values|, ties by index.
std::vector<std::size_t> ranking_by_abs(std::span<const double> values);

struct RankedFeature {
    std::size_t feature = 0;
    double proportion = 0.0;
};

/// For each feature, the fraction of samples where it lands in that
/// sample's top-k by |attribution|; sorted descending, ties by index.
/// Proportions over all features sum to k.
std::vector<RankedFeature> global_ranking_by_frequency(
    const std::vector<Attribution>& attrs, std::size_t k);

/// Size of the intersection of the two top-k sets. Symmetric.
std::size_t topk_concordance(std::span<const std::size_t> ranking_a,
                             std::span<const std::size_t> ranking_b,
                             std::size_t k);

/// Overload ranking both magnitude vectors internally.
std::size_t topk_concordance(std::span<const double> local,
                             std::span<const double> global_weights,
                             std::size_t k = 7);

/// Euclidean distance between the two magnitude profiles after each is
/// normalized to unit L1 mass. A zero vector cannot be normalized; such
/// pairs return nullopt and are excluded from batch means.
std::optional<double> l2_distance(std::span<const double> local,
                                  std::span<const double> global_weights);

/// Top-weighted rank distance in [0, 1]: weighted Spearman correlation
/// with per-feature weights proportional to 1 / (1-based global rank),
/// mapped through (1 - rho) / 2. Identical rankings give 0.
double weighted_spearman_distance(std::span<const std::size_t> local_ranking,
                                  std::span<const std::size_t> global_ranking);

/// Nearest-neighbor mutual information (nats) between a continuous feature
/// and a binary target, clamped at zero. A deterministic tie-breaking
/// jitter of relative magnitude 1e-10 is added internally.
double mutual_information(std::span<const double> feature,
                          std::span<const int> target,
                          std::size_t k_neighbors = 3);

/// Digamma function for positive arguments, absolute error below 1e-10
/// for x >= 1.
double digamma(double x);

}  // namespace attrib
