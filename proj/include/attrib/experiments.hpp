#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attrib/attribution.hpp"
#include "attrib/dataset.hpp"
#include "attrib/metrics.hpp"
#include "attrib/model.hpp"
#include "attrib/reference.hpp"

namespace attrib {

/// Trustworthiness of one attribution method against the logistic
/// regression's global weights.
struct TrustRecord {
    Method method = Method::integrated_gradients;
    std::size_t k = 7;
    /// Overlap between the method's aggregate top-k features and the top-k
    /// global weights.
    std::size_t top_k_agreement = 0;
    double mean_l2 = 0.0;
    double mean_weighted_rank_dist = 0.0;
    std::vector<RankedFeature> global_ranking;  // by top-k frequency
    std::size_t n_candidates = 0;
    std::size_t n_failures = 0;
    std::size_t n_l2_excluded = 0;
};

struct MiEntry {
    std::string feature;
    double mi = 0.0;  // nats
};

struct Exp1Config {
    std::vector<Method> methods{Method::integrated_gradients, Method::deeplift,
                                Method::lime};
    std::size_t k = 7;
    int ig_steps = 100;
    LimeConfig lime;
    double epsilon = 0.01;
    std::uint64_t seed = 0;
    OutputTarget target = OutputTarget::probability;
    bool parallel = true;
    std::size_t max_candidates = 0;  // 0 = every row
};

struct Experiment1Result {
    Exp1Config config;
    std::vector<std::string> feature_names;
    std::vector<double> lr_weights;
    std::vector<std::size_t> lr_top;  // top-k features by |weight|
    std::vector<TrustRecord> records;
    std::vector<MiEntry> mi_table;  // descending
    std::vector<std::string> failures;
    /// The single shared boundary reference used by IG and DeepLIFT.
    std::vector<double> reference;
    double reference_p_bad = 0.5;
};

/// Protocol: one near-boundary reference point is sampled and shared by
/// every candidate; each method explains every candidate; per-method
/// aggregate rankings and distances are compared against the logistic
/// regression's weights; a mutual-information table over the candidate
/// features cross-checks the ranking.
Experiment1Result run_experiment1(const MlpModel& mlp, const LinearModel& lr,
                                  const FeatureTable& candidates,
                                  const ScalerParams& scaler,
                                  const Exp1Config& config);

/// Reliability of one candidate's attributions across K references drawn
/// under one policy.
struct UncertaintyRecord {
    std::size_t candidate_id = 0;
    Method method = Method::integrated_gradients;
    ReferencePolicy policy = ReferencePolicy::random;
    std::vector<double> entropy;  // per feature, in [0, ln(K)/K]
    std::vector<double> stddev;   // per feature
    double mean_entropy = 0.0;
    double mean_std = 0.0;
    std::size_t K = 0;  // 0 marks a failed candidate
};

struct AggregateCell {
    Method method = Method::integrated_gradients;
    ReferencePolicy policy = ReferencePolicy::random;
    double mean_entropy = 0.0;
    double mean_std = 0.0;
    std::size_t n_candidates = 0;
};

struct HistogramSeries {
    Method method = Method::integrated_gradients;
    ReferencePolicy policy = ReferencePolicy::random;
    std::vector<std::size_t> bins;  // width 0.01 over [0, ln(K)/K]
};

struct Exp2Config {
    std::vector<Method> methods{Method::integrated_gradients,
                                Method::deeplift};
    std::vector<ReferencePolicy> policies{ReferencePolicy::random,
                                          ReferencePolicy::boundary,
                                          ReferencePolicy::tight};
    std::size_t K = 20;
    std::size_t n_candidates = 200;  // 0 = every row
    double epsilon = 0.01;
    int ig_steps = 100;
    std::uint64_t seed = 0;
    OutputTarget target = OutputTarget::probability;
    bool parallel = true;
};

struct Exp2Provenance {
    double boundary_acceptance_rate = 1.0;
    std::size_t pool_from_table = 0;
    std::size_t pool_sampled = 0;
};

struct Experiment2Result {
    Exp2Config config;
    std::vector<std::string> feature_names;
    std::vector<UncertaintyRecord> records;  // candidate-major order
    std::vector<AggregateCell> aggregate;    // method x policy
    std::vector<HistogramSeries> histograms;
    Exp2Provenance provenance;
    std::vector<std::string> failures;
    double entropy_max = 0.0;  // ln(K)/K
};

/// Protocol: the random and boundary reference sets are drawn once and
/// shared by all candidates; the tight set is the K nearest members of a
/// shared boundary pool per candidate. For every candidate x policy x
/// method, K attributions are reduced to per-feature entropy and standard
/// deviation. Aggregation: mean over features, then mean over candidates.
/// The candidate fan-out may run on OpenMP threads; records are written by
/// index, so output is identical to the serial run.
Experiment2Result run_experiment2(const MlpModel& model,
                                  const FeatureTable& candidates,
                                  const ScalerParams& scaler,
                                  const Exp2Config& config);

}  // namespace attrib
