#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "attrib/dataset.hpp"

namespace attrib {

enum class Penalty { l1, l2 };

std::string to_string(Penalty p);
Penalty penalty_from_string(const std::string& s);

/// Which scalar output an attribution or gradient targets.
enum class OutputTarget { probability, logit };

std::string to_string(OutputTarget t);
OutputTarget target_from_string(const std::string& s);

/// Logistic regression classifier on standardized features.
struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    Penalty penalty = Penalty::l2;
    double strength = 0.0;
    double train_accuracy = 0.0;
    double validation_accuracy = 0.0;

    double logit(std::span<const double> x) const;
    double predict_bad(std::span<const double> x) const;
};

struct TrainConfig {
    int epochs = 20;
    int batch_size = 100;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
};

/// Feedforward binary classifier: rectifier hidden units, sigmoid output.
/// The credit-risk architecture is {23, 17, 5, 1}; a degenerate {d, 1}
/// network is a plain affine logit, which the attribution oracles use.
struct MlpModel {
    std::vector<std::size_t> layer_sizes;        // {in, hidden..., 1}
    std::vector<std::vector<double>> weights;    // per layer, out x in row-major
    std::vector<std::vector<double>> biases;     // per layer, length out
    std::uint64_t training_seed = 0;
    double train_accuracy = 0.0;
    double validation_accuracy = 0.0;
    std::vector<double> epoch_losses;            // mean training BCE per epoch

    std::size_t input_size() const { return layer_sizes.front(); }
    std::size_t layer_count() const { return weights.size(); }

    /// Pre- and post-activation values of every layer for one input.
    /// post.back() is {logit}; probability = sigmoid(logit).
    struct ForwardTrace {
        std::vector<std::vector<double>> pre;
        std::vector<std::vector<double>> post;
        double logit = 0.0;
        double p_bad = 0.0;
    };
    ForwardTrace forward_trace(std::span<const double> x) const;

    double logit(std::span<const double> x) const;
    double predict_bad(std::span<const double> x) const;

    /// Glorot-uniform weights, zero biases, deterministic under seed.
    static MlpModel initialize(const std::vector<std::size_t>& layer_sizes,
                               std::uint64_t seed);

    /// Wrap a linear model as a single-layer network.
    static MlpModel from_linear(const LinearModel& linear);
};

struct LogisticGridPoint {
    Penalty penalty;
    double strength;
};

/// The regularization grid from the design notes:
/// strengths {0.01, 0.1, 1, 10, 100} crossed with {l1, l2}.
std::vector<LogisticGridPoint> default_logistic_grid();

/// Grid-search logistic regression. l2 points are fit by gradient descent,
/// l1 points by proximal gradient with soft-thresholding, both to gradient
/// (mapping) norm < 1e-6. Returns the grid point with the best validation
/// accuracy; exact ties go to the stronger regularization. A fit that has
/// not reached tolerance after max_iters iterations throws
/// ConvergenceError carrying its final gradient norm.
LinearModel train_logistic(const FeatureTable& train,
                           const std::vector<LogisticGridPoint>& grid,
                           const FeatureTable& validation,
                           int max_iters = 200000);

/// Mini-batch SGD on binary cross-entropy, deterministic under config.seed.
MlpModel train_mlp(const FeatureTable& train, const TrainConfig& config,
                   const FeatureTable& validation);

/// {p_good, p_bad}; the pair sums to 1.
std::array<double, 2> predict_proba(const LinearModel& model,
                                    std::span<const double> x);
std::array<double, 2> predict_proba(const MlpModel& model,
                                    std::span<const double> x);

double logit(const LinearModel& model, std::span<const double> x);
double logit(const MlpModel& model, std::span<const double> x);

/// Exact reverse-accumulation gradient of the chosen output w.r.t. x.
/// The rectifier subgradient at 0 is taken as 0.
std::vector<double> input_gradient(const MlpModel& model,
                                   std::span<const double> x,
                                   OutputTarget target);

double accuracy(const LinearModel& model, const FeatureTable& table);
double accuracy(const MlpModel& model, const FeatureTable& table);

/// p_bad as a plain function, for LIME and other model-agnostic callers.
std::function<double(std::span<const double>)> predict_fn(const MlpModel& model);
std::function<double(std::span<const double>)> predict_fn(const LinearModel& model);

void save_model_json(const LinearModel& model, const std::string& path);
void save_model_json(const MlpModel& model, const std::string& path);
LinearModel load_linear_model(const std::string& path);
MlpModel load_mlp_model(const std::string& path);

}  // namespace attrib
