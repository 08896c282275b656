#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "attrib/model.hpp"

namespace attrib {

enum class Method { integrated_gradients, deeplift, lime };

/// CLI names: "ig", "deeplift", "lime".
std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// Per-feature explanation of one prediction.
struct Attribution {
    std::vector<double> values;
    Method method = Method::integrated_gradients;
    OutputTarget target = OutputTarget::probability;
    std::vector<double> candidate;
    std::vector<double> reference;   // empty for LIME
    std::size_t steps_or_samples = 0;
    /// |sum(values) - (F(x) - F(r))| for IG and DeepLIFT; 0 for LIME.
    double completeness_residual = 0.0;
};

/// Midpoint-rule approximation of the straight-path gradient integral from
/// `reference` to `x`, scaled per coordinate by (x - reference).
Attribution integrated_gradients(const MlpModel& model,
                                 std::span<const double> x,
                                 std::span<const double> reference,
                                 int steps = 100,
                                 OutputTarget target = OutputTarget::probability);

/// Rescale-rule multipliers chained from the output to the input: affine
/// layers propagate linearly, each nonlinearity contributes delta-out over
/// delta-in. A nonlinearity whose input delta is below 1e-9 uses the exact
/// derivative at its reference pre-activation instead of the ratio.
Attribution deeplift_rescale(const MlpModel& model,
                             std::span<const double> x,
                             std::span<const double> reference,
                             OutputTarget target = OutputTarget::probability);

struct LimeConfig {
    std::size_t n_perturbations = 5000;
    double kernel_width = 0.0;       // 0 = default 0.75 * sqrt(d)
    double perturbation_scale = 1.0; // stddev per standardized feature
    double ridge_strength = 1.0;
    std::size_t top_k = 0;           // 0 = keep every coefficient
    std::uint64_t seed = 0;
};

/// Local surrogate: Gaussian perturbations of x, exponential-kernel sample
/// weights, weighted ridge fit (intercept unpenalized). With top_k set, all
/// but the k largest-magnitude coefficients are zeroed.
Attribution lime_explain(
    const std::function<double(std::span<const double>)>& predict_fn,
    std::span<const double> x, const LimeConfig& config);

struct BatchFailure {
    std::size_t index = 0;
    std::string message;
};

struct BatchResult {
    std::vector<Attribution> attributions;  // failed slots keep empty values
    std::vector<BatchFailure> failures;     // ascending by index
};

/// Resolves the reference for candidate i. Ignored for LIME.
using ReferenceFn =
    std::function<std::vector<double>(std::size_t, std::span<const double>)>;

struct BatchParams {
    Method method = Method::integrated_gradients;
    OutputTarget target = OutputTarget::probability;
    int ig_steps = 100;
    LimeConfig lime;
};

/// One attribution per candidate, order preserved. Per-candidate failures
/// are collected, not thrown. LIME streams are derived from the candidate
/// contents, so results are independent of candidate order and thread
/// count; the OpenMP and serial versions produce identical output.
BatchResult explain_batch(const MlpModel& model,
                          const std::vector<std::vector<double>>& candidates,
                          const BatchParams& params,
                          const ReferenceFn& reference_for);

BatchResult explain_batch_serial(
    const MlpModel& model, const std::vector<std::vector<double>>& candidates,
    const BatchParams& params, const ReferenceFn& reference_for);

}  // namespace attrib
