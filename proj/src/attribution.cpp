#include "attrib/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

#include "attrib/errors.hpp"
#include "attrib/util.hpp"

namespace attrib {

namespace {

// Below this input delta the rescale ratio is replaced by the exact
// derivative at the reference activation.
constexpr double kRescaleDeltaFloor = 1e-9;

double eval_target(const MlpModel& model, std::span<const double> x,
                   OutputTarget target) {
    return target == OutputTarget::probability ? model.predict_bad(x)
                                               : model.logit(x);
}

void check_pair_dims(const MlpModel& model, std::span<const double> x,
                     std::span<const double> reference) {
    if (x.size() != model.input_size()) {
        throw std::invalid_argument("candidate length does not match network");
    }
    if (reference.size() != x.size()) {
        throw std::invalid_argument("reference length does not match candidate");
    }
}

// Gradient jump locations along the straight path from the reference to x.
// Every preactivation is continuous and piecewise affine in the path
// position, affine between the cuts contributed by earlier layers, so each
// rectifier's crossing time falls out of endpoint interpolation, one layer
// at a time. Returns the sorted cut list including 0 and 1.
std::vector<double> path_cuts(const MlpModel& model,
                              std::span<const double> reference,
                              std::span<const double> x) {
    std::vector<double> cuts{0.0, 1.0};
    if (model.layer_count() < 2) {
        return cuts;
    }
    const std::size_t d = x.size();
    std::vector<double> point(d);
    const auto pre_at = [&](double t, std::size_t layer) {
        for (std::size_t i = 0; i < d; ++i) {
            point[i] = reference[i] + t * (x[i] - reference[i]);
        }
        return model.forward_trace(point).pre[layer];
    };
    for (std::size_t l = 0; l + 1 < model.layer_count(); ++l) {
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        std::vector<std::vector<double>> pre(cuts.size());
        for (std::size_t s = 0; s < cuts.size(); ++s) {
            pre[s] = pre_at(cuts[s], l);
        }
        std::vector<double> found;
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
            const double a = cuts[s];
            const double b = cuts[s + 1];
            for (std::size_t u = 0; u < pre[s].size(); ++u) {
                const double pa = pre[s][u];
                const double pb = pre[s + 1][u];
                if ((pa < 0.0 && pb > 0.0) || (pa > 0.0 && pb < 0.0)) {
                    const double t = a + (b - a) * (pa / (pa - pb));
                    if (t > a && t < b) {
                        found.push_back(t);
                    }
                }
            }
        }
        cuts.insert(cuts.end(), found.begin(), found.end());
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
}

// Largest-remainder split of the evaluation budget over segment lengths,
// then every segment is topped up to one evaluation from the largest
// allocations. Requires steps >= number of segments.
std::vector<std::size_t> allocate_steps(const std::vector<double>& cuts,
                                        std::size_t steps) {
    const std::size_t n_seg = cuts.size() - 1;
    std::vector<std::size_t> alloc(n_seg);
    std::vector<double> frac(n_seg);
    std::size_t used = 0;
    for (std::size_t s = 0; s < n_seg; ++s) {
        const double want = (cuts[s + 1] - cuts[s]) * static_cast<double>(steps);
        alloc[s] = std::min<std::size_t>(static_cast<std::size_t>(want), steps);
        frac[s] = want - static_cast<double>(alloc[s]);
        used += alloc[s];
    }
    std::vector<std::size_t> order(n_seg);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return frac[a] > frac[b];
                     });
    for (std::size_t i = 0; used < steps; ++i) {
        ++alloc[order[i % n_seg]];
        ++used;
    }
    for (std::size_t s = 0; s < n_seg; ++s) {
        if (alloc[s] > 0) {
            continue;
        }
        std::size_t donor = 0;
        for (std::size_t j = 1; j < n_seg; ++j) {
            if (alloc[j] > alloc[donor]) {
                donor = j;
            }
        }
        --alloc[donor];
        ++alloc[s];
    }
    return alloc;
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::integrated_gradients:
            return "ig";
        case Method::deeplift:
            return "deeplift";
        case Method::lime:
            return "lime";
    }
    return "ig";
}

Method method_from_string(const std::string& s) {
    if (s == "ig") {
        return Method::integrated_gradients;
    }
    if (s == "deeplift") {
        return Method::deeplift;
    }
    if (s == "lime") {
        return Method::lime;
    }
    throw std::invalid_argument("unknown attribution method: " + s);
}

Attribution integrated_gradients(const MlpModel& model,
                                 std::span<const double> x,
                                 std::span<const double> reference, int steps,
                                 OutputTarget target) {
    check_pair_dims(model, x, reference);
    if (steps < 1) {
        throw std::invalid_argument("integrated gradients needs steps >= 1");
    }

    // The logit is piecewise smooth in the path position with kinks
    // wherever a rectifier flips. A uniform grid pays O(1/steps) error per
    // kink, so the budget is spread over the smooth segments between the
    // closed-form crossing times instead. When the kinks outnumber the
    // budget the uniform grid is the only option left.
    const std::size_t d = x.size();
    std::vector<double> accum(d, 0.0);
    std::vector<double> point(d);
    const std::vector<double> cuts = path_cuts(model, reference, x);
    const auto add_midpoints = [&](double a, double b, std::size_t count) {
        const double w = (b - a) / static_cast<double>(count);
        for (std::size_t j = 0; j < count; ++j) {
            const double alpha = a + (static_cast<double>(j) + 0.5) * w;
            for (std::size_t i = 0; i < d; ++i) {
                point[i] = reference[i] + alpha * (x[i] - reference[i]);
            }
            const std::vector<double> grad =
                input_gradient(model, point, target);
            for (std::size_t i = 0; i < d; ++i) {
                accum[i] += grad[i] * w;
            }
        }
    };
    if (cuts.size() - 1 > static_cast<std::size_t>(steps)) {
        add_midpoints(0.0, 1.0, static_cast<std::size_t>(steps));
    } else {
        const std::vector<std::size_t> alloc =
            allocate_steps(cuts, static_cast<std::size_t>(steps));
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
            add_midpoints(cuts[s], cuts[s + 1], alloc[s]);
        }
    }

    Attribution out;
    out.method = Method::integrated_gradients;
    out.target = target;
    out.candidate.assign(x.begin(), x.end());
    out.reference.assign(reference.begin(), reference.end());
    out.steps_or_samples = static_cast<std::size_t>(steps);
    out.values.resize(d);
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        out.values[i] = (x[i] - reference[i]) * accum[i];
        total += out.values[i];
    }
    const double delta =
        eval_target(model, x, target) - eval_target(model, reference, target);
    out.completeness_residual = std::fabs(total - delta);
    return out;
}

Attribution deeplift_rescale(const MlpModel& model, std::span<const double> x,
                             std::span<const double> reference,
                             OutputTarget target) {
    check_pair_dims(model, x, reference);

    const auto trace_x = model.forward_trace(x);
    const auto trace_r = model.forward_trace(reference);
    const std::size_t L = model.layer_count();

    // Multiplier over the logit. The sigmoid on top is itself a
    // nonlinearity under the rescale rule when targeting the probability.
    std::vector<double> mult(1, 1.0);
    if (target == OutputTarget::probability) {
        const double dz = trace_x.logit - trace_r.logit;
        if (std::fabs(dz) > kRescaleDeltaFloor) {
            mult[0] = (trace_x.p_bad - trace_r.p_bad) / dz;
        } else {
            mult[0] = trace_r.p_bad * (1.0 - trace_r.p_bad);
        }
    }

    for (std::size_t l = L; l-- > 0;) {
        const std::size_t n_in = model.layer_sizes[l];
        const std::size_t n_out = model.layer_sizes[l + 1];
        // Linear rule through the affine layer.
        std::vector<double> prev(n_in, 0.0);
        for (std::size_t i = 0; i < n_in; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n_out; ++j) {
                s += model.weights[l][j * n_in + i] * mult[j];
            }
            prev[i] = s;
        }
        if (l > 0) {
            // Rescale through the rectifier feeding this layer.
            for (std::size_t i = 0; i < n_in; ++i) {
                const double dz = trace_x.pre[l - 1][i] - trace_r.pre[l - 1][i];
                double ratio;
                if (std::fabs(dz) > kRescaleDeltaFloor) {
                    ratio = (trace_x.post[l - 1][i] - trace_r.post[l - 1][i]) /
                            dz;
                } else {
                    ratio = trace_r.pre[l - 1][i] > 0.0 ? 1.0 : 0.0;
                }
                prev[i] *= ratio;
            }
        }
        mult = std::move(prev);
    }

    Attribution out;
    out.method = Method::deeplift;
    out.target = target;
    out.candidate.assign(x.begin(), x.end());
    out.reference.assign(reference.begin(), reference.end());
    out.steps_or_samples = 1;
    out.values.resize(x.size());
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.values[i] = mult[i] * (x[i] - reference[i]);
        total += out.values[i];
    }
    const double delta =
        eval_target(model, x, target) - eval_target(model, reference, target);
    out.completeness_residual = std::fabs(total - delta);
    return out;
}

Attribution lime_explain(
    const std::function<double(std::span<const double>)>& predict_fn,
    std::span<const double> x, const LimeConfig& config) {
    const std::size_t d = x.size();
    if (d == 0) {
        throw std::invalid_argument("candidate is empty");
    }
    if (config.n_perturbations < 100) {
        throw std::invalid_argument("n_perturbations must be at least 100");
    }
    if (!(config.perturbation_scale > 0.0) || !(config.ridge_strength > 0.0) ||
        config.kernel_width < 0.0) {
        throw std::invalid_argument("LimeConfig values must be positive");
    }
    if (config.top_k > d) {
        throw std::invalid_argument("top_k exceeds the feature count");
    }
    const double kw = config.kernel_width > 0.0
                          ? config.kernel_width
                          : 0.75 * std::sqrt(static_cast<double>(d));

    // Weighted normal equations over [1, z - x]; row-major (d+1)^2.
    const std::size_t m = d + 1;
    std::vector<double> gram(m * m, 0.0);
    std::vector<double> rhs(m, 0.0);
    std::vector<double> u(d), z(d);

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t s = 0; s < config.n_perturbations; ++s) {
        double sq = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            u[i] = config.perturbation_scale * gauss(rng);
            z[i] = x[i] + u[i];
            sq += u[i] * u[i];
        }
        const double y = predict_fn(z);
        const double w = std::exp(-sq / (kw * kw));

        gram[0] += w;
        rhs[0] += w * y;
        for (std::size_t i = 0; i < d; ++i) {
            gram[i + 1] += w * u[i];
            rhs[i + 1] += w * u[i] * y;
            for (std::size_t j = i; j < d; ++j) {
                gram[(i + 1) * m + (j + 1)] += w * u[i] * u[j];
            }
        }
    }

    double max_var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        max_var = std::max(max_var, gram[(i + 1) * m + (i + 1)]);
    }
    if (!(gram[0] > 0.0) || !(max_var > 0.0)) {
        throw NumericalError(
            "perturbation design collapsed (zero kernel mass or zero "
            "variance); increase perturbation_scale or kernel_width");
    }

    for (std::size_t i = 1; i < m; ++i) {
        gram[i * m + i] += config.ridge_strength;  // intercept unpenalized
    }
    // Mirror the upper triangle.
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            gram[j * m + i] = gram[i * m + j];
        }
    }

    // Cholesky factorization in place, then two triangular solves.
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            double s = gram[j * m + i];
            for (std::size_t k = 0; k < i; ++k) {
                s -= gram[i * m + k] * gram[j * m + k];
            }
            if (i == j) {
                if (!(s > 0.0) || !std::isfinite(s)) {
                    throw NumericalError(
                        "ridge system is not positive definite");
                }
                gram[i * m + i] = std::sqrt(s);
            } else {
                gram[j * m + i] = s / gram[i * m + i];
            }
        }
    }
    std::vector<double> beta(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = rhs[i];
        for (std::size_t k = 0; k < i; ++k) {
            s -= gram[i * m + k] * beta[k];
        }
        beta[i] = s / gram[i * m + i];
    }
    for (std::size_t i = m; i-- > 0;) {
        double s = beta[i];
        for (std::size_t k = i + 1; k < m; ++k) {
            s -= gram[k * m + i] * beta[k];
        }
        beta[i] = s / gram[i * m + i];
        if (!std::isfinite(beta[i])) {
            throw NumericalError("ridge solve produced non-finite weights");
        }
    }

    Attribution out;
    out.method = Method::lime;
    out.target = OutputTarget::probability;
    out.candidate.assign(x.begin(), x.end());
    out.steps_or_samples = config.n_perturbations;
    out.values.assign(beta.begin() + 1, beta.end());

    if (config.top_k > 0 && config.top_k < d) {
        std::vector<std::size_t> order(d);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) {
                             return std::fabs(out.values[a]) >
                                    std::fabs(out.values[b]);
                         });
        std::vector<double> sparse(d, 0.0);
        for (std::size_t r = 0; r < config.top_k; ++r) {
            sparse[order[r]] = out.values[order[r]];
        }
        out.values = std::move(sparse);
    }
    return out;
}

namespace {

Attribution explain_one(const MlpModel& model, std::span<const double> x,
                        const BatchParams& params,
                        const ReferenceFn& reference_for, std::size_t index) {
    switch (params.method) {
        case Method::integrated_gradients: {
            const std::vector<double> ref = reference_for(index, x);
            return integrated_gradients(model, x, ref, params.ig_steps,
                                        params.target);
        }
        case Method::deeplift: {
            const std::vector<double> ref = reference_for(index, x);
            return deeplift_rescale(model, x, ref, params.target);
        }
        case Method::lime: {
            LimeConfig cfg = params.lime;
            // Stream keyed on the candidate contents, not its index, so a
            // permuted batch yields identically permuted attributions.
            cfg.seed = mix64(params.lime.seed, hash_doubles(x, 0x4c494d45));
            const OutputTarget target = params.target;
            auto fn = [&model, target](std::span<const double> p) {
                return target == OutputTarget::probability
                           ? model.predict_bad(p)
                           : model.logit(p);
            };
            Attribution out = lime_explain(fn, x, cfg);
            out.target = target;
            return out;
        }
    }
    throw std::invalid_argument("unknown attribution method");
}

BatchResult run_batch(const MlpModel& model,
                      const std::vector<std::vector<double>>& candidates,
                      const BatchParams& params,
                      const ReferenceFn& reference_for, bool parallel) {
    BatchResult out;
    out.attributions.resize(candidates.size());

    auto attempt = [&](std::size_t i) -> std::optional<BatchFailure> {
        try {
            out.attributions[i] =
                explain_one(model, candidates[i], params, reference_for, i);
            return std::nullopt;
        } catch (const std::exception& e) {
            return BatchFailure{i, e.what()};
        } catch (...) {
            return BatchFailure{i, "unknown error"};
        }
    };

    const long long n = static_cast<long long>(candidates.size());
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < n; ++i) {
            auto failure = attempt(static_cast<std::size_t>(i));
            if (failure) {
#pragma omp critical(attrib_batch_failures)
                out.failures.push_back(std::move(*failure));
            }
        }
    } else {
        for (long long i = 0; i < n; ++i) {
            auto failure = attempt(static_cast<std::size_t>(i));
            if (failure) {
                out.failures.push_back(std::move(*failure));
            }
        }
    }
    std::sort(out.failures.begin(), out.failures.end(),
              [](const BatchFailure& a, const BatchFailure& b) {
                  return a.index < b.index;
              });
    return out;
}

}  // namespace

BatchResult explain_batch(const MlpModel& model,
                          const std::vector<std::vector<double>>& candidates,
                          const BatchParams& params,
                          const ReferenceFn& reference_for) {
    return run_batch(model, candidates, params, reference_for, true);
}

BatchResult explain_batch_serial(
    const MlpModel& model, const std::vector<std::vector<double>>& candidates,
    const BatchParams& params, const ReferenceFn& reference_for) {
    return run_batch(model, candidates, params, reference_for, false);
}

}  // namespace attrib
