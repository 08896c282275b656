#include "attrib/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "attrib/errors.hpp"
#include "attrib/util.hpp"
#include "json.hpp"

namespace attrib {

namespace {

constexpr double kGradTolerance = 1e-6;

double bce_loss(double p, int y) {
    const double eps = 1e-12;
    const double pc = std::clamp(p, eps, 1.0 - eps);
    return y == 1 ? -std::log(pc) : -std::log(1.0 - pc);
}

// Mean negative log-likelihood and its gradient for logistic regression,
// without the penalty term. Gradient layout: [w..., b].
struct LogisticObjective {
    const FeatureTable& data;

    double value(std::span<const double> w, double b) const {
        double total = 0.0;
        for (std::size_t r = 0; r < data.rows; ++r) {
            const double z = dot(w, data.row(r)) + b;
            // log(1 + exp(-yz)) computed stably
            const double yz = data.target[r] == 1 ? z : -z;
            total += yz > 0 ? std::log1p(std::exp(-yz))
                            : -yz + std::log1p(std::exp(yz));
        }
        return total / static_cast<double>(data.rows);
    }

    void gradient(std::span<const double> w, double b,
                  std::span<double> grad_w, double& grad_b) const {
        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        grad_b = 0.0;
        for (std::size_t r = 0; r < data.rows; ++r) {
            const double p = sigmoid(dot(w, data.row(r)) + b);
            const double residual = p - static_cast<double>(data.target[r]);
            const auto x = data.row(r);
            for (std::size_t c = 0; c < x.size(); ++c) {
                grad_w[c] += residual * x[c];
            }
            grad_b += residual;
        }
        const double inv_n = 1.0 / static_cast<double>(data.rows);
        for (double& g : grad_w) {
            g *= inv_n;
        }
        grad_b *= inv_n;
    }
};

double soft_threshold(double v, double t) {
    if (v > t) {
        return v - t;
    }
    if (v < -t) {
        return v + t;
    }
    return 0.0;
}

// Fit one grid point with accelerated proximal gradient (FISTA) under
// backtracking, with a gradient-based restart so the momentum never fights
// the descent direction. l1 enters through the soft-threshold prox, l2
// through the smooth gradient. The stopping rule is the norm of the
// proximal gradient mapping at the extrapolated point, which reduces to
// the plain gradient norm in the smooth case. Bias is never penalized.
// Plain ISTA stalls on correlated designs like this one, where the top
// features share a latent factor and the Hessian is badly conditioned.
LinearModel fit_logistic_point(const FeatureTable& train, Penalty penalty,
                               double strength, int max_iters) {
    const std::size_t d = train.cols();
    LogisticObjective objective{train};
    std::vector<double> w(d, 0.0);
    double b = 0.0;

    auto penalized_value = [&](std::span<const double> wv, double bv) {
        double v = objective.value(wv, bv);
        if (penalty == Penalty::l2) {
            double ss = 0.0;
            for (double x : wv) {
                ss += x * x;
            }
            v += 0.5 * strength * ss;
        }
        // l1 term handled by the prox, not the smooth objective
        return v;
    };

    std::vector<double> grad_w(d), trial_w(d);
    std::vector<double> y_w = w;
    double y_b = b;
    double grad_b = 0.0;
    double step = 1.0;
    double momentum = 1.0;
    double mapping_norm = 0.0;

    for (int iter = 0; iter < max_iters; ++iter) {
        objective.gradient(y_w, y_b, grad_w, grad_b);
        if (penalty == Penalty::l2) {
            for (std::size_t c = 0; c < d; ++c) {
                grad_w[c] += strength * y_w[c];
            }
        }

        const double f0 = penalized_value(y_w, y_b);
        double trial_b = 0.0;
        double trial_f = 0.0;
        // Backtracking on the proximal step; Armijo via the quadratic model.
        for (;;) {
            double quad = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                double cand = y_w[c] - step * grad_w[c];
                if (penalty == Penalty::l1) {
                    cand = soft_threshold(cand, step * strength);
                }
                trial_w[c] = cand;
                const double diff = cand - y_w[c];
                quad += grad_w[c] * diff + diff * diff / (2.0 * step);
            }
            trial_b = y_b - step * grad_b;
            const double diff_b = trial_b - y_b;
            quad += grad_b * diff_b + diff_b * diff_b / (2.0 * step);

            trial_f = penalized_value(trial_w, trial_b);
            // Compare the smooth parts: penalized_value excludes l1, and the
            // quadratic model upper-bounds the smooth part at the new point.
            // The slack is relative so roundoff near the optimum cannot
            // drive the step to zero.
            if (trial_f <= f0 + quad + 1e-12 * (std::fabs(f0) + 1e-12) ||
                step < 1e-12) {
                break;
            }
            step *= 0.5;
        }

        mapping_norm = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double g = (y_w[c] - trial_w[c]) / step;
            mapping_norm += g * g;
        }
        {
            const double g = (y_b - trial_b) / step;
            mapping_norm += g * g;
        }
        mapping_norm = std::sqrt(mapping_norm);

        // Restart when the momentum points against the last proximal step,
        // otherwise extrapolate past the new iterate.
        double against = (y_b - trial_b) * (trial_b - b);
        for (std::size_t c = 0; c < d; ++c) {
            against += (y_w[c] - trial_w[c]) * (trial_w[c] - w[c]);
        }
        if (against > 0.0) {
            momentum = 1.0;
            y_w = trial_w;
            y_b = trial_b;
        } else {
            const double next =
                0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
            const double beta = (momentum - 1.0) / next;
            for (std::size_t c = 0; c < d; ++c) {
                y_w[c] = trial_w[c] + beta * (trial_w[c] - w[c]);
            }
            y_b = trial_b + beta * (trial_b - b);
            momentum = next;
        }

        w = trial_w;
        b = trial_b;
        if (mapping_norm < kGradTolerance) {
            LinearModel model;
            model.weights = std::move(w);
            model.bias = b;
            model.penalty = penalty;
            model.strength = strength;
            return model;
        }
        step = std::min(step * 1.25, 1e6);
    }
    throw ConvergenceError(
        "logistic regression did not reach tolerance " +
            format_double(kGradTolerance) + " within " +
            std::to_string(max_iters) +
            " iterations (final gradient norm " + format_double(mapping_norm) +
            ")",
        mapping_norm);
}

nlohmann::json train_meta_json(double train_acc, double val_acc) {
    return {{"train_accuracy", train_acc}, {"validation_accuracy", val_acc}};
}

}  // namespace

std::string to_string(Penalty p) {
    return p == Penalty::l1 ? "l1" : "l2";
}

Penalty penalty_from_string(const std::string& s) {
    if (s == "l1") {
        return Penalty::l1;
    }
    if (s == "l2") {
        return Penalty::l2;
    }
    throw std::invalid_argument("unknown penalty: " + s);
}

std::string to_string(OutputTarget t) {
    return t == OutputTarget::probability ? "probability" : "logit";
}

OutputTarget target_from_string(const std::string& s) {
    if (s == "probability") {
        return OutputTarget::probability;
    }
    if (s == "logit") {
        return OutputTarget::logit;
    }
    throw std::invalid_argument("unknown output target: " + s);
}

double LinearModel::logit(std::span<const double> x) const {
    if (x.size() != weights.size()) {
        throw std::invalid_argument("input length does not match weights");
    }
    return dot(weights, x) + bias;
}

double LinearModel::predict_bad(std::span<const double> x) const {
    return sigmoid(logit(x));
}

std::vector<LogisticGridPoint> default_logistic_grid() {
    std::vector<LogisticGridPoint> grid;
    for (double strength : {0.01, 0.1, 1.0, 10.0, 100.0}) {
        grid.push_back({Penalty::l1, strength});
        grid.push_back({Penalty::l2, strength});
    }
    return grid;
}

LinearModel train_logistic(const FeatureTable& train,
                           const std::vector<LogisticGridPoint>& grid,
                           const FeatureTable& validation, int max_iters) {
    if (grid.empty()) {
        throw std::invalid_argument("logistic grid must be non-empty");
    }
    if (train.rows == 0) {
        throw std::invalid_argument("training table is empty");
    }
    if (max_iters < 1) {
        throw std::invalid_argument("max_iters must be >= 1");
    }

    bool have_best = false;
    LinearModel best;
    for (const auto& point : grid) {
        LinearModel model = fit_logistic_point(train, point.penalty,
                                               point.strength, max_iters);
        model.train_accuracy = accuracy(model, train);
        model.validation_accuracy = accuracy(model, validation);
        const bool better =
            !have_best ||
            model.validation_accuracy > best.validation_accuracy ||
            (model.validation_accuracy == best.validation_accuracy &&
             model.strength > best.strength);
        if (better) {
            best = std::move(model);
            have_best = true;
        }
    }
    return best;
}

MlpModel MlpModel::initialize(const std::vector<std::size_t>& layer_sizes,
                              std::uint64_t seed) {
    if (layer_sizes.size() < 2 || layer_sizes.back() != 1) {
        throw std::invalid_argument(
            "layer_sizes must be {in, hidden..., 1}");
    }
    MlpModel model;
    model.layer_sizes = layer_sizes;
    model.training_seed = seed;
    std::mt19937_64 rng(mix64(seed, 0x6d6c70 /* "mlp" */));
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t fan_in = layer_sizes[l];
        const std::size_t fan_out = layer_sizes[l + 1];
        const double limit =
            std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        std::vector<double> w(fan_out * fan_in);
        for (double& v : w) {
            v = dist(rng);
        }
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(fan_out, 0.0);
    }
    return model;
}

MlpModel MlpModel::from_linear(const LinearModel& linear) {
    MlpModel model;
    model.layer_sizes = {linear.weights.size(), 1};
    model.weights = {linear.weights};
    model.biases = {{linear.bias}};
    return model;
}

MlpModel::ForwardTrace MlpModel::forward_trace(std::span<const double> x) const {
    if (x.size() != input_size()) {
        throw std::invalid_argument("input length does not match network");
    }
    ForwardTrace trace;
    std::vector<double> cur(x.begin(), x.end());
    const std::size_t L = layer_count();
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t n_in = layer_sizes[l];
        const std::size_t n_out = layer_sizes[l + 1];
        std::vector<double> z(n_out);
        for (std::size_t j = 0; j < n_out; ++j) {
            double s = biases[l][j];
            const double* wrow = weights[l].data() + j * n_in;
            for (std::size_t i = 0; i < n_in; ++i) {
                s += wrow[i] * cur[i];
            }
            z[j] = s;
        }
        trace.pre.push_back(z);
        if (l + 1 < L) {
            for (double& v : z) {
                v = std::max(v, 0.0);
            }
        }
        trace.post.push_back(z);
        cur = std::move(z);
    }
    trace.logit = trace.post.back()[0];
    trace.p_bad = sigmoid(trace.logit);
    return trace;
}

double MlpModel::logit(std::span<const double> x) const {
    return forward_trace(x).logit;
}

double MlpModel::predict_bad(std::span<const double> x) const {
    return sigmoid(logit(x));
}

MlpModel train_mlp(const FeatureTable& train, const TrainConfig& config,
                   const FeatureTable& validation) {
    if (config.epochs < 1 || config.batch_size < 1 ||
        !(config.learning_rate > 0.0)) {
        throw std::invalid_argument("invalid TrainConfig");
    }
    if (train.rows == 0) {
        throw std::invalid_argument("training table is empty");
    }

    const std::size_t d = train.cols();
    MlpModel model = MlpModel::initialize({d, 17, 5, 1}, config.seed);
    const std::size_t L = model.layer_count();

    std::vector<std::size_t> order(train.rows);
    std::iota(order.begin(), order.end(), 0);

    std::vector<std::vector<double>> grad_w(L), grad_b(L);
    for (std::size_t l = 0; l < L; ++l) {
        grad_w[l].resize(model.weights[l].size());
        grad_b[l].resize(model.biases[l].size());
    }

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::mt19937_64 rng(mix64(config.seed, 0x1000 + epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < train.rows;
             start += config.batch_size) {
            const std::size_t end =
                std::min(train.rows, start + config.batch_size);
            const double inv_m = 1.0 / static_cast<double>(end - start);

            for (std::size_t l = 0; l < L; ++l) {
                std::fill(grad_w[l].begin(), grad_w[l].end(), 0.0);
                std::fill(grad_b[l].begin(), grad_b[l].end(), 0.0);
            }

            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t r = order[k];
                const auto trace = model.forward_trace(train.row(r));
                batch_loss += bce_loss(trace.p_bad, train.target[r]);

                // delta at the logit for sigmoid + BCE
                std::vector<double> delta = {
                    trace.p_bad - static_cast<double>(train.target[r])};
                for (std::size_t l = L; l-- > 0;) {
                    const std::size_t n_in = model.layer_sizes[l];
                    const std::size_t n_out = model.layer_sizes[l + 1];
                    const std::span<const double> input =
                        l == 0 ? train.row(r)
                                : std::span<const double>(trace.post[l - 1]);
                    for (std::size_t j = 0; j < n_out; ++j) {
                        grad_b[l][j] += delta[j];
                        double* grow = grad_w[l].data() + j * n_in;
                        for (std::size_t i = 0; i < n_in; ++i) {
                            grow[i] += delta[j] * input[i];
                        }
                    }
                    if (l == 0) {
                        break;
                    }
                    std::vector<double> prev(n_in, 0.0);
                    for (std::size_t i = 0; i < n_in; ++i) {
                        if (trace.pre[l - 1][i] <= 0.0) {
                            continue;  // rectifier derivative, 0 at the kink
                        }
                        double s = 0.0;
                        for (std::size_t j = 0; j < n_out; ++j) {
                            s += model.weights[l][j * n_in + i] * delta[j];
                        }
                        prev[i] = s;
                    }
                    delta = std::move(prev);
                }
            }

            batch_loss *= inv_m;
            if (!std::isfinite(batch_loss)) {
                throw TrainingError("non-finite loss at epoch " +
                                    std::to_string(epoch) + ", batch " +
                                    std::to_string(batches));
            }
            epoch_loss += batch_loss;
            ++batches;

            for (std::size_t l = 0; l < L; ++l) {
                for (std::size_t i = 0; i < grad_w[l].size(); ++i) {
                    model.weights[l][i] -=
                        config.learning_rate * grad_w[l][i] * inv_m;
                }
                for (std::size_t i = 0; i < grad_b[l].size(); ++i) {
                    model.biases[l][i] -=
                        config.learning_rate * grad_b[l][i] * inv_m;
                }
            }
        }
        model.epoch_losses.push_back(epoch_loss /
                                     static_cast<double>(batches));
    }

    model.train_accuracy = accuracy(model, train);
    model.validation_accuracy =
        validation.rows > 0 ? accuracy(model, validation) : 0.0;
    return model;
}

std::array<double, 2> predict_proba(const LinearModel& model,
                                    std::span<const double> x) {
    const double p = model.predict_bad(x);
    return {1.0 - p, p};
}

std::array<double, 2> predict_proba(const MlpModel& model,
                                    std::span<const double> x) {
    const double p = model.predict_bad(x);
    return {1.0 - p, p};
}

double logit(const LinearModel& model, std::span<const double> x) {
    return model.logit(x);
}

double logit(const MlpModel& model, std::span<const double> x) {
    return model.logit(x);
}

std::vector<double> input_gradient(const MlpModel& model,
                                   std::span<const double> x,
                                   OutputTarget target) {
    const auto trace = model.forward_trace(x);
    const std::size_t L = model.layer_count();

    std::vector<double> delta = {1.0};
    if (target == OutputTarget::probability) {
        delta[0] = trace.p_bad * (1.0 - trace.p_bad);
    }
    for (std::size_t l = L; l-- > 0;) {
        const std::size_t n_in = model.layer_sizes[l];
        const std::size_t n_out = model.layer_sizes[l + 1];
        std::vector<double> prev(n_in, 0.0);
        for (std::size_t i = 0; i < n_in; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n_out; ++j) {
                s += model.weights[l][j * n_in + i] * delta[j];
            }
            prev[i] = s;
        }
        if (l > 0) {
            for (std::size_t i = 0; i < n_in; ++i) {
                if (trace.pre[l - 1][i] <= 0.0) {
                    prev[i] = 0.0;
                }
            }
        }
        delta = std::move(prev);
    }
    return delta;
}

namespace {

template <typename Model>
double accuracy_impl(const Model& model, const FeatureTable& table) {
    if (table.rows == 0) {
        throw std::invalid_argument("accuracy of an empty table");
    }
    std::size_t correct = 0;
    for (std::size_t r = 0; r < table.rows; ++r) {
        const int pred = model.predict_bad(table.row(r)) >= 0.5 ? 1 : 0;
        correct += pred == table.target[r] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(table.rows);
}

}  // namespace

double accuracy(const LinearModel& model, const FeatureTable& table) {
    return accuracy_impl(model, table);
}

double accuracy(const MlpModel& model, const FeatureTable& table) {
    return accuracy_impl(model, table);
}

std::function<double(std::span<const double>)> predict_fn(
    const MlpModel& model) {
    return [&model](std::span<const double> x) { return model.predict_bad(x); };
}

std::function<double(std::span<const double>)> predict_fn(
    const LinearModel& model) {
    return [&model](std::span<const double> x) { return model.predict_bad(x); };
}

void save_model_json(const LinearModel& model, const std::string& path) {
    nlohmann::json doc = {
        {"format_version", 1},
        {"type", "linear"},
        {"weights", model.weights},
        {"bias", model.bias},
        {"penalty", to_string(model.penalty)},
        {"strength", model.strength},
        {"training", train_meta_json(model.train_accuracy,
                                     model.validation_accuracy)},
    };
    write_file(path, doc.dump(2) + "\n");
}

void save_model_json(const MlpModel& model, const std::string& path) {
    nlohmann::json meta =
        train_meta_json(model.train_accuracy, model.validation_accuracy);
    meta["seed"] = model.training_seed;
    meta["epoch_losses"] = model.epoch_losses;
    nlohmann::json doc = {
        {"format_version", 1},
        {"type", "mlp"},
        {"layer_sizes", model.layer_sizes},
        {"weights", model.weights},
        {"biases", model.biases},
        {"hidden_activation", "relu"},
        {"output_activation", "sigmoid"},
        {"training", meta},
    };
    write_file(path, doc.dump(2) + "\n");
}

LinearModel load_linear_model(const std::string& path) {
    const nlohmann::json doc = nlohmann::json::parse(read_file(path));
    if (doc.at("type").get<std::string>() != "linear") {
        throw DataError("not a linear model file: " + path);
    }
    LinearModel model;
    model.weights = doc.at("weights").get<std::vector<double>>();
    model.bias = doc.at("bias").get<double>();
    model.penalty = penalty_from_string(doc.at("penalty").get<std::string>());
    model.strength = doc.at("strength").get<double>();
    model.train_accuracy = doc.at("training").at("train_accuracy").get<double>();
    model.validation_accuracy =
        doc.at("training").at("validation_accuracy").get<double>();
    return model;
}

MlpModel load_mlp_model(const std::string& path) {
    const nlohmann::json doc = nlohmann::json::parse(read_file(path));
    if (doc.at("type").get<std::string>() != "mlp") {
        throw DataError("not an MLP model file: " + path);
    }
    MlpModel model;
    model.layer_sizes = doc.at("layer_sizes").get<std::vector<std::size_t>>();
    model.weights =
        doc.at("weights").get<std::vector<std::vector<double>>>();
    model.biases = doc.at("biases").get<std::vector<std::vector<double>>>();
    const auto& training = doc.at("training");
    model.training_seed = training.at("seed").get<std::uint64_t>();
    model.train_accuracy = training.at("train_accuracy").get<double>();
    model.validation_accuracy =
        training.at("validation_accuracy").get<double>();
    model.epoch_losses = training.at("epoch_losses").get<std::vector<double>>();
    return model;
}

}  // namespace attrib
