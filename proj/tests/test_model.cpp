#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "attrib/dataset.hpp"
#include "attrib/errors.hpp"
#include "attrib/model.hpp"
#include "attrib/util.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace attrib;
using attrib_test::tmp_path;

namespace {

FeatureTable table_from(std::vector<std::string> names,
                        std::vector<std::vector<double>> rows,
                        std::vector<int> target) {
    FeatureTable t;
    t.feature_names = std::move(names);
    t.rows = rows.size();
    t.target = std::move(target);
    for (const auto& row : rows) {
        t.values.insert(t.values.end(), row.begin(), row.end());
    }
    t.special_mask.assign(t.rows * t.cols(), 0);
    return t;
}

// Linearly separable, symmetric around the origin: class = sign of x0.
FeatureTable separable_table(std::size_t n) {
    std::vector<std::vector<double>> rows;
    std::vector<int> target;
    for (std::size_t i = 0; i < n; ++i) {
        const double jitter = 0.3 * static_cast<double>(i % 7) / 7.0;
        const double mag = 1.0 + jitter;
        const int cls = i % 2;
        const double x0 = cls == 1 ? mag : -mag;
        const double x1 = (i % 3 == 0 ? 0.4 : -0.2) + 0.05 * jitter;
        rows.push_back({x0, x1});
        target.push_back(cls);
    }
    return table_from({"x0", "x1"}, rows, target);
}

// XOR of coordinate signs, magnitudes kept off the axes so the decision
// boundary has a margin.
FeatureTable xor_table(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(0.2, 1.0);
    std::vector<std::vector<double>> rows;
    std::vector<int> target;
    for (std::size_t i = 0; i < n; ++i) {
        const double s0 = (rng() & 1) ? 1.0 : -1.0;
        const double s1 = (rng() & 1) ? 1.0 : -1.0;
        rows.push_back({s0 * mag(rng), s1 * mag(rng)});
        target.push_back(s0 * s1 < 0 ? 1 : 0);
    }
    return table_from({"x0", "x1"}, rows, target);
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("penalty and target names round-trip") {
    CHECK(to_string(Penalty::l1) == "l1");
    CHECK(penalty_from_string("l2") == Penalty::l2);
    CHECK_THROWS_AS(penalty_from_string("elastic"), std::invalid_argument);
    CHECK(to_string(OutputTarget::logit) == "logit");
    CHECK(target_from_string("probability") == OutputTarget::probability);
    CHECK_THROWS_AS(target_from_string("odds"), std::invalid_argument);
}

TEST_CASE("default grid crosses five strengths with both penalties") {
    const auto grid = default_logistic_grid();
    REQUIRE(grid.size() == 10);
    std::size_t n_l1 = 0;
    for (const auto& p : grid) {
        n_l1 += p.penalty == Penalty::l1 ? 1 : 0;
    }
    CHECK(n_l1 == 5);
    CHECK(grid.front().strength == 0.01);
    CHECK(grid.back().strength == 100.0);
}

TEST_CASE("logistic regression separates a separable toy set") {
    const FeatureTable t = separable_table(60);
    const LinearModel m =
        train_logistic(t, {{Penalty::l2, 0.01}}, t);
    CHECK(m.train_accuracy == 1.0);
    CHECK(m.validation_accuracy == 1.0);
    CHECK(m.weights[0] > 0.0);  // positive x0 drives class 1 (Bad)
    CHECK(std::abs(m.weights[1]) < std::abs(m.weights[0]));
    CHECK(m.penalty == Penalty::l2);
    CHECK(m.strength == 0.01);

    SUBCASE("prediction identities") {
        const std::vector<double> x{0.7, -0.1};
        CHECK(m.predict_bad(x) == sigmoid(m.logit(x)));
        const auto pr = predict_proba(m, x);
        CHECK(pr[0] + pr[1] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(pr[1] == m.predict_bad(x));
    }

    SUBCASE("argument checks") {
        CHECK_THROWS_AS(train_logistic(t, {}, t), std::invalid_argument);
        CHECK_THROWS_AS(train_logistic(t, {{Penalty::l2, 1.0}}, t, 0),
                        std::invalid_argument);
        const std::vector<double> wrong{1.0, 2.0, 3.0};
        CHECK_THROWS_AS(m.logit(wrong), std::invalid_argument);
    }
}

TEST_CASE("logistic regression recovers planted coefficients") {
    // Weight recovery needs an identifiable design: independent features
    // and an unattenuated signal.
    SyntheticSpec spec = SyntheticSpec::heloc_like();
    spec.latent_base = 0.0;
    spec.latent_gain = 0.0;
    spec.signal_scale = 1.0;
    const FeatureTable raw = synthesize(3000, spec, 1);
    const auto [scaled, scaler] = standardize(raw);
    const SplitResult s = split(scaled, 0.33, 0);
    const LinearModel m =
        train_logistic(s.train, {{Penalty::l2, 0.01}}, s.validation);
    REQUIRE(m.weights.size() == spec.coefficients.size());
    CHECK(pearson(m.weights, spec.coefficients) > 0.95);
    CHECK(std::abs(m.bias) < 0.2);
    CHECK(m.validation_accuracy > 0.6);
}

TEST_CASE("strong l1 zeroes every weight exactly") {
    const FeatureTable raw = synthesize(500, SyntheticSpec::heloc_like(), 2);
    const auto [scaled, scaler] = standardize(raw);
    const LinearModel m =
        train_logistic(scaled, {{Penalty::l1, 100.0}}, scaled);
    for (double w : m.weights) {
        CHECK(w == 0.0);
    }
    CHECK(std::isfinite(m.bias));
}

TEST_CASE("moderate l1 is sparse but not empty") {
    const FeatureTable raw = synthesize(2000, SyntheticSpec::heloc_like(), 3);
    const auto [scaled, scaler] = standardize(raw);
    const LinearModel m =
        train_logistic(scaled, {{Penalty::l1, 0.05}}, scaled);
    std::size_t zeros = 0;
    for (double w : m.weights) {
        zeros += w == 0.0 ? 1 : 0;
    }
    CHECK(zeros > 0);
    CHECK(zeros < m.weights.size());
    // The dominant planted feature survives the penalty.
    CHECK(m.weights[0] != 0.0);
}

TEST_CASE("validation ties go to the stronger regularization") {
    const FeatureTable t = separable_table(60);
    const LinearModel m = train_logistic(
        t, {{Penalty::l2, 0.01}, {Penalty::l2, 10.0}}, t);
    CHECK(m.validation_accuracy == 1.0);
    CHECK(m.strength == 10.0);
}

TEST_CASE("iteration cap raises ConvergenceError with the final norm") {
    const FeatureTable t = separable_table(60);
    try {
        train_logistic(t, {{Penalty::l2, 0.01}}, t, 3);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.gradient_norm > 1e-6);
        CHECK(std::string(e.what()).find("3 iterations") != std::string::npos);
    }
}

TEST_CASE("mlp initialization is Glorot-bounded and seeded") {
    const MlpModel a = MlpModel::initialize({23, 17, 5, 1}, 9);
    const MlpModel b = MlpModel::initialize({23, 17, 5, 1}, 9);
    const MlpModel c = MlpModel::initialize({23, 17, 5, 1}, 10);
    CHECK(a.weights == b.weights);
    CHECK(a.weights != c.weights);
    REQUIRE(a.layer_count() == 3);
    CHECK(a.weights[0].size() == 17 * 23);
    CHECK(a.weights[1].size() == 5 * 17);
    CHECK(a.weights[2].size() == 1 * 5);
    for (std::size_t l = 0; l < 3; ++l) {
        for (double bias : a.biases[l]) {
            CHECK(bias == 0.0);
        }
        const double limit = std::sqrt(
            6.0 / static_cast<double>(a.layer_sizes[l] + a.layer_sizes[l + 1]));
        for (double w : a.weights[l]) {
            CHECK(std::abs(w) <= limit);
        }
    }
    // Zero input with zero biases gives logit 0, probability one half.
    const std::vector<double> zero(23, 0.0);
    CHECK(a.logit(zero) == 0.0);
    CHECK(a.predict_bad(zero) == 0.5);

    CHECK_THROWS_AS(MlpModel::initialize({5}, 0), std::invalid_argument);
    CHECK_THROWS_AS(MlpModel::initialize({5, 3}, 0), std::invalid_argument);
}

TEST_CASE("from_linear reproduces the linear logit exactly") {
    LinearModel lin;
    lin.weights = {0.5, -1.25, 2.0};
    lin.bias = 0.75;
    const MlpModel wrapped = MlpModel::from_linear(lin);
    const std::vector<double> x{1.0, 2.0, -0.5};
    CHECK(wrapped.logit(x) == lin.logit(x));
    CHECK(wrapped.predict_bad(x) == lin.predict_bad(x));
    const auto grad = input_gradient(wrapped, x, OutputTarget::logit);
    CHECK(grad == lin.weights);
    const auto gp = input_gradient(wrapped, x, OutputTarget::probability);
    const double p = lin.predict_bad(x);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(gp[i] == doctest::Approx(p * (1.0 - p) * lin.weights[i])
                           .epsilon(1e-14));
    }
}

TEST_CASE("mlp learns XOR") {
    const FeatureTable train = xor_table(400, 7);
    const FeatureTable val = xor_table(200, 8);
    TrainConfig config;
    config.epochs = 400;
    config.batch_size = 32;
    config.learning_rate = 0.5;
    config.seed = 1;
    const MlpModel m = train_mlp(train, config, val);
    CHECK(m.validation_accuracy > 0.95);
    CHECK(m.train_accuracy > 0.95);
    CHECK(m.layer_sizes == std::vector<std::size_t>{2, 17, 5, 1});
    REQUIRE(m.epoch_losses.size() == 400);
    CHECK(m.epoch_losses.back() < m.epoch_losses.front());
}

TEST_CASE("mlp training is bit-identical under the same seed") {
    const FeatureTable train = xor_table(120, 3);
    const FeatureTable val = xor_table(40, 4);
    TrainConfig config;
    config.epochs = 12;
    config.batch_size = 16;
    config.learning_rate = 0.3;
    config.seed = 77;
    const MlpModel a = train_mlp(train, config, val);
    const MlpModel b = train_mlp(train, config, val);
    CHECK(a.weights == b.weights);
    CHECK(a.biases == b.biases);
    CHECK(a.epoch_losses == b.epoch_losses);
    config.seed = 78;
    const MlpModel c = train_mlp(train, config, val);
    CHECK(a.weights != c.weights);
}

TEST_CASE("exploding training reports TrainingError with the epoch") {
    const FeatureTable t = separable_table(40);
    TrainConfig config;
    config.epochs = 5;
    config.batch_size = 100;
    config.learning_rate = 1e300;
    config.seed = 0;
    try {
        train_mlp(t, config, t);
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }

    SUBCASE("invalid configs are rejected up front") {
        TrainConfig bad;
        bad.epochs = 0;
        CHECK_THROWS_AS(train_mlp(t, bad, t), std::invalid_argument);
        bad = TrainConfig{};
        bad.learning_rate = 0.0;
        CHECK_THROWS_AS(train_mlp(t, bad, t), std::invalid_argument);
    }
}

TEST_CASE("reverse-mode gradients match central differences") {
    const MlpModel m = MlpModel::initialize({5, 17, 5, 1}, 3);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double h = 1e-5;
    double worst = 0.0;
    for (int pt = 0; pt < 20; ++pt) {
        std::vector<double> x(5);
        for (double& v : x) {
            v = gauss(rng);
        }
        for (OutputTarget target :
             {OutputTarget::logit, OutputTarget::probability}) {
            const auto grad = input_gradient(m, x, target);
            for (std::size_t i = 0; i < x.size(); ++i) {
                std::vector<double> hi = x, lo = x;
                hi[i] += h;
                lo[i] -= h;
                const double fh = target == OutputTarget::logit
                                      ? m.logit(hi)
                                      : m.predict_bad(hi);
                const double fl = target == OutputTarget::logit
                                      ? m.logit(lo)
                                      : m.predict_bad(lo);
                const double fd = (fh - fl) / (2.0 * h);
                const double rel =
                    std::abs(fd - grad[i]) / std::max(std::abs(fd), 1e-8);
                worst = std::max(worst, rel);
            }
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("probability gradient is the logit gradient times p(1-p)") {
    const MlpModel m = MlpModel::initialize({4, 17, 5, 1}, 5);
    const std::vector<double> x{0.3, -1.2, 0.8, 2.1};
    const auto gl = input_gradient(m, x, OutputTarget::logit);
    const auto gp = input_gradient(m, x, OutputTarget::probability);
    const double p = m.predict_bad(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(gp[i] - p * (1.0 - p) * gl[i]) < 1e-10);
    }
}

TEST_CASE("accuracy matches a manual tally") {
    LinearModel m;
    m.weights = {1.0};
    m.bias = 0.0;
    // Predictions: p >= 0.5 iff x >= 0. Rows: +1 (pred 1), -1 (pred 0),
    // 0 (pred 1, boundary counts as bad), +2 (pred 1).
    const FeatureTable t = table_from(
        {"x"}, {{1.0}, {-1.0}, {0.0}, {2.0}}, {1, 0, 0, 0});
    CHECK(accuracy(m, t) == 0.5);
    const FeatureTable empty = table_from({"x"}, {}, {});
    CHECK_THROWS_AS(accuracy(m, empty), std::invalid_argument);
}

TEST_CASE("model JSON round-trips") {
    SUBCASE("linear") {
        const FeatureTable t = separable_table(60);
        const LinearModel m =
            train_logistic(t, {{Penalty::l1, 0.01}}, t);
        const std::string path = tmp_path("model_linear.json");
        save_model_json(m, path);
        const LinearModel back = load_linear_model(path);
        CHECK(back.weights == m.weights);
        CHECK(back.bias == m.bias);
        CHECK(back.penalty == m.penalty);
        CHECK(back.strength == m.strength);
        CHECK(back.train_accuracy == m.train_accuracy);
        CHECK(back.validation_accuracy == m.validation_accuracy);
        CHECK_THROWS_AS(load_mlp_model(path), DataError);
    }

    SUBCASE("mlp") {
        const FeatureTable train = xor_table(80, 5);
        TrainConfig config;
        config.epochs = 4;
        config.batch_size = 20;
        config.seed = 21;
        const MlpModel m = train_mlp(train, config, train);
        const std::string path = tmp_path("model_mlp.json");
        save_model_json(m, path);
        const MlpModel back = load_mlp_model(path);
        CHECK(back.layer_sizes == m.layer_sizes);
        CHECK(back.weights == m.weights);
        CHECK(back.biases == m.biases);
        CHECK(back.training_seed == m.training_seed);
        CHECK(back.epoch_losses == m.epoch_losses);
        CHECK(back.train_accuracy == m.train_accuracy);
        CHECK(back.validation_accuracy == m.validation_accuracy);
        CHECK_THROWS_AS(load_linear_model(path), DataError);
    }
}

TEST_CASE("predict_fn exposes p_bad") {
    const MlpModel m = MlpModel::initialize({3, 17, 5, 1}, 2);
    const auto f = predict_fn(m);
    const std::vector<double> x{0.1, -0.4, 0.9};
    CHECK(f(x) == m.predict_bad(x));
}

}  // TEST_SUITE
