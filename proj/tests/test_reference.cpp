#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "attrib/dataset.hpp"
#include "attrib/errors.hpp"
#include "attrib/model.hpp"
#include "attrib/reference.hpp"
#include "attrib/util.hpp"
#include "doctest.h"

using namespace attrib;

namespace {

ScalerParams plain_scaler() {
    ScalerParams s;
    s.feature_names = {"x0", "x1"};
    s.mean = {0.0, 0.0};
    s.stddev = {1.0, 1.0};
    s.raw_min = {-3.0, -3.0};
    s.raw_max = {3.0, 3.0};
    return s;
}

MlpModel slope_model() {
    // p_bad = sigmoid(x0); the boundary is the x0 = 0 line.
    LinearModel lin;
    lin.weights = {1.0, 0.0};
    lin.bias = 0.0;
    return MlpModel::from_linear(lin);
}

MlpModel flat_model(std::size_t d) {
    LinearModel lin;
    lin.weights.assign(d, 0.0);
    lin.bias = 0.0;
    return MlpModel::from_linear(lin);
}

}  // namespace

TEST_SUITE("reference") {

TEST_CASE("policy names round-trip") {
    for (ReferencePolicy p :
         {ReferencePolicy::random, ReferencePolicy::boundary,
          ReferencePolicy::tight, ReferencePolicy::named_profile}) {
        CHECK(policy_from_string(to_string(p)) == p);
    }
    CHECK_THROWS_AS(policy_from_string("nearest"), std::invalid_argument);
}

TEST_CASE("random references stay in the raw range and cover it") {
    const ScalerParams scaler = plain_scaler();
    const ReferenceSet set = random_references(scaler, 10000, 3);
    REQUIRE(set.references.size() == 10000);
    CHECK(set.policy == ReferencePolicy::random);
    CHECK(set.seed == 3);

    double lo0 = 1e300, hi0 = -1e300;
    for (const auto& ref : set.references) {
        const auto raw = scaler.to_raw(ref);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            CHECK(raw[i] >= scaler.raw_min[i]);
            CHECK(raw[i] <= scaler.raw_max[i]);
        }
        lo0 = std::min(lo0, raw[0]);
        hi0 = std::max(hi0, raw[0]);
    }
    // 10000 uniform draws essentially pin the endpoints.
    CHECK(lo0 < -2.97);
    CHECK(hi0 > 2.97);

    SUBCASE("deterministic under the seed") {
        const ReferenceSet again = random_references(scaler, 100, 3);
        for (std::size_t j = 0; j < 100; ++j) {
            CHECK(again.references[j] == set.references[j]);
        }
        const ReferenceSet other = random_references(scaler, 100, 4);
        CHECK(other.references[0] != set.references[0]);
    }

    SUBCASE("K must be positive") {
        CHECK_THROWS_AS(random_references(scaler, 0, 1),
                        std::invalid_argument);
    }
}

TEST_CASE("a degenerate feature range pins that coordinate") {
    ScalerParams s;
    s.feature_names = {"a", "fixed"};
    s.mean = {0.0, 5.0};
    s.stddev = {1.0, 2.0};
    s.raw_min = {-1.0, 5.0};
    s.raw_max = {1.0, 5.0};
    const ReferenceSet set = random_references(s, 50, 1);
    for (const auto& ref : set.references) {
        // (5 - 5) / 2 standardized
        CHECK(ref[1] == 0.0);
    }
}

TEST_CASE("boundary references respect epsilon and record outputs") {
    const ScalerParams scaler = plain_scaler();
    const MlpModel m = slope_model();
    const double epsilon = 0.02;
    const ReferenceSet set = boundary_references(m, scaler, 5, epsilon, 11);
    REQUIRE(set.references.size() == 5);
    REQUIRE(set.outputs.size() == 5);
    CHECK(set.policy == ReferencePolicy::boundary);
    CHECK(set.epsilon == epsilon);
    for (std::size_t j = 0; j < 5; ++j) {
        const double p = m.predict_bad(set.references[j]);
        CHECK(std::fabs(p - 0.5) <= epsilon);
        CHECK(set.outputs[j][1] == p);
        CHECK(set.outputs[j][0] == 1.0 - p);
    }
    CHECK(set.acceptance_rate > 0.0);
    CHECK(set.acceptance_rate <= 1.0);

    SUBCASE("serial and parallel paths agree exactly") {
        const ReferenceSet serial =
            boundary_references_serial(m, scaler, 5, epsilon, 11);
        CHECK(serial.references == set.references);
        CHECK(serial.acceptance_rate == set.acceptance_rate);
    }

    SUBCASE("argument checks") {
        CHECK_THROWS_AS(boundary_references(m, scaler, 0, 0.1, 1),
                        std::invalid_argument);
        CHECK_THROWS_AS(boundary_references(m, scaler, 1, 0.0, 1),
                        std::invalid_argument);
    }
}

TEST_CASE("a model glued to the boundary accepts every draw") {
    const ScalerParams scaler = plain_scaler();
    const MlpModel m = flat_model(2);
    const ReferenceSet set = boundary_references(m, scaler, 20, 0.01, 2);
    CHECK(set.acceptance_rate == 1.0);
    for (const auto& out : set.outputs) {
        CHECK(out[1] == 0.5);
    }
}

TEST_CASE("hopeless constraints raise ExhaustionError") {
    const ScalerParams scaler = plain_scaler();
    LinearModel lin;
    lin.weights = {0.0, 0.0};
    lin.bias = 50.0;  // p_bad is 1 everywhere
    const MlpModel m = MlpModel::from_linear(lin);
    try {
        boundary_references(m, scaler, 1, 0.01, 1, 4096);
        FAIL("expected ExhaustionError");
    } catch (const ExhaustionError& e) {
        CHECK(std::string(e.what()).find("increase epsilon") !=
              std::string::npos);
    }
}

TEST_CASE("boundary pool prefers table rows and tops up by sampling") {
    const ScalerParams scaler = plain_scaler();
    const MlpModel m = slope_model();
    // sigmoid(0.01) is inside |p - 0.5| <= 0.01; sigmoid(2) is far out.
    FeatureTable table;
    table.feature_names = {"x0", "x1"};
    table.rows = 4;
    table.values = {0.0, 1.0, 2.0, 0.5, 0.01, -1.0, -2.0, 0.0};
    table.target = {0, 1, 0, 1};
    table.special_mask.assign(8, 0);

    const BoundaryPool small = build_boundary_pool(m, table, scaler, 0.01,
                                                   /*min_size=*/2, 5);
    CHECK(small.n_from_table == 2);
    CHECK(small.n_sampled == 0);
    REQUIRE(small.points.size() == 2);
    CHECK(small.points[0] == std::vector<double>{0.0, 1.0});
    CHECK(small.points[1] == std::vector<double>{0.01, -1.0});

    const BoundaryPool big = build_boundary_pool(m, table, scaler, 0.01,
                                                 /*min_size=*/10, 5);
    CHECK(big.n_from_table == 2);
    CHECK(big.n_sampled == 8);
    CHECK(big.points.size() == 10);
    for (const auto& p : big.points) {
        CHECK(std::fabs(m.predict_bad(p) - 0.5) <= 0.01);
    }
}

TEST_CASE("tight references are the K nearest pool points in order") {
    const MlpModel m = flat_model(3);
    BoundaryPool pool;
    pool.epsilon = 0.05;
    std::mt19937_64 rng(21);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < 30; ++i) {
        pool.points.push_back({gauss(rng), gauss(rng), gauss(rng)});
    }
    const std::vector<double> x{0.2, -0.3, 0.4};

    const ReferenceSet set = tight_references(m, pool, x, 10);
    REQUIRE(set.references.size() == 10);
    CHECK(set.policy == ReferencePolicy::tight);
    CHECK(set.epsilon == 0.05);
    CHECK(set.anchor == x);

    // Brute-force oracle: sort pool indices by (distance, index).
    std::vector<std::size_t> order(pool.points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double da = euclidean_distance(pool.points[a], x);
        const double db = euclidean_distance(pool.points[b], x);
        if (da != db) {
            return da < db;
        }
        return a < b;
    });
    for (std::size_t j = 0; j < 10; ++j) {
        CHECK(set.references[j] == pool.points[order[j]]);
    }
    for (std::size_t j = 1; j < 10; ++j) {
        CHECK(euclidean_distance(set.references[j], x) >=
              euclidean_distance(set.references[j - 1], x));
    }

    SUBCASE("anchor inside the pool comes back first at distance zero") {
        BoundaryPool with_x = pool;
        with_x.points.push_back(x);
        const ReferenceSet s2 = tight_references(m, with_x, x, 3);
        CHECK(s2.references[0] == x);
    }

    SUBCASE("duplicate distances break ties by pool index") {
        BoundaryPool dup;
        dup.epsilon = 0.05;
        dup.points = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {-1.0, 0.0, 0.0}};
        const std::vector<double> origin{0.0, 0.0, 0.0};
        const ReferenceSet s3 = tight_references(m, dup, origin, 3);
        CHECK(s3.references[0] == dup.points[0]);
        CHECK(s3.references[1] == dup.points[1]);
        CHECK(s3.references[2] == dup.points[2]);
    }

    SUBCASE("a starved pool raises ExhaustionError") {
        BoundaryPool tiny;
        tiny.points = {{0.0, 0.0, 0.0}};
        CHECK_THROWS_AS(tight_references(m, tiny, x, 2), ExhaustionError);
    }

    SUBCASE("pool width must match the candidate") {
        BoundaryPool wrong;
        wrong.points = {{0.0, 0.0}};
        CHECK_THROWS_AS(tight_references(m, wrong, x, 1),
                        std::invalid_argument);
    }
}

TEST_CASE("tight convenience overload builds its own pool") {
    const ScalerParams scaler = plain_scaler();
    const MlpModel m = slope_model();
    FeatureTable table;
    table.feature_names = {"x0", "x1"};
    table.rows = 2;
    table.values = {0.0, 0.0, 0.005, 1.0};
    table.target = {0, 1};
    table.special_mask.assign(4, 0);

    const std::vector<double> x{0.0, 0.2};
    const ReferenceSet set =
        tight_references(m, table, scaler, x, 10, 0.01, 7);
    REQUIRE(set.references.size() == 10);
    CHECK(set.seed == 7);
    for (const auto& ref : set.references) {
        CHECK(std::fabs(m.predict_bad(ref) - 0.5) <= 0.01);
    }
    for (std::size_t j = 1; j < set.references.size(); ++j) {
        CHECK(euclidean_distance(set.references[j], x) >=
              euclidean_distance(set.references[j - 1], x));
    }
}

TEST_CASE("profile catalog builds its three standard profiles") {
    const FeatureTable raw = synthesize(300, SyntheticSpec::heloc_like(), 13);
    const auto [scaled, scaler] = standardize(raw);
    const MlpModel m = flat_model(scaled.cols());

    const auto catalog = profile_catalog(m, scaled, scaler, 0.01, 3);
    REQUIRE(catalog.size() == 3);
    CHECK(catalog[0].name == "unclassifiable");
    CHECK(catalog[1].name == "average candidate");
    CHECK(catalog[2].name == "new candidate");

    // Boundary profile honors the epsilon constraint.
    CHECK(std::fabs(catalog[0].output[1] - 0.5) <= 0.01);

    // The standardized table means are zero by construction.
    for (double v : catalog[1].standardized) {
        CHECK(std::abs(v) < 1e-9);
    }
    for (std::size_t c = 0; c < scaler.size(); ++c) {
        CHECK(catalog[1].raw[c] ==
              doctest::Approx(scaler.mean[c]).epsilon(1e-9));
    }

    // The fresh file is all zeros except percent of trades with balance.
    const auto idx = scaled.feature_index("PercentTradesWBalance");
    REQUIRE(idx.has_value());
    for (std::size_t c = 0; c < scaler.size(); ++c) {
        if (c != *idx) {
            CHECK(catalog[2].raw[c] == 0.0);
        }
    }
    CHECK(catalog[2].raw[*idx] > 0.0);
    CHECK(catalog[2].raw[*idx] <= 100.0);
    // Standardized and raw stay consistent under the scaler.
    const auto back = scaler.to_standardized(catalog[2].raw);
    for (std::size_t c = 0; c < scaler.size(); ++c) {
        CHECK(catalog[2].standardized[c] ==
              doctest::Approx(back[c]).epsilon(1e-12));
    }

    SUBCASE("rendered table lists profiles and predictions") {
        const std::string text = render_profile_table(catalog, scaler);
        CHECK(text.find("unclassifiable") != std::string::npos);
        CHECK(text.find("new candidate") != std::string::npos);
        CHECK(text.find("credit history (years)") != std::string::npos);
        CHECK(text.find("delinquencies") != std::string::npos);
        CHECK(text.find("[0.50, 0.50]") != std::string::npos);
        CHECK(std::count(text.begin(), text.end(), '\n') == 7);
    }
}

}  // TEST_SUITE
