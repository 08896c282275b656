#include "attrib/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

#include "attrib/errors.hpp"
#include "attrib/util.hpp"

namespace attrib {

namespace {

// Rejection sampling proceeds in fixed-size chunks, each with its own
// derived seed, consumed in chunk order. That makes the accepted set a
// pure function of (seed, epsilon, K) no matter how chunks are scheduled.
constexpr std::size_t kChunkSize = 128;

std::array<double, 2> model_output(const MlpModel& model,
                                   std::span<const double> r) {
    const double p = model.predict_bad(r);
    return {1.0 - p, p};
}

std::vector<double> draw_standardized(const ScalerParams& scaler,
                                      std::mt19937_64& rng) {
    const std::size_t d = scaler.size();
    std::vector<double> raw(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double lo = scaler.raw_min[i];
        const double hi = scaler.raw_max[i];
        if (lo == hi) {
            raw[i] = lo;
            continue;
        }
        std::uniform_real_distribution<double> dist(lo, hi);
        raw[i] = dist(rng);
    }
    return scaler.to_standardized(raw);
}

struct ChunkAccept {
    std::size_t position;  // draw index within the chunk
    std::vector<double> point;
    double p_bad;
};

std::vector<ChunkAccept> scan_chunk(const MlpModel& model,
                                    const ScalerParams& scaler, double epsilon,
                                    std::uint64_t seed, std::size_t chunk) {
    std::mt19937_64 rng(mix64(seed, chunk));
    std::vector<ChunkAccept> accepts;
    for (std::size_t t = 0; t < kChunkSize; ++t) {
        std::vector<double> point = draw_standardized(scaler, rng);
        const double p = model.predict_bad(point);
        if (std::fabs(p - 0.5) <= epsilon) {
            accepts.push_back({t, std::move(point), p});
        }
    }
    return accepts;
}

ReferenceSet boundary_impl(const MlpModel& model, const ScalerParams& scaler,
                           std::size_t K, double epsilon, std::uint64_t seed,
                           std::size_t max_tries, bool parallel) {
    if (K < 1) {
        throw std::invalid_argument("boundary sampling needs K >= 1");
    }
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("epsilon must be positive");
    }
    if (scaler.size() != model.input_size()) {
        throw std::invalid_argument("scaler width does not match network");
    }

    ReferenceSet set;
    set.policy = ReferencePolicy::boundary;
    set.epsilon = epsilon;
    set.seed = seed;

    std::size_t draws_at_last_accept = 0;
    std::size_t next_chunk = 0;
    const std::size_t wave = 16;
    std::vector<std::vector<ChunkAccept>> outputs(wave);

    while (set.references.size() < K &&
           next_chunk * kChunkSize < max_tries) {
        const long long w = static_cast<long long>(wave);
#pragma omp parallel for schedule(dynamic) if (parallel)
        for (long long i = 0; i < w; ++i) {
            outputs[static_cast<std::size_t>(i)] =
                scan_chunk(model, scaler, epsilon, seed,
                           next_chunk + static_cast<std::size_t>(i));
        }
        for (std::size_t i = 0; i < wave && set.references.size() < K; ++i) {
            for (auto& acc : outputs[i]) {
                draws_at_last_accept =
                    (next_chunk + i) * kChunkSize + acc.position + 1;
                set.references.push_back(std::move(acc.point));
                set.outputs.push_back({1.0 - acc.p_bad, acc.p_bad});
                if (set.references.size() == K) {
                    break;
                }
            }
        }
        next_chunk += wave;
    }

    if (set.references.size() < K) {
        throw ExhaustionError(
            "boundary sampling found " + std::to_string(set.references.size()) +
            " of " + std::to_string(K) + " references within " +
            std::to_string(max_tries) +
            " draws; increase epsilon or max_tries");
    }
    set.acceptance_rate =
        static_cast<double>(K) / static_cast<double>(draws_at_last_accept);
    return set;
}

}  // namespace

std::string to_string(ReferencePolicy p) {
    switch (p) {
        case ReferencePolicy::random:
            return "random";
        case ReferencePolicy::boundary:
            return "boundary";
        case ReferencePolicy::tight:
            return "tight";
        case ReferencePolicy::named_profile:
            return "named_profile";
    }
    return "random";
}

ReferencePolicy policy_from_string(const std::string& s) {
    if (s == "random") {
        return ReferencePolicy::random;
    }
    if (s == "boundary") {
        return ReferencePolicy::boundary;
    }
    if (s == "tight") {
        return ReferencePolicy::tight;
    }
    if (s == "named_profile") {
        return ReferencePolicy::named_profile;
    }
    throw std::invalid_argument("unknown reference policy: " + s);
}

ReferenceSet random_references(const ScalerParams& scaler, std::size_t K,
                               std::uint64_t seed) {
    if (K < 1) {
        throw std::invalid_argument("random references need K >= 1");
    }
    ReferenceSet set;
    set.policy = ReferencePolicy::random;
    set.seed = seed;
    std::mt19937_64 rng(seed);
    for (std::size_t j = 0; j < K; ++j) {
        set.references.push_back(draw_standardized(scaler, rng));
    }
    return set;
}

ReferenceSet boundary_references(const MlpModel& model,
                                 const ScalerParams& scaler, std::size_t K,
                                 double epsilon, std::uint64_t seed,
                                 std::size_t max_tries) {
    return boundary_impl(model, scaler, K, epsilon, seed, max_tries, true);
}

ReferenceSet boundary_references_serial(const MlpModel& model,
                                        const ScalerParams& scaler,
                                        std::size_t K, double epsilon,
                                        std::uint64_t seed,
                                        std::size_t max_tries) {
    return boundary_impl(model, scaler, K, epsilon, seed, max_tries, false);
}

BoundaryPool build_boundary_pool(const MlpModel& model,
                                 const FeatureTable& table,
                                 const ScalerParams& scaler, double epsilon,
                                 std::size_t min_size, std::uint64_t seed,
                                 std::size_t max_tries) {
    if (table.cols() != model.input_size()) {
        throw std::invalid_argument("table width does not match network");
    }
    BoundaryPool pool;
    pool.epsilon = epsilon;
    for (std::size_t r = 0; r < table.rows; ++r) {
        const auto row = table.row(r);
        if (std::fabs(model.predict_bad(row) - 0.5) <= epsilon) {
            pool.points.emplace_back(row.begin(), row.end());
        }
    }
    pool.n_from_table = pool.points.size();
    if (pool.points.size() < min_size) {
        const std::size_t need = min_size - pool.points.size();
        ReferenceSet extra = boundary_references(
            model, scaler, need, epsilon, mix64(seed, 0xb07d), max_tries);
        for (auto& p : extra.references) {
            pool.points.push_back(std::move(p));
        }
        pool.n_sampled = need;
    }
    return pool;
}

ReferenceSet tight_references(const MlpModel& model, const BoundaryPool& pool,
                              std::span<const double> x, std::size_t K) {
    if (K < 1) {
        throw std::invalid_argument("tight references need K >= 1");
    }
    if (pool.points.size() < K) {
        throw ExhaustionError(
            "boundary pool holds " + std::to_string(pool.points.size()) +
            " points but K = " + std::to_string(K) +
            "; enlarge the pool or epsilon");
    }
    for (const auto& p : pool.points) {
        if (p.size() != x.size()) {
            throw std::invalid_argument("pool width does not match candidate");
        }
    }

    std::vector<double> dist(pool.points.size());
    for (std::size_t i = 0; i < pool.points.size(); ++i) {
        dist[i] = euclidean_distance(pool.points[i], x);
    }
    std::vector<std::size_t> order(pool.points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dist[a] != dist[b]) {
            return dist[a] < dist[b];
        }
        return a < b;
    });

    ReferenceSet set;
    set.policy = ReferencePolicy::tight;
    set.epsilon = pool.epsilon;
    set.anchor.assign(x.begin(), x.end());
    for (std::size_t j = 0; j < K; ++j) {
        const auto& p = pool.points[order[j]];
        set.references.push_back(p);
        set.outputs.push_back(model_output(model, p));
    }
    return set;
}

ReferenceSet tight_references(const MlpModel& model, const FeatureTable& table,
                              const ScalerParams& scaler,
                              std::span<const double> x, std::size_t K,
                              double epsilon, std::uint64_t seed) {
    const BoundaryPool pool = build_boundary_pool(
        model, table, scaler, epsilon, std::max<std::size_t>(K, 50), seed);
    ReferenceSet set = tight_references(model, pool, x, K);
    set.seed = seed;
    return set;
}

std::vector<NamedProfile> profile_catalog(const MlpModel& model,
                                          const FeatureTable& table,
                                          const ScalerParams& scaler,
                                          double epsilon, std::uint64_t seed) {
    const std::size_t d = scaler.size();
    if (table.cols() != d || d != model.input_size()) {
        throw std::invalid_argument("table, scaler and network widths differ");
    }
    std::vector<NamedProfile> catalog;

    {
        NamedProfile p;
        p.name = "unclassifiable";
        ReferenceSet boundary = boundary_references(model, scaler, 1, epsilon,
                                                    mix64(seed, 0x5e1));
        p.standardized = boundary.references[0];
        p.raw = scaler.to_raw(p.standardized);
        p.output = boundary.outputs[0];
        catalog.push_back(std::move(p));
    }

    {
        NamedProfile p;
        p.name = "average candidate";
        p.standardized.assign(d, 0.0);
        for (std::size_t r = 0; r < table.rows; ++r) {
            const auto row = table.row(r);
            for (std::size_t c = 0; c < d; ++c) {
                p.standardized[c] += row[c];
            }
        }
        for (double& v : p.standardized) {
            v /= static_cast<double>(table.rows);
        }
        p.raw = scaler.to_raw(p.standardized);
        p.output = model_output(model, p.standardized);
        catalog.push_back(std::move(p));
    }

    {
        // A file with no credit history: zero counts, tenures and
        // percentages. Percent of trades with balance is undefined at zero
        // trades, so it takes the table median instead.
        NamedProfile p;
        p.name = "new candidate";
        p.raw.assign(d, 0.0);
        const auto idx = table.feature_index("PercentTradesWBalance");
        if (idx && *idx < d) {
            std::vector<double> column(table.rows);
            for (std::size_t r = 0; r < table.rows; ++r) {
                column[r] = table.at(r, *idx);
            }
            std::nth_element(column.begin(),
                             column.begin() + column.size() / 2, column.end());
            const double med_std = column[column.size() / 2];
            p.raw[*idx] = scaler.mean[*idx] + scaler.stddev[*idx] * med_std;
        }
        p.standardized = scaler.to_standardized(p.raw);
        p.output = model_output(model, p.standardized);
        catalog.push_back(std::move(p));
    }

    return catalog;
}

std::string render_profile_table(const std::vector<NamedProfile>& profiles,
                                 const ScalerParams& scaler) {
    auto feature_value = [&](const NamedProfile& p,
                             const std::string& name) -> double {
        for (std::size_t i = 0; i < scaler.feature_names.size(); ++i) {
            if (scaler.feature_names[i] == name) {
                return p.raw[i];
            }
        }
        return std::nan("");
    };

    struct Row {
        std::string label;
        std::string feature;
        double divisor;
    };
    const std::vector<Row> rows = {
        {"delinquencies", "NumTrades90Ever2DerogPubRec", 1.0},
        {"credit history (years)", "MSinceOldestTradeOpen", 12.0},
        {"credit trades", "NumTotalTrades", 1.0},
        {"accounts with balance (%)", "PercentTradesWBalance", 1.0},
        {"credit inquiries (6 months)", "NumInqLast6M", 1.0},
    };

    char buf[128];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-28s", "profile");
    out += buf;
    for (const auto& p : profiles) {
        std::snprintf(buf, sizeof(buf), "  %18s", p.name.c_str());
        out += buf;
    }
    out += '\n';
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%-28s", row.label.c_str());
        out += buf;
        for (const auto& p : profiles) {
            const double v = feature_value(p, row.feature) / row.divisor;
            if (std::isnan(v)) {
                std::snprintf(buf, sizeof(buf), "  %18s", "n/a");
            } else {
                std::snprintf(buf, sizeof(buf), "  %18.1f", v);
            }
            out += buf;
        }
        out += '\n';
    }
    std::snprintf(buf, sizeof(buf), "%-28s", "prediction [good, bad]");
    out += buf;
    for (const auto& p : profiles) {
        char pair[64];
        std::snprintf(pair, sizeof(pair), "[%.2f, %.2f]", p.output[0],
                      p.output[1]);
        std::snprintf(buf, sizeof(buf), "  %18s", pair);
        out += buf;
    }
    out += '\n';
    return out;
}

}  // namespace attrib
