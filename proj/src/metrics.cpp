#include "attrib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "attrib/errors.hpp"
#include "attrib/util.hpp"

namespace attrib {

namespace {

void check_attr_group(const std::vector<Attribution>& attrs) {
    if (attrs.size() < 2) {
        throw std::invalid_argument("need at least 2 attributions (K >= 2)");
    }
    const auto& first = attrs.front();
    if (first.values.empty()) {
        throw std::invalid_argument("attributions are empty");
    }
    for (const auto& a : attrs) {
        if (a.method != first.method || a.values.size() != first.values.size() ||
            a.candidate != first.candidate) {
            throw std::invalid_argument(
                "attributions mix methods, sizes or candidates");
        }
    }
}

void check_permutation(std::span<const std::size_t> ranking, std::size_t d) {
    if (ranking.size() != d) {
        throw std::invalid_argument("rankings have different lengths");
    }
    std::vector<std::uint8_t> seen(d, 0);
    for (std::size_t f : ranking) {
        if (f >= d || seen[f]) {
            throw std::invalid_argument("ranking is not a permutation");
        }
        seen[f] = 1;
    }
}

}  // namespace

EntropyResult attribution_entropy(const std::vector<Attribution>& attrs) {
    check_attr_group(attrs);
    const std::size_t d = attrs.front().values.size();
    const std::size_t K = attrs.size();

    EntropyResult out;
    out.per_feature.assign(d, 0.0);
    out.zero_flag.assign(d, 0);
    for (std::size_t i = 0; i < d; ++i) {
        double mass = 0.0;
        for (const auto& a : attrs) {
            mass += std::fabs(a.values[i]);
        }
        if (mass <= 0.0) {
            out.zero_flag[i] = 1;
            continue;
        }
        double h = 0.0;
        for (const auto& a : attrs) {
            const double p = std::fabs(a.values[i]) / mass;
            if (p > 0.0) {
                h -= p * std::log(p);
            }
        }
        out.per_feature[i] = h / static_cast<double>(K);
    }
    return out;
}

std::vector<double> attribution_std(const std::vector<Attribution>& attrs) {
    check_attr_group(attrs);
    const std::size_t d = attrs.front().values.size();
    const double K = static_cast<double>(attrs.size());

    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0, sq = 0.0;
        for (const auto& a : attrs) {
            s += a.values[i];
            sq += a.values[i] * a.values[i];
        }
        const double mean = s / K;
        out[i] = std::sqrt(std::max(0.0, sq / K - mean * mean));
    }
    return out;
}

std::vector<std::size_t> ranking_by_abs(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double fa = std::fabs(values[a]);
        const double fb = std::fabs(values[b]);
        if (fa != fb) {
            return fa > fb;
        }
        return a < b;
    });
    return order;
}

std::vector<RankedFeature> global_ranking_by_frequency(
    const std::vector<Attribution>& attrs, std::size_t k) {
    if (attrs.empty()) {
        throw std::invalid_argument("empty attribution batch");
    }
    // Failed batch slots carry empty values; d comes from the first usable
    // attribution and empty slots are skipped below.
    std::size_t d = 0;
    for (const auto& a : attrs) {
        if (!a.values.empty()) {
            d = a.values.size();
            break;
        }
    }
    if (d == 0) {
        throw std::invalid_argument("no usable attributions in batch");
    }
    if (k < 1 || k > d) {
        throw std::invalid_argument("k out of range");
    }

    std::vector<std::size_t> counts(d, 0);
    std::size_t n_used = 0;
    for (const auto& a : attrs) {
        if (a.values.empty()) {
            continue;
        }
        if (a.values.size() != d) {
            throw std::invalid_argument("attribution lengths differ");
        }
        const auto order = ranking_by_abs(a.values);
        for (std::size_t r = 0; r < k; ++r) {
            ++counts[order[r]];
        }
        ++n_used;
    }

    std::vector<RankedFeature> out(d);
    for (std::size_t i = 0; i < d; ++i) {
        out[i].feature = i;
        out[i].proportion =
            static_cast<double>(counts[i]) / static_cast<double>(n_used);
    }
    std::sort(out.begin(), out.end(),
              [](const RankedFeature& a, const RankedFeature& b) {
                  if (a.proportion != b.proportion) {
                      return a.proportion > b.proportion;
                  }
                  return a.feature < b.feature;
              });
    return out;
}

std::size_t topk_concordance(std::span<const std::size_t> ranking_a,
                             std::span<const std::size_t> ranking_b,
                             std::size_t k) {
    if (ranking_a.size() != ranking_b.size()) {
        throw std::invalid_argument("rankings have different lengths");
    }
    if (k < 1 || k > ranking_a.size()) {
        throw std::invalid_argument("k exceeds the feature count");
    }
    std::vector<std::uint8_t> in_a;
    const std::size_t d = ranking_a.size();
    in_a.assign(d, 0);
    for (std::size_t r = 0; r < k; ++r) {
        if (ranking_a[r] >= d || ranking_b[r] >= d) {
            throw std::invalid_argument("ranking entry out of range");
        }
        in_a[ranking_a[r]] = 1;
    }
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k; ++r) {
        hits += in_a[ranking_b[r]] ? 1 : 0;
    }
    return hits;
}

std::size_t topk_concordance(std::span<const double> local,
                             std::span<const double> global_weights,
                             std::size_t k) {
    if (local.size() != global_weights.size()) {
        throw std::invalid_argument("vector lengths differ");
    }
    const auto ra = ranking_by_abs(local);
    const auto rb = ranking_by_abs(global_weights);
    return topk_concordance(ra, rb, k);
}

std::optional<double> l2_distance(std::span<const double> local,
                                  std::span<const double> global_weights) {
    if (local.size() != global_weights.size()) {
        throw std::invalid_argument("vector lengths differ");
    }
    double mass_l = 0.0, mass_g = 0.0;
    for (std::size_t i = 0; i < local.size(); ++i) {
        mass_l += std::fabs(local[i]);
        mass_g += std::fabs(global_weights[i]);
    }
    if (mass_l <= 0.0 || mass_g <= 0.0) {
        return std::nullopt;
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < local.size(); ++i) {
        const double diff =
            std::fabs(local[i]) / mass_l - std::fabs(global_weights[i]) / mass_g;
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

double weighted_spearman_distance(std::span<const std::size_t> local_ranking,
                                  std::span<const std::size_t> global_ranking) {
    const std::size_t d = global_ranking.size();
    check_permutation(global_ranking, d);
    check_permutation(local_ranking, d);
    if (d == 1) {
        return 0.0;
    }

    // rank[f] = 1-based position of feature f
    std::vector<double> rank_l(d), rank_g(d), weight(d);
    for (std::size_t pos = 0; pos < d; ++pos) {
        rank_l[local_ranking[pos]] = static_cast<double>(pos + 1);
        rank_g[global_ranking[pos]] = static_cast<double>(pos + 1);
    }
    double wsum = 0.0;
    for (std::size_t f = 0; f < d; ++f) {
        weight[f] = 1.0 / rank_g[f];
        wsum += weight[f];
    }
    for (double& w : weight) {
        w /= wsum;
    }

    double mean_l = 0.0, mean_g = 0.0;
    for (std::size_t f = 0; f < d; ++f) {
        mean_l += weight[f] * rank_l[f];
        mean_g += weight[f] * rank_g[f];
    }
    double cov = 0.0, var_l = 0.0, var_g = 0.0;
    for (std::size_t f = 0; f < d; ++f) {
        const double a = rank_l[f] - mean_l;
        const double b = rank_g[f] - mean_g;
        cov += weight[f] * a * b;
        var_l += weight[f] * a * a;
        var_g += weight[f] * b * b;
    }
    const double denom = std::sqrt(var_l * var_g);
    const double rho = denom > 0.0 ? cov / denom : 1.0;
    return std::clamp((1.0 - rho) / 2.0, 0.0, 1.0);
}

double digamma(double x) {
    if (!(x > 0.0)) {
        throw std::invalid_argument("digamma needs a positive argument");
    }
    double acc = 0.0;
    while (x < 6.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    // Asymptotic series with Bernoulli coefficients.
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = std::log(x) - 0.5 * inv;
    series -= inv2 * (1.0 / 12.0 -
                      inv2 * (1.0 / 120.0 -
                              inv2 * (1.0 / 252.0 -
                                      inv2 * (1.0 / 240.0 -
                                              inv2 * (1.0 / 132.0)))));
    return acc + series;
}

double mutual_information(std::span<const double> feature,
                          std::span<const int> target,
                          std::size_t k_neighbors) {
    const std::size_t n = feature.size();
    if (n != target.size()) {
        throw std::invalid_argument("feature and target lengths differ");
    }
    if (n < 50) {
        throw std::invalid_argument("need at least 50 samples");
    }
    if (k_neighbors < 1) {
        throw std::invalid_argument("k_neighbors must be >= 1");
    }
    std::array<std::size_t, 2> class_count{0, 0};
    for (int y : target) {
        if (y != 0 && y != 1) {
            throw std::invalid_argument("target must be binary");
        }
        ++class_count[static_cast<std::size_t>(y)];
    }
    if (class_count[0] < k_neighbors + 1 || class_count[1] < k_neighbors + 1) {
        throw std::invalid_argument(
            "each class needs at least k_neighbors + 1 samples");
    }

    // Deterministic jitter breaks exact ties; scale is far below any real
    // signal but separates duplicated values (e.g. a 0/1 feature).
    double mean_abs = 0.0;
    for (double v : feature) {
        mean_abs += std::fabs(v);
    }
    mean_abs /= static_cast<double>(n);
    const double jitter = 1e-10 * std::max(1.0, mean_abs);
    std::mt19937_64 rng(0x4d495f6a69747465ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = feature[i] + jitter * gauss(rng);
    }

    // Sorted views: one per class, one over everything.
    std::vector<double> all_sorted(x.begin(), x.end());
    std::sort(all_sorted.begin(), all_sorted.end());
    std::array<std::vector<double>, 2> cls;
    cls[0].reserve(class_count[0]);
    cls[1].reserve(class_count[1]);
    for (std::size_t i = 0; i < n; ++i) {
        cls[static_cast<std::size_t>(target[i])].push_back(x[i]);
    }
    std::sort(cls[0].begin(), cls[0].end());
    std::sort(cls[1].begin(), cls[1].end());

    const std::size_t k = k_neighbors;
    double mean_psi_m = 0.0;
    double mean_psi_ny = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& own = cls[static_cast<std::size_t>(target[i])];
        // k-th nearest same-class neighbor distance: walk outward from the
        // point's position in its class-sorted array.
        const auto it = std::lower_bound(own.begin(), own.end(), x[i]);
        std::size_t pos = static_cast<std::size_t>(it - own.begin());
        // pos is the index of x[i] itself (values are unique after jitter)
        std::size_t left = pos;
        std::size_t right = pos + 1;  // skip self
        double radius = 0.0;
        for (std::size_t step = 0; step < k; ++step) {
            const double dl =
                left > 0 ? x[i] - own[left - 1]
                         : std::numeric_limits<double>::infinity();
            const double dr =
                right < own.size() ? own[right] - x[i]
                                   : std::numeric_limits<double>::infinity();
            if (dl <= dr) {
                radius = dl;
                --left;
            } else {
                radius = dr;
                ++right;
            }
        }

        // Count strictly inside (x[i] - radius, x[i] + radius) over the
        // full sample, excluding the point itself. The binary searches only
        // seed the window: the endpoint sums can round across the k-th
        // neighbor, so the edges are settled with the same subtractions
        // that produced radius.
        const auto strictly_inside = [&](double v) {
            return std::fabs(v - x[i]) < radius;
        };
        std::size_t lo = static_cast<std::size_t>(
            std::upper_bound(all_sorted.begin(), all_sorted.end(),
                             x[i] - radius) -
            all_sorted.begin());
        std::size_t hi = static_cast<std::size_t>(
            std::lower_bound(all_sorted.begin(), all_sorted.end(),
                             x[i] + radius) -
            all_sorted.begin());
        while (lo > 0 && strictly_inside(all_sorted[lo - 1])) {
            --lo;
        }
        while (lo < hi && !strictly_inside(all_sorted[lo])) {
            ++lo;
        }
        while (hi < n && strictly_inside(all_sorted[hi])) {
            ++hi;
        }
        while (hi > lo && !strictly_inside(all_sorted[hi - 1])) {
            --hi;
        }
        const std::size_t inside = hi - lo;
        const std::size_t m = inside > 0 ? inside - 1 : 0;  // minus self

        mean_psi_m += digamma(static_cast<double>(m + 1));
        mean_psi_ny += digamma(static_cast<double>(
            class_count[static_cast<std::size_t>(target[i])]));
    }
    mean_psi_m /= static_cast<double>(n);
    mean_psi_ny /= static_cast<double>(n);

    const double mi = digamma(static_cast<double>(n)) - mean_psi_ny +
                      digamma(static_cast<double>(k)) - mean_psi_m;
    return std::max(0.0, mi);
}

}  // namespace attrib
