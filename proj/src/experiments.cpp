#include "attrib/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "attrib/errors.hpp"
#include "attrib/util.hpp"

namespace attrib {

namespace {

std::size_t effective_candidates(std::size_t limit, std::size_t rows) {
    if (rows == 0) {
        throw std::invalid_argument("candidate table is empty");
    }
    return limit == 0 ? rows : std::min(limit, rows);
}

}  // namespace

Experiment1Result run_experiment1(const MlpModel& mlp, const LinearModel& lr,
                                  const FeatureTable& candidates,
                                  const ScalerParams& scaler,
                                  const Exp1Config& config) {
    if (config.methods.empty()) {
        throw std::invalid_argument("no attribution methods configured");
    }
    if (lr.weights.size() != candidates.cols() ||
        mlp.input_size() != candidates.cols()) {
        throw std::invalid_argument("model and table widths differ");
    }
    const std::size_t d = candidates.cols();
    if (config.k < 1 || config.k > d) {
        throw std::invalid_argument("k out of range");
    }
    const std::size_t n =
        effective_candidates(config.max_candidates, candidates.rows);
    if (n < 50) {
        throw std::invalid_argument(
            "the mutual-information table needs at least 50 candidate rows");
    }

    Experiment1Result result;
    result.config = config;
    result.feature_names = candidates.feature_names;
    result.lr_weights = lr.weights;
    const auto lr_ranking = ranking_by_abs(lr.weights);
    result.lr_top.assign(lr_ranking.begin(),
                         lr_ranking.begin() +
                             static_cast<std::ptrdiff_t>(config.k));

    // One shared near-boundary reference keeps IG and DeepLIFT comparable
    // across candidates.
    const ReferenceSet boundary = boundary_references(
        mlp, scaler, 1, config.epsilon, mix64(config.seed, 0xe1));
    result.reference = boundary.references[0];
    result.reference_p_bad = boundary.outputs[0][1];

    std::vector<std::vector<double>> batch(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = candidates.row(i);
        batch[i].assign(row.begin(), row.end());
    }
    const std::vector<double>& shared_ref = result.reference;
    const ReferenceFn ref_fn = [&shared_ref](std::size_t,
                                             std::span<const double>) {
        return shared_ref;
    };

    for (Method method : config.methods) {
        BatchParams params;
        params.method = method;
        params.target = config.target;
        params.ig_steps = config.ig_steps;
        params.lime = config.lime;
        params.lime.seed = mix64(config.seed, 0x11fe);

        const BatchResult batch_result =
            config.parallel ? explain_batch(mlp, batch, params, ref_fn)
                            : explain_batch_serial(mlp, batch, params, ref_fn);

        TrustRecord record;
        record.method = method;
        record.k = config.k;
        record.n_candidates = n;
        record.n_failures = batch_result.failures.size();
        for (const auto& f : batch_result.failures) {
            result.failures.push_back(to_string(method) + " candidate " +
                                      std::to_string(f.index) + ": " +
                                      f.message);
        }

        std::vector<Attribution> usable;
        usable.reserve(n);
        for (const auto& a : batch_result.attributions) {
            if (!a.values.empty()) {
                usable.push_back(a);
            }
        }
        if (usable.empty()) {
            throw DataError("every candidate failed for method " +
                            to_string(method));
        }

        record.global_ranking = global_ranking_by_frequency(usable, config.k);
        std::vector<std::size_t> method_ranking(d);
        for (std::size_t r = 0; r < d; ++r) {
            method_ranking[r] = record.global_ranking[r].feature;
        }
        record.top_k_agreement =
            topk_concordance(method_ranking, lr_ranking, config.k);

        double l2_sum = 0.0;
        std::size_t l2_n = 0;
        double rank_sum = 0.0;
        for (const auto& a : usable) {
            const auto dist = l2_distance(a.values, lr.weights);
            if (dist) {
                l2_sum += *dist;
                ++l2_n;
            } else {
                ++record.n_l2_excluded;
            }
            rank_sum += weighted_spearman_distance(ranking_by_abs(a.values),
                                                   lr_ranking);
        }
        record.mean_l2 = l2_n > 0 ? l2_sum / static_cast<double>(l2_n) : 0.0;
        record.mean_weighted_rank_dist =
            rank_sum / static_cast<double>(usable.size());
        result.records.push_back(std::move(record));
    }

    // Mutual information between each feature and the target over the same
    // candidate rows, as an independent ranking cross-check.
    std::vector<double> column(n);
    std::vector<int> target(n);
    for (std::size_t i = 0; i < n; ++i) {
        target[i] = candidates.target[i];
    }
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = candidates.at(i, c);
        }
        result.mi_table.push_back(
            {candidates.feature_names[c], mutual_information(column, target)});
    }
    std::stable_sort(result.mi_table.begin(), result.mi_table.end(),
                     [](const MiEntry& a, const MiEntry& b) {
                         return a.mi > b.mi;
                     });
    return result;
}

Experiment2Result run_experiment2(const MlpModel& model,
                                  const FeatureTable& candidates,
                                  const ScalerParams& scaler,
                                  const Exp2Config& config) {
    if (config.methods.empty() || config.policies.empty()) {
        throw std::invalid_argument("methods and policies must be non-empty");
    }
    if (config.K < 2) {
        throw std::invalid_argument("entropy needs K >= 2 references");
    }
    if (model.input_size() != candidates.cols()) {
        throw std::invalid_argument("model and table widths differ");
    }
    const std::size_t n =
        effective_candidates(config.n_candidates, candidates.rows);
    const std::size_t n_methods = config.methods.size();
    const std::size_t n_policies = config.policies.size();
    const std::size_t cells_per_candidate = n_methods * n_policies;

    Experiment2Result result;
    result.config = config;
    result.feature_names = candidates.feature_names;
    result.entropy_max =
        std::log(static_cast<double>(config.K)) / static_cast<double>(config.K);

    // Shared reference material. Random and boundary sets are one draw for
    // the whole run; the tight policy selects per candidate from one pool.
    ReferenceSet random_set;
    ReferenceSet boundary_set;
    BoundaryPool pool;
    bool need_pool = false;
    for (ReferencePolicy p : config.policies) {
        if (p == ReferencePolicy::random) {
            random_set =
                random_references(scaler, config.K, mix64(config.seed, 2));
        } else if (p == ReferencePolicy::boundary) {
            boundary_set =
                boundary_references(model, scaler, config.K, config.epsilon,
                                    mix64(config.seed, 3));
            result.provenance.boundary_acceptance_rate =
                boundary_set.acceptance_rate;
        } else if (p == ReferencePolicy::tight) {
            need_pool = true;
        } else {
            throw std::invalid_argument(
                "named_profile is not a sweep policy; use random, boundary "
                "or tight");
        }
    }
    if (need_pool) {
        pool = build_boundary_pool(model, candidates, scaler, config.epsilon,
                                   std::max<std::size_t>(config.K, 50),
                                   mix64(config.seed, 1));
        result.provenance.pool_from_table = pool.n_from_table;
        result.provenance.pool_sampled = pool.n_sampled;
    }

    result.records.assign(n * cells_per_candidate, UncertaintyRecord{});
    std::vector<std::pair<std::size_t, std::string>> failures;

    auto run_candidate = [&](std::size_t c) -> void {
        const auto row = candidates.row(c);
        const std::vector<double> x(row.begin(), row.end());
        for (std::size_t pi = 0; pi < n_policies; ++pi) {
            const ReferencePolicy policy = config.policies[pi];
            const std::vector<std::vector<double>>* refs = nullptr;
            ReferenceSet tight;
            if (policy == ReferencePolicy::random) {
                refs = &random_set.references;
            } else if (policy == ReferencePolicy::boundary) {
                refs = &boundary_set.references;
            } else {
                tight = tight_references(model, pool, x, config.K);
                refs = &tight.references;
            }
            for (std::size_t mi = 0; mi < n_methods; ++mi) {
                const Method method = config.methods[mi];
                std::vector<Attribution> attrs;
                attrs.reserve(config.K);
                for (std::size_t j = 0; j < config.K; ++j) {
                    if (method == Method::integrated_gradients) {
                        attrs.push_back(integrated_gradients(
                            model, x, (*refs)[j], config.ig_steps,
                            config.target));
                    } else if (method == Method::deeplift) {
                        attrs.push_back(deeplift_rescale(model, x, (*refs)[j],
                                                         config.target));
                    } else {
                        // LIME takes no reference; vary the seed instead so
                        // the spread reflects sampling noise.
                        LimeConfig cfg;
                        cfg.seed = mix64(mix64(config.seed,
                                               hash_doubles(x, 0x11)),
                                         j);
                        auto fn = [&model](std::span<const double> p) {
                            return model.predict_bad(p);
                        };
                        attrs.push_back(lime_explain(fn, x, cfg));
                    }
                }
                UncertaintyRecord rec;
                rec.candidate_id = c;
                rec.method = method;
                rec.policy = policy;
                rec.K = config.K;
                const EntropyResult ent = attribution_entropy(attrs);
                rec.entropy = ent.per_feature;
                rec.stddev = attribution_std(attrs);
                double esum = 0.0, ssum = 0.0;
                for (std::size_t f = 0; f < rec.entropy.size(); ++f) {
                    esum += rec.entropy[f];
                    ssum += rec.stddev[f];
                }
                rec.mean_entropy = esum / static_cast<double>(rec.entropy.size());
                rec.mean_std = ssum / static_cast<double>(rec.stddev.size());
                result.records[c * cells_per_candidate + pi * n_methods + mi] =
                    std::move(rec);
            }
        }
    };

    const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic) if (config.parallel)
    for (long long c = 0; c < nn; ++c) {
        try {
            run_candidate(static_cast<std::size_t>(c));
        } catch (const std::exception& e) {
#pragma omp critical(attrib_exp2_failures)
            failures.emplace_back(static_cast<std::size_t>(c), e.what());
        }
    }
    std::sort(failures.begin(), failures.end());
    for (const auto& [c, msg] : failures) {
        result.failures.push_back("candidate " + std::to_string(c) + ": " +
                                  msg);
    }

    // Aggregate cells and entropy histograms, reduced in record order.
    const std::size_t n_bins = static_cast<std::size_t>(
        std::ceil(result.entropy_max / 0.01));
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
        for (std::size_t pi = 0; pi < n_policies; ++pi) {
            AggregateCell cell;
            cell.method = config.methods[mi];
            cell.policy = config.policies[pi];
            HistogramSeries hist;
            hist.method = cell.method;
            hist.policy = cell.policy;
            hist.bins.assign(std::max<std::size_t>(n_bins, 1), 0);
            for (std::size_t c = 0; c < n; ++c) {
                const UncertaintyRecord& rec =
                    result.records[c * cells_per_candidate + pi * n_methods +
                                   mi];
                if (rec.K == 0) {
                    continue;  // candidate failed
                }
                cell.mean_entropy += rec.mean_entropy;
                cell.mean_std += rec.mean_std;
                ++cell.n_candidates;
                for (double h : rec.entropy) {
                    std::size_t bin = static_cast<std::size_t>(h / 0.01);
                    if (bin >= hist.bins.size()) {
                        bin = hist.bins.size() - 1;
                    }
                    ++hist.bins[bin];
                }
            }
            if (cell.n_candidates > 0) {
                cell.mean_entropy /= static_cast<double>(cell.n_candidates);
                cell.mean_std /= static_cast<double>(cell.n_candidates);
            }
            result.aggregate.push_back(cell);
            result.histograms.push_back(std::move(hist));
        }
    }
    return result;
}

}  // namespace attrib
