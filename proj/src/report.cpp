#include "attrib/report.hpp"

#include <chrono>
#include <ctime>

#include "attrib/sha256.hpp"
#include "attrib/util.hpp"
#include "json.hpp"

namespace attrib {

namespace {

std::string utc_now() {
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

nlohmann::json lime_json(const LimeConfig& c) {
    return {{"n_perturbations", c.n_perturbations},
            {"kernel_width", c.kernel_width},
            {"perturbation_scale", c.perturbation_scale},
            {"ridge_strength", c.ridge_strength},
            {"top_k", c.top_k},
            {"seed", c.seed}};
}

std::string wrap_and_write(const nlohmann::json& deterministic,
                           const std::string& json_path) {
    const std::string hash = sha256_hex(deterministic.dump());
    nlohmann::json doc = {
        {"deterministic", deterministic},
        {"deterministic_sha256", hash},
        {"provenance", {{"written_utc", utc_now()}}},
    };
    write_file(json_path, doc.dump(2) + "\n");
    return hash;
}

}  // namespace

std::string policy_label(ReferencePolicy p) {
    switch (p) {
        case ReferencePolicy::random:
            return "random";
        case ReferencePolicy::boundary:
            return "constrained";
        case ReferencePolicy::tight:
            return "tightly_constrained";
        case ReferencePolicy::named_profile:
            return "named_profile";
    }
    return "random";
}

std::string write_exp1_report(const Experiment1Result& result,
                              const std::string& json_path) {
    nlohmann::json det;
    det["experiment"] = "trustworthiness";
    det["config"] = {
        {"k", result.config.k},
        {"ig_steps", result.config.ig_steps},
        {"epsilon", result.config.epsilon},
        {"seed", result.config.seed},
        {"target", to_string(result.config.target)},
        {"max_candidates", result.config.max_candidates},
        {"lime", lime_json(result.config.lime)},
    };
    {
        nlohmann::json methods = nlohmann::json::array();
        for (Method m : result.config.methods) {
            methods.push_back(to_string(m));
        }
        det["config"]["methods"] = methods;
    }
    det["feature_names"] = result.feature_names;
    det["lr_weights"] = result.lr_weights;
    {
        nlohmann::json top = nlohmann::json::array();
        for (std::size_t f : result.lr_top) {
            top.push_back(result.feature_names[f]);
        }
        det["lr_top_features"] = top;
    }
    det["reference"] = result.reference;
    det["reference_p_bad"] = result.reference_p_bad;

    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : result.records) {
        nlohmann::json ranking = nlohmann::json::array();
        for (const auto& rf : r.global_ranking) {
            ranking.push_back({{"feature", result.feature_names[rf.feature]},
                               {"proportion", rf.proportion}});
        }
        records.push_back({{"method", to_string(r.method)},
                           {"k", r.k},
                           {"top_k_agreement", r.top_k_agreement},
                           {"mean_l2", r.mean_l2},
                           {"mean_weighted_rank_dist",
                            r.mean_weighted_rank_dist},
                           {"n_candidates", r.n_candidates},
                           {"n_failures", r.n_failures},
                           {"n_l2_excluded", r.n_l2_excluded},
                           {"global_ranking", ranking}});
    }
    det["records"] = records;

    nlohmann::json mi = nlohmann::json::array();
    for (const auto& e : result.mi_table) {
        mi.push_back({{"feature", e.feature}, {"mi_nats", e.mi}});
    }
    det["mi_table"] = mi;
    det["failures"] = result.failures;
    det["notes"] = nlohmann::json::array(
        {"lime here perturbs continuously in standardized space; "
         "implementations that discretize features first may rank "
         "differently",
         "l2 distances compare magnitude profiles normalized to unit l1 "
         "mass"});
    return wrap_and_write(det, json_path);
}

std::string write_exp2_report(const Experiment2Result& result,
                              const std::string& json_path,
                              const std::string& aggregate_csv_path,
                              const std::string& histogram_csv_path) {
    nlohmann::json det;
    det["experiment"] = "reliability";
    det["config"] = {
        {"K", result.config.K},
        {"n_candidates", result.config.n_candidates},
        {"epsilon", result.config.epsilon},
        {"ig_steps", result.config.ig_steps},
        {"seed", result.config.seed},
        {"target", to_string(result.config.target)},
    };
    {
        nlohmann::json methods = nlohmann::json::array();
        for (Method m : result.config.methods) {
            methods.push_back(to_string(m));
        }
        nlohmann::json policies = nlohmann::json::array();
        for (ReferencePolicy p : result.config.policies) {
            policies.push_back(to_string(p));
        }
        det["config"]["methods"] = methods;
        det["config"]["policies"] = policies;
    }
    det["feature_names"] = result.feature_names;
    det["entropy_max"] = result.entropy_max;

    nlohmann::json aggregate = nlohmann::json::array();
    for (const auto& cell : result.aggregate) {
        aggregate.push_back({{"method", to_string(cell.method)},
                             {"policy", to_string(cell.policy)},
                             {"mean_entropy", cell.mean_entropy},
                             {"mean_std", cell.mean_std},
                             {"n_candidates", cell.n_candidates}});
    }
    det["aggregate"] = aggregate;

    nlohmann::json histograms = nlohmann::json::array();
    for (const auto& h : result.histograms) {
        histograms.push_back({{"method", to_string(h.method)},
                              {"policy", to_string(h.policy)},
                              {"bin_width", 0.01},
                              {"bins", h.bins}});
    }
    det["histograms"] = histograms;

    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : result.records) {
        records.push_back({{"candidate_id", r.candidate_id},
                           {"method", to_string(r.method)},
                           {"policy", to_string(r.policy)},
                           {"K", r.K},
                           {"mean_entropy", r.mean_entropy},
                           {"mean_std", r.mean_std},
                           {"entropy", r.entropy},
                           {"stddev", r.stddev}});
    }
    det["records"] = records;

    det["reference_provenance"] = {
        {"boundary_acceptance_rate",
         result.provenance.boundary_acceptance_rate},
        {"pool_from_table", result.provenance.pool_from_table},
        {"pool_sampled", result.provenance.pool_sampled},
    };
    det["failures"] = result.failures;
    det["notes"] = nlohmann::json::array(
        {"aggregation: per-feature entropy/std averaged over features, then "
         "over candidates",
         "random and constrained reference sets are drawn once and shared "
         "by all candidates; tight sets are per-candidate nearest neighbors "
         "from a shared boundary pool"});

    // Wide CSV, one row per method, one entropy/std column pair per policy.
    {
        std::string csv = "method";
        for (ReferencePolicy p : result.config.policies) {
            csv += "," + policy_label(p) + "_entropy";
            csv += "," + policy_label(p) + "_std";
        }
        csv += "\n";
        for (Method m : result.config.methods) {
            csv += to_string(m);
            for (ReferencePolicy p : result.config.policies) {
                for (const auto& cell : result.aggregate) {
                    if (cell.method == m && cell.policy == p) {
                        csv += "," + format_double(cell.mean_entropy);
                        csv += "," + format_double(cell.mean_std);
                        break;
                    }
                }
            }
            csv += "\n";
        }
        write_file(aggregate_csv_path, csv);
    }
    {
        std::string csv = "method,policy,bin_lo,bin_hi,count\n";
        for (const auto& h : result.histograms) {
            for (std::size_t b = 0; b < h.bins.size(); ++b) {
                const double lo = 0.01 * static_cast<double>(b);
                const double hi = b + 1 == h.bins.size()
                                      ? result.entropy_max
                                      : 0.01 * static_cast<double>(b + 1);
                csv += to_string(h.method) + "," + policy_label(h.policy) +
                       "," + format_double(lo) + "," + format_double(hi) +
                       "," + std::to_string(h.bins[b]) + "\n";
            }
        }
        write_file(histogram_csv_path, csv);
    }
    return wrap_and_write(det, json_path);
}

std::string report_hash(const std::string& json_path) {
    const nlohmann::json doc = nlohmann::json::parse(read_file(json_path));
    return doc.at("deterministic_sha256").get<std::string>();
}

}  // namespace attrib
