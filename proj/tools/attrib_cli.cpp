#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "attrib/attribution.hpp"
#include "attrib/dataset.hpp"
#include "attrib/errors.hpp"
#include "attrib/experiments.hpp"
#include "attrib/metrics.hpp"
#include "attrib/model.hpp"
#include "attrib/reference.hpp"
#include "attrib/report.hpp"
#include "attrib/util.hpp"
#include "json.hpp"

namespace {

using namespace attrib;

// Option precedence: command-line flag, then config file key, then
// environment (ATTRIB_SEED, ATTRIB_DATA_DIR), then the built-in default.
struct Global {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string data_dir;
    int jobs = 0;
    nlohmann::json config = nlohmann::json::object();
    CLI::Option* seed_opt = nullptr;
    CLI::Option* data_dir_opt = nullptr;
    CLI::Option* jobs_opt = nullptr;

    std::uint64_t resolved_seed() const {
        if (seed_opt->count() > 0) {
            return seed;
        }
        if (config.contains("seed")) {
            return config.at("seed").get<std::uint64_t>();
        }
        if (const char* env = std::getenv("ATTRIB_SEED")) {
            return std::strtoull(env, nullptr, 10);
        }
        return 0;
    }

    std::string resolved_data_dir() const {
        if (data_dir_opt->count() > 0) {
            return data_dir;
        }
        if (config.contains("data_dir")) {
            return config.at("data_dir").get<std::string>();
        }
        if (const char* env = std::getenv("ATTRIB_DATA_DIR")) {
            return env;
        }
        return "";
    }

    int resolved_jobs() const {
        if (jobs_opt->count() > 0) {
            return jobs;
        }
        if (config.contains("jobs")) {
            return config.at("jobs").get<int>();
        }
        return 0;
    }
};

void load_config(Global& g) {
    if (g.config_path.empty()) {
        return;
    }
    try {
        g.config = nlohmann::json::parse(read_file(g.config_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("config file " + g.config_path + ": " +
                        std::string(e.what()));
    }
    if (!g.config.is_object()) {
        throw DataError("config file " + g.config_path +
                        ": top level must be an object");
    }
}

std::vector<Method> parse_methods(const std::string& csv) {
    std::vector<Method> out;
    for (const auto& tok : split_csv_line(csv)) {
        out.push_back(method_from_string(tok));
    }
    if (out.empty()) {
        throw std::invalid_argument("empty method list");
    }
    return out;
}

std::vector<ReferencePolicy> parse_policies(const std::string& csv) {
    std::vector<ReferencePolicy> out;
    for (const auto& tok : split_csv_line(csv)) {
        out.push_back(policy_from_string(tok));
    }
    if (out.empty()) {
        throw std::invalid_argument("empty policy list");
    }
    return out;
}

std::vector<double> parse_raw_values(const std::string& csv) {
    std::vector<double> out;
    for (const auto& tok : split_csv_line(csv)) {
        std::size_t pos = 0;
        out.push_back(std::stod(tok, &pos));
        if (pos != tok.size()) {
            throw std::invalid_argument("bad numeric value '" + tok + "'");
        }
    }
    return out;
}

ScalerParams need_scaler(const std::string& sidecar_path) {
    auto scaler = load_snapshot_scaler(sidecar_path);
    if (!scaler) {
        throw DataError("snapshot " + sidecar_path +
                        " carries no scaler; re-run ingest");
    }
    return std::move(*scaler);
}

std::string derive_path(const std::string& out, const std::string& suffix) {
    const std::string ext = ".json";
    if (out.size() > ext.size() &&
        out.compare(out.size() - ext.size(), ext.size(), ext) == 0) {
        return out.substr(0, out.size() - ext.size()) + suffix;
    }
    return out + suffix;
}

struct SynthOpts {
    std::size_t n = 10000;
    std::string out_csv;
    std::string meta;
};

void run_synth(const SynthOpts& o, const Global& g) {
    const std::uint64_t seed = g.resolved_seed();
    const FeatureTable table = synthesize(o.n, SyntheticSpec::heloc_like(), seed);
    const std::string meta =
        o.meta.empty() ? o.out_csv + ".meta.json" : o.meta;
    write_snapshot(table, nullptr, o.out_csv, meta);
    std::printf("wrote %zu rows x %zu features to %s (seed %llu)\n",
                table.rows, table.cols(), o.out_csv.c_str(),
                static_cast<unsigned long long>(seed));
    std::printf("bad fraction %.4f\n", table.bad_fraction());
}

struct IngestOpts {
    std::string data;
    std::string out_csv;
    std::string meta;
};

void run_ingest(const IngestOpts& o, const Global& g) {
    std::string source = o.data;
    if (source.empty()) {
        auto found = find_heloc_csv(g.resolved_data_dir());
        if (!found) {
            throw DataError(
                "no dataset found; pass --data or set ATTRIB_DATA_DIR");
        }
        source = *found;
    }
    const FeatureTable raw = load_csv(source);
    const FeatureTable imputed = impute_special(raw);
    auto [scaled, scaler] = standardize(imputed);
    write_snapshot(scaled, &scaler, o.out_csv, o.meta);

    std::size_t imputed_cells = 0;
    for (std::uint8_t m : imputed.special_mask) {
        imputed_cells += m;
    }
    std::printf("ingested %s\n", source.c_str());
    std::printf("%zu rows x %zu features, bad fraction %.4f\n", scaled.rows,
                scaled.cols(), scaled.bad_fraction());
    std::printf("%zu sentinel cells imputed to feature medians\n",
                imputed_cells);
    for (const auto& d : scaler.dropped) {
        std::printf("dropped constant feature %s (value %s)\n",
                    d.name.c_str(), format_double(d.value).c_str());
    }
    std::printf("snapshot written to %s + %s\n", o.out_csv.c_str(),
                o.meta.c_str());
}

struct TrainOpts {
    std::string snapshot_csv;
    std::string meta;
    std::string lr_out;
    std::string mlp_out;
    double holdout = 0.33;
    int epochs = 20;
    int batch_size = 100;
    double learning_rate = 0.05;
    int max_iters = 200000;
};

void run_train(const TrainOpts& o, const Global& g) {
    const std::uint64_t seed = g.resolved_seed();
    // Training assumes unit-scale features; a raw table silently starves
    // the network, so the scaler requirement applies here too.
    need_scaler(o.meta);
    const FeatureTable table = load_snapshot(o.snapshot_csv, o.meta);
    const SplitResult s = split(table, o.holdout, seed);
    std::printf("split: %zu train / %zu validation rows (seed %llu)\n",
                s.train.rows, s.validation.rows,
                static_cast<unsigned long long>(seed));

    const LinearModel lr = train_logistic(s.train, default_logistic_grid(),
                                          s.validation, o.max_iters);
    std::printf("logistic: penalty %s strength %s, train acc %.4f, "
                "validation acc %.4f\n",
                to_string(lr.penalty).c_str(),
                format_double(lr.strength).c_str(), lr.train_accuracy,
                lr.validation_accuracy);
    save_model_json(lr, o.lr_out);

    TrainConfig tc;
    tc.epochs = o.epochs;
    tc.batch_size = o.batch_size;
    tc.learning_rate = o.learning_rate;
    tc.seed = seed;
    const MlpModel mlp = train_mlp(s.train, tc, s.validation);
    std::printf("network: %d epochs, train acc %.4f, validation acc %.4f\n",
                o.epochs, mlp.train_accuracy, mlp.validation_accuracy);
    save_model_json(mlp, o.mlp_out);
    std::printf("models written to %s and %s\n", o.lr_out.c_str(),
                o.mlp_out.c_str());
}

struct ExplainOpts {
    std::string snapshot_csv;
    std::string meta;
    std::string mlp_path;
    std::string lr_path;
    long long row = -1;
    std::string raw_values;
    std::string method = "ig";
    std::string policy = "boundary";
    std::string target = "probability";
    double epsilon = 0.01;
    int steps = 100;
    std::size_t top_k = 7;
    std::size_t lime_n = 5000;
    std::size_t max_tries = 1000000;
};

void run_explain(const ExplainOpts& o, const Global& g) {
    if (o.mlp_path.empty() == o.lr_path.empty()) {
        throw std::invalid_argument("pass exactly one of --mlp and --lr");
    }
    if ((o.row < 0) == o.raw_values.empty()) {
        throw std::invalid_argument("pass exactly one of --row and --raw");
    }
    const std::uint64_t seed = g.resolved_seed();
    const FeatureTable table = load_snapshot(o.snapshot_csv, o.meta);
    const ScalerParams scaler = need_scaler(o.meta);
    const MlpModel model = o.mlp_path.empty()
                               ? MlpModel::from_linear(load_linear_model(o.lr_path))
                               : load_mlp_model(o.mlp_path);
    const Method method = method_from_string(o.method);
    const OutputTarget target = target_from_string(o.target);

    std::vector<double> x;
    if (o.row >= 0) {
        if (static_cast<std::size_t>(o.row) >= table.rows) {
            throw std::invalid_argument("row " + std::to_string(o.row) +
                                        " out of range (table has " +
                                        std::to_string(table.rows) + " rows)");
        }
        const auto r = table.row(static_cast<std::size_t>(o.row));
        x.assign(r.begin(), r.end());
    } else {
        x = scaler.to_standardized(parse_raw_values(o.raw_values));
    }

    Attribution attr;
    if (method == Method::lime) {
        LimeConfig lc;
        lc.n_perturbations = o.lime_n;
        lc.top_k = 0;
        lc.seed = seed;
        attr = lime_explain(predict_fn(model), x, lc);
    } else {
        const ReferencePolicy policy = policy_from_string(o.policy);
        ReferenceSet refs;
        switch (policy) {
            case ReferencePolicy::random:
                refs = random_references(scaler, 1, seed);
                break;
            case ReferencePolicy::boundary:
                refs = boundary_references(model, scaler, 1, o.epsilon, seed,
                                           o.max_tries);
                break;
            case ReferencePolicy::tight:
                refs = tight_references(model, table, scaler, x, 1, o.epsilon,
                                        seed);
                break;
            case ReferencePolicy::named_profile:
                throw std::invalid_argument(
                    "pick the profile from `profiles` output and pass it "
                    "via --raw; --policy accepts random, boundary, tight");
        }
        const auto& ref = refs.references[0];
        attr = method == Method::integrated_gradients
                   ? integrated_gradients(model, x, ref, o.steps, target)
                   : deeplift_rescale(model, x, ref, target);
    }

    std::printf("candidate p_bad = %.4f\n", model.predict_bad(x));
    const std::vector<double> raw = scaler.to_raw(x);
    std::vector<double> ref_raw;
    if (!attr.reference.empty()) {
        std::printf("reference p_bad = %.4f (%s policy)\n",
                    model.predict_bad(attr.reference), o.policy.c_str());
        ref_raw = scaler.to_raw(attr.reference);
    }

    const std::size_t k = std::min(o.top_k, table.cols());
    const auto order = ranking_by_abs(attr.values);
    std::printf("top %zu contributions toward \"Bad\" (%s, %s):\n", k,
                to_string(method).c_str(), to_string(target).c_str());
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t f = order[i];
        if (ref_raw.empty()) {
            std::printf("  %+10.4f  %-30s value %s\n", attr.values[f],
                        table.feature_names[f].c_str(),
                        format_double(raw[f]).c_str());
        } else {
            std::printf("  %+10.4f  %-30s value %s vs reference %s\n",
                        attr.values[f], table.feature_names[f].c_str(),
                        format_double(raw[f]).c_str(),
                        format_double(ref_raw[f]).c_str());
        }
    }
    if (method != Method::lime) {
        double total = 0.0;
        for (double v : attr.values) {
            total += v;
        }
        std::printf("sum of contributions %.6f, completeness residual %.2e\n",
                    total, attr.completeness_residual);
    }
}

struct ProfileOpts {
    std::string snapshot_csv;
    std::string meta;
    std::string mlp_path;
    double epsilon = 0.01;
};

void run_profiles(const ProfileOpts& o, const Global& g) {
    const FeatureTable table = load_snapshot(o.snapshot_csv, o.meta);
    const ScalerParams scaler = need_scaler(o.meta);
    const MlpModel model = load_mlp_model(o.mlp_path);
    const auto profiles = profile_catalog(model, table, scaler, o.epsilon,
                                          g.resolved_seed());
    std::fputs(render_profile_table(profiles, scaler).c_str(), stdout);
}

struct Exp1Opts {
    std::string snapshot_csv;
    std::string meta;
    std::string lr_path;
    std::string mlp_path;
    std::string out;
    std::size_t k = 7;
    int steps = 100;
    double epsilon = 0.01;
    std::size_t lime_n = 5000;
    std::size_t max_candidates = 0;
    double holdout = 0.33;
    bool all_rows = false;
    bool serial = false;
};

void run_exp1(const Exp1Opts& o, const Global& g) {
    const FeatureTable table = load_snapshot(o.snapshot_csv, o.meta);
    const ScalerParams scaler = need_scaler(o.meta);
    const LinearModel lr = load_linear_model(o.lr_path);
    const MlpModel mlp = load_mlp_model(o.mlp_path);

    Exp1Config config;
    config.k = o.k;
    config.ig_steps = o.steps;
    config.epsilon = o.epsilon;
    config.lime.n_perturbations = o.lime_n;
    config.max_candidates = o.max_candidates;
    config.seed = g.resolved_seed();
    config.parallel = !o.serial;

    const FeatureTable candidates =
        o.all_rows ? table : split(table, o.holdout, config.seed).validation;
    const Experiment1Result r =
        run_experiment1(mlp, lr, candidates, scaler, config);

    std::printf("reference p_bad = %.4f, %zu candidates\n", r.reference_p_bad,
                r.records.empty() ? 0 : r.records[0].n_candidates);
    std::printf("%-10s %14s %10s %12s\n", "method", "top-k overlap", "mean L2",
                "rank dist");
    for (const auto& rec : r.records) {
        std::printf("%-10s %10zu/%zu %10.4f %12.4f\n",
                    to_string(rec.method).c_str(), rec.top_k_agreement, rec.k,
                    rec.mean_l2, rec.mean_weighted_rank_dist);
    }
    std::printf("mutual information cross-check (top 5 of %zu):\n",
                r.mi_table.size());
    for (std::size_t i = 0; i < std::min<std::size_t>(5, r.mi_table.size());
         ++i) {
        std::printf("  %-30s %.4f nats\n", r.mi_table[i].feature.c_str(),
                    r.mi_table[i].mi);
    }
    for (const auto& f : r.failures) {
        std::fprintf(stderr, "warning: %s\n", f.c_str());
    }
    const std::string hash = write_exp1_report(r, o.out);
    std::printf("report written to %s (sha256 %s)\n", o.out.c_str(),
                hash.c_str());
}

struct Exp2Opts {
    std::string snapshot_csv;
    std::string meta;
    std::string mlp_path;
    std::string out;
    std::string aggregate_csv;
    std::string histogram_csv;
    std::string methods = "ig,deeplift";
    std::string policies = "random,boundary,tight";
    std::size_t K = 20;
    std::size_t n_candidates = 200;
    int steps = 100;
    double epsilon = 0.01;
    double holdout = 0.33;
    bool all_rows = false;
    bool serial = false;
};

void run_exp2(const Exp2Opts& o, const Global& g) {
    const FeatureTable table = load_snapshot(o.snapshot_csv, o.meta);
    const ScalerParams scaler = need_scaler(o.meta);
    const MlpModel mlp = load_mlp_model(o.mlp_path);

    Exp2Config config;
    config.methods = parse_methods(o.methods);
    config.policies = parse_policies(o.policies);
    config.K = o.K;
    config.n_candidates = o.n_candidates;
    config.ig_steps = o.steps;
    config.epsilon = o.epsilon;
    config.seed = g.resolved_seed();
    config.parallel = !o.serial;

    const FeatureTable candidates =
        o.all_rows ? table : split(table, o.holdout, config.seed).validation;
    const Experiment2Result r =
        run_experiment2(mlp, candidates, scaler, config);

    std::printf("K = %zu references, entropy ceiling ln(K)/K = %.4f\n",
                config.K, r.entropy_max);
    std::printf("%-10s %-22s %14s %10s\n", "method", "policy", "mean entropy",
                "mean std");
    for (const auto& cell : r.aggregate) {
        std::printf("%-10s %-22s %14.4f %10.4f\n",
                    to_string(cell.method).c_str(),
                    policy_label(cell.policy).c_str(), cell.mean_entropy,
                    cell.mean_std);
    }
    for (const auto& f : r.failures) {
        std::fprintf(stderr, "warning: %s\n", f.c_str());
    }
    const std::string agg = o.aggregate_csv.empty()
                                ? derive_path(o.out, "_aggregate.csv")
                                : o.aggregate_csv;
    const std::string hist = o.histogram_csv.empty()
                                 ? derive_path(o.out, "_histogram.csv")
                                 : o.histogram_csv;
    const std::string hash = write_exp2_report(r, o.out, agg, hist);
    std::printf("report written to %s (sha256 %s)\n", o.out.c_str(),
                hash.c_str());
    std::printf("aggregate table %s, histograms %s\n", agg.c_str(),
                hist.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"credit-risk attribution pipeline: ingest, train, explain, "
                 "benchmark"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "attrib 1.0.0");

    Global g;
    app.add_option("--config", g.config_path,
                   "JSON config file; keys fill in unset flags");
    g.seed_opt = app.add_option("--seed", g.seed,
                                "master seed (env ATTRIB_SEED)");
    g.data_dir_opt = app.add_option("--data-dir", g.data_dir,
                                    "dataset directory (env ATTRIB_DATA_DIR)");
    g.jobs_opt =
        app.add_option("--jobs", g.jobs, "OpenMP thread count (0 = runtime)");

    std::vector<std::function<void(const nlohmann::json&)>> appliers;
    const auto cfg = [&appliers](CLI::Option* opt, auto& var,
                                 const char* key) {
        appliers.push_back([opt, &var, key](const nlohmann::json& c) {
            if (opt->count() == 0 && c.contains(key)) {
                c.at(key).get_to(var);
            }
        });
        return opt;
    };

    SynthOpts synth;
    CLI::App* synth_cmd =
        app.add_subcommand("synth",
                           "generate a raw surrogate dataset for ingest");
    cfg(synth_cmd->add_option("--n", synth.n, "rows to generate"), synth.n,
        "n");
    synth_cmd->add_option("--out", synth.out_csv, "output CSV path")
        ->required();
    synth_cmd->add_option("--meta", synth.meta,
                          "sidecar path (default <out>.meta.json)");

    IngestOpts ingest;
    CLI::App* ingest_cmd = app.add_subcommand(
        "ingest", "load, impute and standardize the HELOC CSV");
    ingest_cmd->add_option("--data", ingest.data,
                           "CSV path (default: discover in data dir)");
    ingest_cmd->add_option("--out", ingest.out_csv, "snapshot CSV path")
        ->required();
    ingest_cmd->add_option("--meta", ingest.meta, "snapshot sidecar path")
        ->required();

    TrainOpts train;
    CLI::App* train_cmd = app.add_subcommand(
        "train", "fit the logistic grid and the network on a snapshot");
    train_cmd->add_option("--snapshot", train.snapshot_csv, "snapshot CSV")
        ->required();
    train_cmd->add_option("--meta", train.meta, "snapshot sidecar")
        ->required();
    train_cmd->add_option("--lr-out", train.lr_out, "logistic model path")
        ->required();
    train_cmd->add_option("--mlp-out", train.mlp_out, "network model path")
        ->required();
    cfg(train_cmd->add_option("--holdout", train.holdout,
                              "validation fraction"),
        train.holdout, "holdout");
    cfg(train_cmd->add_option("--epochs", train.epochs, "network epochs"),
        train.epochs, "epochs");
    cfg(train_cmd->add_option("--batch", train.batch_size,
                              "network batch size"),
        train.batch_size, "batch_size");
    cfg(train_cmd->add_option("--rate", train.learning_rate,
                              "network learning rate"),
        train.learning_rate, "learning_rate");
    cfg(train_cmd->add_option("--max-iters", train.max_iters,
                              "logistic iteration cap"),
        train.max_iters, "max_iters");

    ExplainOpts explain;
    CLI::App* explain_cmd = app.add_subcommand(
        "explain", "attribute one prediction to its input features");
    explain_cmd->add_option("--snapshot", explain.snapshot_csv, "snapshot CSV")
        ->required();
    explain_cmd->add_option("--meta", explain.meta, "snapshot sidecar")
        ->required();
    explain_cmd->add_option("--mlp", explain.mlp_path, "network model path");
    explain_cmd->add_option("--lr", explain.lr_path,
                            "logistic model path (wrapped as a network)");
    explain_cmd->add_option("--row", explain.row, "candidate row index");
    explain_cmd->add_option("--raw", explain.raw_values,
                            "comma-separated raw feature values");
    explain_cmd->add_option("--method", explain.method,
                            "ig | deeplift | lime");
    explain_cmd->add_option("--policy", explain.policy,
                            "random | boundary | tight");
    explain_cmd->add_option("--target", explain.target,
                            "probability | logit");
    cfg(explain_cmd->add_option("--epsilon", explain.epsilon,
                                "boundary tolerance"),
        explain.epsilon, "epsilon");
    cfg(explain_cmd->add_option("--steps", explain.steps,
                                "integration steps"),
        explain.steps, "ig_steps");
    cfg(explain_cmd->add_option("--top-k", explain.top_k,
                                "contributions to print"),
        explain.top_k, "k");
    cfg(explain_cmd->add_option("--lime-n", explain.lime_n,
                                "surrogate perturbations"),
        explain.lime_n, "lime_perturbations");
    cfg(explain_cmd->add_option("--max-tries", explain.max_tries,
                                "boundary sampling cap"),
        explain.max_tries, "max_tries");

    ProfileOpts profiles;
    CLI::App* profiles_cmd = app.add_subcommand(
        "profiles", "print the named reference profile catalog");
    profiles_cmd->add_option("--snapshot", profiles.snapshot_csv,
                             "snapshot CSV")
        ->required();
    profiles_cmd->add_option("--meta", profiles.meta, "snapshot sidecar")
        ->required();
    profiles_cmd->add_option("--mlp", profiles.mlp_path, "network model path")
        ->required();
    cfg(profiles_cmd->add_option("--epsilon", profiles.epsilon,
                                 "boundary tolerance"),
        profiles.epsilon, "epsilon");

    Exp1Opts exp1;
    CLI::App* exp1_cmd = app.add_subcommand(
        "exp1", "trustworthiness benchmark against the logistic weights");
    exp1_cmd->add_option("--snapshot", exp1.snapshot_csv, "snapshot CSV")
        ->required();
    exp1_cmd->add_option("--meta", exp1.meta, "snapshot sidecar")->required();
    exp1_cmd->add_option("--lr", exp1.lr_path, "logistic model path")
        ->required();
    exp1_cmd->add_option("--mlp", exp1.mlp_path, "network model path")
        ->required();
    exp1_cmd->add_option("--out", exp1.out, "report JSON path")->required();
    cfg(exp1_cmd->add_option("--top-k", exp1.k, "agreement depth"), exp1.k,
        "k");
    cfg(exp1_cmd->add_option("--steps", exp1.steps, "integration steps"),
        exp1.steps, "ig_steps");
    cfg(exp1_cmd->add_option("--epsilon", exp1.epsilon, "boundary tolerance"),
        exp1.epsilon, "epsilon");
    cfg(exp1_cmd->add_option("--lime-n", exp1.lime_n,
                             "surrogate perturbations"),
        exp1.lime_n, "lime_perturbations");
    cfg(exp1_cmd->add_option("--max-candidates", exp1.max_candidates,
                             "cap on explained rows (0 = all)"),
        exp1.max_candidates, "max_candidates");
    cfg(exp1_cmd->add_option("--holdout", exp1.holdout,
                             "validation fraction"),
        exp1.holdout, "holdout");
    exp1_cmd->add_flag("--all-rows", exp1.all_rows,
                       "explain every snapshot row instead of the holdout");
    exp1_cmd->add_flag("--serial", exp1.serial, "disable the threaded path");

    Exp2Opts exp2;
    CLI::App* exp2_cmd = app.add_subcommand(
        "exp2", "reliability benchmark across reference policies");
    exp2_cmd->add_option("--snapshot", exp2.snapshot_csv, "snapshot CSV")
        ->required();
    exp2_cmd->add_option("--meta", exp2.meta, "snapshot sidecar")->required();
    exp2_cmd->add_option("--mlp", exp2.mlp_path, "network model path")
        ->required();
    exp2_cmd->add_option("--out", exp2.out, "report JSON path")->required();
    exp2_cmd->add_option("--aggregate-csv", exp2.aggregate_csv,
                         "aggregate table path (default <out>_aggregate.csv)");
    exp2_cmd->add_option("--histogram-csv", exp2.histogram_csv,
                         "histogram path (default <out>_histogram.csv)");
    exp2_cmd->add_option("--methods", exp2.methods,
                         "comma list: ig,deeplift,lime");
    exp2_cmd->add_option("--policies", exp2.policies,
                         "comma list: random,boundary,tight");
    cfg(exp2_cmd->add_option("--references", exp2.K,
                             "references per policy (K)"),
        exp2.K, "references");
    cfg(exp2_cmd->add_option("--n-candidates", exp2.n_candidates,
                             "rows to explain (0 = all)"),
        exp2.n_candidates, "n_candidates");
    cfg(exp2_cmd->add_option("--steps", exp2.steps, "integration steps"),
        exp2.steps, "ig_steps");
    cfg(exp2_cmd->add_option("--epsilon", exp2.epsilon, "boundary tolerance"),
        exp2.epsilon, "epsilon");
    cfg(exp2_cmd->add_option("--holdout", exp2.holdout,
                             "validation fraction"),
        exp2.holdout, "holdout");
    exp2_cmd->add_flag("--all-rows", exp2.all_rows,
                       "explain every snapshot row instead of the holdout");
    exp2_cmd->add_flag("--serial", exp2.serial, "disable the threaded path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 4;
    }

    try {
        load_config(g);
        for (const auto& apply : appliers) {
            apply(g.config);
        }
        const int jobs = g.resolved_jobs();
        if (jobs > 0) {
            omp_set_num_threads(jobs);
        }
        if (synth_cmd->parsed()) {
            run_synth(synth, g);
        } else if (ingest_cmd->parsed()) {
            run_ingest(ingest, g);
        } else if (train_cmd->parsed()) {
            run_train(train, g);
        } else if (explain_cmd->parsed()) {
            run_explain(explain, g);
        } else if (profiles_cmd->parsed()) {
            run_profiles(profiles, g);
        } else if (exp1_cmd->parsed()) {
            run_exp1(exp1, g);
        } else if (exp2_cmd->parsed()) {
            run_exp2(exp2, g);
        }
    } catch (const ConvergenceError& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return 3;
    } catch (const TrainingError& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return 3;
    } catch (const SchemaError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 4;
    } catch (const Error& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 5;
    } catch (const std::runtime_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 5;
    }
    return 0;
}
