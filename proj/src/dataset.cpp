#include "attrib/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "attrib/errors.hpp"
#include "attrib/util.hpp"
#include "json.hpp"

namespace attrib {

namespace {

// Appendix data dictionary, canonical order. First entry is the target.
const std::vector<std::pair<std::string, std::string>>& heloc_dictionary() {
    static const std::vector<std::pair<std::string, std::string>> dict = {
        {"RiskPerformance", "Paid as negotiated flag (12-36 Months)"},
        {"ExternalRiskEstimate", "Consolidated version of risk markers"},
        {"MSinceOldestTradeOpen", "Months Since Oldest Trade Open"},
        {"MSinceMostRecentTradeOpen", "Months Since Most Recent Trade Open"},
        {"AverageMInFile", "Average Months in File"},
        {"NumSatisfactoryTrades", "Number Satisfactory Trades"},
        {"NumTrades60Ever2DerogPubRec", "Number Trades 60+ Ever"},
        {"NumTrades90Ever2DerogPubRec", "Number Trades 90+ Ever"},
        {"PercentTradesNeverDelq", "Percent Trades Never Delinquent"},
        {"MSinceMostRecentDelq", "Months Since Most Recent Delinquency"},
        {"MaxDelq2PublicRecLast12M", "Max Delq/Public Records Last 12 Months"},
        {"MaxDelqEver", "Max Delinquency Ever"},
        {"NumTotalTrades",
         "Number of Total Trades (total number of credit accounts)"},
        {"NumTradesOpeninLast12M", "Number of Trades Open in Last 12 Months"},
        {"PercentInstallTrades", "Percent Installment Trades"},
        {"MSinceMostRecentInqexcl7days",
         "Months Since Most Recent Inq excl 7days"},
        {"NumInqLast6M", "Number of Inq Last 6 Months"},
        {"NumInqLast6Mexcl7days", "Number of Inq Last 6 Months excl 7days"},
        {"NetFractionRevolvingBurden", "Net Fraction Revolving Burden"},
        {"NetFractionInstallBurden", "Net Fraction Installment Burden"},
        {"NumRevolvingTradesWBalance", "Number Revolving Trades with Balance"},
        {"NumInstallTradesWBalance", "Number Installment Trades with Balance"},
        {"NumBank2NatlTradesWHighUtilization",
         "Number Bank/Natl Trades w high utilization ratio"},
        {"PercentTradesWBalance", "Percent Trades with Balance"},
    };
    return dict;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) {
        return false;
    }
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

int parse_target_cell(const std::string& s, std::size_t line_no) {
    if (s == "Bad" || s == "1") {
        return 1;
    }
    if (s == "Good" || s == "0") {
        return 0;
    }
    throw ParseError("line " + std::to_string(line_no) +
                     ": target value '" + s + "' is not Bad/Good or 0/1");
}

// Core CSV reader: keeps the file's own column layout. `line_offset` is the
// 1-based line number of the header, for messages.
FeatureTable parse_csv_generic(const std::string& path,
                               const std::string& target_column) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open CSV file: " + path);
    }

    std::string header_line;
    if (!std::getline(in, header_line) || header_line.empty()) {
        throw SchemaError("empty CSV file: " + path);
    }

    const std::vector<std::string> header = split_csv_line(header_line);
    std::size_t target_col = header.size();
    std::vector<std::size_t> feature_cols;
    std::vector<std::string> feature_names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == target_column) {
            target_col = c;
        } else {
            feature_cols.push_back(c);
            feature_names.push_back(header[c]);
        }
    }
    if (target_col == header.size()) {
        throw SchemaError("missing target column '" + target_column + "' in " +
                          path);
    }

    FeatureTable table;
    table.feature_names = std::move(feature_names);

    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
        }
        table.target.push_back(parse_target_cell(cells[target_col], line_no));
        for (std::size_t k = 0; k < feature_cols.size(); ++k) {
            double v = 0.0;
            if (!parse_number(cells[feature_cols[k]], v)) {
                throw ParseError("line " + std::to_string(line_no) +
                                 ": cell '" + cells[feature_cols[k]] +
                                 "' in column '" + table.feature_names[k] +
                                 "' is not numeric");
            }
            table.values.push_back(v);
        }
        ++table.rows;
    }
    if (table.rows == 0) {
        throw SchemaError("CSV has a header but no data rows: " + path);
    }
    table.special_mask.assign(table.rows * table.cols(), 0);
    return table;
}

// Reorder a table's feature columns to the given name order.
FeatureTable reorder_features(const FeatureTable& table,
                              const std::vector<std::string>& order) {
    std::vector<std::size_t> src(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto idx = table.feature_index(order[k]);
        if (!idx) {
            throw SchemaError("missing feature column '" + order[k] + "'");
        }
        src[k] = *idx;
    }
    FeatureTable out;
    out.feature_names = order;
    out.rows = table.rows;
    out.target = table.target;
    out.values.resize(table.rows * order.size());
    out.special_mask.resize(table.rows * order.size());
    for (std::size_t r = 0; r < table.rows; ++r) {
        for (std::size_t k = 0; k < order.size(); ++k) {
            out.values[r * order.size() + k] = table.at(r, src[k]);
            out.special_mask[r * order.size() + k] =
                table.special_mask[r * table.cols() + src[k]];
        }
    }
    return out;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) {
        return v[n / 2];
    }
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

nlohmann::json scaler_to_json(const ScalerParams& s) {
    nlohmann::json dropped = nlohmann::json::array();
    for (const auto& d : s.dropped) {
        dropped.push_back({{"name", d.name}, {"value", d.value}});
    }
    return {{"feature_names", s.feature_names}, {"mean", s.mean},
            {"stddev", s.stddev},               {"raw_min", s.raw_min},
            {"raw_max", s.raw_max},             {"dropped", dropped}};
}

ScalerParams scaler_from_json(const nlohmann::json& j) {
    ScalerParams s;
    s.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    s.raw_min = j.at("raw_min").get<std::vector<double>>();
    s.raw_max = j.at("raw_max").get<std::vector<double>>();
    for (const auto& d : j.at("dropped")) {
        s.dropped.push_back({d.at("name").get<std::string>(),
                             d.at("value").get<double>()});
    }
    return s;
}

}  // namespace

const std::vector<std::string>& heloc_feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        const auto& dict = heloc_dictionary();
        for (std::size_t i = 1; i < dict.size(); ++i) {
            v.push_back(dict[i].first);
        }
        return v;
    }();
    return names;
}

std::string heloc_feature_description(const std::string& name) {
    for (const auto& [n, d] : heloc_dictionary()) {
        if (n == name) {
            return d;
        }
    }
    return name;
}

std::array<std::size_t, 2> FeatureTable::class_counts() const {
    std::array<std::size_t, 2> counts = {0, 0};
    for (int y : target) {
        ++counts[y == 1 ? 1 : 0];
    }
    return counts;
}

double FeatureTable::bad_fraction() const {
    if (rows == 0) {
        return 0.0;
    }
    return static_cast<double>(class_counts()[1]) / static_cast<double>(rows);
}

std::optional<std::size_t> FeatureTable::feature_index(
    const std::string& name) const {
    for (std::size_t i = 0; i < feature_names.size(); ++i) {
        if (feature_names[i] == name) {
            return i;
        }
    }
    return std::nullopt;
}

std::vector<double> ScalerParams::to_raw(
    std::span<const double> standardized) const {
    std::vector<double> out(standardized.size());
    for (std::size_t i = 0; i < standardized.size(); ++i) {
        out[i] = standardized[i] * stddev[i] + mean[i];
    }
    return out;
}

std::vector<double> ScalerParams::to_standardized(
    std::span<const double> raw) const {
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = (raw[i] - mean[i]) / stddev[i];
    }
    return out;
}

FeatureTable load_csv(const std::string& path,
                      const std::string& target_column) {
    FeatureTable raw = parse_csv_generic(path, target_column);
    // Enforce the canonical schema: all 23 features, nothing unknown.
    const auto& canonical = heloc_feature_names();
    for (const auto& name : raw.feature_names) {
        if (std::find(canonical.begin(), canonical.end(), name) ==
            canonical.end()) {
            throw SchemaError("unknown column '" + name + "' in " + path);
        }
    }
    return reorder_features(raw, canonical);
}

FeatureTable impute_special(const FeatureTable& table) {
    FeatureTable out = table;
    const std::size_t d = table.cols();
    for (std::size_t c = 0; c < d; ++c) {
        std::vector<double> clean;
        clean.reserve(table.rows);
        for (std::size_t r = 0; r < table.rows; ++r) {
            const double v = table.at(r, c);
            if (!is_sentinel(v)) {
                clean.push_back(v);
            }
        }
        if (clean.size() == table.rows) {
            continue;
        }
        if (clean.empty()) {
            throw DataError("feature '" + table.feature_names[c] +
                            "' holds only sentinel values");
        }
        double med = median_of(std::move(clean));
        // An even-count median can land exactly on a sentinel code; nudge
        // off it so the no-sentinel invariant holds.
        while (is_sentinel(med)) {
            med = std::nextafter(med, std::numeric_limits<double>::infinity());
        }
        for (std::size_t r = 0; r < table.rows; ++r) {
            if (is_sentinel(out.at(r, c))) {
                out.at(r, c) = med;
                out.special_mask[r * d + c] = 1;
            }
        }
    }
    return out;
}

std::pair<FeatureTable, ScalerParams> standardize(const FeatureTable& table) {
    const std::size_t d = table.cols();
    const double n = static_cast<double>(table.rows);

    ScalerParams scaler;
    std::vector<std::size_t> kept;
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        double lo = table.at(0, c);
        double hi = lo;
        for (std::size_t r = 0; r < table.rows; ++r) {
            const double v = table.at(r, c);
            mean += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        mean /= n;
        double var = 0.0;
        for (std::size_t r = 0; r < table.rows; ++r) {
            const double dv = table.at(r, c) - mean;
            var += dv * dv;
        }
        var /= n;
        const double sd = std::sqrt(var);
        if (sd <= 0.0) {
            std::cerr << "warning: dropping constant feature '"
                      << table.feature_names[c] << "' (value " << mean << ")\n";
            scaler.dropped.push_back({table.feature_names[c], mean});
            continue;
        }
        kept.push_back(c);
        scaler.feature_names.push_back(table.feature_names[c]);
        scaler.mean.push_back(mean);
        scaler.stddev.push_back(sd);
        scaler.raw_min.push_back(lo);
        scaler.raw_max.push_back(hi);
    }

    FeatureTable out;
    out.feature_names = scaler.feature_names;
    out.rows = table.rows;
    out.target = table.target;
    out.values.resize(table.rows * kept.size());
    out.special_mask.resize(table.rows * kept.size());
    for (std::size_t r = 0; r < table.rows; ++r) {
        for (std::size_t k = 0; k < kept.size(); ++k) {
            out.values[r * kept.size() + k] =
                (table.at(r, kept[k]) - scaler.mean[k]) / scaler.stddev[k];
            out.special_mask[r * kept.size() + k] =
                table.special_mask[r * d + kept[k]];
        }
    }
    return {std::move(out), std::move(scaler)};
}

SplitResult split(const FeatureTable& table, double holdout_fraction,
                  std::uint64_t seed) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        throw std::invalid_argument("holdout_fraction must be in (0, 1)");
    }
    std::vector<std::size_t> by_class[2];
    for (std::size_t r = 0; r < table.rows; ++r) {
        by_class[table.target[r] == 1 ? 1 : 0].push_back(r);
    }

    // Largest-remainder allocation of the holdout count across classes,
    // which keeps both the total exact and the classes stratified.
    const std::size_t n_val_total = static_cast<std::size_t>(
        std::llround(holdout_fraction * static_cast<double>(table.rows)));
    if (n_val_total == 0 || n_val_total >= table.rows) {
        throw std::invalid_argument(
            "holdout_fraction leaves an empty train or validation side");
    }
    double ideal[2];
    std::size_t take[2];
    for (int c = 0; c < 2; ++c) {
        ideal[c] = holdout_fraction * static_cast<double>(by_class[c].size());
        take[c] = static_cast<std::size_t>(std::floor(ideal[c]));
        take[c] = std::min(take[c], by_class[c].size());
    }
    while (take[0] + take[1] < n_val_total) {
        const double rem0 = ideal[0] - static_cast<double>(take[0]);
        const double rem1 = ideal[1] - static_cast<double>(take[1]);
        int pick = (rem1 > rem0) ? 1 : 0;
        if (take[pick] >= by_class[pick].size()) {
            pick = 1 - pick;
        }
        ++take[pick];
    }

    std::vector<char> in_validation(table.rows, 0);
    for (int c = 0; c < 2; ++c) {
        std::vector<std::size_t> idx = by_class[c];
        std::mt19937_64 rng(mix64(seed, static_cast<std::uint64_t>(c)));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i = 0; i < take[c]; ++i) {
            in_validation[idx[i]] = 1;
        }
    }

    auto gather = [&](bool validation) {
        FeatureTable part;
        part.feature_names = table.feature_names;
        for (std::size_t r = 0; r < table.rows; ++r) {
            if ((in_validation[r] != 0) != validation) {
                continue;
            }
            ++part.rows;
            part.target.push_back(table.target[r]);
            for (std::size_t c = 0; c < table.cols(); ++c) {
                part.values.push_back(table.at(r, c));
                part.special_mask.push_back(
                    table.special_mask[r * table.cols() + c]);
            }
        }
        return part;
    };
    return {gather(false), gather(true)};
}

SyntheticSpec SyntheticSpec::heloc_like() {
    SyntheticSpec spec;
    spec.feature_names = heloc_feature_names();
    // name -> {lo, hi, coefficient}; unlisted features get a zero
    // coefficient. ExternalRiskEstimate is the planted dominant feature.
    struct Row {
        const char* name;
        double lo, hi, coef;
    };
    static const Row rows[] = {
        {"ExternalRiskEstimate", 33, 94, -2.0},
        {"MSinceOldestTradeOpen", 2, 400, -0.7},
        {"MSinceMostRecentTradeOpen", 0, 80, 0.0},
        {"AverageMInFile", 4, 250, -0.5},
        {"NumSatisfactoryTrades", 0, 60, -0.45},
        {"NumTrades60Ever2DerogPubRec", 0, 10, 0.3},
        {"NumTrades90Ever2DerogPubRec", 0, 10, 0.25},
        {"PercentTradesNeverDelq", 20, 100, -1.0},
        {"MSinceMostRecentDelq", 0, 80, -0.15},
        {"MaxDelq2PublicRecLast12M", 0, 9, -0.2},
        {"MaxDelqEver", 1, 9, -0.1},
        {"NumTotalTrades", 0, 100, 0.0},
        {"NumTradesOpeninLast12M", 0, 15, 0.1},
        {"PercentInstallTrades", 0, 100, 0.0},
        {"MSinceMostRecentInqexcl7days", 0, 24, -0.1},
        {"NumInqLast6M", 0, 20, 0.6},
        {"NumInqLast6Mexcl7days", 0, 20, 0.0},
        {"NetFractionRevolvingBurden", 0, 150, 0.9},
        {"NetFractionInstallBurden", 0, 300, 0.2},
        {"NumRevolvingTradesWBalance", 0, 25, 0.15},
        {"NumInstallTradesWBalance", 0, 10, 0.0},
        {"NumBank2NatlTradesWHighUtilization", 0, 15, 0.35},
        {"PercentTradesWBalance", 0, 100, 0.4},
    };
    for (const Row& r : rows) {
        spec.range_lo.push_back(r.lo);
        spec.range_hi.push_back(r.hi);
        spec.coefficients.push_back(r.coef);
    }
    spec.bias = 0.0;
    // Correlated credit-quality factor plus an attenuated logit puts the
    // Bayes accuracy near the real dataset's, with a populated decision
    // boundary inside the data cloud.
    spec.latent_base = 0.55;
    spec.latent_gain = 0.35;
    spec.signal_scale = 0.2;
    return spec;
}

FeatureTable synthesize(std::size_t n_rows, const SyntheticSpec& spec,
                        std::uint64_t seed) {
    if (n_rows < 10) {
        throw std::invalid_argument("synthesize requires n_rows >= 10");
    }
    const std::size_t d = spec.feature_names.size();
    if (spec.range_lo.size() != d || spec.range_hi.size() != d ||
        spec.coefficients.size() != d) {
        throw std::invalid_argument("SyntheticSpec fields must share length");
    }
    for (std::size_t c = 0; c < d; ++c) {
        if (spec.range_lo[c] > spec.range_hi[c]) {
            throw std::invalid_argument("SyntheticSpec range_lo > range_hi");
        }
    }

    FeatureTable table;
    table.feature_names = spec.feature_names;
    table.rows = n_rows;
    table.values.resize(n_rows * d);
    table.special_mask.assign(n_rows * d, 0);
    table.target.resize(n_rows);

    double max_abs_coef = 0.0;
    for (double w : spec.coefficients) {
        max_abs_coef = std::max(max_abs_coef, std::fabs(w));
    }
    std::vector<double> rho(d, spec.latent_base);
    for (std::size_t c = 0; c < d; ++c) {
        if (max_abs_coef > 0.0) {
            rho[c] += spec.latent_gain * std::fabs(spec.coefficients[c]) /
                      max_abs_coef;
        }
        rho[c] = std::clamp(rho[c], 0.0, 0.95);
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double inv_sqrt12 = 1.0 / std::sqrt(12.0);
    // Fixed draw order per row (u, the d feature noises, the label coin)
    // keeps same-seed tables identical across spec settings of one shape.
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double u = unit(rng);
        double logit = spec.bias;
        for (std::size_t c = 0; c < d; ++c) {
            const double lo = spec.range_lo[c];
            const double hi = spec.range_hi[c];
            const double oriented = spec.coefficients[c] > 0.0 ? 1.0 - u : u;
            const double mixed =
                rho[c] * oriented + (1.0 - rho[c]) * unit(rng);
            const double v = lo + (hi - lo) * mixed;
            table.values[r * d + c] = v;
            if (hi > lo) {
                // Unit-scale with the uniform distribution's own moments so
                // the planted coefficients act on comparable scales.
                const double z = (v - 0.5 * (lo + hi)) / ((hi - lo) * inv_sqrt12);
                logit += spec.signal_scale * spec.coefficients[c] * z;
            }
        }
        table.target[r] = unit(rng) < sigmoid(logit) ? 1 : 0;
    }
    return table;
}

void write_snapshot(const FeatureTable& table, const ScalerParams* scaler,
                    const std::string& csv_path,
                    const std::string& sidecar_path) {
    std::ostringstream csv;
    csv << csv_escape(std::string(kHelocTargetColumn));
    for (const auto& name : table.feature_names) {
        csv << ',' << csv_escape(name);
    }
    csv << '\n';
    for (std::size_t r = 0; r < table.rows; ++r) {
        csv << (table.target[r] == 1 ? "Bad" : "Good");
        for (std::size_t c = 0; c < table.cols(); ++c) {
            csv << ',' << format_double(table.at(r, c));
        }
        csv << '\n';
    }
    write_file(csv_path, csv.str());

    nlohmann::json special = nlohmann::json::array();
    for (std::size_t r = 0; r < table.rows; ++r) {
        for (std::size_t c = 0; c < table.cols(); ++c) {
            if (table.special_mask[r * table.cols() + c]) {
                special.push_back({r, c});
            }
        }
    }
    nlohmann::json descriptions = nlohmann::json::object();
    for (const auto& name : table.feature_names) {
        descriptions[name] = heloc_feature_description(name);
    }
    nlohmann::json sidecar = {
        {"format_version", 1},
        {"target_name", kHelocTargetColumn},
        {"rows", table.rows},
        {"feature_names", table.feature_names},
        {"feature_descriptions", descriptions},
        {"special_cells", special},
        {"scaler", scaler ? scaler_to_json(*scaler) : nlohmann::json()},
    };
    write_file(sidecar_path, sidecar.dump(2) + "\n");
}

FeatureTable load_snapshot(const std::string& csv_path,
                           const std::string& sidecar_path) {
    const nlohmann::json sidecar = nlohmann::json::parse(read_file(sidecar_path));
    const std::string target_name =
        sidecar.at("target_name").get<std::string>();
    FeatureTable table = parse_csv_generic(csv_path, target_name);
    for (const auto& cell : sidecar.at("special_cells")) {
        const std::size_t r = cell.at(0).get<std::size_t>();
        const std::size_t c = cell.at(1).get<std::size_t>();
        if (r >= table.rows || c >= table.cols()) {
            throw DataError("sidecar special cell out of range");
        }
        table.special_mask[r * table.cols() + c] = 1;
    }
    return table;
}

std::optional<ScalerParams> load_snapshot_scaler(
    const std::string& sidecar_path) {
    const nlohmann::json sidecar =
        nlohmann::json::parse(read_file(sidecar_path));
    const auto& s = sidecar.at("scaler");
    if (s.is_null()) {
        return std::nullopt;
    }
    return scaler_from_json(s);
}

std::optional<std::string> find_heloc_csv(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> dirs;
    if (!dir.empty()) {
        dirs.push_back(dir);
    }
    if (const char* env = std::getenv("ATTRIB_DATA_DIR")) {
        dirs.push_back(env);
    }
    dirs.push_back(".");
    static const char* names[] = {"heloc_dataset_v1.csv", "heloc_dataset.csv",
                                  "heloc.csv", "fico_heloc.csv"};
    for (const auto& d : dirs) {
        for (const char* name : names) {
            const fs::path p = fs::path(d) / name;
            std::error_code ec;
            if (fs::exists(p, ec)) {
                return p.string();
            }
        }
    }
    return std::nullopt;
}

}  // namespace attrib
