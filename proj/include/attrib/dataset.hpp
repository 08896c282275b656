#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace attrib {

/// FICO special codes: -9 no bureau record, -8 no usable values,
/// -7 condition not met. Stored as plain numbers until imputation.
inline bool is_sentinel(double v) {
    return v == -7.0 || v == -8.0 || v == -9.0;
}

/// The 23 HELOC feature names in canonical order, target column excluded.
const std::vector<std::string>& heloc_feature_names();

/// Data-dictionary description for a HELOC column (feature or target).
/// Returns the name itself for unknown columns.
std::string heloc_feature_description(const std::string& name);

inline constexpr const char* kHelocTargetColumn = "RiskPerformance";

/// Rectangular numeric feature matrix with a binary target.
/// target semantics: 1 = "Bad" (90-day delinquency), 0 = "Good".
/// special_mask marks cells whose sentinel value was imputed away.
struct FeatureTable {
    std::vector<std::string> feature_names;
    std::size_t rows = 0;
    std::vector<double> values;             // row-major, rows x cols
    std::vector<int> target;                // length rows, values in {0,1}
    std::vector<std::uint8_t> special_mask; // row-major, 1 = imputed cell

    std::size_t cols() const { return feature_names.size(); }

    double at(std::size_t r, std::size_t c) const {
        return values[r * cols() + c];
    }
    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }

    std::span<const double> row(std::size_t r) const {
        return {values.data() + r * cols(), cols()};
    }

    /// {count of class 0, count of class 1}
    std::array<std::size_t, 2> class_counts() const;
    double bad_fraction() const;

    /// Index of a feature by name, or nullopt.
    std::optional<std::size_t> feature_index(const std::string& name) const;

    bool operator==(const FeatureTable&) const = default;
};

/// Per-feature moments of the standardization transform plus the raw
/// value range, which reference sampling draws from.
struct ScalerParams {
    std::vector<std::string> feature_names;
    std::vector<double> mean;     // raw-unit mean
    std::vector<double> stddev;   // raw-unit population stddev, > 0
    std::vector<double> raw_min;  // pre-scaling minimum
    std::vector<double> raw_max;  // pre-scaling maximum

    struct DroppedFeature {
        std::string name;
        double value = 0.0;  // the constant the feature held
        bool operator==(const DroppedFeature&) const = default;
    };
    std::vector<DroppedFeature> dropped;

    std::size_t size() const { return feature_names.size(); }

    std::vector<double> to_raw(std::span<const double> standardized) const;
    std::vector<double> to_standardized(std::span<const double> raw) const;

    bool operator==(const ScalerParams&) const = default;
};

/// Parse the HELOC CSV. Enforces the canonical 24-column schema and
/// reorders features into canonical order; target mapped Bad->1, Good->0.
FeatureTable load_csv(const std::string& path,
                      const std::string& target_column = kHelocTargetColumn);

/// Replace every sentinel cell with the per-feature median of non-sentinel
/// values, marking replaced cells in special_mask. Idempotent.
FeatureTable impute_special(const FeatureTable& table);

/// Scale every feature to mean 0, population stddev 1. Constant features
/// are dropped (recorded in ScalerParams::dropped, warning on stderr).
std::pair<FeatureTable, ScalerParams> standardize(const FeatureTable& table);

struct SplitResult {
    FeatureTable train;
    FeatureTable validation;
};

/// Stratified holdout split, deterministic under `seed`. Row order within
/// each side follows the original table.
SplitResult split(const FeatureTable& table, double holdout_fraction,
                  std::uint64_t seed);

/// Ground truth for the synthetic surrogate: per-feature raw ranges and a
/// linear logit on unit-scaled features. Features are drawn uniformly, the
/// target is Bernoulli(sigmoid(logit)).
///
/// A shared latent factor models the correlation structure of real credit
/// bureau data: every feature is a convex mix of one per-row draw u and its
/// own noise, with mix weight rho_c = latent_base + latent_gain * |coef_c| /
/// max|coef|, clamped to [0, 0.95]. Features with negative coefficients rise
/// with u and positive ones fall, so u acts as credit quality. Rows then
/// concentrate along a one-dimensional spine, which is what makes
/// nearest-neighbor reference sets geometrically tight. Defaults keep the
/// features independent. signal_scale multiplies the planted logit;
/// without it the latent factor would stack all coefficients onto u and
/// saturate the sigmoid.
struct SyntheticSpec {
    std::vector<std::string> feature_names;
    std::vector<double> range_lo;
    std::vector<double> range_hi;
    std::vector<double> coefficients;  // on unit-scaled features
    double bias = 0.0;
    double latent_base = 0.0;
    double latent_gain = 0.0;
    double signal_scale = 1.0;

    /// 23 HELOC-named features with plausible ranges and a planted logit
    /// dominated by ExternalRiskEstimate.
    static SyntheticSpec heloc_like();
};

FeatureTable synthesize(std::size_t n_rows, const SyntheticSpec& spec,
                        std::uint64_t seed);

/// Canonical dataset snapshot: CSV with Bad/Good target plus a JSON sidecar
/// holding scaler params, the feature-description map and the imputation
/// mask, so a snapshot re-ingests to an identical table.
void write_snapshot(const FeatureTable& table, const ScalerParams* scaler,
                    const std::string& csv_path,
                    const std::string& sidecar_path);

FeatureTable load_snapshot(const std::string& csv_path,
                           const std::string& sidecar_path);

/// Scaler stored in a snapshot sidecar, or nullopt if the snapshot was
/// written without one.
std::optional<ScalerParams> load_snapshot_scaler(
    const std::string& sidecar_path);

/// Locate the FICO CSV under `dir` (falls back to $ATTRIB_DATA_DIR, then
/// the working directory). Checks the usual distribution filenames.
std::optional<std::string> find_heloc_csv(const std::string& dir = "");

}  // namespace attrib
