#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "attrib/dataset.hpp"
#include "attrib/errors.hpp"
#include "attrib/util.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace attrib;
using attrib_test::tmp_path;

namespace {

// A tiny canonical-schema CSV whose cell (r, c) holds r * 100 + c with c the
// canonical feature index, but with the columns written in reverse order and
// the target in the middle. load_csv must undo the shuffle.
std::string write_shuffled_csv() {
    const auto& names = heloc_feature_names();
    std::vector<std::string> header(names.rbegin(), names.rend());
    header.insert(header.begin() + 11, kHelocTargetColumn);

    std::ostringstream out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        out << (i ? "," : "") << header[i];
    }
    out << '\n';
    const char* targets[3] = {"Bad", "Good", "Bad"};
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) {
                out << ',';
            }
            if (header[i] == kHelocTargetColumn) {
                out << targets[r];
            } else {
                const auto it =
                    std::find(names.begin(), names.end(), header[i]);
                out << r * 100 + static_cast<std::size_t>(it - names.begin());
            }
        }
        out << '\n';
    }
    const std::string path = tmp_path("dataset_shuffled.csv");
    write_file(path, out.str());
    return path;
}

FeatureTable small_table(std::vector<std::string> names,
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

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("feature dictionary has the 23 canonical columns") {
    const auto& names = heloc_feature_names();
    REQUIRE(names.size() == 23);
    CHECK(names.front() == "ExternalRiskEstimate");
    CHECK(names.back() == "PercentTradesWBalance");
    CHECK(heloc_feature_description("AverageMInFile") ==
          "Average Months in File");
    CHECK(heloc_feature_description(kHelocTargetColumn) ==
          "Paid as negotiated flag (12-36 Months)");
    CHECK(heloc_feature_description("NoSuchColumn") == "NoSuchColumn");
}

TEST_CASE("load_csv restores canonical column order") {
    const std::string path = write_shuffled_csv();
    const FeatureTable t = load_csv(path);
    REQUIRE(t.rows == 3);
    REQUIRE(t.feature_names == heloc_feature_names());
    CHECK(t.target == std::vector<int>{1, 0, 1});
    for (std::size_t r = 0; r < t.rows; ++r) {
        for (std::size_t c = 0; c < t.cols(); ++c) {
            CHECK(t.at(r, c) == static_cast<double>(r * 100 + c));
        }
    }
    CHECK(std::count(t.special_mask.begin(), t.special_mask.end(), 1) == 0);
}

TEST_CASE("load_csv rejects structural problems as SchemaError") {
    CHECK_THROWS_AS(load_csv(tmp_path("dataset_does_not_exist.csv")),
                    SchemaError);

    const std::string empty = tmp_path("dataset_empty.csv");
    write_file(empty, "");
    CHECK_THROWS_AS(load_csv(empty), SchemaError);

    const auto& names = heloc_feature_names();
    std::ostringstream header;
    header << kHelocTargetColumn;
    for (const auto& n : names) {
        header << ',' << n;
    }

    const std::string header_only = tmp_path("dataset_header_only.csv");
    write_file(header_only, header.str() + "\n");
    CHECK_THROWS_AS(load_csv(header_only), SchemaError);

    const std::string no_target = tmp_path("dataset_no_target.csv");
    {
        std::ostringstream out;
        for (std::size_t i = 0; i < names.size(); ++i) {
            out << (i ? "," : "") << names[i];
        }
        out << "\n";
        for (std::size_t i = 0; i < names.size(); ++i) {
            out << (i ? "," : "") << 1;
        }
        out << "\n";
        write_file(no_target, out.str());
    }
    CHECK_THROWS_AS(load_csv(no_target), SchemaError);

    const std::string unknown = tmp_path("dataset_unknown_column.csv");
    {
        std::string row = "Bad";
        for (std::size_t i = 0; i < names.size() + 1; ++i) {
            row += ",1";
        }
        write_file(unknown, header.str() + ",MysteryColumn\n" + row + "\n");
    }
    CHECK_THROWS_AS(load_csv(unknown), SchemaError);

    const std::string missing_feature = tmp_path("dataset_missing_feature.csv");
    {
        // Header with the last canonical feature removed.
        std::ostringstream out;
        out << kHelocTargetColumn;
        for (std::size_t i = 0; i + 1 < names.size(); ++i) {
            out << ',' << names[i];
        }
        out << "\nBad";
        for (std::size_t i = 0; i + 1 < names.size(); ++i) {
            out << ",1";
        }
        out << "\n";
        write_file(missing_feature, out.str());
    }
    CHECK_THROWS_AS(load_csv(missing_feature), SchemaError);
}

TEST_CASE("load_csv reports bad cells as ParseError with the line number") {
    const auto& names = heloc_feature_names();
    std::ostringstream out;
    out << kHelocTargetColumn;
    for (const auto& n : names) {
        out << ',' << n;
    }
    out << '\n';
    auto data_row = [&](const std::string& target, const std::string& cell0) {
        std::string row = target + "," + cell0;
        for (std::size_t i = 1; i < names.size(); ++i) {
            row += ",1";
        }
        return row + "\n";
    };

    SUBCASE("non-numeric feature cell") {
        const std::string path = tmp_path("dataset_bad_cell.csv");
        write_file(path, out.str() + data_row("Bad", "5") +
                             data_row("Good", "oops"));
        try {
            load_csv(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("line 3") != std::string::npos);
            CHECK(msg.find("oops") != std::string::npos);
        }
    }

    SUBCASE("unrecognized target label") {
        const std::string path = tmp_path("dataset_bad_target.csv");
        write_file(path, out.str() + data_row("Meh", "5"));
        try {
            load_csv(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }

    SUBCASE("wrong cell count") {
        const std::string path = tmp_path("dataset_short_row.csv");
        write_file(path, out.str() + "Bad,1,2\n");
        CHECK_THROWS_AS(load_csv(path), ParseError);
    }

    SUBCASE("numeric target labels are accepted") {
        const std::string path = tmp_path("dataset_numeric_target.csv");
        write_file(path, out.str() + data_row("1", "5") + data_row("0", "6"));
        const FeatureTable t = load_csv(path);
        CHECK(t.target == std::vector<int>{1, 0});
    }
}

TEST_CASE("impute_special replaces sentinels with the clean median") {
    FeatureTable t = small_table({"a", "b"},
                                 {{-9.0, 1.0}, {2.0, 2.0}, {4.0, 3.0}},
                                 {0, 1, 0});
    const FeatureTable out = impute_special(t);
    CHECK(out.at(0, 0) == 3.0);  // median of {2, 4}
    CHECK(out.at(1, 0) == 2.0);
    CHECK(out.at(2, 0) == 4.0);
    CHECK(out.special_mask ==
          std::vector<std::uint8_t>{1, 0, 0, 0, 0, 0});
    // Untouched column b carried through.
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(out.at(r, 1) == t.at(r, 1));
    }

    SUBCASE("identity on sentinel-free tables") {
        FeatureTable clean = small_table({"a"}, {{1.0}, {5.0}}, {0, 1});
        CHECK(impute_special(clean) == clean);
    }

    SUBCASE("idempotent") {
        CHECK(impute_special(out) == out);
    }

    SUBCASE("all-sentinel feature is unusable") {
        FeatureTable bad = small_table({"a", "b"},
                                       {{-7.0, 1.0}, {-8.0, 2.0}},
                                       {0, 1});
        CHECK_THROWS_AS(impute_special(bad), DataError);
    }

    SUBCASE("median landing on a sentinel code is nudged off it") {
        // Clean values {-10, -4}: even-count median is exactly -7.
        FeatureTable tricky = small_table(
            {"a"}, {{-10.0}, {-4.0}, {-9.0}}, {0, 1, 0});
        const FeatureTable fixed = impute_special(tricky);
        const double filled = fixed.at(2, 0);
        CHECK(!is_sentinel(filled));
        CHECK(filled > -7.0);
        CHECK(filled < -6.999999);
    }
}

TEST_CASE("standardize centers, scales, and round-trips") {
    FeatureTable t = small_table(
        {"a", "b"}, {{1.0, 10.0}, {3.0, 20.0}, {5.0, 60.0}}, {0, 1, 0});
    const auto [scaled, scaler] = standardize(t);
    REQUIRE(scaler.size() == 2);
    CHECK(scaler.mean[0] == doctest::Approx(3.0));
    CHECK(scaler.mean[1] == doctest::Approx(30.0));
    // Population stddev of {1,3,5} is sqrt(8/3).
    CHECK(scaler.stddev[0] == doctest::Approx(std::sqrt(8.0 / 3.0)));
    CHECK(scaler.raw_min == std::vector<double>{1.0, 10.0});
    CHECK(scaler.raw_max == std::vector<double>{5.0, 60.0});

    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0;
        double var = 0.0;
        for (std::size_t r = 0; r < 3; ++r) {
            mean += scaled.at(r, c);
        }
        mean /= 3.0;
        for (std::size_t r = 0; r < 3; ++r) {
            var += (scaled.at(r, c) - mean) * (scaled.at(r, c) - mean);
        }
        var /= 3.0;
        CHECK(std::abs(mean) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
    }

    for (std::size_t r = 0; r < 3; ++r) {
        const auto raw = scaler.to_raw(scaled.row(r));
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(raw[c] == doctest::Approx(t.at(r, c)).epsilon(1e-12));
        }
        const auto back = scaler.to_standardized(raw);
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(back[c] ==
                  doctest::Approx(scaled.at(r, c)).epsilon(1e-12));
        }
    }
}

TEST_CASE("standardize drops constant features and records them") {
    FeatureTable t = small_table(
        {"a", "flat", "b"},
        {{1.0, 7.0, 10.0}, {3.0, 7.0, 20.0}, {5.0, 7.0, 60.0}}, {0, 1, 0});
    const auto [scaled, scaler] = standardize(t);
    CHECK(scaled.feature_names == std::vector<std::string>{"a", "b"});
    CHECK(scaled.cols() == 2);
    REQUIRE(scaler.dropped.size() == 1);
    CHECK(scaler.dropped[0].name == "flat");
    CHECK(scaler.dropped[0].value == 7.0);
}

TEST_CASE("split is stratified, deterministic, order preserving") {
    // 100 rows, 40 bad. Feature 0 is a unique row id.
    std::vector<std::vector<double>> rows;
    std::vector<int> target;
    for (std::size_t r = 0; r < 100; ++r) {
        rows.push_back({static_cast<double>(r)});
        target.push_back(r % 5 < 2 ? 1 : 0);
    }
    const FeatureTable t = small_table({"id"}, rows, target);
    REQUIRE(t.class_counts() == std::array<std::size_t, 2>{60, 40});

    const SplitResult s = split(t, 0.33, 7);
    CHECK(s.validation.rows == 33);
    CHECK(s.train.rows == 67);
    CHECK(std::abs(s.validation.bad_fraction() - t.bad_fraction()) <= 0.02);
    CHECK(std::abs(s.train.bad_fraction() - t.bad_fraction()) <= 0.02);

    // Exact partition: every id lands on exactly one side.
    std::vector<int> seen(100, 0);
    for (std::size_t r = 0; r < s.train.rows; ++r) {
        ++seen[static_cast<std::size_t>(s.train.at(r, 0))];
    }
    for (std::size_t r = 0; r < s.validation.rows; ++r) {
        ++seen[static_cast<std::size_t>(s.validation.at(r, 0))];
    }
    CHECK(std::count(seen.begin(), seen.end(), 1) == 100);

    // Original row order survives within each side.
    for (std::size_t r = 1; r < s.train.rows; ++r) {
        CHECK(s.train.at(r, 0) > s.train.at(r - 1, 0));
    }
    for (std::size_t r = 1; r < s.validation.rows; ++r) {
        CHECK(s.validation.at(r, 0) > s.validation.at(r - 1, 0));
    }

    SUBCASE("same seed reproduces, different seed differs") {
        const SplitResult again = split(t, 0.33, 7);
        CHECK(again.train == s.train);
        CHECK(again.validation == s.validation);
        const SplitResult other = split(t, 0.33, 8);
        CHECK(other.validation.values != s.validation.values);
    }

    SUBCASE("invalid fractions are rejected") {
        CHECK_THROWS_AS(split(t, 0.0, 1), std::invalid_argument);
        CHECK_THROWS_AS(split(t, 1.0, 1), std::invalid_argument);
        CHECK_THROWS_AS(split(t, -0.2, 1), std::invalid_argument);
        CHECK_THROWS_AS(split(t, 1.5, 1), std::invalid_argument);
        // Rounds to an empty validation side.
        CHECK_THROWS_AS(split(t, 0.001, 1), std::invalid_argument);
    }
}

TEST_CASE("synthesize draws in range, deterministically") {
    const SyntheticSpec spec = SyntheticSpec::heloc_like();
    REQUIRE(spec.feature_names == heloc_feature_names());
    REQUIRE(spec.coefficients.size() == 23);

    const FeatureTable a = synthesize(200, spec, 42);
    const FeatureTable b = synthesize(200, spec, 42);
    const FeatureTable c = synthesize(200, spec, 43);
    CHECK(a == b);
    CHECK(a.values != c.values);
    CHECK(a.rows == 200);

    for (std::size_t r = 0; r < a.rows; ++r) {
        for (std::size_t col = 0; col < a.cols(); ++col) {
            CHECK(a.at(r, col) >= spec.range_lo[col]);
            CHECK(a.at(r, col) <= spec.range_hi[col]);
        }
    }

    SUBCASE("zero logit gives a balanced target") {
        SyntheticSpec flat = spec;
        std::fill(flat.coefficients.begin(), flat.coefficients.end(), 0.0);
        flat.bias = 0.0;
        const FeatureTable f = synthesize(2000, flat, 5);
        CHECK(f.bad_fraction() > 0.45);
        CHECK(f.bad_fraction() < 0.55);
    }

    SUBCASE("tiny requests are rejected") {
        CHECK_THROWS_AS(synthesize(9, spec, 1), std::invalid_argument);
    }

    SUBCASE("mismatched spec lengths are rejected") {
        SyntheticSpec broken = spec;
        broken.coefficients.pop_back();
        CHECK_THROWS_AS(synthesize(100, broken, 1), std::invalid_argument);
    }
}

TEST_CASE("snapshot round-trips the table, mask, and scaler") {
    FeatureTable raw = synthesize(60, SyntheticSpec::heloc_like(), 9);
    // Plant sentinels so the mask is non-trivial after imputation.
    raw.at(0, 0) = -9.0;
    raw.at(5, 3) = -7.0;
    raw.at(7, 3) = -8.0;
    const FeatureTable imputed = impute_special(raw);
    const auto [scaled, scaler] = standardize(imputed);

    const std::string csv = tmp_path("dataset_snapshot.csv");
    const std::string sidecar = tmp_path("dataset_snapshot.json");
    write_snapshot(scaled, &scaler, csv, sidecar);

    const FeatureTable back = load_snapshot(csv, sidecar);
    CHECK(back == scaled);
    const auto scaler_back = load_snapshot_scaler(sidecar);
    REQUIRE(scaler_back.has_value());
    CHECK(*scaler_back == scaler);

    SUBCASE("scaler-free snapshots load with no scaler") {
        const std::string csv2 = tmp_path("dataset_snapshot2.csv");
        const std::string sidecar2 = tmp_path("dataset_snapshot2.json");
        write_snapshot(imputed, nullptr, csv2, sidecar2);
        CHECK(load_snapshot(csv2, sidecar2) == imputed);
        CHECK(!load_snapshot_scaler(sidecar2).has_value());
    }
}

TEST_CASE("find_heloc_csv checks the given directory first") {
    const std::string dir = tmp_path("dataset_datadir");
    std::filesystem::create_directories(dir);
    const std::string found = dir + "/heloc_dataset_v1.csv";
    write_file(found, "placeholder\n");
    const auto hit = find_heloc_csv(dir);
    REQUIRE(hit.has_value());
    CHECK(*hit == found);

    const std::string empty_dir = tmp_path("dataset_emptydir");
    std::filesystem::create_directories(empty_dir);
    // Point the env fallback at the same empty directory so neither it nor
    // the working directory can produce a stray hit.
    const char* saved = std::getenv("ATTRIB_DATA_DIR");
    setenv("ATTRIB_DATA_DIR", empty_dir.c_str(), 1);
    const bool cwd_has_file = find_heloc_csv(empty_dir).has_value();
    if (saved) {
        setenv("ATTRIB_DATA_DIR", saved, 1);
    } else {
        unsetenv("ATTRIB_DATA_DIR");
    }
    CHECK(!cwd_has_file);

    // Env fallback is honored when no directory is passed.
    setenv("ATTRIB_DATA_DIR", dir.c_str(), 1);
    const auto via_env = find_heloc_csv();
    if (saved) {
        setenv("ATTRIB_DATA_DIR", saved, 1);
    } else {
        unsetenv("ATTRIB_DATA_DIR");
    }
    REQUIRE(via_env.has_value());
    CHECK(*via_env == found);
}

}  // TEST_SUITE
