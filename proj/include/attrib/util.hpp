#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace attrib {

/// splitmix64 step; the standard 64-bit mixer.
std::uint64_t splitmix64(std::uint64_t& state);

/// Derive an independent stream seed from (base, index).
std::uint64_t mix64(std::uint64_t base, std::uint64_t index);

/// FNV-1a over the raw bytes of a double vector, folded with `seed`.
/// Used to derive per-candidate random streams from candidate content, so
/// batch results do not depend on candidate order or thread count.
std::uint64_t hash_doubles(std::span<const double> values, std::uint64_t seed);

/// Numerically stable logistic function.
inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Shortest round-trip-exact decimal rendering ("%.17g").
std::string format_double(double v);

/// RFC 4180 field quoting (quotes only when required).
std::string csv_escape(const std::string& field);

/// Split one CSV record. Handles quoted fields and embedded commas/quotes;
/// does not handle embedded newlines (our inputs are line-oriented).
std::vector<std::string> split_csv_line(const std::string& line);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

double l2_norm(std::span<const double> v);
double euclidean_distance(std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace attrib
