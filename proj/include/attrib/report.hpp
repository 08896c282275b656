#pragma once

#include <string>

#include "attrib/experiments.hpp"

namespace attrib {

/// Report vocabulary for the reference policies: "random", "constrained"
/// (boundary sampling), "tightly_constrained" (nearest pool members).
std::string policy_label(ReferencePolicy p);

/// Reports are JSON documents of the form
///   { "deterministic": {...}, "deterministic_sha256": "...",
///     "provenance": {...} }
/// The hash covers the compact dump of the deterministic object only;
/// provenance (wall-clock timestamp) never enters the hash, so two runs
/// with one configuration produce byte-identical deterministic sections
/// and hashes. Each writer returns the hash it embedded.
std::string write_exp1_report(const Experiment1Result& result,
                              const std::string& json_path);

std::string write_exp2_report(const Experiment2Result& result,
                              const std::string& json_path,
                              const std::string& aggregate_csv_path,
                              const std::string& histogram_csv_path);

/// Extract the deterministic_sha256 field from a written report.
std::string report_hash(const std::string& json_path);

}  // namespace attrib
