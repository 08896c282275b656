#pragma once

#include <string>

namespace attrib {

/// SHA-256 of `data`, as a lowercase hex string. Used to stamp the
/// deterministic section of benchmark reports.
std::string sha256_hex(const std::string& data);

}  // namespace attrib
