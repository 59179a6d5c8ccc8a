#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace uit {

/// Shortest round-trip decimal form of a double (std::to_chars). All CSV and
/// JSON emission goes through this so artifacts are byte-stable and re-parse
/// to identical bits.
std::string fmt_double(double v);

/// Non-negative value formatted with exactly two decimals, half-up.
/// Report emission only; internal arithmetic stays full precision.
std::string fmt_fixed2(double v);

/// Scientific notation with a two-digit mantissa, e.g. -8.64e-01.
std::string fmt_sci2(double v);

/// Four-decimal fixed form used for p-values, e.g. 0.0381.
std::string fmt_fixed4(double v);

double parse_double(const std::string& token, bool& ok);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

std::vector<std::string> split_line(const std::string& line, char sep = ',');

/// FNV-1a 64-bit digest as 16 hex chars; manifest file fingerprints.
std::string fnv1a64_hex(const std::string& bytes);
std::string digest_file(const std::string& path);

}  // namespace uit
