#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qg2rom/grid.hpp"

namespace qg2rom {

// Shortest round-trip-safe text for CSV output: 17 significant digits.
std::string format_number(double v);
// Shortest text that reads back to the same double; used in directory tags.
std::string format_short(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // Index of a header column; throws IoError naming the column if absent.
  std::size_t column(std::string_view name) const;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
// Numeric CSV with one header line. Throws IoError on a missing file or a
// malformed row.
CsvTable read_csv(const std::filesystem::path& path);

// x,y,value per cell in storage order.
void write_field_csv(const std::filesystem::path& path, const Field& f);

// 64-bit FNV-1a, rendered as 16 hex digits. Used as a cache key and content
// digest, not for security.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex_digest(std::uint64_t h);
std::string digest_string(std::string_view text);
std::string digest_file(const std::filesystem::path& path);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes);

}  // namespace qg2rom
