#pragma once

// Minimal CSV reading shared by the file formats. Fields are unquoted; the
// formats never need embedded commas.

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gma/error.hpp"

namespace gma::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the file
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

std::vector<std::string> split(std::string_view line);

/// Reads a file with a mandatory header equal to `expected_header`.
Table read(const std::filesystem::path& path, const std::vector<std::string>& expected_header);

std::string context(const std::filesystem::path& path, std::size_t line);

double parse_double(std::string_view text, const std::filesystem::path& path, std::size_t line);
long long parse_int(std::string_view text, const std::filesystem::path& path, std::size_t line);

}  // namespace gma::csv
