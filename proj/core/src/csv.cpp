#include "csv.hpp"

#include <fstream>

namespace gma::csv {

std::vector<std::string> split(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string context(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

Table read(const std::filesystem::path& path, const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split(line);
    if (!have_header) {
      if (fields != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw ParseError(context(path, line_no) + ": expected header '" + want + "'");
      }
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != expected_header.size()) {
      throw ParseError(context(path, line_no) + ": expected " +
                       std::to_string(expected_header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    table.rows.push_back(Row{line_no, std::move(fields)});
  }
  if (!have_header) throw ParseError(path.string() + ": missing header");
  return table;
}

double parse_double(std::string_view text, const std::filesystem::path& path, std::size_t line) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(context(path, line) + ": not a number: '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int(std::string_view text, const std::filesystem::path& path, std::size_t line) {
  long long value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(context(path, line) + ": not an integer: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace gma::csv
