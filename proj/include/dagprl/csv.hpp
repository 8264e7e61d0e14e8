#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dagprl/env.hpp"

namespace dagprl {

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line(line) {}
  std::size_t line;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

/// Fixed two-decimal rendering used by the report tables.
std::string format_fixed2(double v);

std::vector<std::string> split_csv_line(std::string_view line);

/// Header `x,y,ax,ay,xn,yn`.
std::string dataset_to_csv(const TransitionDataset& data);
TransitionDataset dataset_from_csv(std::string_view text);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace dagprl
