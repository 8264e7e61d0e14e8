#include "dagprl/csv.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dagprl {

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("failed to format double");
  return std::string(buf.data(), end);
}

std::string format_fixed2(double v) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.2f", v);
  return std::string(buf.data());
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

namespace {

double parse_double(const std::string& field, std::size_t line) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError("not a number: '" + field + "'", line);
  return v;
}

}  // namespace

std::string dataset_to_csv(const TransitionDataset& data) {
  std::string out = "x,y,ax,ay,xn,yn\n";
  for (const auto& t : data.records) {
    out += format_double(t.state.x) + ',' + format_double(t.state.y) + ',' +
           format_double(t.action.ax) + ',' + format_double(t.action.ay) + ',' +
           format_double(t.next_state.x) + ',' + format_double(t.next_state.y) + '\n';
  }
  return out;
}

TransitionDataset dataset_from_csv(std::string_view text) {
  TransitionDataset data;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
    pos = nl == text.npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != "x,y,ax,ay,xn,yn") throw ParseError("expected header x,y,ax,ay,xn,yn", line_no);
      saw_header = true;
      continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != 6) throw ParseError("expected 6 fields, got " + std::to_string(fields.size()), line_no);
    Transition t;
    t.state = {parse_double(fields[0], line_no), parse_double(fields[1], line_no)};
    t.action = {parse_double(fields[2], line_no), parse_double(fields[3], line_no)};
    t.next_state = {parse_double(fields[4], line_no), parse_double(fields[5], line_no)};
    if (!is_valid(t.state) || !is_valid(t.next_state) || !is_valid(t.action)) {
      throw ParseError("transition outside the valid state/action box", line_no);
    }
    data.records.push_back(t);
  }
  if (!saw_header) throw ParseError("empty dataset file", line_no == 0 ? 1 : line_no);
  if (data.records.empty()) throw ParseError("dataset has no records", line_no);
  return data;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw IoError("failed writing: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dagprl
