#include "prefsamp/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "prefsamp/errors.hpp"

namespace prefsamp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return c;
  return std::nullopt;
}

std::size_t CsvTable::require_column(std::string_view name) const {
  if (auto c = find_column(name)) return *c;
  throw ValidationError(source.string() + ": missing required column '" + std::string(name) + "'");
}

std::string CsvTable::where(std::size_t row, std::size_t column) const {
  std::ostringstream os;
  os << source.string() << ": line " << line_numbers[row] << ", column '" << header[column] << "'";
  return os.str();
}

double CsvTable::number(std::size_t row, std::size_t column) const {
  const std::string& s = rows[row][column];
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ValidationError(where(row, column) + ": '" + s + "' is not a finite number");
  return v;
}

std::int64_t CsvTable::integer(std::size_t row, std::size_t column) const {
  const std::string& s = rows[row][column];
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationError(where(row, column) + ": '" + s + "' is not an integer");
  return v;
}

CsvTable parse_csv(std::string_view content, const std::filesystem::path& source) {
  CsvTable table;
  table.source = source;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= content.size()) {
    const std::size_t nl = content.find('\n', pos);
    const std::string_view line = content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      std::ostringstream os;
      os << source.string() << ": line " << line_no << " has " << fields.size() << " fields, expected "
         << table.header.size();
      throw ValidationError(os.str());
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw ValidationError(source.string() + ": empty file (no header)");
  return table;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path), path); }

std::string format_double(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw IoError("format_double: conversion failed");
  return std::string(buf, ptr);
}

CsvWriter::CsvWriter(const std::vector<std::string>& header) {
  for (const auto& h : header) field(h);
  end_row();
}

void CsvWriter::separator() {
  if (row_open_) buffer_.push_back(',');
  row_open_ = true;
}

CsvWriter& CsvWriter::field(std::string_view text) {
  separator();
  buffer_.append(text);
  return *this;
}

CsvWriter& CsvWriter::field(double value) { return field(std::string_view(format_double(value))); }

CsvWriter& CsvWriter::field(std::int64_t value) {
  separator();
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  buffer_.append(buf, ptr);
  return *this;
}

CsvWriter& CsvWriter::end_row() {
  buffer_.push_back('\n');
  row_open_ = false;
  return *this;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  std::map<std::string, std::string> out;
  std::istringstream in(content);
  std::string line;
  std::string section;
  while (std::getline(in, line)) {
    std::string_view v = trim(line);
    if (v.empty() || v.front() == '#' || v.front() == ';') continue;
    if (v.front() == '[' && v.back() == ']') {
      section = std::string(trim(v.substr(1, v.size() - 2)));
      continue;
    }
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) throw ValidationError(path.string() + ": expected 'key = value', got '" + line + "'");
    std::string key(trim(v.substr(0, eq)));
    if (!section.empty()) key = section + "." + key;
    std::string value(trim(v.substr(eq + 1)));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out[key] = value;
  }
  return out;
}

std::string format_key_values(const std::map<std::string, std::string>& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t fingerprint(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace prefsamp
