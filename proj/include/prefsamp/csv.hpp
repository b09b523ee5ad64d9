#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prefsamp {

/// Parsed comma-separated file. Quoting is not supported: every file this
/// project reads or writes is plain numeric/identifier data.
struct CsvTable {
  std::filesystem::path source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based line of each row

  std::optional<std::size_t> find_column(std::string_view name) const;
  std::size_t require_column(std::string_view name) const;

  double number(std::size_t row, std::size_t column) const;
  std::int64_t integer(std::size_t row, std::size_t column) const;
  const std::string& text(std::size_t row, std::size_t column) const { return rows[row][column]; }
  /// "<file>: line L, column 'c'" for error messages.
  std::string where(std::size_t row, std::size_t column) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view content, const std::filesystem::path& source = "<memory>");

/// Shortest round-trip decimal representation.
std::string format_double(double value);

/// Incrementally builds CSV text.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header);

  CsvWriter& field(std::string_view text);
  CsvWriter& field(double value);
  CsvWriter& field(std::int64_t value);
  CsvWriter& field(int value) { return field(static_cast<std::int64_t>(value)); }
  CsvWriter& end_row();

  const std::string& str() const { return buffer_; }

 private:
  void separator();
  std::string buffer_;
  bool row_open_ = false;
};

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// "key = value" lines; '#' starts a comment; [section] headers are kept as
/// "section.key".
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);
std::string format_key_values(const std::map<std::string, std::string>& values);

/// 64-bit FNV-1a of the bytes.
std::uint64_t fingerprint(std::string_view bytes);

}  // namespace prefsamp
