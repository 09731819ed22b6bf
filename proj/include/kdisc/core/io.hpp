#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kdisc {

/// Shortest decimal text that round-trips to the same double. NaN -> "".
std::string format_double(double v);

/// Parses a CSV cell; empty or "nan" yields NaN.
double parse_double(std::string_view cell);

std::string read_text(const std::filesystem::path& path);

/// Writes atomically enough for our purposes: to a temp file, then renamed.
void write_text(const std::filesystem::path& path, std::string_view text);

/// Splits one CSV line. Quoted cells with embedded commas are supported.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a CSV cell when it contains a separator, quote or newline.
std::string csv_escape(std::string_view cell);

/// Hex SHA-256 of a byte string / file.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Minimal in-memory CSV table builder. Rows are emitted in insertion order.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& row(const std::vector<std::string>& cells);
  std::string str() const { return text_; }
  void save(const std::filesystem::path& path) const { write_text(path, text_); }

 private:
  std::size_t width_;
  std::string text_;
};

/// Loads a CSV file into header + rows of cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace kdisc
