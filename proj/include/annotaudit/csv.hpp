#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace annotaudit::csv {

/// A parsed delimited-text table. Lines starting with '#' before or between
/// records are metadata and are kept separately from the data rows.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
  std::vector<std::string> comments;

  std::optional<std::size_t> column(std::string_view name) const;
};

/// Streams records without materializing the table. The first non-comment
/// record is passed with `is_header` set.
void for_each_record(std::string_view text, char delimiter,
                     const std::function<void(std::vector<std::string>& fields, std::size_t line, bool is_header)>& visit,
                     std::vector<std::string>* comments = nullptr);

Table parse(std::string_view text, char delimiter = ',');
Table read_file(const std::string& path, char delimiter = ',');
std::string read_text(const std::string& path);

std::string escape(std::string_view field, char delimiter = ',');

class Writer {
 public:
  explicit Writer(std::ostream& out, char delimiter = ',') : out_(out), delimiter_(delimiter) {}

  void comment(std::string_view line);
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
  char delimiter_;
};

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace annotaudit::csv
