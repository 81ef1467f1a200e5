#include "annotaudit/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "annotaudit/error.hpp"

namespace annotaudit::csv {

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

namespace {

// Splits one logical record starting at `pos`; quoted fields may span lines.
std::vector<std::string> next_record(std::string_view text, std::size_t& pos, std::size_t& line,
                                     char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      if (c == '\n') ++line;
      field.push_back(c);
      ++pos;
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      ++pos;
    } else if (c == delimiter) {
      fields.push_back(std::move(field));
      field.clear();
      ++pos;
    } else if (c == '\r') {
      ++pos;
    } else if (c == '\n') {
      ++pos;
      ++line;
      break;
    } else {
      field.push_back(c);
      ++pos;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace

void for_each_record(std::string_view text, char delimiter,
                     const std::function<void(std::vector<std::string>&, std::size_t, bool)>& visit,
                     std::vector<std::string>* comments) {
  std::size_t pos = 0;
  std::size_t line = 1;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t start_line = line;
    if (text[pos] == '#') {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view body = text.substr(pos + 1, end - pos - 1);
      if (!body.empty() && body.back() == '\r') body.remove_suffix(1);
      if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      if (comments) comments->emplace_back(body);
      pos = end + 1;
      ++line;
      continue;
    }
    if (text[pos] == '\n' || (text[pos] == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n')) {
      pos = text.find('\n', pos) + 1;
      ++line;
      continue;
    }
    auto fields = next_record(text, pos, line, delimiter);
    visit(fields, start_line, !have_header);
    have_header = true;
  }
}

Table parse(std::string_view text, char delimiter) {
  Table table;
  for_each_record(
      text, delimiter,
      [&](std::vector<std::string>& fields, std::size_t line, bool is_header) {
        if (is_header) {
          table.header = std::move(fields);
        } else {
          table.rows.push_back(std::move(fields));
          table.line_numbers.push_back(line);
        }
      },
      &table.comments);
  return table;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Table read_file(const std::string& path, char delimiter) { return parse(read_text(path), delimiter); }

std::string escape(std::string_view field, char delimiter) {
  bool needs_quotes = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void Writer::comment(std::string_view line) { out_ << "# " << line << '\n'; }

void Writer::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out_ << delimiter_;
    out_ << escape(fields[i], delimiter_);
  }
  out_ << '\n';
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  char buffer[64];
  auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

}  // namespace annotaudit::csv
