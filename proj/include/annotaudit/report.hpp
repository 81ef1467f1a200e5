#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace annotaudit::report {

/// Toolkit version baked in at build time.
std::string_view version();

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
/// Throws Io when the file cannot be read.
std::string sha256_file(const std::string& path);

/// Version, seed and input digests stamped on every artifact.
struct Provenance {
  std::string version{report::version()};
  std::uint64_t seed = 0;
  std::string command;
  std::map<std::string, std::string> inputs;  // role -> "path sha256:<hex>"
  std::map<std::string, std::string> settings;

  void add_input(const std::string& role, const std::string& path);
  /// '#'-free lines for CSV comment headers.
  std::vector<std::string> comment_lines() const;
  nlohmann::json to_json() const;
};

/// Writes `text` to `path`, creating parent directories. Throws Io.
void write_text(const std::string& path, std::string_view text);
/// Two-space indented JSON plus trailing newline.
void write_json(const std::string& path, const nlohmann::json& value);

}  // namespace annotaudit::report
