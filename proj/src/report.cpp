#include "annotaudit/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <openssl/evp.h>

#include "annotaudit/csv.hpp"
#include "annotaudit/error.hpp"

#ifndef ANNOTAUDIT_VERSION
#define ANNOTAUDIT_VERSION "0.0.0"
#endif

namespace annotaudit::report {

std::string_view version() { return ANNOTAUDIT_VERSION; }

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "SHA-256 computation failed");
  }
  std::string hex;
  hex.reserve(length * 2);
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string sha256_file(const std::string& path) { return sha256_hex(csv::read_text(path)); }

void Provenance::add_input(const std::string& role, const std::string& path) {
  inputs[role] = std::filesystem::path(path).filename().string() + " sha256:" + sha256_file(path);
}

std::vector<std::string> Provenance::comment_lines() const {
  std::vector<std::string> lines;
  lines.push_back("annotaudit " + version + (command.empty() ? "" : " " + command));
  lines.push_back("seed: " + std::to_string(seed));
  for (const auto& [role, digest] : inputs) lines.push_back("input " + role + ": " + digest);
  for (const auto& [key, value] : settings) lines.push_back(key + ": " + value);
  return lines;
}

nlohmann::json Provenance::to_json() const {
  nlohmann::json j;
  j["version"] = version;
  j["seed"] = seed;
  if (!command.empty()) j["command"] = command;
  j["inputs"] = inputs;
  j["settings"] = settings;
  return j;
}

void write_text(const std::string& path, std::string_view text) {
  namespace fs = std::filesystem;
  fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create directory for " + path + ": " + ec.message());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

void write_json(const std::string& path, const nlohmann::json& value) { write_text(path, value.dump(2) + "\n"); }

}  // namespace annotaudit::report
