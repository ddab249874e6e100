#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cli.hpp"
#include "lmforge/digest.hpp"
#include "lmforge/errors.hpp"

namespace lmforge::cli {

namespace {

std::string iso_utc(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

}  // namespace

Manifest::Manifest(std::string subcommand)
    : subcommand_(std::move(subcommand)), started_(std::chrono::system_clock::now()) {}

void Manifest::set(const std::string& key, nlohmann::json value) { fields_[key] = std::move(value); }

void Manifest::add_input(const std::filesystem::path& path) {
  const auto abs = std::filesystem::absolute(path).lexically_normal();
  if (std::filesystem::is_directory(abs)) {
    for (const auto& [rel, digest] : digest_tree(abs, false)) inputs_[(abs / rel).generic_string()] = digest;
  } else {
    inputs_[abs.generic_string()] = sha256_file(abs);
  }
}

std::map<std::string, std::string> digest_tree(const std::filesystem::path& dir, bool skip_top_manifest) {
  std::map<std::string, std::string> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = std::filesystem::relative(entry.path(), dir).generic_string();
    if (skip_top_manifest && rel == "manifest.json") continue;
    out[rel] = sha256_file(entry.path());
  }
  return out;
}

void Manifest::write(const std::filesystem::path& out_dir) const {
  const auto finished = std::chrono::system_clock::now();
  nlohmann::json m = fields_;
  m["tool"] = "lmforge";
  m["tool_version"] = LMFORGE_VERSION;
  m["subcommand"] = subcommand_;
  m["inputs"] = inputs_;
  m["outputs"] = digest_tree(out_dir, true);
  m["started_at"] = iso_utc(started_);
  m["finished_at"] = iso_utc(finished);
  m["wall_clock_seconds"] = std::chrono::duration<double>(finished - started_).count();
  write_json(out_dir / "manifest.json", m);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace lmforge::cli
