#pragma once

// The lmforge command-line tool. run() never throws: every failure becomes a
// one-line "error[<kind>]: <message>" on `err` and an exit code
//   0 success, 1 usage, 2 data/contract, 3 numerical abort.

#include <chrono>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lmforge/evalgen.hpp"
#include "lmforge/training.hpp"

namespace lmforge::cli {

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// One per output directory: resolved options, input and output digests,
// timestamps.
class Manifest {
 public:
  explicit Manifest(std::string subcommand);
  void set(const std::string& key, nlohmann::json value);
  // Files are digested directly; directories contribute every regular file.
  void add_input(const std::filesystem::path& path);
  // Digests every file under out_dir except manifest.json itself.
  void write(const std::filesystem::path& out_dir) const;

 private:
  std::string subcommand_;
  nlohmann::json fields_ = nlohmann::json::object();
  std::map<std::string, std::string> inputs_;
  std::chrono::system_clock::time_point started_;
};

std::map<std::string, std::string> digest_tree(const std::filesystem::path& dir, bool skip_top_manifest);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

// Writes best.ckpt, final.ckpt and report.json into out_dir.
training::TrainResult train_into(const training::CorpusData& data, const training::TrainConfig& cfg,
                                 const std::filesystem::path& out_dir);

// Writes samples.txt and samples_report.json; the report is computed from
// the written lines against the corpus train split.
evalgen::SampleReport generate_into(const training::ModelBundle& model, const training::CorpusData& data,
                                    std::size_t n, evalgen::GenMode mode, std::uint64_t seed, std::size_t max_len,
                                    const std::filesystem::path& out_dir);

struct SuiteOptions {
  std::string preset = "desk";
  std::uint64_t seed = 0;
  std::filesystem::path input;   // raw dump; used when corpus is empty
  std::filesystem::path corpus;  // prebuilt corpus directory
  std::filesystem::path out;
  std::size_t samples = 0;  // 0 = preset default
};

// Returns the combined report; writes report.json, report.md and
// report.sha256 under opts.out.
nlohmann::json run_suite(const SuiteOptions& opts, std::ostream& log);

}  // namespace lmforge::cli
