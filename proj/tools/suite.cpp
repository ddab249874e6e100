#include <algorithm>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>

#include "cli.hpp"
#include "lmforge/corpus.hpp"
#include "lmforge/digest.hpp"
#include "lmforge/errors.hpp"
#include "lmforge/parallel.hpp"

namespace lmforge::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Job {
  std::string name;
  training::TrainConfig cfg;
  json report;
  evalgen::SampleReport samples;
};

corpus::BuildConfig suite_corpus(const std::string& preset, std::uint64_t seed) {
  corpus::BuildConfig bc;
  if (preset == "desk") {
    bc.vocab_size = 2000;
    bc.train_n = 2000;
    bc.dev_n = 200;
    bc.test_n = 200;
  } else if (preset != "full") {
    throw UsageError("unknown preset '" + preset + "' (allowed: desk, full)");
  }
  bc.seed = seed;
  return bc;
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string markdown(const json& r) {
  std::ostringstream md;
  md << "# lmforge suite report\n\n";
  md << "preset `" << r["preset"].get<std::string>() << "`, seed " << r["seed"].get<std::uint64_t>()
     << ", vocabulary " << r["corpus"]["vocab_size"].get<std::size_t>() << ", train sentences "
     << r["corpus"]["train_sentences"].get<std::size_t>() << "\n\n";
  md << "## Perplexity and loss\n\n";
  md << "| model | test perplexity | best epoch | final KL | first recon | final recon | recon ratio |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const auto& row : r["perplexity_table"]) {
    md << "| " << row["model"].get<std::string>() << " | " << fixed(row["test_perplexity"].get<double>(), 2)
       << " | " << row["best_epoch"].get<std::size_t>() << " | "
       << (row["final_kl"].is_null() ? "-" : fixed(row["final_kl"].get<double>())) << " | "
       << fixed(row["first_recon"].get<double>()) << " | " << fixed(row["final_recon"].get<double>()) << " | "
       << fixed(row["recon_ratio"].get<double>()) << " |\n";
  }
  md << "\nVAE schedules by test perplexity: ";
  bool first = true;
  for (const auto& name : r["checks"]["vae_perplexity_order"]) {
    md << (first ? "" : " < ") << name.get<std::string>();
    first = false;
  }
  md << "\n\nzero schedule lowest among VAEs: " << (r["checks"]["zero_lowest_among_vaes"].get<bool>() ? "yes" : "no")
     << "\n\nRNNLM below uniform baseline: " << (r["checks"]["rnnlm_below_vocab"].get<bool>() ? "yes" : "no")
     << "\n\n";
  md << "## Samples\n\n";
  md << "| model | samples | unique | unique not in train | mean length | stddev length | unique words |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const auto& row : r["sample_table"]) {
    md << "| " << row["model"].get<std::string>() << " | " << row["n_requested"].get<std::size_t>() << " | "
       << row["n_unique"].get<std::size_t>() << " | " << row["n_unique_not_in_train"].get<std::size_t>() << " | "
       << fixed(row["mean_tokens"].get<double>(), 2) << " | " << fixed(row["stddev_tokens"].get<double>(), 2)
       << " | " << row["unique_words"].get<std::size_t>() << " |\n";
  }
  md << "\n## Files\n\n| run | file | sha256 |\n|---|---|---|\n";
  for (const auto& [run, files] : r["digests"].items())
    for (const auto& [file, digest] : files.items())
      md << "| " << run << " | " << file << " | `" << digest.get<std::string>() << "` |\n";
  return md.str();
}

}  // namespace

json run_suite(const SuiteOptions& opts, std::ostream& log) {
  const corpus::BuildConfig bc = suite_corpus(opts.preset, opts.seed);
  const std::size_t n_samples = opts.samples ? opts.samples : (opts.preset == "desk" ? 1000 : 10000);
  fs::create_directories(opts.out);

  fs::path corpus_dir = opts.corpus;
  if (corpus_dir.empty()) {
    corpus_dir = opts.out / "corpus";
    Manifest m("build-corpus");
    m.add_input(opts.input);
    m.set("config", {{"vocab_size", bc.vocab_size}, {"train", bc.train_n}, {"dev", bc.dev_n},
                     {"test", bc.test_n}, {"seed", bc.seed}});
    m.set("seeds", {{"split", bc.seed}});
    corpus::build_corpus(opts.input, corpus_dir, bc);
    m.write(corpus_dir);
    log << "suite: corpus built in " << corpus_dir.string() << '\n';
  }
  const training::CorpusData data = training::load_corpus(corpus_dir);

  training::TrainConfig base = training::preset_config(opts.preset);
  base.seeds = {opts.seed, derive_seed(opts.seed, 1), derive_seed(opts.seed, 2)};

  std::vector<Job> jobs;
  for (ScheduleKind s : {ScheduleKind::zero, ScheduleKind::constant, ScheduleKind::linear, ScheduleKind::cyclical}) {
    Job j{"vae-" + std::string(to_string(s)), base, {}, {}};
    j.cfg.model = training::ModelKind::vae;
    j.cfg.schedule = s;
    jobs.push_back(j);
  }
  jobs.push_back({"rnnlm", base, {}, {}});
  jobs.back().cfg.model = training::ModelKind::rnnlm;
  jobs.push_back({"seqgan", base, {}, {}});
  jobs.back().cfg.model = training::ModelKind::seqgan;

  std::mutex log_mutex;
  const std::uint64_t sample_seed = derive_seed(opts.seed, 3);
  parallel_for(jobs.size(), [&](std::size_t i) {
    Job& j = jobs[i];
    const fs::path dir = opts.out / "runs" / j.name;
    Manifest m("train");
    m.add_input(corpus_dir);
    m.set("config", training::config_to_json(j.cfg));
    m.set("seeds", {{"params", j.cfg.seeds.params}, {"data_order", j.cfg.seeds.data_order},
                    {"noise", j.cfg.seeds.noise}, {"sampling", sample_seed}});
    m.set("corpus", fs::absolute(corpus_dir).lexically_normal().generic_string());
    const auto r = train_into(data, j.cfg, dir);
    j.report = r.report;
    const auto bundle = training::bundle_from_checkpoint(r.best);
    j.samples = generate_into(bundle, data, n_samples, evalgen::GenMode::ancestral, sample_seed, j.cfg.max_len, dir);
    m.write(dir);
    std::lock_guard lock(log_mutex);
    log << "suite: " << j.name << " test perplexity " << r.report["test_perplexity"].get<double>() << '\n';
  });

  json report = {{"schema", "lmforge.suite_report"}, {"schema_version", 1}, {"preset", opts.preset},
                 {"seed", opts.seed},   {"samples_per_model", n_samples}};
  report["corpus"] = {{"vocab_size", data.vocab.size()},
                      {"vocab_digest", data.vocab_digest},
                      {"train_sentences", data.train.size()},
                      {"dev_sentences", data.dev.size()},
                      {"test_sentences", data.test.size()}};

  json ppl = json::array(), samples = json::array(), digests = json::object();
  std::vector<std::pair<double, std::string>> vae_order;
  double rnnlm_ppl = 0.0;
  for (const Job& j : jobs) {
    const json& epochs = j.report["epochs"];
    json row = {{"model", j.name}, {"test_perplexity", j.report["test_perplexity"]},
                {"best_epoch", j.report["best"]["epoch"]}, {"final_kl", nullptr}};
    if (j.cfg.model == training::ModelKind::vae) row["final_kl"] = j.report["final_kl"];
    // seqGAN: recon columns come from MLE pretraining.
    const json& mle = j.cfg.model == training::ModelKind::seqgan ? j.report["g_pretrain"]["epochs"] : epochs;
    if (mle.is_array() && !mle.empty()) {
      const double a = mle.front()["recon"].get<double>(), b = mle.back()["recon"].get<double>();
      row["first_recon"] = a;
      row["final_recon"] = b;
      row["recon_ratio"] = b / a;
    } else {
      row["first_recon"] = 0.0;
      row["final_recon"] = 0.0;
      row["recon_ratio"] = 0.0;
    }
    ppl.push_back(row);
    if (j.cfg.model == training::ModelKind::vae)
      vae_order.emplace_back(j.report["test_perplexity"].get<double>(), j.name);
    if (j.cfg.model == training::ModelKind::rnnlm) rnnlm_ppl = j.report["test_perplexity"].get<double>();

    json srow = evalgen::to_json(j.samples);
    srow.erase("lengths");
    srow["model"] = j.name;
    samples.push_back(srow);

    const fs::path dir = opts.out / "runs" / j.name;
    json files = json::object();
    for (const char* f : {"report.json", "best.ckpt", "final.ckpt", "samples.txt", "samples_report.json"})
      files[f] = sha256_file(dir / f);
    digests[j.name] = files;
  }
  std::stable_sort(vae_order.begin(), vae_order.end());
  json order = json::array();
  for (const auto& [p, name] : vae_order) order.push_back(name);
  report["perplexity_table"] = ppl;
  report["sample_table"] = samples;
  report["checks"] = {{"vae_perplexity_order", order},
                      {"zero_lowest_among_vaes", vae_order.front().second == "vae-zero"},
                      {"rnnlm_below_vocab", rnnlm_ppl < static_cast<double>(data.vocab.size())}};
  report["digests"] = digests;

  write_json(opts.out / "report.json", report);
  std::ofstream(opts.out / "report.md", std::ios::binary) << markdown(report);
  std::ofstream(opts.out / "report.sha256", std::ios::binary)
      << sha256_file(opts.out / "report.json") << "  report.json\n";
  return report;
}

}  // namespace lmforge::cli
