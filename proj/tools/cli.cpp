#include "cli.hpp"

#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "lmforge/corpus.hpp"
#include "lmforge/digest.hpp"
#include "lmforge/errors.hpp"

namespace lmforge::cli {

using nlohmann::json;
namespace fs = std::filesystem;

training::TrainResult train_into(const training::CorpusData& data, const training::TrainConfig& cfg,
                                 const fs::path& out_dir) {
  fs::create_directories(out_dir);
  training::TrainResult r = training::train_model(data, cfg);
  training::save_checkpoint(out_dir / "best.ckpt", r.best);
  training::save_checkpoint(out_dir / "final.ckpt", r.final);
  write_json(out_dir / "report.json", r.report);
  return r;
}

evalgen::SampleReport generate_into(const training::ModelBundle& model, const training::CorpusData& data,
                                    std::size_t n, evalgen::GenMode mode, std::uint64_t seed, std::size_t max_len,
                                    const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto samples = evalgen::generate_samples(model, n, mode, seed, max_len);
  std::vector<std::vector<std::string>> lines, train;
  {
    std::ofstream out(out_dir / "samples.txt", std::ios::binary);
    if (!out) throw DataError("cannot write " + (out_dir / "samples.txt").string());
    for (const auto& s : samples) {
      const std::string text = evalgen::detokenize(s, data.vocab);
      out << text << '\n';
      lines.push_back(corpus::tokenize(text));
    }
  }
  for (const auto& s : data.train) train.push_back(corpus::tokenize(evalgen::detokenize(s, data.vocab)));
  const evalgen::SampleReport report = evalgen::sample_stats(lines, train);
  json doc = evalgen::to_json(report);
  doc["mode"] = mode == evalgen::GenMode::greedy ? "greedy" : "ancestral";
  doc["seed"] = seed;
  write_json(out_dir / "samples_report.json", doc);
  return report;
}

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
      return 1;
    case ErrorKind::numerical:
      return 3;
    default:
      return 2;
  }
}

// Corpus directory of a checkpoint: explicit flag, else the training manifest
// next to the checkpoint file.
fs::path resolve_corpus(const fs::path& ckpt, const std::string& flag) {
  if (!flag.empty()) return flag;
  const fs::path manifest = fs::absolute(ckpt).parent_path() / "manifest.json";
  if (fs::exists(manifest)) {
    const json m = read_json(manifest);
    if (m.contains("corpus") && m["corpus"].is_string()) return m["corpus"].get<std::string>();
  }
  throw UsageError("cannot locate the corpus for " + ckpt.string() + "; pass --corpus <dir>");
}

struct LoadedModel {
  training::Checkpoint ckpt;
  training::ModelBundle bundle;
  training::CorpusData data;
  fs::path corpus_dir;
};

LoadedModel load_model(const fs::path& ckpt_path, const std::string& corpus_flag) {
  LoadedModel m;
  m.ckpt = training::load_checkpoint(ckpt_path);
  m.bundle = training::bundle_from_checkpoint(m.ckpt);
  m.corpus_dir = resolve_corpus(ckpt_path, corpus_flag);
  m.data = training::load_corpus(m.corpus_dir);
  if (m.data.vocab_digest != m.ckpt.vocab_digest || m.data.vocab.size() != m.ckpt.vocab_size)
    throw ContractError("vocabulary of " + m.corpus_dir.string() + " does not match checkpoint " +
                        ckpt_path.string());
  return m;
}

const std::vector<std::vector<TokenId>>& split_of(const training::CorpusData& d, const std::string& split) {
  if (split == "train") return d.train;
  if (split == "dev" || split == "valid") return d.dev;
  if (split == "test") return d.test;
  throw UsageError("unknown split '" + split + "' (allowed: train, dev, test)");
}

std::string histogram_svg(const corpus::CorpusStats& stats) {
  constexpr double kW = 640, kH = 320, kPad = 30;
  std::size_t max_len = 1, max_count = 1;
  for (auto [len, count] : stats.length_histogram) {
    max_len = std::max(max_len, len);
    max_count = std::max(max_count, count);
  }
  const double bw = (kW - 2 * kPad) / static_cast<double>(max_len + 1);
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (auto [len, count] : stats.length_histogram) {
    const double h = (kH - 2 * kPad) * static_cast<double>(count) / static_cast<double>(max_count);
    s << "<rect x=\"" << kPad + bw * static_cast<double>(len) << "\" y=\"" << kH - kPad - h << "\" width=\""
      << bw * 0.9 << "\" height=\"" << h << "\" fill=\"#1f5fa8\"><title>" << len << ": " << count
      << "</title></rect>\n";
  }
  s << "<text x=\"" << kPad << "\" y=\"" << kH - 8 << "\" font-size=\"12\">sentence length (tokens), max "
    << max_len << "</text>\n</svg>\n";
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lmforge: corpus construction, RNNLM / VAE / seqGAN training and evaluation"};
  app.name("lmforge");
  app.require_subcommand(1);
  app.set_version_flag("--version", LMFORGE_VERSION);

  // build-corpus
  corpus::BuildConfig bc;
  std::string bc_input, bc_out;
  auto* build = app.add_subcommand("build-corpus", "Normalize, split, filter and sample a raw news dump");
  build->add_option("--input", bc_input, "Raw dump, one document per line")->required();
  build->add_option("--out", bc_out, "Output directory")->required();
  build->add_option("--vocab-size", bc.vocab_size, "Vocabulary cap (non-special tokens)")->capture_default_str();
  build->add_option("--train", bc.train_n, "Train sentences")->capture_default_str();
  build->add_option("--dev", bc.dev_n, "Dev sentences")->capture_default_str();
  build->add_option("--test", bc.test_n, "Test sentences")->capture_default_str();
  build->add_option("--seed", bc.seed, "Split sampling seed")->capture_default_str();

  // stats
  std::string st_corpus, st_out, st_samples, st_train;
  auto* stats = app.add_subcommand("stats", "Corpus split statistics, or sample statistics with --samples");
  stats->add_option("--corpus", st_corpus, "Corpus directory");
  stats->add_option("--samples", st_samples, "Sample file, one sentence per line");
  stats->add_option("--train", st_train, "Train split file for --samples");
  stats->add_option("--out", st_out, "Also write JSON and a length histogram here");

  // train
  std::string tr_model, tr_schedule, tr_corpus, tr_out, tr_config, tr_preset;
  std::optional<std::uint64_t> tr_seed;
  auto* train = app.add_subcommand("train", "Train a model on a corpus directory");
  train->add_option("--model", tr_model, "rnnlm | vae | seqgan");
  train->add_option("--schedule", tr_schedule, "zero | constant | linear | cyclical");
  train->add_option("--corpus", tr_corpus, "Corpus directory")->required();
  train->add_option("--out", tr_out, "Output directory")->required();
  train->add_option("--config", tr_config, "JSON config file");
  train->add_option("--preset", tr_preset, "desk | full base configuration");
  train->add_option("--seed", tr_seed, "Sets all three training seeds");

  // evaluate
  std::string ev_ckpt, ev_split = "test", ev_corpus, ev_mode, ev_out;
  auto* evaluate = app.add_subcommand("evaluate", "Perplexity of a checkpoint on a split");
  evaluate->add_option("--ckpt", ev_ckpt, "Checkpoint file")->required();
  evaluate->add_option("--split", ev_split, "train | dev | test")->capture_default_str();
  evaluate->add_option("--corpus", ev_corpus, "Corpus directory (default: from the training manifest)");
  evaluate->add_option("--vae-eval", ev_mode, "mean | sample | iw (default: from the checkpoint config)");
  evaluate->add_option("--out", ev_out, "Also write evaluation.json here");

  // generate
  std::string gen_ckpt, gen_mode = "ancestral", gen_out, gen_corpus;
  std::size_t gen_n = 10000, gen_max_len = 0;
  std::uint64_t gen_seed = 0;
  auto* generate = app.add_subcommand("generate", "Sample sentences and report their statistics");
  generate->add_option("--ckpt", gen_ckpt, "Checkpoint file")->required();
  generate->add_option("--n", gen_n, "Number of samples")->capture_default_str();
  generate->add_option("--mode", gen_mode, "ancestral | greedy")->capture_default_str();
  generate->add_option("--seed", gen_seed, "Sampling seed")->capture_default_str();
  generate->add_option("--max-len", gen_max_len, "Token limit per sample (default: model max_len)");
  generate->add_option("--corpus", gen_corpus, "Corpus directory (default: from the training manifest)");
  generate->add_option("--out", gen_out, "Output directory")->required();

  // interpolate
  std::string ip_ckpt, ip_out, ip_corpus;
  std::size_t ip_k = 10;
  std::uint64_t ip_seed = 0;
  auto* interp = app.add_subcommand("interpolate", "Greedy decodes along a line between two latent points");
  interp->add_option("--ckpt", ip_ckpt, "VAE checkpoint")->required();
  interp->add_option("--k", ip_k, "Number of points, endpoints included")->capture_default_str();
  interp->add_option("--seed", ip_seed, "Seed for the two endpoints")->capture_default_str();
  interp->add_option("--corpus", ip_corpus, "Corpus directory (default: from the training manifest)");
  interp->add_option("--out", ip_out, "Also write interpolation.txt here");

  // project
  std::string pj_ckpt, pj_split = "dev", pj_method = "pca", pj_out, pj_corpus;
  evalgen::ProjectionConfig pj_cfg;
  std::size_t pj_limit = 0;
  auto* project = app.add_subcommand("project", "2-D projection of posterior means of a split");
  project->add_option("--ckpt", pj_ckpt, "VAE checkpoint")->required();
  project->add_option("--split", pj_split, "train | dev | test")->capture_default_str();
  project->add_option("--method", pj_method, "pca | tsne")->capture_default_str();
  project->add_option("--perplexity", pj_cfg.perplexity, "t-SNE perplexity")->capture_default_str();
  project->add_option("--iterations", pj_cfg.iterations, "t-SNE iterations")->capture_default_str();
  project->add_option("--learning-rate", pj_cfg.learning_rate, "t-SNE learning rate")->capture_default_str();
  project->add_option("--seed", pj_cfg.seed, "t-SNE initialisation seed")->capture_default_str();
  project->add_option("--limit", pj_limit, "Use only the first N sentences (0 = all)")->capture_default_str();
  project->add_option("--corpus", pj_corpus, "Corpus directory (default: from the training manifest)");
  project->add_option("--out", pj_out, "Output directory")->required();

  // export-for-annotation
  std::string an_samples, an_out;
  std::size_t an_n = 100;
  auto* annotate = app.add_subcommand("export-for-annotation", "Numbered sentence list for a human rater");
  annotate->add_option("--samples", an_samples, "Sample file")->required();
  annotate->add_option("--n", an_n, "Number of sentences")->capture_default_str();
  annotate->add_option("--out", an_out, "Output directory")->required();

  // run-suite
  SuiteOptions suite;
  std::string su_input, su_corpus, su_out;
  auto* run_suite_cmd = app.add_subcommand("run-suite", "Four VAE schedules, RNNLM and seqGAN with a combined report");
  run_suite_cmd->add_option("--preset", suite.preset, "desk | full")->capture_default_str();
  run_suite_cmd->add_option("--seed", suite.seed, "Seed for corpus sampling, training and generation")
      ->capture_default_str();
  run_suite_cmd->add_option("--input", su_input, "Raw dump to build the corpus from");
  run_suite_cmd->add_option("--corpus", su_corpus, "Prebuilt corpus directory");
  run_suite_cmd->add_option("--samples", suite.samples, "Samples per model (default: preset)");
  run_suite_cmd->add_option("--out", su_out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error[usage]: " << msg << '\n';
    return 1;
  }

  try {
    if (build->parsed()) {
      Manifest m("build-corpus");
      m.add_input(bc_input);
      m.set("config", {{"vocab_size", bc.vocab_size}, {"train", bc.train_n}, {"dev", bc.dev_n},
                       {"test", bc.test_n}, {"seed", bc.seed}});
      m.set("seeds", {{"split", bc.seed}});
      const auto report = corpus::build_corpus(bc_input, bc_out, bc);
      m.write(bc_out);
      out << json{{"documents", report.documents}, {"sentences", report.sentences},
                  {"accepted", report.accepted}, {"rejected", report.rejected},
                  {"vocab_size", report.vocab_size}}
                 .dump()
          << '\n';
    } else if (stats->parsed()) {
      json doc;
      Manifest m("stats");
      if (!st_samples.empty()) {
        if (st_train.empty()) throw UsageError("stats --samples needs --train <file>");
        m.add_input(st_samples);
        m.add_input(st_train);
        doc = evalgen::to_json(evalgen::sample_stats_files(st_samples, st_train));
      } else {
        if (st_corpus.empty()) throw UsageError("stats needs --corpus <dir> or --samples <file>");
        m.add_input(st_corpus);
        std::map<std::string, corpus::CorpusStats> per;
        for (const char* split : {"train", "valid", "test"}) {
          const auto lines = corpus::read_split_file(fs::path(st_corpus) / (std::string(split) + ".txt"));
          if (lines.empty()) throw DegenerateInputError(std::string("stats: split ") + split + " is empty");
          per[split] = corpus::compute_stats(lines);
          doc[split] = corpus::stats_to_json(per[split]);
        }
        if (!st_out.empty()) {
          fs::create_directories(st_out);
          write_text(fs::path(st_out) / "length_histogram.svg", histogram_svg(per["train"]));
        }
      }
      if (!st_out.empty()) {
        fs::create_directories(st_out);
        write_json(fs::path(st_out) / "stats.json", doc);
        m.write(st_out);
      }
      out << doc.dump(2) << '\n';
    } else if (train->parsed()) {
      training::TrainConfig cfg = tr_preset.empty() ? training::TrainConfig{} : training::preset_config(tr_preset);
      if (!tr_config.empty()) cfg = training::load_config(tr_config, cfg);
      if (!tr_model.empty()) cfg.model = training::parse_model_kind(tr_model);
      if (!tr_schedule.empty()) cfg.schedule = parse_schedule_kind(tr_schedule);
      if (tr_seed) cfg.seeds = {*tr_seed, derive_seed(*tr_seed, 1), derive_seed(*tr_seed, 2)};
      cfg.validate();
      Manifest m("train");
      m.add_input(tr_corpus);
      if (!tr_config.empty()) m.add_input(tr_config);
      m.set("config", training::config_to_json(cfg));
      m.set("seeds", {{"params", cfg.seeds.params}, {"data_order", cfg.seeds.data_order},
                      {"noise", cfg.seeds.noise}});
      m.set("corpus", fs::absolute(tr_corpus).lexically_normal().generic_string());
      const auto data = training::load_corpus(tr_corpus);
      const auto r = train_into(data, cfg, tr_out);
      m.write(tr_out);
      out << json{{"model", training::to_string(cfg.model)},
                  {"schedule", to_string(cfg.schedule)},
                  {"best", r.report["best"]},
                  {"test_perplexity", r.report["test_perplexity"]}}
                 .dump()
          << '\n';
    } else if (evaluate->parsed()) {
      LoadedModel lm = load_model(ev_ckpt, ev_corpus);
      training::TrainConfig cfg = lm.ckpt.config;
      if (!ev_mode.empty()) {
        const auto c = training::config_from_json(json{{"eval.vae_mode", ev_mode}}, cfg);
        cfg = c;
      }
      const auto r = training::evaluate_perplexity(lm.bundle, split_of(lm.data, ev_split), cfg);
      json doc = {{"model", training::to_string(lm.ckpt.model)},
                  {"split", ev_split},
                  {"perplexity", r.perplexity},
                  {"total_nll", r.total_nll},
                  {"tokens", r.tokens}};
      if (lm.ckpt.model == training::ModelKind::vae) doc["vae_eval"] = training::to_string(cfg.vae_eval);
      if (!ev_out.empty()) {
        Manifest m("evaluate");
        m.add_input(ev_ckpt);
        m.add_input(lm.corpus_dir);
        m.set("config", {{"split", ev_split}});
        fs::create_directories(ev_out);
        write_json(fs::path(ev_out) / "evaluation.json", doc);
        m.write(ev_out);
      }
      out << doc.dump() << '\n';
    } else if (generate->parsed()) {
      const auto mode = evalgen::parse_gen_mode(gen_mode);
      LoadedModel lm = load_model(gen_ckpt, gen_corpus);
      Manifest m("generate");
      m.add_input(gen_ckpt);
      m.add_input(lm.corpus_dir);
      const std::size_t max_len = gen_max_len ? gen_max_len : lm.ckpt.config.max_len;
      m.set("config", {{"n", gen_n}, {"mode", gen_mode}, {"max_len", max_len}});
      m.set("seeds", {{"sampling", gen_seed}});
      const auto rep = generate_into(lm.bundle, lm.data, gen_n, mode, gen_seed, max_len, gen_out);
      m.write(gen_out);
      json summary = evalgen::to_json(rep);
      summary.erase("lengths");
      out << summary.dump() << '\n';
    } else if (interp->parsed()) {
      LoadedModel lm = load_model(ip_ckpt, ip_corpus);
      const auto it = evalgen::interpolate(lm.bundle, ip_seed, ip_k, lm.ckpt.config.max_len);
      std::string text;
      for (const auto& s : it.sentences) text += evalgen::detokenize(s, lm.data.vocab) + '\n';
      if (!ip_out.empty()) {
        Manifest m("interpolate");
        m.add_input(ip_ckpt);
        m.add_input(lm.corpus_dir);
        m.set("config", {{"k", ip_k}});
        m.set("seeds", {{"endpoints", ip_seed}});
        fs::create_directories(ip_out);
        write_text(fs::path(ip_out) / "interpolation.txt", text);
        m.write(ip_out);
      }
      out << text;
    } else if (project->parsed()) {
      pj_cfg.method = evalgen::parse_projection_method(pj_method);
      LoadedModel lm = load_model(pj_ckpt, pj_corpus);
      if (lm.ckpt.model != training::ModelKind::vae) throw ContractError("project: needs a VAE checkpoint");
      auto sents = split_of(lm.data, pj_split);
      if (pj_limit && sents.size() > pj_limit) sents.resize(pj_limit);
      const evalgen::Matrix z = evalgen::encode_split_latents(*lm.bundle.vae, sents);
      const evalgen::Projection p = evalgen::project_2d(z, pj_cfg);
      fs::create_directories(pj_out);
      evalgen::write_projection_csv(fs::path(pj_out) / "projection.csv", p.coords);
      write_text(fs::path(pj_out) / "projection.svg", evalgen::projection_svg(p.coords));
      json trace = json::array();
      for (auto [i, kl] : p.kl_trace) trace.push_back({i, kl});
      write_json(fs::path(pj_out) / "projection.json",
                 {{"method", pj_method}, {"points", z.rows}, {"latent_size", z.cols}, {"kl_trace", trace}});
      Manifest m("project");
      m.add_input(pj_ckpt);
      m.add_input(lm.corpus_dir);
      m.set("config", {{"split", pj_split}, {"method", pj_method}, {"perplexity", pj_cfg.perplexity},
                       {"iterations", pj_cfg.iterations}, {"learning_rate", pj_cfg.learning_rate},
                       {"limit", pj_limit}});
      m.set("seeds", {{"tsne", pj_cfg.seed}});
      m.write(pj_out);
      out << json{{"points", z.rows}, {"method", pj_method}}.dump() << '\n';
    } else if (annotate->parsed()) {
      std::ifstream in(an_samples, std::ios::binary);
      if (!in) throw DataError("cannot read " + an_samples);
      std::vector<std::string> lines;
      for (std::string line; std::getline(in, line);) lines.push_back(line);
      Manifest m("export-for-annotation");
      m.add_input(an_samples);
      m.set("config", {{"n", an_n}});
      fs::create_directories(an_out);
      evalgen::export_for_annotation(lines, an_n, fs::path(an_out) / "annotation.txt");
      m.write(an_out);
      out << json{{"written", std::min(an_n, lines.size())}}.dump() << '\n';
    } else if (run_suite_cmd->parsed()) {
      if (su_input.empty() == su_corpus.empty()) throw UsageError("run-suite needs exactly one of --input, --corpus");
      suite.input = su_input;
      suite.corpus = su_corpus;
      suite.out = su_out;
      Manifest m("run-suite");
      m.add_input(su_input.empty() ? su_corpus : su_input);
      m.set("config", {{"preset", suite.preset}, {"samples", suite.samples}});
      m.set("seeds", {{"suite", suite.seed}});
      const json report = run_suite(suite, err);
      m.set("report_sha256", sha256_file(fs::path(su_out) / "report.json"));
      m.write(su_out);
      out << json{{"report", (fs::path(su_out) / "report.json").generic_string()},
                  {"report_sha256", sha256_file(fs::path(su_out) / "report.json")}}
                 .dump()
          << '\n';
    }
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error[" << to_string(e.kind()) << "]: " << msg << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error[data]: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    err << "error[data]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace lmforge::cli
