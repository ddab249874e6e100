#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "lmforge/errors.hpp"
#include "lmforge/training.hpp"

namespace lmforge::training {

using nlohmann::json;

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::rnnlm:
      return "rnnlm";
    case ModelKind::vae:
      return "vae";
    case ModelKind::seqgan:
      return "seqgan";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::rnnlm, ModelKind::vae, ModelKind::seqgan})
    if (to_string(k) == name) return k;
  throw UsageError("unknown model '" + std::string(name) + "' (allowed: rnnlm, vae, seqgan)");
}

std::string_view to_string(VaeEvalMode mode) {
  switch (mode) {
    case VaeEvalMode::mean:
      return "mean";
    case VaeEvalMode::sample:
      return "sample";
    case VaeEvalMode::iw:
      return "iw";
  }
  return "unknown";
}

namespace {

template <class E>
E parse_enum(std::string_view name, std::initializer_list<std::pair<std::string_view, E>> options) {
  std::string allowed;
  for (const auto& [n, v] : options) {
    if (n == name) return v;
    allowed += (allowed.empty() ? "" : ", ") + std::string(n);
  }
  throw UsageError("invalid value '" + std::string(name) + "' (allowed: " + allowed + ")");
}

std::size_t as_count(const json& v) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw UsageError("expected a non-negative integer, got " + v.dump());
  return v.get<std::size_t>();
}

std::uint64_t as_u64(const json& v) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw UsageError("expected a non-negative integer, got " + v.dump());
  return v.get<std::uint64_t>();
}

double as_real(const json& v) {
  if (!v.is_number()) throw UsageError("expected a number, got " + v.dump());
  return v.get<double>();
}

std::string as_string(const json& v) {
  if (!v.is_string()) throw UsageError("expected a string, got " + v.dump());
  return v.get<std::string>();
}

struct Field {
  std::string key;
  std::function<void(const json&, TrainConfig&)> set;
  std::function<json(const TrainConfig&)> get;
};

#define LMF_COUNT(KEY, MEMBER) \
  Field{KEY, [](const json& v, TrainConfig& c) { c.MEMBER = as_count(v); }, [](const TrainConfig& c) { return json(c.MEMBER); }}
#define LMF_U64(KEY, MEMBER) \
  Field{KEY, [](const json& v, TrainConfig& c) { c.MEMBER = as_u64(v); }, [](const TrainConfig& c) { return json(c.MEMBER); }}
#define LMF_REAL(KEY, MEMBER) \
  Field{KEY, [](const json& v, TrainConfig& c) { c.MEMBER = as_real(v); }, [](const TrainConfig& c) { return json(c.MEMBER); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"model.kind", [](const json& v, TrainConfig& c) { c.model = parse_model_kind(as_string(v)); },
            [](const TrainConfig& c) { return json(std::string(to_string(c.model))); }},
      LMF_COUNT("epochs", epochs),
      LMF_COUNT("batch_size", batch_size),
      LMF_REAL("learning_rate", learning_rate),
      Field{"optimizer",
            [](const json& v, TrainConfig& c) {
              c.optimizer = parse_enum<OptimizerKind>(as_string(v), {{"sgd", OptimizerKind::sgd},
                                                                     {"adam", OptimizerKind::adam}});
            },
            [](const TrainConfig& c) { return json(c.optimizer == OptimizerKind::sgd ? "sgd" : "adam"); }},
      LMF_REAL("clip_norm", clip_norm),
      Field{"schedule.kind", [](const json& v, TrainConfig& c) { c.schedule = parse_schedule_kind(as_string(v)); },
            [](const TrainConfig& c) { return json(std::string(to_string(c.schedule))); }},
      LMF_U64("schedule.M", schedule_cycles),
      LMF_REAL("schedule.R", schedule_ratio),
      LMF_REAL("schedule.R_lin", schedule_linear_ratio),
      LMF_U64("seeds.params", seeds.params),
      LMF_U64("seeds.data_order", seeds.data_order),
      LMF_U64("seeds.noise", seeds.noise),
      LMF_COUNT("model.embed", embed),
      LMF_COUNT("model.hidden", hidden),
      LMF_COUNT("model.latent", latent),
      LMF_COUNT("model.vocab_size", vocab_size),
      LMF_COUNT("model.max_len", max_len),
      LMF_REAL("model.word_dropout", word_dropout),
      Field{"model.dropout_kind",
            [](const json& v, TrainConfig& c) {
              c.dropout_kind = parse_enum<models::DropoutKind>(
                  as_string(v), {{"word", models::DropoutKind::word}, {"embedding", models::DropoutKind::embedding}});
            },
            [](const TrainConfig& c) {
              return json(c.dropout_kind == models::DropoutKind::word ? "word" : "embedding");
            }},
      Field{"eval.vae_mode",
            [](const json& v, TrainConfig& c) {
              c.vae_eval = parse_enum<VaeEvalMode>(
                  as_string(v), {{"mean", VaeEvalMode::mean}, {"sample", VaeEvalMode::sample}, {"iw", VaeEvalMode::iw}});
            },
            [](const TrainConfig& c) { return json(std::string(to_string(c.vae_eval))); }},
      LMF_COUNT("eval.iw_samples", iw_samples),
      LMF_COUNT("report.log_every", log_every),
      LMF_COUNT("seqgan.g_pretrain_epochs", seqgan.g_pretrain_epochs),
      LMF_COUNT("seqgan.d_pretrain_epochs", seqgan.d_pretrain_epochs),
      LMF_COUNT("seqgan.adv_epochs", seqgan.adv_epochs),
      LMF_COUNT("seqgan.g_steps", seqgan.g_steps),
      LMF_COUNT("seqgan.d_steps", seqgan.d_steps),
      LMF_COUNT("seqgan.n_rollouts", seqgan.n_rollouts),
      LMF_COUNT("seqgan.pg_batch", seqgan.pg_batch),
      LMF_COUNT("seqgan.d_samples", seqgan.d_samples),
      Field{"seqgan.baseline",
            [](const json& v, TrainConfig& c) {
              c.seqgan.baseline =
                  parse_enum<Baseline>(as_string(v), {{"none", Baseline::none}, {"mean", Baseline::mean}});
            },
            [](const TrainConfig& c) { return json(c.seqgan.baseline == Baseline::none ? "none" : "mean"); }},
      LMF_COUNT("seqgan.d_embed", seqgan.d_embed),
      LMF_COUNT("seqgan.d_filters", seqgan.d_filters),
      Field{"seqgan.d_widths",
            [](const json& v, TrainConfig& c) {
              if (!v.is_array()) throw UsageError("expected an array of filter widths, got " + v.dump());
              c.seqgan.d_widths.clear();
              for (const auto& w : v) c.seqgan.d_widths.push_back(as_count(w));
            },
            [](const TrainConfig& c) { return json(c.seqgan.d_widths); }},
      LMF_REAL("seqgan.d_learning_rate", seqgan.d_learning_rate),
  };
  return table;
}

#undef LMF_COUNT
#undef LMF_U64
#undef LMF_REAL

void flatten(const json& node, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      flatten(*it, key, out);
    else
      out.emplace_back(key, *it);
  }
}

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the first occurrence of the key (or its last component) in the source.
std::string locate(std::string_view source, std::string_view origin, const std::string& key) {
  std::string where(origin);
  if (source.empty()) return where;
  auto pos = source.find("\"" + key + "\"");
  if (pos == std::string_view::npos) {
    const auto dot = key.rfind('.');
    pos = source.find("\"" + key.substr(dot == std::string::npos ? 0 : dot + 1) + "\"");
  }
  if (pos != std::string_view::npos) where += ":" + std::to_string(line_of_offset(source, pos));
  return where;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError("config: " + what);
}

}  // namespace

void TrainConfig::validate() const {
  require(epochs > 0, "epochs must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(clip_norm > 0.0, "clip_norm must be positive");
  require(schedule_cycles > 0, "schedule.M must be positive");
  require(schedule_ratio > 0.0 && schedule_ratio <= 1.0, "schedule.R must lie in (0, 1]");
  require(schedule_linear_ratio > 0.0 && schedule_linear_ratio <= 1.0, "schedule.R_lin must lie in (0, 1]");
  require(embed > 0 && hidden > 0 && latent > 0, "model.embed, model.hidden and model.latent must be positive");
  require(max_len > 0, "model.max_len must be positive");
  require(word_dropout >= 0.0 && word_dropout < 1.0, "model.word_dropout must lie in [0, 1)");
  require(iw_samples > 0, "eval.iw_samples must be positive");
  require(log_every > 0, "report.log_every must be positive");
  require(seqgan.n_rollouts > 0, "seqgan.n_rollouts must be positive");
  require(seqgan.pg_batch > 0, "seqgan.pg_batch must be positive");
  require(seqgan.d_embed > 0 && seqgan.d_filters > 0, "seqgan.d_embed and seqgan.d_filters must be positive");
  require(!seqgan.d_widths.empty(), "seqgan.d_widths must not be empty");
  for (std::size_t w : seqgan.d_widths)
    require(w > 0 && w <= max_len + 1, "seqgan.d_widths entries must lie in [1, model.max_len + 1]");
  require(seqgan.d_learning_rate > 0.0, "seqgan.d_learning_rate must be positive");
}

TrainConfig preset_config(std::string_view preset) {
  TrainConfig c;
  if (preset == "full") {
    c.embed = 300;
    c.hidden = 256;
    c.latent = 16;
    return c;
  }
  if (preset == "desk") {
    c.embed = 32;
    c.hidden = 64;
    c.latent = 8;
    c.seqgan.n_rollouts = 4;
    c.seqgan.pg_batch = 16;
    c.seqgan.d_pretrain_epochs = 3;
    c.seqgan.adv_epochs = 5;
    c.seqgan.d_steps = 5;
    c.seqgan.d_samples = 256;
    c.seqgan.d_embed = 32;
    c.seqgan.d_filters = 16;
    return c;
  }
  throw UsageError("unknown preset '" + std::string(preset) + "' (allowed: desk, full)");
}

TrainConfig config_from_json(const json& doc, TrainConfig base, std::string_view source, std::string_view origin) {
  if (!doc.is_object()) throw UsageError(std::string(origin) + ": config must be a JSON object");
  std::vector<std::pair<std::string, json>> flat;
  flatten(doc, "", flat);
  for (const auto& [key, value] : flat) {
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) {
      std::string known;
      for (const auto& f : table) known += (known.empty() ? "" : ", ") + f.key;
      throw UsageError(locate(source, origin, key) + ": unknown key '" + key + "' (known keys: " + known + ")");
    }
    try {
      it->set(value, base);
    } catch (const Error& e) {
      throw UsageError(locate(source, origin, key) + ": " + key + ": " + e.what());
    } catch (const json::exception& e) {
      throw UsageError(locate(source, origin, key) + ": " + key + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

json config_to_json(const TrainConfig& cfg) {
  json out = json::object();
  for (const auto& f : fields()) out[f.key] = f.get(cfg);
  return out;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ":" + std::to_string(line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1)) +
                     ": invalid JSON: " + e.what());
  }
  return config_from_json(doc, std::move(base), text, path.string());
}

}  // namespace lmforge::training
