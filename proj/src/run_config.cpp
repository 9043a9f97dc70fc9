#include "ctxmlc/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>

#include "ctxmlc/errors.hpp"

namespace ctxmlc {
namespace {

using Setter = std::function<void(RunConfig&, std::string_view, const std::filesystem::path&)>;

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

template <typename T>
T to_number(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("invalid value '" + std::string(v) + "' for key '" + std::string(key) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean '" + std::string(v) + "' for key '" + std::string(key) + "'");
}

std::filesystem::path to_path(std::string_view v, const std::filesystem::path& base) {
  std::filesystem::path p{std::string(v)};
  if (p.empty() || p.is_absolute()) return p;
  return data_root(base) / p;
}

NoiseSpec& noise(RunConfig& c) {
  if (!c.train_noise) c.train_noise.emplace();
  return *c.train_noise;
}

#define CTXMLC_SIZE(field) [](RunConfig& c, std::string_view v, const auto&) { c.field = to_number<std::size_t>(#field, v); }
#define CTXMLC_REAL(field) [](RunConfig& c, std::string_view v, const auto&) { c.field = to_number<double>(#field, v); }
#define CTXMLC_PATH(field) [](RunConfig& c, std::string_view v, const auto& base) { c.field = to_path(v, base); }

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"train", CTXMLC_PATH(train_path)},
      {"val", CTXMLC_PATH(val_path)},
      {"test", CTXMLC_PATH(test_path)},
      {"label_names", CTXMLC_PATH(label_names_path)},
      {"embeddings", CTXMLC_PATH(embeddings_path)},
      {"checkpoint", CTXMLC_PATH(checkpoint_path)},
      {"history", CTXMLC_PATH(history_path)},
      {"num_features", CTXMLC_SIZE(model.num_features)},
      {"num_labels", CTXMLC_SIZE(model.num_labels)},
      {"label_dim", CTXMLC_SIZE(model.label_dim)},
      {"num_layers", CTXMLC_SIZE(model.num_layers)},
      {"num_heads", CTXMLC_SIZE(model.num_heads)},
      {"encoder_hidden", CTXMLC_SIZE(model.encoder_hidden)},
      {"feedforward_hidden", CTXMLC_SIZE(model.feedforward_hidden)},
      {"latent_every_block",
       [](RunConfig& c, std::string_view v, const auto&) {
         c.model.latent_every_block = to_bool("latent_every_block", v);
       }},
      {"epochs", CTXMLC_SIZE(train.epochs)},
      {"batch_size", CTXMLC_SIZE(train.batch_size)},
      {"threads", CTXMLC_SIZE(train.threads)},
      {"learning_rate", CTXMLC_REAL(train.learning_rate)},
      {"weight_decay", CTXMLC_REAL(train.weight_decay)},
      {"adam_beta1", CTXMLC_REAL(train.adam_beta1)},
      {"adam_beta2", CTXMLC_REAL(train.adam_beta2)},
      {"adam_eps", CTXMLC_REAL(train.adam_eps)},
      {"threshold", CTXMLC_REAL(train.threshold)},
      {"seed",
       [](RunConfig& c, std::string_view v, const auto&) {
         c.train.seed = to_number<std::uint64_t>("seed", v);
       }},
      {"select_on",
       [](RunConfig& c, std::string_view v, const auto&) { c.train.select_on = parse_select_metric(v); }},
      {"lambda", CTXMLC_REAL(train.loss.lambda)},
      {"gamma_pos", CTXMLC_REAL(train.loss.gamma_pos)},
      {"gamma_neg", CTXMLC_REAL(train.loss.gamma_neg)},
      {"shift_m", CTXMLC_REAL(train.loss.shift_m)},
      {"clamp_eps", CTXMLC_REAL(train.loss.clamp_eps)},
      {"label_init",
       [](RunConfig& c, std::string_view v, const auto&) {
         if (v == "word") {
           c.label_init = LabelInit::word;
         } else if (v == "random") {
           c.label_init = LabelInit::random;
         } else {
           throw ConfigError("label_init must be 'word' or 'random'");
         }
       }},
      {"noise_kind",
       [](RunConfig& c, std::string_view v, const auto&) {
         if (v == "none") {
           c.train_noise.reset();
         } else {
           noise(c).kind = parse_noise_kind(v);
         }
       }},
      {"noise_rate",
       [](RunConfig& c, std::string_view v, const auto&) { noise(c).rate = to_number<double>("noise_rate", v); }},
      {"noise_seed",
       [](RunConfig& c, std::string_view v, const auto&) {
         noise(c).seed = to_number<std::uint64_t>("noise_seed", v);
       }},
      {"noise_combined_always_corrupt",
       [](RunConfig& c, std::string_view v, const auto&) {
         noise(c).combined_always_corrupt = to_bool("noise_combined_always_corrupt", v);
       }},
  };
  return table;
}

#undef CTXMLC_SIZE
#undef CTXMLC_REAL
#undef CTXMLC_PATH

}  // namespace

std::filesystem::path data_root(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("CTXMLC_DATA_ROOT"); env != nullptr && *env != '\0') {
    return env;
  }
  return fallback;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value,
                   const std::filesystem::path& base_dir) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second(config, value, base_dir);
}

void parse_run_config(std::istream& in, RunConfig& config, const std::filesystem::path& base_dir) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text(line);
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      apply_setting(config, trim(text.substr(0, eq)), trim(text.substr(eq + 1)), base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

RunConfig load_run_config(const std::filesystem::path& path,
                          std::span<const std::string> overrides) {
  RunConfig config;
  std::filesystem::path base = std::filesystem::current_path();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    base = std::filesystem::absolute(path).parent_path();
    parse_run_config(in, config, base);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    apply_setting(config, trim(std::string_view(o).substr(0, eq)),
                  trim(std::string_view(o).substr(eq + 1)), std::filesystem::current_path());
  }
  return config;
}

std::vector<std::string> run_config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

}  // namespace ctxmlc
