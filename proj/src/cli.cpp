#include "ctxmlc/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "ctxmlc/checkpoint.hpp"
#include "ctxmlc/dataset.hpp"
#include "ctxmlc/embeddings.hpp"
#include "ctxmlc/errors.hpp"
#include "ctxmlc/log.hpp"
#include "ctxmlc/metrics.hpp"
#include "ctxmlc/model.hpp"
#include "ctxmlc/noise.hpp"
#include "ctxmlc/run_config.hpp"
#include "ctxmlc/train.hpp"

namespace ctxmlc {
namespace {

namespace fs = std::filesystem;

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

struct NoiseArgs {
  std::string input, output, kind;
  double rate = 0.0;
  std::uint64_t seed = 0;
  bool gated = false;
};

int cmd_inject_noise(const NoiseArgs& a, std::ostream& out) {
  NoiseSpec spec;
  spec.kind = parse_noise_kind(a.kind);
  spec.rate = a.rate;
  spec.seed = a.seed;
  spec.combined_always_corrupt = !a.gated;
  spec.validate();
  MultiLabelDataset data = load_dataset(a.input);
  const LabelMatrix before = data.labels;
  data.labels = inject_noise(before, spec);
  save_dataset(a.output, data);
  const NoiseSummary s = summarize_noise(before, data.labels);
  out << "kind=" << to_string(spec.kind) << " rows_touched=" << s.rows_touched
      << " cells_changed=" << s.cells_changed << " positives_before=" << s.positives_before
      << " positives_after=" << s.positives_after << '\n';
  return kExitOk;
}

LabelEmbeddings build_embeddings(const RunConfig& rc, const MultiLabelDataset& train_set,
                                 std::vector<std::string>& names) {
  const bool have_word_files = !rc.label_names_path.empty() && !rc.embeddings_path.empty();
  if (rc.train.loss.lambda > 0.0 && !have_word_files) {
    throw ConfigError(
        "lambda > 0 needs label anchors: set both 'label_names' and 'embeddings' "
        "(anchors require word embeddings), or set lambda = 0");
  }
  if (!rc.label_names_path.empty()) {
    names = load_label_names(rc.label_names_path);
    if (names.size() != train_set.num_labels()) {
      throw ConfigError("label_names has " + std::to_string(names.size()) + " names but the data has " +
                        std::to_string(train_set.num_labels()) + " labels");
    }
  }
  if (rc.label_init == LabelInit::word) {
    if (!have_word_files) {
      throw ConfigError("label_init = word needs 'label_names' and 'embeddings'");
    }
    const WordEmbeddingTable table = load_word_embeddings(rc.embeddings_path);
    if (rc.model.label_dim != 0 && rc.model.label_dim != table.dim()) {
      throw ConfigError("label_dim " + std::to_string(rc.model.label_dim) +
                        " differs from the word-embedding width " + std::to_string(table.dim()));
    }
    return init_label_embeddings(names, table, rc.train.seed);
  }
  if (rc.model.label_dim == 0) throw ConfigError("label_init = random needs label_dim");
  return init_random_label_embeddings(train_set.num_labels(), rc.model.label_dim, rc.train.seed);
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              std::ostream& out) {
  const RunConfig rc = load_run_config(config_path, overrides);
  if (rc.train_path.empty()) throw ConfigError("config needs 'train'");
  if (rc.checkpoint_path.empty()) throw ConfigError("config needs 'checkpoint'");
  rc.train.validate();

  MultiLabelDataset train_set = load_dataset(rc.train_path);
  MultiLabelDataset val_set;
  if (!rc.val_path.empty()) val_set = load_dataset(rc.val_path);

  std::vector<std::string> names;
  LabelEmbeddings embeddings = build_embeddings(rc, train_set, names);

  if (rc.train_noise) {
    rc.train_noise->validate();
    const LabelMatrix before = train_set.labels;
    train_set.labels = inject_noise(before, *rc.train_noise);
    const NoiseSummary s = summarize_noise(before, train_set.labels);
    out << "noise kind=" << to_string(rc.train_noise->kind) << " rows_touched=" << s.rows_touched
        << " cells_changed=" << s.cells_changed << '\n';
  }

  ModelConfig mc = rc.model;
  if (mc.num_features != 0 && mc.num_features != train_set.num_features) {
    throw ConfigError("num_features does not match the training data");
  }
  if (mc.num_labels != 0 && mc.num_labels != train_set.num_labels()) {
    throw ConfigError("num_labels does not match the training data");
  }
  mc.num_features = train_set.num_features;
  mc.num_labels = train_set.num_labels();
  mc.label_dim = embeddings.dim();
  mc.validate();

  TrainResult result = train(train_set, val_set, mc, rc.train, std::move(embeddings),
                             [&](const EpochRecord& r) {
                               out << "epoch " << r.epoch << " loss=" << fixed(r.train_loss);
                               if (!std::isnan(r.val_ebf1)) {
                                 out << " val_ebF1=" << fixed(r.val_ebf1) << " val_miF1=" << fixed(r.val_mif1)
                                     << " val_maF1=" << fixed(r.val_maf1);
                               }
                               out << '\n' << std::flush;
                             });
  out << "best_epoch=" << result.best_epoch << '\n';

  save_checkpoint(rc.checkpoint_path, Checkpoint{result.params, result.embeddings, names});
  const fs::path history =
      rc.history_path.empty() ? fs::path(rc.checkpoint_path.string() + ".history.csv") : rc.history_path;
  {
    auto h = open_output(history);
    write_history_csv(h, result.history);
  }
  out << "checkpoint=" << rc.checkpoint_path.string() << " history=" << history.string() << '\n';

  if (!rc.test_path.empty()) {
    const MultiLabelDataset test_set = load_dataset(rc.test_path);
    const auto probs = predict(test_set.features, result.embeddings, result.params);
    out << "test " << format_metrics_line(evaluate(test_set.labels, binarize(probs, rc.train.threshold)))
        << '\n';
  }
  return kExitOk;
}

int cmd_evaluate(const std::string& model_path, const std::string& test_path, double threshold,
                 const std::string& per_label_csv, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(model_path);
  const MultiLabelDataset test_set = load_dataset(test_path);
  if (test_set.num_labels() != ckpt.params.config.num_labels ||
      test_set.num_features != ckpt.params.config.num_features) {
    throw Error("test data shape does not match the model");
  }
  const auto probs = predict(test_set.features, ckpt.embeddings, ckpt.params);
  const MetricsReport report = evaluate(test_set.labels, binarize(probs, threshold));
  out << format_metrics_line(report) << '\n';
  if (!per_label_csv.empty()) {
    auto f = open_output(per_label_csv);
    write_per_label_csv(f, report, ckpt.label_names);
  }
  return kExitOk;
}

int cmd_embed_dist(const std::string& model_path, const std::string& train_path, std::size_t k,
                   std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(model_path);
  const MultiLabelDataset data = load_dataset(train_path);
  if (data.num_labels() != ckpt.embeddings.num_labels()) {
    throw Error("label count of the data does not match the model");
  }
  const CooccurrenceDistance d = top_cooccurrence_distance(ckpt.embeddings, data.labels, k);
  out << "ratio=" << fixed(d.ratio) << " pairs=" << d.pairs_used << " top_mean=" << fixed(d.top_mean)
      << " all_mean=" << fixed(d.all_mean) << '\n';
  return kExitOk;
}

int cmd_grad_check(const std::string& config_path, const std::vector<std::string>& overrides,
                   std::uint64_t seed, std::vector<double> lambdas, std::ostream& out) {
  RunConfig rc;
  rc.model.num_features = 6;
  rc.model.num_labels = 5;
  rc.model.label_dim = 8;
  rc.model.num_layers = 2;
  rc.model.num_heads = 2;
  rc.model.encoder_hidden = 8;
  rc.model.feedforward_hidden = 8;
  if (!config_path.empty() || !overrides.empty()) {
    RunConfig loaded = load_run_config(config_path, overrides);
    // Sizes that were not set keep the small defaults above.
    auto pick = [](std::size_t v, std::size_t fallback) { return v != 0 ? v : fallback; };
    loaded.model.num_features = pick(loaded.model.num_features, rc.model.num_features);
    loaded.model.num_labels = pick(loaded.model.num_labels, rc.model.num_labels);
    loaded.model.label_dim = pick(loaded.model.label_dim, rc.model.label_dim);
    rc = loaded;
  }
  rc.model.validate();
  if (lambdas.empty()) lambdas = {0.0, 0.1};

  bool ok = true;
  for (const double lambda : lambdas) {
    LossSpec spec = rc.train.loss;
    spec.lambda = lambda;
    spec.validate();
    const GradCheckReport report = grad_check(rc.model, spec, seed);
    out << "lambda=" << lambda << '\n' << format_grad_check(report);
    ok = ok && report.passed();
  }
  out << (ok ? "grad-check passed" : "grad-check FAILED") << '\n';
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-label classification with a label-graph attention decoder", "ctxmlc"};
  app.require_subcommand(1);

  NoiseArgs noise_args;
  auto* noise_cmd = app.add_subcommand("inject-noise", "Corrupt the labels of a dataset file");
  noise_cmd->add_option("--input", noise_args.input, "Clean dataset")->required();
  noise_cmd->add_option("--output", noise_args.output, "Where to write the noisy dataset")->required();
  noise_cmd->add_option("--kind", noise_args.kind, "uniform | positive | single-positive | combined")
      ->required();
  noise_cmd->add_option("--rate", noise_args.rate, "Corruption rate for uniform and positive");
  noise_cmd->add_option("--seed", noise_args.seed, "Noise seed");
  noise_cmd->add_flag("--gated", noise_args.gated,
                      "combined only: corrupt each row with probability 1/3 instead of always");

  std::string config_path;
  std::vector<std::string> overrides;
  auto* train_cmd = app.add_subcommand("train", "Fit a model and write a checkpoint");
  train_cmd->add_option("--config", config_path, "key = value configuration file")->required();
  train_cmd->add_option("--set", overrides, "Override a config key (key=value)");

  std::string model_path, test_path, per_label_csv;
  double threshold = 0.5;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a dataset");
  eval_cmd->add_option("--model", model_path, "Checkpoint")->required();
  eval_cmd->add_option("--test", test_path, "Dataset")->required();
  eval_cmd->add_option("--threshold", threshold, "Decision threshold");
  eval_cmd->add_option("--per-label-csv", per_label_csv, "Write per-label counts here");

  std::string dist_model, dist_train;
  std::size_t top_k = 100;
  auto* dist_cmd = app.add_subcommand(
      "embed-dist", "Mean embedding distance of the most co-occurring label pairs over all pairs");
  dist_cmd->add_option("--model", dist_model, "Checkpoint")->required();
  dist_cmd->add_option("--train", dist_train, "Dataset whose labels define co-occurrence")->required();
  dist_cmd->add_option("--k", top_k, "Number of top pairs");

  std::string gc_config;
  std::vector<std::string> gc_overrides;
  std::uint64_t gc_seed = 0;
  std::vector<double> gc_lambdas;
  auto* gc_cmd = app.add_subcommand("grad-check", "Compare analytic and finite-difference gradients");
  gc_cmd->add_option("--config", gc_config, "Optional configuration file");
  gc_cmd->add_option("--set", gc_overrides, "Override a config key (key=value)");
  gc_cmd->add_option("--seed", gc_seed, "Seed for the random model and data");
  gc_cmd->add_option("--lambda", gc_lambdas, "Regularizer weights to check (default 0 and 0.1)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  const auto previous = log::set_warning_sink([&err](std::string_view m) { err << "warning: " << m << '\n'; });
  struct Restore {
    log::Sink sink;
    ~Restore() { log::set_warning_sink(sink); }
  } restore{previous};

  try {
    if (*noise_cmd) return cmd_inject_noise(noise_args, out);
    if (*train_cmd) return cmd_train(config_path, overrides, out);
    if (*eval_cmd) return cmd_evaluate(model_path, test_path, threshold, per_label_csv, out);
    if (*dist_cmd) return cmd_embed_dist(dist_model, dist_train, top_k, out);
    if (*gc_cmd) return cmd_grad_check(gc_config, gc_overrides, gc_seed, gc_lambdas, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace ctxmlc
