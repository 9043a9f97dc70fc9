#include "ctxmlc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ctxmlc/errors.hpp"
#include "ctxmlc/metrics.hpp"
#include "ctxmlc/random.hpp"

namespace ctxmlc {
namespace {

using Eigen::MatrixXd;

constexpr std::uint32_t kShuffleStream = 0x5F1Eu;
constexpr std::uint32_t kGradCheckStream = 0x6C4Bu;

double metric_value(const MetricsReport& r, SelectMetric m) {
  switch (m) {
    case SelectMetric::ebf1: return r.ebf1;
    case SelectMetric::mif1: return r.mif1;
    case SelectMetric::maf1: return r.maf1;
  }
  return r.ebf1;
}

}  // namespace

SelectMetric parse_select_metric(std::string_view name) {
  if (name == "ebF1" || name == "ebf1") return SelectMetric::ebf1;
  if (name == "miF1" || name == "mif1") return SelectMetric::mif1;
  if (name == "maF1" || name == "maf1") return SelectMetric::maf1;
  throw ConfigError("unknown selection metric '" + std::string(name) +
                    "' (expected ebF1, miF1 or maF1)");
}

std::string_view to_string(SelectMetric metric) {
  switch (metric) {
    case SelectMetric::ebf1: return "ebF1";
    case SelectMetric::mif1: return "miF1";
    case SelectMetric::maf1: return "maF1";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (threads == 0) throw ConfigError("threads must be at least 1");
  loss.validate();
}

std::vector<ParamRef> trainable_arrays(ModelParams& params, LabelEmbeddings& embeddings) {
  std::vector<ParamRef> refs;
  for_each_array(params, [&](const std::string& name, MatrixXd& m, bool decay) {
    refs.push_back({name, &m, decay});
  });
  refs.push_back({kLabelEmbeddingArray, &embeddings.current, false});
  return refs;
}

std::vector<const MatrixXd*> gradient_arrays(Gradients& gradients) {
  std::vector<const MatrixXd*> out;
  for_each_array(gradients.params,
                 [&](const std::string&, MatrixXd& m, bool) { out.push_back(&m); });
  out.push_back(&gradients.label_embeddings);
  return out;
}

void adam_step(std::span<const ParamRef> params, std::span<const MatrixXd* const> grads,
               AdamState& state, const TrainConfig& config) {
  if (params.size() != grads.size()) throw ConfigError("parameter and gradient counts differ");
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(MatrixXd::Zero(p.value->rows(), p.value->cols()));
      state.second_moment.push_back(MatrixXd::Zero(p.value->rows(), p.value->cols()));
    }
  }
  if (state.first_moment.size() != params.size()) throw ConfigError("optimizer state mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i]->allFinite()) throw NumericalError("non-finite gradient for " + params[i].name);
    if (grads[i]->rows() != params[i].value->rows() || grads[i]->cols() != params[i].value->cols()) {
      throw ConfigError("gradient shape mismatch for " + params[i].name);
    }
  }

  ++state.step;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = *params[i].value;
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    MatrixXd g = *grads[i];
    if (params[i].decay && config.weight_decay != 0.0) g += config.weight_decay * theta;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    theta.array() -= config.learning_rate * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + config.adam_eps);
  }
}

TrainResult train(const MultiLabelDataset& train_set, const MultiLabelDataset& val_set,
                  const ModelConfig& model_config, const TrainConfig& config,
                  LabelEmbeddings embeddings,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  model_config.validate();
  if (train_set.num_samples() == 0) throw ConfigError("training set is empty");
  if (train_set.num_labels() != model_config.num_labels ||
      train_set.num_features != model_config.num_features) {
    throw ConfigError("training set shape does not match the model config");
  }
  const bool has_val = val_set.num_samples() > 0;
  if (has_val && (val_set.num_labels() != train_set.num_labels() ||
                  val_set.num_features != train_set.num_features)) {
    throw ConfigError("validation set must share L and S with the training set");
  }
  if (embeddings.num_labels() != model_config.num_labels ||
      embeddings.dim() != model_config.label_dim) {
    throw ConfigError("label embeddings are " + std::to_string(embeddings.num_labels()) + "x" +
                      std::to_string(embeddings.dim()) + ", model expects " +
                      std::to_string(model_config.num_labels) + "x" +
                      std::to_string(model_config.label_dim));
  }

  TrainResult result;
  ModelParams params = init_params(model_config, config.seed);
  AdamState adam;
  RandomStream shuffle_rng(config.seed, kShuffleStream);
  std::vector<std::size_t> order(train_set.num_samples());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best_value = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      ForwardBackwardResult fb;
      try {
        fb = forward_backward(train_set, batch, embeddings, params, config.loss, config.threads);
      } catch (const NumericalError& e) {
        throw NumericalError("diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batches + 1) + ": " + e.what());
      }
      auto refs = trainable_arrays(params, embeddings);
      const auto grads = gradient_arrays(fb.gradients);
      adam_step(refs, grads, adam, config);
      loss_sum += fb.loss;
      ++batches;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(batches);
    bool improved = !has_val;
    if (has_val) {
      const auto probs = predict(val_set.features, embeddings, params);
      const auto report = evaluate(val_set.labels, binarize(probs, config.threshold));
      record.val_ebf1 = report.ebf1;
      record.val_mif1 = report.mif1;
      record.val_maf1 = report.maf1;
      const double value = metric_value(report, config.select_on);
      if (value > best_value) {
        best_value = value;
        improved = true;
      }
    }
    if (improved) {
      result.params = params;
      result.embeddings = embeddings;
      result.best_epoch = epoch;
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_ebF1,val_miF1,val_maF1\n";
  char buf[64];
  auto field = [&](double v) -> std::string {
    if (std::isnan(v)) return "";
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
  };
  for (const auto& r : history) {
    out << r.epoch << ',' << field(r.train_loss) << ',' << field(r.val_ebf1) << ','
        << field(r.val_mif1) << ',' << field(r.val_maf1) << '\n';
  }
}

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& a : arrays) w = std::max(w, a.max_relative_error);
  return w;
}

GradCheckReport grad_check(const ModelConfig& config, const LossSpec& spec, std::uint64_t seed,
                           const GradCheckOptions& options) {
  config.validate();
  spec.validate();
  if (options.batch_size == 0) throw ConfigError("grad_check needs a positive batch size");
  RandomStream rng(seed, kGradCheckStream);

  // Random batch: a few nonzero features per row, labels with ~40% positives.
  MultiLabelDataset data;
  data.num_features = config.num_features;
  data.labels = LabelMatrix(options.batch_size, config.num_labels);
  data.features.resize(options.batch_size);
  for (std::size_t i = 0; i < options.batch_size; ++i) {
    for (std::uint32_t f = 0; f < config.num_features; ++f) {
      if (rng.uniform() < 0.6) data.features[i].push_back({f, rng.normal()});
    }
    for (std::size_t l = 0; l < config.num_labels; ++l) data.labels(i, l) = rng.uniform() < 0.4;
  }

  // Move every array away from its structured initial value.
  ModelParams params = init_params(config, seed);
  for_each_array(params, [&](const std::string& name, MatrixXd& m, bool) {
    const bool is_gain = name.find("norm_gain") != std::string::npos;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        m(r, c) = (is_gain ? 1.0 : m(r, c)) + 0.2 * rng.normal();
      }
    }
  });
  MatrixXd anchors(static_cast<Eigen::Index>(config.num_labels), static_cast<Eigen::Index>(config.label_dim));
  MatrixXd current(anchors.rows(), anchors.cols());
  for (Eigen::Index r = 0; r < anchors.rows(); ++r) {
    for (Eigen::Index c = 0; c < anchors.cols(); ++c) {
      anchors(r, c) = rng.normal();
      current(r, c) = anchors(r, c) + 0.3 * rng.normal();
    }
  }
  LabelEmbeddings embeddings(current, anchors);

  std::vector<std::size_t> batch(options.batch_size);
  std::iota(batch.begin(), batch.end(), std::size_t{0});
  auto analytic = forward_backward(data, batch, embeddings, params, spec).gradients;
  if (options.corrupt) options.corrupt(analytic);
  const auto grads = gradient_arrays(analytic);
  const auto base_pattern = kink_pattern(data, batch, embeddings, params, spec);
  auto refs = trainable_arrays(params, embeddings);

  GradCheckReport report;
  report.tolerance = options.tolerance;
  const double h = options.step;
  for (std::size_t a = 0; a < refs.size(); ++a) {
    auto& theta = *refs[a].value;
    const auto& g = *grads[a];
    const double scale = g.cwiseAbs().maxCoeff();
    const double floor = std::max(1e-4 * scale, 1e-12);
    ArrayCheck check{refs[a].name, static_cast<std::size_t>(theta.size()), 0.0};
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      const double saved = theta.data()[k];
      theta.data()[k] = saved + h;
      const double up = forward_backward(data, batch, embeddings, params, spec).loss;
      bool smooth = kink_pattern(data, batch, embeddings, params, spec) == base_pattern;
      theta.data()[k] = saved - h;
      const double down = forward_backward(data, batch, embeddings, params, spec).loss;
      smooth = smooth && kink_pattern(data, batch, embeddings, params, spec) == base_pattern;
      theta.data()[k] = saved;
      if (!smooth) {
        ++check.skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double exact = g.data()[k];
      const double denom = std::max({std::abs(exact), std::abs(numeric), floor});
      check.max_relative_error = std::max(check.max_relative_error, std::abs(exact - numeric) / denom);
    }
    report.arrays.push_back(check);
  }
  return report;
}

std::string format_grad_check(const GradCheckReport& report) {
  std::ostringstream out;
  char buf[160];
  for (const auto& a : report.arrays) {
    std::snprintf(buf, sizeof buf, "%-32s size=%-6zu skipped=%-3zu max_rel_err=%.3e %s\n", a.name.c_str(),
                  a.size, a.skipped, a.max_relative_error, a.max_relative_error < report.tolerance ? "ok" : "FAIL");
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "worst=%.3e tolerance=%.1e %s\n", report.worst(), report.tolerance,
                report.passed() ? "PASS" : "FAIL");
  out << buf;
  return out.str();
}

}  // namespace ctxmlc
