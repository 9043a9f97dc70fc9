#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "ctxmlc/dataset.hpp"
#include "ctxmlc/embeddings.hpp"
#include "ctxmlc/losses.hpp"
#include "ctxmlc/model.hpp"

namespace ctxmlc {

enum class SelectMetric { ebf1, mif1, maf1 };

SelectMetric parse_select_metric(std::string_view name);
std::string_view to_string(SelectMetric metric);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 2e-4;
  double weight_decay = 1e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  LossSpec loss;
  SelectMetric select_on = SelectMetric::ebf1;
  double threshold = 0.5;   // binarization threshold for validation metrics
  std::size_t threads = 1;  // gradient workers per batch

  void validate() const;
};

/// A trainable array and its decay flag, as seen by the optimizer.
struct ParamRef {
  std::string name;
  Eigen::MatrixXd* value;
  bool decay;
};

/// Model arrays followed by the label embeddings, in for_each_array order.
std::vector<ParamRef> trainable_arrays(ModelParams& params, LabelEmbeddings& embeddings);
std::vector<const Eigen::MatrixXd*> gradient_arrays(Gradients& gradients);

struct AdamState {
  std::vector<Eigen::MatrixXd> first_moment;
  std::vector<Eigen::MatrixXd> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update with weight decay added to the gradient of
/// arrays whose decay flag is set. Moments are allocated on first use.
/// Throws NumericalError on a non-finite gradient.
void adam_step(std::span<const ParamRef> params, std::span<const Eigen::MatrixXd* const> grads,
               AdamState& state, const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_ebf1 = std::numeric_limits<double>::quiet_NaN();
  double val_mif1 = std::numeric_limits<double>::quiet_NaN();
  double val_maf1 = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  ModelParams params;
  LabelEmbeddings embeddings;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 1-based
};

/// Mini-batch Adam on the total loss. After each epoch the `select_on`
/// validation metric is computed; the best epoch's parameters are returned
/// (the first one on ties). With an empty validation set the last epoch wins.
/// `on_epoch` is invoked after every epoch when set.
TrainResult train(const MultiLabelDataset& train_set, const MultiLabelDataset& val_set,
                  const ModelConfig& model_config, const TrainConfig& config,
                  LabelEmbeddings embeddings,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// epoch,train_loss,val_ebF1,val_miF1,val_maF1
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

struct ArrayCheck {
  std::string name;
  std::size_t size = 0;
  double max_relative_error = 0.0;
  std::size_t skipped = 0;  // elements whose step crossed a non-differentiable point
};

struct GradCheckReport {
  std::vector<ArrayCheck> arrays;
  double tolerance = 1e-4;

  double worst() const;
  bool passed() const { return worst() < tolerance; }
};

struct GradCheckOptions {
  std::size_t batch_size = 4;
  double step = 1e-4;
  double tolerance = 1e-4;
  // Test hook applied to the analytic gradients before comparison.
  std::function<void(Gradients&)> corrupt;
};

/// Compares analytic gradients against central differences for every
/// trainable array on a random batch and random parameters. The error of an
/// element is |a - n| / max(|a|, |n|, 1e-6 * max_scale) where max_scale is
/// the array's largest gradient magnitude.
GradCheckReport grad_check(const ModelConfig& config, const LossSpec& spec, std::uint64_t seed,
                           const GradCheckOptions& options = {});

std::string format_grad_check(const GradCheckReport& report);

}  // namespace ctxmlc
