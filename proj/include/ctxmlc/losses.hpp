#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>

#include "ctxmlc/dataset.hpp"
#include "ctxmlc/embeddings.hpp"

namespace ctxmlc {

struct LossSpec {
  double gamma_pos = 1.0;   // focusing exponent on positive labels
  double gamma_neg = 4.0;   // focusing exponent on negative labels
  double shift_m = 0.05;    // probability shift for negatives, in [0, 1)
  double lambda = 0.1;      // weight of the context regularizer
  double clamp_eps = 1e-7;  // probabilities are clamped to [eps, 1 - eps]

  void validate() const;
};

/// Mean binary cross entropy over the L labels.
double bce(std::span<const std::uint8_t> y, std::span<const double> yhat, double clamp_eps = 1e-7);

/// Asymmetric loss: focusing exponents per polarity; the negative term uses
/// the shifted probability max(yhat - m, 0) both as focusing base and inside
/// the log.
double asl(std::span<const std::uint8_t> y, std::span<const double> yhat, const LossSpec& spec);

/// asl() plus d asl / d yhat written to `gradient`. Zero derivative where the
/// clamp is active and at or below the shift kink.
double asl_with_gradient(std::span<const std::uint8_t> y, std::span<const double> yhat,
                         const LossSpec& spec, std::span<double> gradient);

struct TotalLoss {
  double value = 0.0;        // data_term + lambda * regularizer
  double data_term = 0.0;    // mean ASL over the batch
  double regularizer = 0.0;  // unweighted context regularizer
  Eigen::MatrixXd probability_gradient;  // B x L, d value / d yhat
  Eigen::MatrixXd regularizer_gradient;  // L x P, lambda-weighted
};

/// Mean batch ASL plus lambda times the context regularizer. `yhat` is B x L.
TotalLoss total_loss(const LabelMatrix& y, const Eigen::MatrixXd& yhat,
                     const LabelEmbeddings& embeddings, const LossSpec& spec);

}  // namespace ctxmlc
