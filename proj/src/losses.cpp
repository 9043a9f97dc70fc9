#include "ctxmlc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctxmlc/errors.hpp"

namespace ctxmlc {
namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ConfigError("label/probability length mismatch: " + std::to_string(a) + " vs " +
                      std::to_string(b));
  }
  if (a == 0) throw ConfigError("loss needs at least one label");
}

// x^g with 0^0 = 1.
inline double focus(double x, double g) { return g == 0.0 ? 1.0 : std::pow(x, g); }

struct Term {
  double loss;
  double grad;
};

inline Term positive_term(double p, double g) {
  const double log_p = std::log(p);
  const double w = focus(1.0 - p, g);
  const double dw = g == 0.0 ? 0.0 : -g * std::pow(1.0 - p, g - 1.0);
  return {-w * log_p, -(dw * log_p + w / p)};
}

inline Term negative_term(double q, double g) {
  if (q <= 0.0) return {0.0, 0.0};
  const double log_1mq = std::log1p(-q);
  const double w = focus(q, g);
  const double dw = g == 0.0 ? 0.0 : g * std::pow(q, g - 1.0);
  return {-w * log_1mq, -(dw * log_1mq - w / (1.0 - q))};
}

}  // namespace

void LossSpec::validate() const {
  if (!(gamma_pos >= 0.0) || !(gamma_neg >= 0.0)) {
    throw ConfigError("focusing parameters gamma_pos and gamma_neg must be nonnegative");
  }
  if (!(shift_m >= 0.0 && shift_m < 1.0)) throw ConfigError("shift_m must be in [0, 1)");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (!(clamp_eps > 0.0 && clamp_eps <= 1e-3)) throw ConfigError("clamp_eps must be in (0, 1e-3]");
}

double bce(std::span<const std::uint8_t> y, std::span<const double> yhat, double clamp_eps) {
  check_lengths(y.size(), yhat.size());
  double sum = 0.0;
  for (std::size_t l = 0; l < y.size(); ++l) {
    const double p = std::clamp(yhat[l], clamp_eps, 1.0 - clamp_eps);
    sum -= y[l] ? std::log(p) : std::log1p(-p);
  }
  return sum / static_cast<double>(y.size());
}

double asl_with_gradient(std::span<const std::uint8_t> y, std::span<const double> yhat,
                         const LossSpec& spec, std::span<double> gradient) {
  check_lengths(y.size(), yhat.size());
  const bool want_grad = !gradient.empty();
  if (want_grad) check_lengths(y.size(), gradient.size());
  const double inv_l = 1.0 / static_cast<double>(y.size());
  const double lo = spec.clamp_eps;
  const double hi = 1.0 - spec.clamp_eps;

  double sum = 0.0;
  for (std::size_t l = 0; l < y.size(); ++l) {
    const double raw = yhat[l];
    const double p = std::clamp(raw, lo, hi);
    const bool clamped = raw < lo || raw > hi;
    Term t;
    if (y[l]) {
      t = positive_term(p, spec.gamma_pos);
    } else {
      t = negative_term(std::max(p - spec.shift_m, 0.0), spec.gamma_neg);
    }
    sum += t.loss;
    if (want_grad) gradient[l] = clamped ? 0.0 : t.grad * inv_l;
  }
  return sum * inv_l;
}

double asl(std::span<const std::uint8_t> y, std::span<const double> yhat, const LossSpec& spec) {
  return asl_with_gradient(y, yhat, spec, {});
}

TotalLoss total_loss(const LabelMatrix& y, const Eigen::MatrixXd& yhat,
                     const LabelEmbeddings& embeddings, const LossSpec& spec) {
  if (y.rows() == 0) throw ConfigError("total_loss needs a non-empty batch");
  if (static_cast<std::size_t>(yhat.rows()) != y.rows() ||
      static_cast<std::size_t>(yhat.cols()) != y.cols()) {
    throw ConfigError("label and probability batches differ in shape");
  }
  TotalLoss out;
  out.probability_gradient.resize(yhat.rows(), yhat.cols());
  const double inv_b = 1.0 / static_cast<double>(y.rows());
  std::vector<double> row(y.cols()), grad(y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    for (std::size_t l = 0; l < y.cols(); ++l) row[l] = yhat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
    out.data_term += asl_with_gradient(y.row(i), row, spec, grad);
    for (std::size_t l = 0; l < y.cols(); ++l) {
      out.probability_gradient(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = grad[l] * inv_b;
    }
  }
  out.data_term *= inv_b;
  const auto reg = context_regularizer(embeddings);
  out.regularizer = reg.value;
  out.regularizer_gradient = spec.lambda * reg.gradient;
  out.value = out.data_term + spec.lambda * reg.value;
  return out;
}

}  // namespace ctxmlc
