#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctxmlc/dataset.hpp"
#include "ctxmlc/embeddings.hpp"
#include "ctxmlc/losses.hpp"

namespace ctxmlc {

struct ModelConfig {
  std::size_t num_features = 0;        // S
  std::size_t num_labels = 0;          // L
  std::size_t label_dim = 0;           // d, equal to the word-embedding width P
  std::size_t num_layers = 4;          // T attention + feedforward blocks
  std::size_t num_heads = 2;           // H, must divide d
  std::size_t encoder_hidden = 256;
  std::size_t feedforward_hidden = 128;
  bool latent_every_block = true;      // false: only block 0 receives z

  std::size_t head_dim() const noexcept { return label_dim / num_heads; }
  bool block_has_latent(std::size_t block) const noexcept {
    return latent_every_block || block == 0;
  }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// One decoder block. Node states are rows, so every map is applied on the
/// right: X * query. Head h owns columns [h*dh, (h+1)*dh) of query/key/value.
/// Gains and biases are 1 x width rows.
struct DecoderBlock {
  Eigen::MatrixXd latent_value;  // d x d; empty when the block skips z
  Eigen::MatrixXd latent_norm_gain, latent_norm_bias;
  Eigen::MatrixXd query, key, value, output;  // d x d
  Eigen::MatrixXd attention_norm_gain, attention_norm_bias;
  Eigen::MatrixXd ff_w1;  // d x F
  Eigen::MatrixXd ff_b1;  // 1 x F
  Eigen::MatrixXd ff_w2;  // F x d
  Eigen::MatrixXd ff_b2;  // 1 x d
  Eigen::MatrixXd ff_norm_gain, ff_norm_bias;
};

struct ModelParams {
  ModelConfig config;
  // z = w2 * relu(w1 * x + b1) + b2, column convention.
  Eigen::MatrixXd encoder_w1;  // He x S
  Eigen::MatrixXd encoder_b1;  // He x 1
  Eigen::MatrixXd encoder_w2;  // d x He
  Eigen::MatrixXd encoder_b2;  // d x 1
  std::vector<DecoderBlock> blocks;
  Eigen::MatrixXd readout;  // L x d
};

/// Glorot-uniform weights, zero biases, unit norm gains.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
/// Same shapes, all zeros.
ModelParams zeros_like(const ModelParams& params);

/// Calls f(name, matrix, decays) for every parameter array in a fixed order.
template <typename Params, typename F>
void for_each_array(Params& params, F&& f) {
  f(std::string("encoder.w1"), params.encoder_w1, true);
  f(std::string("encoder.b1"), params.encoder_b1, true);
  f(std::string("encoder.w2"), params.encoder_w2, true);
  f(std::string("encoder.b2"), params.encoder_b2, true);
  for (std::size_t t = 0; t < params.blocks.size(); ++t) {
    auto& b = params.blocks[t];
    const std::string p = "block" + std::to_string(t) + ".";
    if (b.latent_value.size() > 0) {
      f(p + "latent.value", b.latent_value, true);
      f(p + "latent.norm_gain", b.latent_norm_gain, false);
      f(p + "latent.norm_bias", b.latent_norm_bias, false);
    }
    f(p + "attention.query", b.query, true);
    f(p + "attention.key", b.key, true);
    f(p + "attention.value", b.value, true);
    f(p + "attention.output", b.output, true);
    f(p + "attention.norm_gain", b.attention_norm_gain, false);
    f(p + "attention.norm_bias", b.attention_norm_bias, false);
    f(p + "feedforward.w1", b.ff_w1, true);
    f(p + "feedforward.b1", b.ff_b1, true);
    f(p + "feedforward.w2", b.ff_w2, true);
    f(p + "feedforward.b2", b.ff_b2, true);
    f(p + "feedforward.norm_gain", b.ff_norm_gain, false);
    f(p + "feedforward.norm_bias", b.ff_norm_bias, false);
  }
  f(std::string("readout.weight"), params.readout, true);
}

inline constexpr const char* kLabelEmbeddingArray = "label_embeddings";
inline constexpr double kLayerNormEps = 1e-9;

// ---- building blocks ------------------------------------------------------

/// Latent vector z (length d) for one sparse feature row.
Eigen::VectorXd encode(const SparseRow& features, const ModelParams& params);

/// Row-wise softmax with max subtraction.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores);

/// Per-head L x L attention: softmax_j((X Wq_h)_l . (X Wk_h)_j / sqrt(dh)).
std::vector<Eigen::MatrixXd> attention_weights(const Eigen::MatrixXd& nodes,
                                               const Eigen::MatrixXd& query,
                                               const Eigen::MatrixXd& key, std::size_t num_heads);

/// nodes + concat_h(alpha_h * nodes * Wv_h) * output.
Eigen::MatrixXd message_pass(const Eigen::MatrixXd& nodes, std::span<const Eigen::MatrixXd> alpha,
                             const Eigen::MatrixXd& value, const Eigen::MatrixXd& output);

/// Per-row layer normalization followed by gain and bias.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gain,
                           const Eigen::MatrixXd& bias);

// ---- full network ---------------------------------------------------------

/// Optional instrumentation for decoder_forward.
struct ForwardTrace {
  std::size_t sublayers = 0;       // attention + feedforward sublayers run
  std::size_t latent_updates = 0;  // z injections run
  std::vector<std::vector<Eigen::MatrixXd>> attention;  // [block][head], L x L
  std::vector<Eigen::MatrixXd> normalized;  // every layer-norm output before gain/bias
};

/// Per-label probabilities for latent z, starting the nodes at
/// `label_embeddings` (L x d).
Eigen::VectorXd decoder_forward(const Eigen::VectorXd& z, const Eigen::MatrixXd& label_embeddings,
                                const ModelParams& params, ForwardTrace* trace = nullptr);

/// N x L probabilities.
Eigen::MatrixXd predict(std::span<const SparseRow> features, const LabelEmbeddings& embeddings,
                        const ModelParams& params);

struct Gradients {
  ModelParams params;                 // same layout as the parameters
  Eigen::MatrixXd label_embeddings;   // total gradient w.r.t. embeddings.current
  Eigen::MatrixXd regularizer_part;   // lambda * d L_CB / d current, included above
};

struct ForwardBackwardResult {
  double loss = 0.0;         // data_loss + lambda * regularizer
  double data_loss = 0.0;    // mean ASL over the batch
  double regularizer = 0.0;  // unweighted L_CB
  Gradients gradients;
};

/// Exact gradients of the total loss over samples `batch` of the dataset.
/// `threads` > 1 splits the batch into contiguous chunks whose gradients are
/// summed in chunk order; results are reproducible for a fixed thread count.
/// Throws NumericalError naming the first non-finite array if the loss is
/// not finite.
ForwardBackwardResult forward_backward(const MultiLabelDataset& data,
                                       std::span<const std::size_t> batch,
                                       const LabelEmbeddings& embeddings,
                                       const ModelParams& params, const LossSpec& spec,
                                       std::size_t threads = 1);

/// Which side of every non-differentiable point the batch sits on: ReLU
/// inputs in the encoder and feedforward layers, the probability clamp and
/// the negative-label shift. Parameter settings with equal patterns lie in
/// the same smooth piece of the loss.
std::vector<std::uint8_t> kink_pattern(const MultiLabelDataset& data,
                                       std::span<const std::size_t> batch,
                                       const LabelEmbeddings& embeddings,
                                       const ModelParams& params, const LossSpec& spec);

}  // namespace ctxmlc
