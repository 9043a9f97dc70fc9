#include "ctxmlc/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <thread>

#include "ctxmlc/errors.hpp"
#include "ctxmlc/random.hpp"

namespace ctxmlc {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr std::uint32_t kInitStream = 0x1A17u;

Index idx(std::size_t v) { return static_cast<Index>(v); }

MatrixXd glorot(Index rows, Index cols, double fan_in, double fan_out, RandomStream& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  MatrixXd m(rows, cols);
  // Fill row by row so the draw order does not depend on storage order.
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---- layer norm -----------------------------------------------------------

struct NormCache {
  MatrixXd normalized;
  VectorXd inv_std;
};

MatrixXd norm_forward(const MatrixXd& x, const MatrixXd& gain, const MatrixXd& bias,
                      NormCache& cache) {
  const double width = static_cast<double>(x.cols());
  const VectorXd mean = x.rowwise().sum() / width;
  MatrixXd centered = x.colwise() - mean;
  const VectorXd var = centered.rowwise().squaredNorm() / width;
  cache.inv_std = (var.array() + kLayerNormEps).rsqrt().matrix();
  cache.normalized = cache.inv_std.asDiagonal() * centered;
  MatrixXd y = cache.normalized;
  y.array().rowwise() *= gain.row(0).array();
  y.array().rowwise() += bias.row(0).array();
  return y;
}

MatrixXd norm_backward(const MatrixXd& dy, const MatrixXd& gain, const NormCache& cache,
                       MatrixXd& dgain, MatrixXd& dbias) {
  const auto& n = cache.normalized;
  dgain += (dy.array() * n.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  MatrixXd dn = dy;
  dn.array().rowwise() *= gain.row(0).array();
  const double width = static_cast<double>(dy.cols());
  const VectorXd sum_dn = dn.rowwise().sum();
  const VectorXd sum_dn_n = (dn.array() * n.array()).rowwise().sum().matrix();
  MatrixXd dx = width * dn;
  dx.colwise() -= sum_dn;
  dx -= sum_dn_n.asDiagonal() * n;
  return (cache.inv_std / width).asDiagonal() * dx;
}

// ---- per-sample forward cache ---------------------------------------------

struct BlockCache {
  MatrixXd latent_in;
  VectorXd latent_u;
  NormCache latent_norm;
  MatrixXd attn_in, q, k, v, context;
  std::vector<MatrixXd> probs;
  NormCache attn_norm;
  MatrixXd ff_in, ff_hidden_pre, ff_hidden;
  NormCache ff_norm;
};

struct SampleCache {
  VectorXd enc_hidden_pre, enc_hidden, z;
  std::vector<BlockCache> blocks;
  MatrixXd final_nodes;
  VectorXd probs;
};

MatrixXd attention_forward(const MatrixXd& x, const DecoderBlock& b, std::size_t heads,
                           BlockCache& c) {
  c.attn_in = x;
  c.q = x * b.query;
  c.k = x * b.key;
  c.v = x * b.value;
  const Index dh = x.cols() / idx(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  c.probs.resize(heads);
  c.context.resize(x.rows(), x.cols());
  for (std::size_t h = 0; h < heads; ++h) {
    const Index off = idx(h) * dh;
    c.probs[h] = softmax_rows(scale * (c.q.middleCols(off, dh) * c.k.middleCols(off, dh).transpose()));
    c.context.middleCols(off, dh).noalias() = c.probs[h] * c.v.middleCols(off, dh);
  }
  MatrixXd m = x;
  m.noalias() += c.context * b.output;
  return norm_forward(m, b.attention_norm_gain, b.attention_norm_bias, c.attn_norm);
}

MatrixXd feedforward_forward(const MatrixXd& x, const DecoderBlock& b, BlockCache& c) {
  c.ff_in = x;
  c.ff_hidden_pre = x * b.ff_w1;
  c.ff_hidden_pre.rowwise() += b.ff_b1.row(0);
  c.ff_hidden = c.ff_hidden_pre.cwiseMax(0.0);
  MatrixXd a = x;
  a.noalias() += c.ff_hidden * b.ff_w2;
  a.rowwise() += b.ff_b2.row(0);
  return norm_forward(a, b.ff_norm_gain, b.ff_norm_bias, c.ff_norm);
}

// Decoder pass for c.z already set.
void run_decoder(const MatrixXd& label_embeddings, const ModelParams& params, const MatrixXd& readout,
                 SampleCache& c, ForwardTrace* trace) {
  MatrixXd nodes = label_embeddings;
  c.blocks.resize(params.blocks.size());
  for (std::size_t t = 0; t < params.blocks.size(); ++t) {
    const auto& b = params.blocks[t];
    auto& bc = c.blocks[t];
    if (b.latent_value.size() > 0) {
      bc.latent_in = nodes;
      bc.latent_u = b.latent_value * c.z;
      MatrixXd a = nodes;
      a.rowwise() += bc.latent_u.transpose();
      nodes = norm_forward(a, b.latent_norm_gain, b.latent_norm_bias, bc.latent_norm);
      if (trace) {
        ++trace->latent_updates;
        trace->normalized.push_back(bc.latent_norm.normalized);
      }
    }
    nodes = attention_forward(nodes, b, params.config.num_heads, bc);
    nodes = feedforward_forward(nodes, b, bc);
    if (trace) {
      trace->sublayers += 2;
      trace->attention.push_back(bc.probs);
      trace->normalized.push_back(bc.attn_norm.normalized);
      trace->normalized.push_back(bc.ff_norm.normalized);
    }
  }
  c.final_nodes = std::move(nodes);
  const VectorXd logits = (readout.array() * c.final_nodes.array()).rowwise().sum().matrix();
  c.probs = logits.unaryExpr([](double x) { return sigmoid(x); });
}

void run_forward(const SparseRow& features, const MatrixXd& label_embeddings,
                 const ModelParams& params, SampleCache& c, const MatrixXd* readout = nullptr) {
  c.enc_hidden_pre = params.encoder_b1.col(0);
  for (const auto& e : features) c.enc_hidden_pre.noalias() += e.value * params.encoder_w1.col(e.index);
  c.enc_hidden = c.enc_hidden_pre.cwiseMax(0.0);
  c.z = params.encoder_w2 * c.enc_hidden + params.encoder_b2.col(0);
  run_decoder(label_embeddings, params, readout ? *readout : params.readout, c, nullptr);
}

// Inference runs the labels in an order fixed by their own parameters
// (embedding row, then readout row). Any joint relabeling then executes the
// same floating-point operations, so outputs permute bit-exactly.
std::uint64_t order_key(double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  return (bits >> 63) ? ~bits : bits | (std::uint64_t{1} << 63);
}

struct CanonicalLabels {
  std::vector<Index> order;  // canonical row i is original label order[i]
  MatrixXd embeddings, readout;
};

CanonicalLabels canonical_labels(const MatrixXd& embeddings, const MatrixXd& readout) {
  CanonicalLabels c;
  c.order.resize(static_cast<std::size_t>(embeddings.rows()));
  std::iota(c.order.begin(), c.order.end(), Index{0});
  auto less = [&](Index a, Index b) {
    for (const MatrixXd* m : {&embeddings, &readout}) {
      for (Index k = 0; k < m->cols(); ++k) {
        const auto ka = order_key((*m)(a, k)), kb = order_key((*m)(b, k));
        if (ka != kb) return ka < kb;
      }
    }
    return false;
  };
  std::stable_sort(c.order.begin(), c.order.end(), less);
  c.embeddings.resize(embeddings.rows(), embeddings.cols());
  c.readout.resize(readout.rows(), readout.cols());
  for (std::size_t i = 0; i < c.order.size(); ++i) {
    c.embeddings.row(idx(i)) = embeddings.row(c.order[i]);
    c.readout.row(idx(i)) = readout.row(c.order[i]);
  }
  return c;
}

MatrixXd restore_rows(const MatrixXd& m, const std::vector<Index>& order) {
  MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.row(order[i]) = m.row(idx(i));
  return out;
}

// Accumulates gradients of one sample into `g`; dprobs is d loss / d probs.
void run_backward(const SparseRow& features, const SampleCache& c, const VectorXd& dprobs,
                  const ModelParams& params, Gradients& g) {
  auto& gp = g.params;
  const auto heads = params.config.num_heads;

  const VectorXd dlogit = dprobs.array() * c.probs.array() * (1.0 - c.probs.array());
  gp.readout.noalias() += dlogit.asDiagonal() * c.final_nodes;
  MatrixXd dnodes = dlogit.asDiagonal() * params.readout;

  VectorXd dz = VectorXd::Zero(c.z.size());
  for (std::size_t t = params.blocks.size(); t-- > 0;) {
    const auto& b = params.blocks[t];
    const auto& bc = c.blocks[t];
    auto& gb = gp.blocks[t];

    // feedforward sublayer
    {
      const MatrixXd da = norm_backward(dnodes, b.ff_norm_gain, bc.ff_norm, gb.ff_norm_gain, gb.ff_norm_bias);
      gb.ff_w2.noalias() += bc.ff_hidden.transpose() * da;
      gb.ff_b2 += da.colwise().sum();
      MatrixXd dh = da * b.ff_w2.transpose();
      dh = (bc.ff_hidden_pre.array() > 0.0).select(dh, 0.0);
      gb.ff_w1.noalias() += bc.ff_in.transpose() * dh;
      gb.ff_b1 += dh.colwise().sum();
      dnodes = da;
      dnodes.noalias() += dh * b.ff_w1.transpose();
    }

    // attention sublayer
    {
      const MatrixXd dm = norm_backward(dnodes, b.attention_norm_gain, bc.attn_norm,
                                        gb.attention_norm_gain, gb.attention_norm_bias);
      gb.output.noalias() += bc.context.transpose() * dm;
      const MatrixXd dcontext = dm * b.output.transpose();
      const Index dh = dm.cols() / idx(heads);
      const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
      MatrixXd dq(dm.rows(), dm.cols()), dk(dm.rows(), dm.cols()), dv(dm.rows(), dm.cols());
      for (std::size_t h = 0; h < heads; ++h) {
        const Index off = idx(h) * dh;
        const auto& p = bc.probs[h];
        const auto dctx = dcontext.middleCols(off, dh);
        const MatrixXd dp = dctx * bc.v.middleCols(off, dh).transpose();
        dv.middleCols(off, dh).noalias() = p.transpose() * dctx;
        const VectorXd row_dot = (dp.array() * p.array()).rowwise().sum().matrix();
        MatrixXd ds = dp;
        ds.colwise() -= row_dot;
        ds = (p.array() * ds.array()).matrix() * scale;
        dq.middleCols(off, dh).noalias() = ds * bc.k.middleCols(off, dh);
        dk.middleCols(off, dh).noalias() = ds.transpose() * bc.q.middleCols(off, dh);
      }
      gb.query.noalias() += bc.attn_in.transpose() * dq;
      gb.key.noalias() += bc.attn_in.transpose() * dk;
      gb.value.noalias() += bc.attn_in.transpose() * dv;
      dnodes = dm;
      dnodes.noalias() += dq * b.query.transpose();
      dnodes.noalias() += dk * b.key.transpose();
      dnodes.noalias() += dv * b.value.transpose();
    }

    // latent update
    if (b.latent_value.size() > 0) {
      const MatrixXd da = norm_backward(dnodes, b.latent_norm_gain, bc.latent_norm,
                                        gb.latent_norm_gain, gb.latent_norm_bias);
      const VectorXd du = da.colwise().sum().transpose();
      gb.latent_value.noalias() += du * c.z.transpose();
      dz.noalias() += b.latent_value.transpose() * du;
      dnodes = da;
    }
  }
  g.label_embeddings += dnodes;

  gp.encoder_b2.col(0) += dz;
  gp.encoder_w2.noalias() += dz * c.enc_hidden.transpose();
  VectorXd dh = params.encoder_w2.transpose() * dz;
  dh = (c.enc_hidden_pre.array() > 0.0).select(dh, 0.0);
  gp.encoder_b1.col(0) += dh;
  for (const auto& e : features) gp.encoder_w1.col(e.index).noalias() += e.value * dh;
}

Gradients zero_gradients(const ModelParams& params, const LabelEmbeddings& embeddings) {
  return {zeros_like(params), MatrixXd::Zero(idx(embeddings.num_labels()), idx(embeddings.dim())),
          MatrixXd()};
}

void add_into(Gradients& dst, Gradients& src) {
  std::vector<MatrixXd*> targets;
  for_each_array(dst.params, [&](const std::string&, MatrixXd& m, bool) { targets.push_back(&m); });
  std::size_t i = 0;
  for_each_array(src.params, [&](const std::string&, MatrixXd& m, bool) { *targets[i++] += m; });
  dst.label_embeddings += src.label_embeddings;
}

struct ChunkResult {
  Gradients grads;
  double data_loss = 0.0;
};

void run_chunk(const MultiLabelDataset& data, std::span<const std::size_t> samples,
               const LabelEmbeddings& embeddings, const ModelParams& params, const LossSpec& spec,
               double inv_batch, ChunkResult& out) {
  SampleCache cache;
  std::vector<double> probs(data.num_labels()), dprobs(data.num_labels());
  VectorXd dprobs_vec(idx(data.num_labels()));
  for (const auto i : samples) {
    run_forward(data.features[i], embeddings.current, params, cache);
    for (std::size_t l = 0; l < probs.size(); ++l) probs[l] = cache.probs(idx(l));
    out.data_loss += asl_with_gradient(data.labels.row(i), probs, spec, dprobs) * inv_batch;
    for (std::size_t l = 0; l < probs.size(); ++l) dprobs_vec(idx(l)) = dprobs[l] * inv_batch;
    run_backward(data.features[i], cache, dprobs_vec, params, out.grads);
  }
}

std::string first_non_finite(const ModelParams& params, const LabelEmbeddings& embeddings) {
  std::string found;
  for_each_array(params, [&](const std::string& name, const MatrixXd& m, bool) {
    if (found.empty() && !m.allFinite()) found = name;
  });
  if (found.empty() && !embeddings.current.allFinite()) found = kLabelEmbeddingArray;
  if (found.empty() && !embeddings.anchors().allFinite()) found = "label_anchors";
  return found.empty() ? "predicted probabilities" : found;
}

}  // namespace

void ModelConfig::validate() const {
  if (num_features == 0 || num_labels == 0 || label_dim == 0) {
    throw ConfigError("num_features, num_labels and label_dim must be positive");
  }
  if (num_layers == 0) throw ConfigError("num_layers must be at least 1");
  if (num_heads == 0 || label_dim % num_heads != 0) {
    throw ConfigError("label_dim " + std::to_string(label_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (encoder_hidden == 0 || feedforward_hidden == 0) {
    throw ConfigError("encoder_hidden and feedforward_hidden must be positive");
  }
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  RandomStream rng(seed, kInitStream);
  const Index s = idx(cfg.num_features), he = idx(cfg.encoder_hidden), d = idx(cfg.label_dim),
              f = idx(cfg.feedforward_hidden), l = idx(cfg.num_labels);
  const auto dd = static_cast<double>(d);
  ModelParams p;
  p.config = cfg;
  p.encoder_w1 = glorot(he, s, static_cast<double>(s), static_cast<double>(he), rng);
  p.encoder_b1 = MatrixXd::Zero(he, 1);
  p.encoder_w2 = glorot(d, he, static_cast<double>(he), dd, rng);
  p.encoder_b2 = MatrixXd::Zero(d, 1);
  const MatrixXd ones = MatrixXd::Ones(1, d);
  const MatrixXd zeros = MatrixXd::Zero(1, d);
  p.blocks.resize(cfg.num_layers);
  for (std::size_t t = 0; t < cfg.num_layers; ++t) {
    auto& b = p.blocks[t];
    if (cfg.block_has_latent(t)) {
      b.latent_value = glorot(d, d, dd, dd, rng);
      b.latent_norm_gain = ones;
      b.latent_norm_bias = zeros;
    }
    b.query = glorot(d, d, dd, dd, rng);
    b.key = glorot(d, d, dd, dd, rng);
    b.value = glorot(d, d, dd, dd, rng);
    b.output = glorot(d, d, dd, dd, rng);
    b.attention_norm_gain = ones;
    b.attention_norm_bias = zeros;
    b.ff_w1 = glorot(d, f, dd, static_cast<double>(f), rng);
    b.ff_b1 = MatrixXd::Zero(1, f);
    b.ff_w2 = glorot(f, d, static_cast<double>(f), dd, rng);
    b.ff_b2 = zeros;
    b.ff_norm_gain = ones;
    b.ff_norm_bias = zeros;
  }
  p.readout = glorot(l, d, dd, 1.0, rng);
  return p;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams z = params;
  for_each_array(z, [](const std::string&, MatrixXd& m, bool) { m.setZero(); });
  return z;
}

VectorXd encode(const SparseRow& features, const ModelParams& params) {
  VectorXd h = params.encoder_b1.col(0);
  for (const auto& e : features) {
    if (e.index >= params.config.num_features) throw ConfigError("feature index out of range");
    h.noalias() += e.value * params.encoder_w1.col(e.index);
  }
  return params.encoder_w2 * h.cwiseMax(0.0) + params.encoder_b2.col(0);
}

MatrixXd softmax_rows(const MatrixXd& scores) {
  MatrixXd out = scores.colwise() - scores.rowwise().maxCoeff();
  out = out.array().exp().matrix();
  const VectorXd sums = out.rowwise().sum();
  return sums.cwiseInverse().asDiagonal() * out;
}

std::vector<MatrixXd> attention_weights(const MatrixXd& nodes, const MatrixXd& query,
                                        const MatrixXd& key, std::size_t num_heads) {
  if (num_heads == 0 || nodes.cols() % idx(num_heads) != 0) {
    throw ConfigError("node width must be divisible by the head count");
  }
  const MatrixXd q = nodes * query;
  const MatrixXd k = nodes * key;
  const Index dh = nodes.cols() / idx(num_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<MatrixXd> alpha(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const Index off = idx(h) * dh;
    alpha[h] = softmax_rows(scale * (q.middleCols(off, dh) * k.middleCols(off, dh).transpose()));
  }
  return alpha;
}

MatrixXd message_pass(const MatrixXd& nodes, std::span<const MatrixXd> alpha,
                      const MatrixXd& value, const MatrixXd& output) {
  if (alpha.empty() || nodes.cols() % idx(alpha.size()) != 0) {
    throw ConfigError("node width must be divisible by the head count");
  }
  const MatrixXd v = nodes * value;
  const Index dh = nodes.cols() / idx(alpha.size());
  MatrixXd context(nodes.rows(), nodes.cols());
  for (std::size_t h = 0; h < alpha.size(); ++h) {
    const Index off = idx(h) * dh;
    context.middleCols(off, dh).noalias() = alpha[h] * v.middleCols(off, dh);
  }
  MatrixXd m = nodes;
  m.noalias() += context * output;
  return m;
}

MatrixXd layer_norm(const MatrixXd& x, const MatrixXd& gain, const MatrixXd& bias) {
  NormCache cache;
  return norm_forward(x, gain, bias, cache);
}

VectorXd decoder_forward(const VectorXd& z, const MatrixXd& label_embeddings,
                         const ModelParams& params, ForwardTrace* trace) {
  if (z.size() != idx(params.config.label_dim) || label_embeddings.cols() != z.size() ||
      label_embeddings.rows() != params.readout.rows()) {
    throw ConfigError("decoder inputs do not match the model shape");
  }
  const CanonicalLabels canon = canonical_labels(label_embeddings, params.readout);
  SampleCache c;
  c.z = z;
  ForwardTrace local;
  run_decoder(canon.embeddings, params, canon.readout, c, trace ? &local : nullptr);
  if (trace) {
    trace->sublayers += local.sublayers;
    trace->latent_updates += local.latent_updates;
    for (auto& heads : local.attention) {
      for (auto& a : heads) {
        const MatrixXd rows = restore_rows(a, canon.order);
        a = restore_rows(rows.transpose(), canon.order).transpose();
      }
      trace->attention.push_back(std::move(heads));
    }
    for (const auto& n : local.normalized) trace->normalized.push_back(restore_rows(n, canon.order));
  }
  return restore_rows(c.probs, canon.order).col(0);
}

MatrixXd predict(std::span<const SparseRow> features, const LabelEmbeddings& embeddings,
                 const ModelParams& params) {
  if (embeddings.num_labels() != params.config.num_labels || embeddings.dim() != params.config.label_dim) {
    throw ConfigError("embeddings and model disagree on label count or width");
  }
  for (const auto& row : features) {
    for (const auto& e : row) {
      if (e.index >= params.config.num_features) throw ConfigError("feature index out of range");
    }
  }
  const CanonicalLabels canon = canonical_labels(embeddings.current, params.readout);
  MatrixXd out(idx(features.size()), idx(params.config.num_labels));
  SampleCache cache;
  for (std::size_t i = 0; i < features.size(); ++i) {
    run_forward(features[i], canon.embeddings, params, cache, &canon.readout);
    for (std::size_t l = 0; l < canon.order.size(); ++l) out(idx(i), canon.order[l]) = cache.probs(idx(l));
  }
  return out;
}

ForwardBackwardResult forward_backward(const MultiLabelDataset& data,
                                       std::span<const std::size_t> batch,
                                       const LabelEmbeddings& embeddings,
                                       const ModelParams& params, const LossSpec& spec,
                                       std::size_t threads) {
  if (batch.empty()) throw ConfigError("forward_backward needs a non-empty batch");
  if (data.num_labels() != params.config.num_labels ||
      embeddings.num_labels() != params.config.num_labels ||
      embeddings.dim() != params.config.label_dim) {
    throw ConfigError("dataset, embeddings and model disagree on label count or width");
  }
  if (data.num_features != params.config.num_features) {
    throw ConfigError("dataset has " + std::to_string(data.num_features) + " features, model expects " +
                      std::to_string(params.config.num_features));
  }
  for (const auto i : batch) {
    if (i >= data.num_samples()) throw ConfigError("batch index out of range");
  }
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  threads = std::clamp<std::size_t>(threads, 1, batch.size());

  std::vector<ChunkResult> chunks(threads);
  for (auto& c : chunks) c.grads = zero_gradients(params, embeddings);
  const std::size_t per = (batch.size() + threads - 1) / threads;
  auto chunk_span = [&](std::size_t t) {
    const std::size_t lo = std::min(batch.size(), t * per);
    const std::size_t hi = std::min(batch.size(), lo + per);
    return batch.subspan(lo, hi - lo);
  };
  if (threads == 1) {
    run_chunk(data, batch, embeddings, params, spec, inv_batch, chunks[0]);
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        run_chunk(data, chunk_span(t), embeddings, params, spec, inv_batch, chunks[t]);
      });
    }
  }

  ForwardBackwardResult result;
  result.gradients = std::move(chunks[0].grads);
  result.data_loss = chunks[0].data_loss;
  for (std::size_t t = 1; t < threads; ++t) {
    add_into(result.gradients, chunks[t].grads);
    result.data_loss += chunks[t].data_loss;
  }

  const auto reg = context_regularizer(embeddings);
  result.regularizer = reg.value;
  result.gradients.regularizer_part = spec.lambda * reg.gradient;
  if (spec.lambda != 0.0) result.gradients.label_embeddings += result.gradients.regularizer_part;
  result.loss = result.data_loss + spec.lambda * reg.value;
  if (!std::isfinite(result.loss)) {
    throw NumericalError("non-finite loss; first offending array: " +
                         first_non_finite(params, embeddings));
  }
  return result;
}

std::vector<std::uint8_t> kink_pattern(const MultiLabelDataset& data,
                                       std::span<const std::size_t> batch,
                                       const LabelEmbeddings& embeddings,
                                       const ModelParams& params, const LossSpec& spec) {
  std::vector<std::uint8_t> pattern;
  SampleCache cache;
  auto signs = [&pattern](const auto& m) {
    for (Index k = 0; k < m.size(); ++k) pattern.push_back(m.data()[k] > 0.0);
  };
  for (const auto i : batch) {
    run_forward(data.features[i], embeddings.current, params, cache);
    signs(cache.enc_hidden_pre);
    for (const auto& b : cache.blocks) signs(b.ff_hidden_pre);
    for (std::size_t l = 0; l < data.num_labels(); ++l) {
      const double p = cache.probs(idx(l));
      std::uint8_t code = p < spec.clamp_eps ? 0 : p > 1.0 - spec.clamp_eps ? 1 : 2;
      if (code == 2 && !data.labels(i, l) && p <= spec.shift_m) code = 3;
      pattern.push_back(code);
    }
  }
  return pattern;
}

}  // namespace ctxmlc
