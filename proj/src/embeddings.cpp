#include "ctxmlc/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <unordered_set>

#include "ctxmlc/errors.hpp"
#include "ctxmlc/log.hpp"
#include "ctxmlc/random.hpp"

namespace ctxmlc {
namespace {

constexpr std::uint32_t kOovStream = 0x00E7B001u;
constexpr std::uint32_t kRandomAnchorStream = 0x00E7B002u;

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; };
  while (pos < s.size()) {
    while (pos < s.size() && is_ws(s[pos])) ++pos;
    const auto start = pos;
    while (pos < s.size() && !is_ws(s[pos])) ++pos;
    if (pos > start) out.push_back(s.substr(start, pos - start));
  }
  return out;
}

}  // namespace

std::string normalize_token(std::string_view token) {
  std::string out(token);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
  });
  return out;
}

bool WordEmbeddingTable::insert(std::string token, std::span<const double> vector) {
  if (vector.size() != dim_) throw ConfigError("embedding vector has wrong dimension");
  if (token.empty()) throw ConfigError("embedding token must be non-empty");
  token = normalize_token(token);
  if (const auto it = index_.find(token); it != index_.end()) {
    std::copy(vector.begin(), vector.end(), values_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    return true;
  }
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  values_.insert(values_.end(), vector.begin(), vector.end());
  return false;
}

std::optional<std::span<const double>> WordEmbeddingTable::find(std::string_view token) const {
  const auto it = index_.find(normalize_token(token));
  if (it == index_.end()) return std::nullopt;
  return std::span<const double>(values_.data() + it->second * dim_, dim_);
}

WordEmbeddingTable parse_word_embeddings(std::istream& in) {
  std::optional<WordEmbeddingTable> table;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    const auto parts = split_whitespace(line);
    if (parts.empty()) continue;
    if (parts.size() < 2) throw ParseError("embedding line has no values", line_no);
    values.clear();
    for (std::size_t k = 1; k < parts.size(); ++k) {
      double v = 0.0;
      const auto tok = parts[k];
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw ParseError("non-numeric embedding value '" + std::string(tok) + "'", line_no);
      }
      values.push_back(v);
    }
    if (!table) table.emplace(values.size());
    if (values.size() != table->dim()) {
      throw ParseError("expected " + std::to_string(table->dim()) + " values, found " +
                           std::to_string(values.size()),
                       line_no);
    }
    if (table->insert(std::string(parts[0]), values)) {
      log::warn("duplicate embedding token '" + std::string(parts[0]) + "' on line " +
                std::to_string(line_no) + "; keeping the last occurrence");
    }
  }
  if (!table) throw ParseError("no embeddings", 0);
  return std::move(*table);
}

WordEmbeddingTable load_word_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file " + path.string());
  try {
    return parse_word_embeddings(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

LabelEmbeddings::LabelEmbeddings(Eigen::MatrixXd anchors)
    : current(anchors), anchors_(std::move(anchors)) {}

LabelEmbeddings::LabelEmbeddings(Eigen::MatrixXd current_values, Eigen::MatrixXd anchors)
    : current(std::move(current_values)), anchors_(std::move(anchors)) {
  if (current.rows() != anchors_.rows() || current.cols() != anchors_.cols()) {
    throw ConfigError("current and anchor label embeddings must share shape");
  }
}

LabelEmbeddings init_label_embeddings(std::span<const std::string> names,
                                      const WordEmbeddingTable& table, std::uint64_t seed) {
  if (names.empty()) throw ConfigError("no label names given");
  if (table.empty()) throw ConfigError("word embedding table is empty");
  const auto dim = static_cast<Eigen::Index>(table.dim());

  std::vector<std::vector<std::string>> tokens(names.size());
  std::vector<std::string> oov_order;
  std::unordered_set<std::string> seen_in_vocab, seen_oov;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(dim);

  for (std::size_t l = 0; l < names.size(); ++l) {
    for (const auto part : split_whitespace(names[l])) {
      auto token = normalize_token(part);
      if (const auto vec = table.find(token)) {
        if (seen_in_vocab.insert(token).second) {
          const Eigen::Map<const Eigen::VectorXd> v(vec->data(), dim);
          sum += v;
          sum_sq += v.cwiseAbs2();
        }
      } else if (seen_oov.insert(token).second) {
        oov_order.push_back(token);
      }
      tokens[l].push_back(std::move(token));
    }
    if (tokens[l].empty()) throw ConfigError("label " + std::to_string(l) + " has an empty name");
  }

  std::unordered_map<std::string, Eigen::VectorXd> oov_vectors;
  if (!oov_order.empty()) {
    if (seen_in_vocab.empty()) {
      throw ConfigError(
          "no label token is in the embedding vocabulary; cannot estimate the "
          "distribution for out-of-vocabulary tokens");
    }
    const double count = static_cast<double>(seen_in_vocab.size());
    const Eigen::VectorXd mean = sum / count;
    const Eigen::VectorXd stddev =
        (sum_sq / count - mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
    RandomStream rng(seed, kOovStream);
    for (const auto& token : oov_order) {
      Eigen::VectorXd v(dim);
      for (Eigen::Index p = 0; p < dim; ++p) v(p) = mean(p) + stddev(p) * rng.normal();
      oov_vectors.emplace(token, std::move(v));
    }
  }

  Eigen::MatrixXd anchors(static_cast<Eigen::Index>(names.size()), dim);
  for (std::size_t l = 0; l < names.size(); ++l) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
    for (const auto& token : tokens[l]) {
      if (const auto vec = table.find(token)) {
        acc += Eigen::Map<const Eigen::VectorXd>(vec->data(), dim);
      } else {
        acc += oov_vectors.at(token);
      }
    }
    anchors.row(static_cast<Eigen::Index>(l)) = acc.transpose() / static_cast<double>(tokens[l].size());
  }
  return LabelEmbeddings(std::move(anchors));
}

LabelEmbeddings init_random_label_embeddings(std::size_t num_labels, std::size_t dim,
                                             std::uint64_t seed, double scale) {
  RandomStream rng(seed, kRandomAnchorStream);
  Eigen::MatrixXd anchors(static_cast<Eigen::Index>(num_labels), static_cast<Eigen::Index>(dim));
  for (Eigen::Index l = 0; l < anchors.rows(); ++l) {
    for (Eigen::Index p = 0; p < anchors.cols(); ++p) anchors(l, p) = scale * rng.normal();
  }
  return LabelEmbeddings(std::move(anchors));
}

RegularizerValue context_regularizer(const LabelEmbeddings& embeddings) {
  const Eigen::MatrixXd diff = embeddings.current - embeddings.anchors();
  return {diff.squaredNorm(), 2.0 * diff};
}

}  // namespace ctxmlc
