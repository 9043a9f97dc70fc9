#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctxmlc {

/// Pretrained word vectors, GloVe text layout. Tokens are stored lowercased.
class WordEmbeddingTable {
 public:
  explicit WordEmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }

  // Inserts or overwrites; returns true when the token already existed.
  bool insert(std::string token, std::span<const double> vector);

  // Lookup is case-insensitive.
  std::optional<std::span<const double>> find(std::string_view token) const;

 private:
  std::size_t dim_;
  std::vector<std::string> tokens_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Lowercases ASCII letters; other bytes pass through.
std::string normalize_token(std::string_view token);

/// Parses `token v1 ... vP` lines; P comes from the first line. A repeated
/// token overwrites the earlier vector and emits a warning.
WordEmbeddingTable parse_word_embeddings(std::istream& in);
WordEmbeddingTable load_word_embeddings(const std::filesystem::path& path);

/// Trainable label embeddings plus the frozen anchors they are regularized
/// towards. Rows are labels.
class LabelEmbeddings {
 public:
  LabelEmbeddings() = default;
  // current starts equal to the anchors.
  explicit LabelEmbeddings(Eigen::MatrixXd anchors);
  LabelEmbeddings(Eigen::MatrixXd current, Eigen::MatrixXd anchors);

  std::size_t num_labels() const noexcept { return static_cast<std::size_t>(anchors_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(anchors_.cols()); }

  const Eigen::MatrixXd& anchors() const noexcept { return anchors_; }

  Eigen::MatrixXd current;

 private:
  Eigen::MatrixXd anchors_;
};

/// Builds h(s_l) for each label name: the mean over its whitespace tokens of
/// the word vector, or of a seeded N(mu, sigma) draw for out-of-vocabulary
/// tokens, where mu and sigma are per-dimension statistics over the
/// in-vocabulary label tokens. Throws ConfigError when some token is
/// out-of-vocabulary and no label token is in the vocabulary.
LabelEmbeddings init_label_embeddings(std::span<const std::string> names,
                                      const WordEmbeddingTable& table, std::uint64_t seed);

/// Anchors drawn i.i.d. from N(0, scale^2); used when no word vectors exist.
LabelEmbeddings init_random_label_embeddings(std::size_t num_labels, std::size_t dim,
                                             std::uint64_t seed, double scale = 1.0);

struct RegularizerValue {
  double value = 0.0;
  Eigen::MatrixXd gradient;  // d value / d current
};

/// sum over all entries of (current - anchors)^2 and its gradient.
RegularizerValue context_regularizer(const LabelEmbeddings& embeddings);

}  // namespace ctxmlc
