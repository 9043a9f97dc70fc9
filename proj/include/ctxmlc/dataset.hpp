#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ctxmlc {

struct SparseEntry {
  std::uint32_t index;
  double value;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Feature row sorted by ascending index.
using SparseRow = std::vector<SparseEntry>;

/// Dense row-major N x L matrix of {0,1} labels.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::uint8_t operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::uint8_t& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const std::uint8_t> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<std::uint8_t> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  std::span<const std::uint8_t> data() const noexcept { return data_; }

  std::size_t row_positives(std::size_t r) const;
  std::size_t total_positives() const;

  // Rows listed in `indices`, in that order.
  LabelMatrix select_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> data_;
};

struct MultiLabelDataset {
  std::size_t num_features = 0;
  std::vector<SparseRow> features;
  LabelMatrix labels;
  // Empty until attach_label_names() is called; exactly L entries afterwards.
  std::vector<std::string> label_names;

  std::size_t num_samples() const noexcept { return labels.rows(); }
  std::size_t num_labels() const noexcept { return labels.cols(); }

  friend bool operator==(const MultiLabelDataset&, const MultiLabelDataset&) = default;
};

/// Parses the canonical text format:
///
///   # optional comment lines
///   N L S
///   <label,label,...>\t<index:value index:value ...>   (N lines)
///
/// Feature rows are returned sorted by index. Throws ParseError with the
/// offending line number.
MultiLabelDataset parse_dataset(std::istream& in);
MultiLabelDataset parse_dataset(const std::string& text);
MultiLabelDataset load_dataset(const std::filesystem::path& path);

/// One non-empty name per line, trimmed.
std::vector<std::string> parse_label_names(std::istream& in);
std::vector<std::string> load_label_names(const std::filesystem::path& path);

/// Throws ConfigError when the name count differs from the label count.
void attach_label_names(MultiLabelDataset& dataset, std::vector<std::string> names);

/// Writes the canonical format; values use 17 significant digits so parsing
/// the output reproduces the dataset bit for bit.
void write_dataset(std::ostream& out, const MultiLabelDataset& dataset);
std::string write_dataset(const MultiLabelDataset& dataset);
void save_dataset(const std::filesystem::path& path, const MultiLabelDataset& dataset);

/// Checks every invariant; throws ConfigError describing the first violation.
void validate(const MultiLabelDataset& dataset);

/// Samples listed in `indices`, in that order.
MultiLabelDataset subset(const MultiLabelDataset& dataset, std::span<const std::size_t> indices);

}  // namespace ctxmlc
