#include "ctxmlc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string_view>

#include "ctxmlc/errors.hpp"

namespace ctxmlc {

std::size_t LabelMatrix::row_positives(std::size_t r) const {
  const auto cells = row(r);
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

std::size_t LabelMatrix::total_positives() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

LabelMatrix LabelMatrix::select_rows(std::span<const std::size_t> indices) const {
  LabelMatrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && first != last;
}

std::vector<std::string_view> split_spaces(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (pos < s.size()) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    if (pos >= s.size()) break;
    const auto end = s.find_first_of(" \t", pos);
    const auto stop = end == std::string_view::npos ? s.size() : end;
    parts.push_back(s.substr(pos, stop - pos));
    pos = stop;
  }
  return parts;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

MultiLabelDataset parse_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t n = 0, num_labels = 0, num_features = 0;

  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto parts = split_spaces(t);
    if (parts.size() != 3 || !parse_number(parts[0], n) || !parse_number(parts[1], num_labels) ||
        !parse_number(parts[2], num_features)) {
      throw ParseError("malformed header, expected 'N L S'", line_no);
    }
    if (n == 0 || num_labels == 0 || num_features == 0) {
      throw ParseError("header values N, L, S must be positive", line_no);
    }
    have_header = true;
    break;
  }
  if (!have_header) throw ParseError("missing header line", 0);

  MultiLabelDataset ds;
  ds.num_features = num_features;
  ds.labels = LabelMatrix(n, num_labels);
  ds.features.resize(n);

  std::size_t row = 0;
  while (row < n) {
    if (!std::getline(in, line)) {
      throw ParseError("expected " + std::to_string(n) + " samples, found " + std::to_string(row),
                       line_no);
    }
    ++line_no;
    strip_cr(line);
    const std::string_view text(line);
    const auto tab = text.find('\t');
    if (tab == std::string_view::npos) {
      throw ParseError("missing TAB between label field and feature field", line_no);
    }

    const auto label_field = trim(text.substr(0, tab));
    if (!label_field.empty()) {
      std::size_t pos = 0;
      while (pos <= label_field.size()) {
        const auto comma = label_field.find(',', pos);
        const auto stop = comma == std::string_view::npos ? label_field.size() : comma;
        const auto token = trim(label_field.substr(pos, stop - pos));
        std::size_t index = 0;
        if (!parse_number(token, index)) {
          throw ParseError("invalid label index '" + std::string(token) + "'", line_no);
        }
        if (index >= num_labels) {
          throw ParseError("label index " + std::to_string(index) + " out of range [0, " +
                               std::to_string(num_labels) + ")",
                           line_no);
        }
        auto& cell = ds.labels(row, index);
        if (cell != 0) {
          throw ParseError("duplicate label index " + std::to_string(index), line_no);
        }
        cell = 1;
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
      }
    }

    auto& features = ds.features[row];
    for (const auto token : split_spaces(text.substr(tab + 1))) {
      const auto colon = token.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError("feature '" + std::string(token) + "' is not index:value", line_no);
      }
      std::uint32_t index = 0;
      double value = 0.0;
      if (!parse_number(token.substr(0, colon), index)) {
        throw ParseError("invalid feature index in '" + std::string(token) + "'", line_no);
      }
      if (!parse_number(token.substr(colon + 1), value)) {
        throw ParseError("invalid feature value in '" + std::string(token) + "'", line_no);
      }
      if (index >= num_features) {
        throw ParseError("feature index " + std::to_string(index) + " out of range [0, " +
                             std::to_string(num_features) + ")",
                         line_no);
      }
      features.push_back({index, value});
    }
    std::sort(features.begin(), features.end(),
              [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
    const auto dup = std::adjacent_find(
        features.begin(), features.end(),
        [](const SparseEntry& a, const SparseEntry& b) { return a.index == b.index; });
    if (dup != features.end()) {
      throw ParseError("duplicate feature index " + std::to_string(dup->index), line_no);
    }
    ++row;
  }

  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (!trim(line).empty()) {
      throw ParseError("more sample lines than the header's N=" + std::to_string(n), line_no);
    }
  }
  return ds;
}

MultiLabelDataset parse_dataset(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in);
}

MultiLabelDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file " + path.string());
  try {
    return parse_dataset(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

std::vector<std::string> parse_label_names(std::istream& in) {
  std::vector<std::string> names;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    const auto t = trim(line);
    if (t.empty()) throw ParseError("empty label name", line_no);
    names.emplace_back(t);
  }
  return names;
}

std::vector<std::string> load_label_names(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open label-name file " + path.string());
  try {
    return parse_label_names(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

void attach_label_names(MultiLabelDataset& dataset, std::vector<std::string> names) {
  if (names.size() != dataset.num_labels()) {
    throw ConfigError("label-name count " + std::to_string(names.size()) +
                      " does not match dataset label count " +
                      std::to_string(dataset.num_labels()));
  }
  dataset.label_names = std::move(names);
}

void write_dataset(std::ostream& out, const MultiLabelDataset& ds) {
  out << ds.num_samples() << ' ' << ds.num_labels() << ' ' << ds.num_features << '\n';
  char buf[64];
  for (std::size_t i = 0; i < ds.num_samples(); ++i) {
    bool first = true;
    for (std::size_t l = 0; l < ds.num_labels(); ++l) {
      if (ds.labels(i, l) == 0) continue;
      if (!first) out << ',';
      out << l;
      first = false;
    }
    out << '\t';
    SparseRow row = ds.features[i];
    std::sort(row.begin(), row.end(),
              [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
    first = true;
    for (const auto& e : row) {
      std::snprintf(buf, sizeof buf, "%.17g", e.value);
      if (!first) out << ' ';
      out << e.index << ':' << buf;
      first = false;
    }
    out << '\n';
  }
}

std::string write_dataset(const MultiLabelDataset& dataset) {
  std::ostringstream out;
  write_dataset(out, dataset);
  return out.str();
}

void save_dataset(const std::filesystem::path& path, const MultiLabelDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset file " + path.string());
  write_dataset(out, dataset);
  if (!out) throw Error("write failed for " + path.string());
}

void validate(const MultiLabelDataset& ds) {
  if (ds.num_samples() == 0 || ds.num_labels() == 0 || ds.num_features == 0) {
    throw ConfigError("dataset dimensions N, L, S must be positive");
  }
  if (ds.features.size() != ds.num_samples()) {
    throw ConfigError("feature row count differs from label row count");
  }
  for (std::size_t i = 0; i < ds.features.size(); ++i) {
    const auto& row = ds.features[i];
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k].index >= ds.num_features) {
        throw ConfigError("sample " + std::to_string(i) + ": feature index out of range");
      }
      if (k > 0 && row[k].index <= row[k - 1].index) {
        throw ConfigError("sample " + std::to_string(i) +
                          ": feature indices must be strictly ascending");
      }
    }
  }
  for (const auto v : ds.labels.data()) {
    if (v > 1) throw ConfigError("label entries must be 0 or 1");
  }
  if (!ds.label_names.empty()) {
    if (ds.label_names.size() != ds.num_labels()) {
      throw ConfigError("label_names must have exactly L entries");
    }
    for (const auto& name : ds.label_names) {
      if (trim(name).empty()) throw ConfigError("label names must be non-empty");
    }
  }
}

MultiLabelDataset subset(const MultiLabelDataset& ds, std::span<const std::size_t> indices) {
  MultiLabelDataset out;
  out.num_features = ds.num_features;
  out.labels = ds.labels.select_rows(indices);
  out.label_names = ds.label_names;
  out.features.reserve(indices.size());
  for (const auto i : indices) out.features.push_back(ds.features[i]);
  return out;
}

}  // namespace ctxmlc
