#include "ctxmlc/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "ctxmlc/errors.hpp"
#include "ctxmlc/log.hpp"

namespace ctxmlc {
namespace {

void check_shapes(const LabelMatrix& a, const LabelMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError("metric inputs differ in shape: " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
  }
}

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

std::vector<LabelCounts> count_per_label(const LabelMatrix& truth, const LabelMatrix& pred) {
  std::vector<LabelCounts> counts(truth.cols());
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    const auto y = truth.row(i);
    const auto p = pred.row(i);
    for (std::size_t l = 0; l < truth.cols(); ++l) {
      counts[l].tp += y[l] & p[l];
      counts[l].fp += (1 - y[l]) & p[l];
      counts[l].fn += y[l] & (1 - p[l]);
    }
  }
  for (auto& c : counts) c.f1 = f1_from_counts(c.tp, c.fp, c.fn);
  return counts;
}

}  // namespace

LabelMatrix binarize(const Eigen::MatrixXd& probabilities, double threshold) {
  LabelMatrix out(static_cast<std::size_t>(probabilities.rows()),
                  static_cast<std::size_t>(probabilities.cols()));
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    for (Eigen::Index l = 0; l < probabilities.cols(); ++l) {
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(l)) = probabilities(i, l) >= threshold;
    }
  }
  return out;
}

double ebf1(const LabelMatrix& truth, const LabelMatrix& pred) {
  check_shapes(truth, pred);
  if (truth.rows() == 0) throw ConfigError("ebF1 needs at least one sample");
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    const auto y = truth.row(i);
    const auto p = pred.row(i);
    std::size_t both = 0, ny = 0, np = 0;
    for (std::size_t l = 0; l < y.size(); ++l) {
      both += y[l] & p[l];
      ny += y[l];
      np += p[l];
    }
    if (ny + np == 0) {
      sum += 1.0;
    } else {
      sum += 2.0 * static_cast<double>(both) / static_cast<double>(ny + np);
    }
  }
  return sum / static_cast<double>(truth.rows());
}

double mif1(const LabelMatrix& truth, const LabelMatrix& pred) {
  check_shapes(truth, pred);
  std::size_t tp = 0, fp = 0, fn = 0;
  const auto y = truth.data();
  const auto p = pred.data();
  for (std::size_t k = 0; k < y.size(); ++k) {
    tp += y[k] & p[k];
    fp += (1 - y[k]) & p[k];
    fn += y[k] & (1 - p[k]);
  }
  return f1_from_counts(tp, fp, fn);
}

double maf1(const LabelMatrix& truth, const LabelMatrix& pred) {
  check_shapes(truth, pred);
  if (truth.cols() == 0) throw ConfigError("maF1 needs at least one label");
  double sum = 0.0;
  for (const auto& c : count_per_label(truth, pred)) sum += c.f1;
  return sum / static_cast<double>(truth.cols());
}

MetricsReport evaluate(const LabelMatrix& truth, const LabelMatrix& predicted) {
  MetricsReport report;
  report.ebf1 = ebf1(truth, predicted);
  report.mif1 = mif1(truth, predicted);
  report.per_label = count_per_label(truth, predicted);
  double sum = 0.0;
  for (const auto& c : report.per_label) sum += c.f1;
  report.maf1 = sum / static_cast<double>(report.per_label.size());
  return report;
}

std::string format_metrics_line(const MetricsReport& report) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "ebF1=%.6f miF1=%.6f maF1=%.6f", report.ebf1, report.mif1,
                report.maf1);
  return buf;
}

void write_per_label_csv(std::ostream& out, const MetricsReport& report,
                         std::span<const std::string> names) {
  out << "label_index,name,tp,fp,fn,f1\n";
  char buf[32];
  for (std::size_t l = 0; l < report.per_label.size(); ++l) {
    const auto& c = report.per_label[l];
    std::string name = l < names.size() ? names[l] : "";
    if (name.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (const char ch : name) {
        if (ch == '"') quoted += '"';
        quoted += ch;
      }
      name = quoted + "\"";
    }
    std::snprintf(buf, sizeof buf, "%.6f", c.f1);
    out << l << ',' << name << ',' << c.tp << ',' << c.fp << ',' << c.fn << ',' << buf << '\n';
  }
}

CooccurrenceDistance top_cooccurrence_distance(const LabelEmbeddings& embeddings,
                                               const LabelMatrix& labels, std::size_t k) {
  const std::size_t num_labels = labels.cols();
  if (embeddings.num_labels() != num_labels) {
    throw ConfigError("embedding rows differ from label count");
  }
  if (num_labels < 2) throw ConfigError("co-occurrence distance needs at least two labels");
  if (k == 0) throw ConfigError("k must be positive");

  struct Pair {
    std::size_t a, b, count;
  };
  std::vector<Pair> pairs;
  pairs.reserve(num_labels * (num_labels - 1) / 2);
  std::vector<std::size_t> counts(num_labels * num_labels, 0);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    active.clear();
    const auto row = labels.row(i);
    for (std::size_t l = 0; l < num_labels; ++l) {
      if (row[l]) active.push_back(l);
    }
    for (std::size_t x = 0; x < active.size(); ++x) {
      for (std::size_t y = x + 1; y < active.size(); ++y) ++counts[active[x] * num_labels + active[y]];
    }
  }

  const auto& e = embeddings.current;
  double all_sum = 0.0;
  for (std::size_t a = 0; a < num_labels; ++a) {
    for (std::size_t b = a + 1; b < num_labels; ++b) {
      all_sum += (e.row(static_cast<Eigen::Index>(a)) - e.row(static_cast<Eigen::Index>(b))).norm();
      if (const auto c = counts[a * num_labels + b]; c > 0) pairs.push_back({a, b, c});
    }
  }
  if (pairs.empty()) throw ConfigError("no label pair co-occurs in the given labels");
  if (pairs.size() < k) {
    log::warn("only " + std::to_string(pairs.size()) + " co-occurring label pairs, fewer than k=" +
              std::to_string(k) + "; using all of them");
    k = pairs.size();
  }
  // Pairs were generated in lexicographic order, so a stable sort keeps ties ordered.
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& x, const Pair& y) { return x.count > y.count; });

  CooccurrenceDistance out;
  out.pairs_used = k;
  double top_sum = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    top_sum += (e.row(static_cast<Eigen::Index>(pairs[p].a)) - e.row(static_cast<Eigen::Index>(pairs[p].b))).norm();
  }
  out.top_mean = top_sum / static_cast<double>(k);
  out.all_mean = all_sum / static_cast<double>(num_labels * (num_labels - 1) / 2);
  if (out.all_mean == 0.0) {
    log::warn("all label embeddings coincide; distance ratio is undefined, reporting 0");
    out.ratio = 0.0;
  } else {
    out.ratio = out.top_mean / out.all_mean;
  }
  return out;
}

}  // namespace ctxmlc
