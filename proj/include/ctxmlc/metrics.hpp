#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ctxmlc/dataset.hpp"
#include "ctxmlc/embeddings.hpp"

namespace ctxmlc {

/// 1 where probability >= threshold.
LabelMatrix binarize(const Eigen::MatrixXd& probabilities, double threshold = 0.5);

// Example-based F1. A row where both truth and prediction are empty scores 1.
double ebf1(const LabelMatrix& truth, const LabelMatrix& predicted);
// Micro F1 over all cells; 0 when there is no positive anywhere.
double mif1(const LabelMatrix& truth, const LabelMatrix& predicted);
// Macro F1; a label with no positives in truth or prediction scores 0.
double maf1(const LabelMatrix& truth, const LabelMatrix& predicted);

struct LabelCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double f1 = 0.0;
};

struct MetricsReport {
  double ebf1 = 0.0;
  double mif1 = 0.0;
  double maf1 = 0.0;
  std::vector<LabelCounts> per_label;
};

MetricsReport evaluate(const LabelMatrix& truth, const LabelMatrix& predicted);

/// `ebF1=<v> miF1=<v> maF1=<v>`
std::string format_metrics_line(const MetricsReport& report);

/// label_index,name,tp,fp,fn,f1. `names` may be empty.
void write_per_label_csv(std::ostream& out, const MetricsReport& report,
                         std::span<const std::string> names);

struct CooccurrenceDistance {
  double ratio = 0.0;
  std::size_t pairs_used = 0;
  double top_mean = 0.0;
  double all_mean = 0.0;
};

/// Mean Euclidean distance between the current embeddings of the k most
/// frequently co-occurring label pairs (ties: lexicographic pair order),
/// divided by the mean distance over all unordered pairs.
CooccurrenceDistance top_cooccurrence_distance(const LabelEmbeddings& embeddings,
                                               const LabelMatrix& labels, std::size_t k);

}  // namespace ctxmlc
