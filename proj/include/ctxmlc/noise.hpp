#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxmlc/dataset.hpp"

namespace ctxmlc {

enum class NoiseKind {
  uniform,          // every cell flipped with probability `rate`
  positive,         // every positive cell turned negative with probability `rate`
  single_positive,  // keep one uniformly chosen positive per row
  combined,         // per row, one of the three above with a random rate
};

NoiseKind parse_noise_kind(std::string_view name);
std::string_view to_string(NoiseKind kind);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::uniform;
  double rate = 0.0;  // used by uniform and positive only
  std::uint64_t seed = 0;
  // Combined noise: corrupt every row (true), or only a third of the rows.
  bool combined_always_corrupt = true;

  void validate() const;
};

// Every draw is keyed by (seed, row, cell) so results do not depend on the
// order rows are visited.
LabelMatrix inject_uniform(const LabelMatrix& labels, double rate, std::uint64_t seed);
LabelMatrix inject_positive(const LabelMatrix& labels, double rate, std::uint64_t seed);
LabelMatrix inject_single_positive(const LabelMatrix& labels, std::uint64_t seed);

struct CombinedNoise {
  LabelMatrix labels;
  // Noise type applied to each row; nullopt when the row was left clean.
  std::vector<std::optional<NoiseKind>> row_kinds;
  std::vector<double> row_rates;  // sampled rate; 0 for single_positive rows
};

/// Per row, picks one of {uniform, positive, single_positive} with
/// probability 1/3 each. Uniform rows draw a flip rate from U[0, 0.10],
/// positive rows from U[0, 0.50].
CombinedNoise inject_combined(const LabelMatrix& labels, std::uint64_t seed,
                              bool always_corrupt = true);

LabelMatrix inject_noise(const LabelMatrix& labels, const NoiseSpec& spec);

struct NoiseSummary {
  std::size_t rows_touched = 0;
  std::size_t cells_changed = 0;
  std::size_t positives_before = 0;
  std::size_t positives_after = 0;
};

NoiseSummary summarize_noise(const LabelMatrix& before, const LabelMatrix& after);

}  // namespace ctxmlc
