#include "ctxmlc/noise.hpp"

#include "ctxmlc/errors.hpp"
#include "ctxmlc/random.hpp"

namespace ctxmlc {
namespace {

// Stream ids keep the draws of different procedures independent.
constexpr std::uint32_t kUniformStream = 1;
constexpr std::uint32_t kPositiveStream = 2;
constexpr std::uint32_t kSingleStream = 3;
constexpr std::uint32_t kCombinedRowStream = 4;
constexpr std::uint32_t kCombinedCellStream = 5;
constexpr std::uint32_t kCombinedPickStream = 6;
constexpr std::uint32_t kCombinedGateStream = 7;

constexpr double kCombinedUniformMaxRate = 0.10;
constexpr double kCombinedPositiveMaxRate = 0.50;

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("noise rate must be in [0, 1]");
}

void flip_cells(std::span<std::uint8_t> row, std::size_t r, double rate, const CounterRng& rng,
                std::uint32_t stream, bool positives_only) {
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (positives_only && row[c] == 0) continue;
    if (rng.uniform(r, static_cast<std::uint32_t>(c), stream) < rate) row[c] ^= 1u;
  }
}

void keep_one_positive(std::span<std::uint8_t> row, std::size_t r, const CounterRng& rng,
                       std::uint32_t stream) {
  std::size_t k = 0;
  for (const auto v : row) k += v;
  if (k <= 1) return;
  auto pick = static_cast<std::size_t>(rng.uniform(r, 0, stream) * static_cast<double>(k));
  if (pick >= k) pick = k - 1;
  std::size_t seen = 0;
  for (auto& v : row) {
    if (v == 0) continue;
    v = seen == pick ? 1 : 0;
    ++seen;
  }
}

}  // namespace

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "uniform") return NoiseKind::uniform;
  if (name == "positive") return NoiseKind::positive;
  if (name == "single-positive" || name == "single_positive") return NoiseKind::single_positive;
  if (name == "combined") return NoiseKind::combined;
  throw ConfigError("unknown noise kind '" + std::string(name) +
                    "' (expected uniform, positive, single-positive or combined)");
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::uniform: return "uniform";
    case NoiseKind::positive: return "positive";
    case NoiseKind::single_positive: return "single-positive";
    case NoiseKind::combined: return "combined";
  }
  return "?";
}

void NoiseSpec::validate() const {
  if (kind == NoiseKind::uniform || kind == NoiseKind::positive) check_rate(rate);
}

LabelMatrix inject_uniform(const LabelMatrix& labels, double rate, std::uint64_t seed) {
  check_rate(rate);
  const CounterRng rng(seed);
  LabelMatrix out = labels;
  for (std::size_t r = 0; r < out.rows(); ++r) flip_cells(out.row(r), r, rate, rng, kUniformStream, false);
  return out;
}

LabelMatrix inject_positive(const LabelMatrix& labels, double rate, std::uint64_t seed) {
  check_rate(rate);
  const CounterRng rng(seed);
  LabelMatrix out = labels;
  for (std::size_t r = 0; r < out.rows(); ++r) flip_cells(out.row(r), r, rate, rng, kPositiveStream, true);
  return out;
}

LabelMatrix inject_single_positive(const LabelMatrix& labels, std::uint64_t seed) {
  const CounterRng rng(seed);
  LabelMatrix out = labels;
  for (std::size_t r = 0; r < out.rows(); ++r) keep_one_positive(out.row(r), r, rng, kSingleStream);
  return out;
}

CombinedNoise inject_combined(const LabelMatrix& labels, std::uint64_t seed, bool always_corrupt) {
  const CounterRng rng(seed);
  CombinedNoise result{labels, std::vector<std::optional<NoiseKind>>(labels.rows()),
                       std::vector<double>(labels.rows(), 0.0)};
  for (std::size_t r = 0; r < labels.rows(); ++r) {
    if (!always_corrupt && rng.uniform(r, 0, kCombinedGateStream) >= 1.0 / 3.0) continue;
    const auto [type_u, rate_u] = rng.uniform2(r, 0, kCombinedRowStream);
    auto type = static_cast<int>(type_u * 3.0);
    if (type > 2) type = 2;
    auto row = result.labels.row(r);
    switch (type) {
      case 0:
        result.row_kinds[r] = NoiseKind::uniform;
        result.row_rates[r] = rate_u * kCombinedUniformMaxRate;
        flip_cells(row, r, result.row_rates[r], rng, kCombinedCellStream, false);
        break;
      case 1:
        result.row_kinds[r] = NoiseKind::positive;
        result.row_rates[r] = rate_u * kCombinedPositiveMaxRate;
        flip_cells(row, r, result.row_rates[r], rng, kCombinedCellStream, true);
        break;
      default:
        result.row_kinds[r] = NoiseKind::single_positive;
        keep_one_positive(row, r, rng, kCombinedPickStream);
        break;
    }
  }
  return result;
}

LabelMatrix inject_noise(const LabelMatrix& labels, const NoiseSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case NoiseKind::uniform: return inject_uniform(labels, spec.rate, spec.seed);
    case NoiseKind::positive: return inject_positive(labels, spec.rate, spec.seed);
    case NoiseKind::single_positive: return inject_single_positive(labels, spec.seed);
    case NoiseKind::combined:
      return inject_combined(labels, spec.seed, spec.combined_always_corrupt).labels;
  }
  return labels;
}

NoiseSummary summarize_noise(const LabelMatrix& before, const LabelMatrix& after) {
  if (before.rows() != after.rows() || before.cols() != after.cols()) {
    throw ConfigError("noise summary needs matrices of equal shape");
  }
  NoiseSummary s;
  s.positives_before = before.total_positives();
  s.positives_after = after.total_positives();
  for (std::size_t r = 0; r < before.rows(); ++r) {
    std::size_t changed = 0;
    const auto a = before.row(r);
    const auto b = after.row(r);
    for (std::size_t c = 0; c < a.size(); ++c) changed += a[c] != b[c];
    s.cells_changed += changed;
    s.rows_touched += changed > 0;
  }
  return s;
}

}  // namespace ctxmlc
