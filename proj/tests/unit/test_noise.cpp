#include <doctest.h>

#include <cmath>

#include "ctxmlc/errors.hpp"
#include "ctxmlc/noise.hpp"
#include "ctxmlc/random.hpp"

using namespace ctxmlc;

namespace {

LabelMatrix random_labels(std::size_t n, std::size_t l, double density, std::uint64_t seed) {
  RandomStream rng(seed, 5);
  LabelMatrix m(n, l);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < l; ++j) m(i, j) = rng.uniform() < density;
  }
  return m;
}

LabelMatrix row_of(std::initializer_list<int> v) {
  LabelMatrix m(1, v.size());
  std::size_t j = 0;
  for (int x : v) m(0, j++) = static_cast<std::uint8_t>(x);
  return m;
}

bool binary(const LabelMatrix& m) {
  for (auto v : m.data()) {
    if (v > 1) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("uniform noise extremes") {
  const auto y = random_labels(30, 7, 0.3, 1);
  CHECK(inject_uniform(y, 0.0, 3) == y);
  const auto all = inject_uniform(y, 1.0, 3);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(all.data()[i] == 1 - y.data()[i]);
}

TEST_CASE("uniform flip fraction") {
  const auto y = random_labels(1000, 100, 0.2, 2);
  for (double p : {0.01, 0.1, 0.5}) {
    const auto s = summarize_noise(y, inject_uniform(y, p, 11));
    const double n = static_cast<double>(y.size());
    CHECK(std::abs(s.cells_changed / n - p) < 4 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("positive noise only removes positives") {
  const auto y = random_labels(400, 20, 0.3, 4);
  for (double p : {0.0, 0.3, 1.0}) {
    const auto out = inject_positive(y, p, 8);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(out.data()[i] <= y.data()[i]);
  }
  CHECK(inject_positive(y, 1.0, 8).total_positives() == 0);
  CHECK(inject_positive(y, 0.0, 8) == y);
}

TEST_CASE("positive noise rate") {
  const auto y = random_labels(2000, 100, 0.5, 6);
  const double k = static_cast<double>(y.total_positives());
  REQUIRE(k > 9e4);
  const auto s = summarize_noise(y, inject_positive(y, 0.5, 21));
  CHECK(std::abs(s.cells_changed / k - 0.5) < 4 * std::sqrt(0.25 / k));
}

TEST_CASE("single positive examples") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto out = inject_single_positive(row_of({0, 1, 0, 1}), seed);
    CHECK(out.row_positives(0) == 1);
    CHECK(out(0, 0) == 0);
    CHECK(out(0, 2) == 0);
  }
  CHECK(inject_single_positive(row_of({0, 0, 0}), 1) == row_of({0, 0, 0}));
  CHECK(inject_single_positive(row_of({1, 0, 0}), 1) == row_of({1, 0, 0}));
}

TEST_CASE("single positive survivor is uniform") {
  const std::size_t rows = 30000;
  LabelMatrix y(rows, 3);
  for (std::size_t i = 0; i < rows; ++i) y(i, 0) = y(i, 1) = y(i, 2) = 1;
  const auto out = inject_single_positive(y, 5);
  for (std::size_t j = 0; j < 3; ++j) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < rows; ++i) c += out(i, j);
    CHECK(std::abs(c / double(rows) - 1.0 / 3) < 4 * std::sqrt(2.0 / 9 / rows));
  }
}

TEST_CASE("combined noise type shares") {
  const auto y = random_labels(30000, 10, 0.3, 7);
  const auto c = inject_combined(y, 13);
  const double n = 30000;
  const double band = 4 * std::sqrt(n * (1.0 / 3) * (2.0 / 3));
  std::size_t counts[3] = {0, 0, 0};
  for (std::size_t i = 0; i < y.rows(); ++i) {
    REQUIRE(c.row_kinds[i].has_value());
    const auto kind = *c.row_kinds[i];
    if (kind == NoiseKind::uniform) {
      ++counts[0];
      CHECK(c.row_rates[i] >= 0.0);
      CHECK(c.row_rates[i] <= 0.10);
    } else if (kind == NoiseKind::positive) {
      ++counts[1];
      CHECK(c.row_rates[i] <= 0.50);
      for (std::size_t j = 0; j < y.cols(); ++j) CHECK(c.labels(i, j) <= y(i, j));
    } else {
      ++counts[2];
      CHECK(c.labels.row_positives(i) <= 1);
    }
  }
  for (auto k : counts) CHECK(std::abs(k - n / 3) < band);
}

TEST_CASE("gated combined noise leaves about two thirds of rows alone") {
  const auto y = random_labels(30000, 10, 0.3, 7);
  const auto c = inject_combined(y, 13, false);
  std::size_t untouched = 0;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    if (!c.row_kinds[i]) {
      ++untouched;
      for (std::size_t j = 0; j < y.cols(); ++j) CHECK(c.labels(i, j) == y(i, j));
    }
  }
  CHECK(std::abs(untouched - 20000.0) < 4 * std::sqrt(30000 * 2.0 / 9));
}

TEST_CASE("injectors are deterministic and keep shape") {
  const auto y = random_labels(50, 9, 0.3, 9);
  for (const auto kind : {NoiseKind::uniform, NoiseKind::positive, NoiseKind::single_positive, NoiseKind::combined}) {
    NoiseSpec s{kind, 0.2, 31, true};
    const auto a = inject_noise(y, s);
    CHECK(a == inject_noise(y, s));
    CHECK(a.rows() == y.rows());
    CHECK(a.cols() == y.cols());
    CHECK(binary(a));
    if (kind == NoiseKind::positive || kind == NoiseKind::single_positive) {
      for (std::size_t i = 0; i < y.rows(); ++i) CHECK(a.row_positives(i) <= y.row_positives(i));
    }
  }
}

TEST_CASE("noise kinds and validation") {
  CHECK(parse_noise_kind("single-positive") == NoiseKind::single_positive);
  CHECK(parse_noise_kind("single_positive") == NoiseKind::single_positive);
  CHECK(parse_noise_kind("combined") == NoiseKind::combined);
  CHECK(to_string(NoiseKind::positive) == "positive");
  CHECK_THROWS_AS(parse_noise_kind("gaussian"), ConfigError);
  NoiseSpec s;
  s.rate = 1.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}
