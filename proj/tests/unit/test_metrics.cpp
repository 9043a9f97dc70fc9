#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ctxmlc/errors.hpp"
#include "ctxmlc/log.hpp"
#include "ctxmlc/metrics.hpp"
#include "ctxmlc/random.hpp"
#include "oracles.hpp"

using namespace ctxmlc;

namespace {

LabelMatrix from(const oracle::Matrix& m) {
  LabelMatrix out(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m[i].size(); ++j) out(i, j) = static_cast<std::uint8_t>(m[i][j]);
  }
  return out;
}

oracle::Matrix random_matrix(RandomStream& rng, std::size_t n, std::size_t l) {
  oracle::Matrix m(n, std::vector<int>(l));
  const double density = rng.uniform();
  for (auto& row : m) {
    for (auto& v : row) v = rng.uniform() < density;
  }
  return m;
}

}  // namespace

TEST_CASE("worked two-by-two example") {
  const oracle::Matrix y{{1, 0}, {1, 1}}, p{{1, 1}, {0, 1}};
  CHECK(ebf1(from(y), from(p)) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(mif1(from(y), from(p)) == doctest::Approx(4.0 / 6).epsilon(1e-15));
  CHECK(maf1(from(y), from(p)) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(oracle::ebf1(y, p) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  const auto r = evaluate(from(y), from(p));
  CHECK(r.per_label[0].tp == 1);
  CHECK(r.per_label[0].fn == 1);
  CHECK(r.per_label[1].fp == 1);
}

TEST_CASE("edge cases") {
  const oracle::Matrix y{{1, 0}, {0, 1}};
  CHECK(ebf1(from(y), from(y)) == 1.0);
  CHECK(mif1(from(y), from(y)) == 1.0);
  CHECK(maf1(from(y), from(y)) == 1.0);
  CHECK(ebf1(from(y), from({{0, 1}, {1, 0}})) == 0.0);
  CHECK(mif1(from(y), from({{0, 0}, {0, 0}})) == 0.0);
  CHECK(maf1(from(y), from({{1, 0}, {0, 0}})) == 0.5);
  CHECK(ebf1(from({{0, 0}}), from({{0, 0}})) == 1.0);
  CHECK(mif1(from({{0, 0}}), from({{0, 0}})) == 0.0);
  CHECK_THROWS_AS(ebf1(from(y), from({{1, 0}})), Error);
}

TEST_CASE("metrics equal the brute-force oracle") {
  RandomStream rng(4, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(20), l = 1 + rng.below(8);
    const auto y = random_matrix(rng, n, l), p = random_matrix(rng, n, l);
    CHECK(std::abs(ebf1(from(y), from(p)) - oracle::ebf1(y, p)) <= 1e-12);
    CHECK(std::abs(mif1(from(y), from(p)) - oracle::mif1(y, p)) <= 1e-12);
    CHECK(std::abs(maf1(from(y), from(p)) - oracle::maf1(y, p)) <= 1e-12);
  }
}

TEST_CASE("invariances") {
  RandomStream rng(8, 8);
  for (int trial = 0; trial < 100; ++trial) {
    auto y = random_matrix(rng, 10, 5), p = random_matrix(rng, 10, 5);
    const double mi = mif1(from(y), from(p)), ma = maf1(from(y), from(p));
    CHECK(ebf1(from(y), from(p)) >= 0.0);
    CHECK(ebf1(from(y), from(p)) <= 1.0);
    std::swap(y[0], y[9]);
    std::swap(p[0], p[9]);
    CHECK(mif1(from(y), from(p)) == mi);
    for (auto* m : {&y, &p}) {
      for (auto& row : *m) std::swap(row[1], row[4]);
    }
    CHECK(std::abs(maf1(from(y), from(p)) - ma) < 1e-15);
  }
}

TEST_CASE("binarize") {
  Eigen::MatrixXd p(2, 2);
  p << 0.5, 0.4999, 0.9, 0.1;
  const auto b = binarize(p);
  CHECK(b(0, 0) == 1);
  CHECK(b(0, 1) == 0);
  CHECK(binarize(p, 0.999).total_positives() == 0);
  std::size_t prev = p.size();
  for (double t = 0.0; t <= 1.0; t += 0.05) {
    const auto n = binarize(p, t).total_positives();
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("report formatting") {
  const auto r = evaluate(from({{1, 0}, {1, 1}}), from({{1, 1}, {0, 1}}));
  CHECK(format_metrics_line(r) == "ebF1=0.666667 miF1=0.666667 maF1=0.666667");
  std::ostringstream out;
  const std::vector<std::string> names{"a,b", "c"};
  write_per_label_csv(out, r, names);
  CHECK(out.str() ==
        "label_index,name,tp,fp,fn,f1\n0,\"a,b\",1,0,1,0.666667\n1,c,1,1,0,0.666667\n");
}

TEST_CASE("co-occurrence distance") {
  // Labels 0 and 1 co-occur most; put them close together.
  LabelMatrix y(4, 3);
  y(0, 0) = y(0, 1) = 1;
  y(1, 0) = y(1, 1) = 1;
  y(2, 1) = y(2, 2) = 1;
  y(3, 0) = 1;
  Eigen::MatrixXd e(3, 2);
  e << 0, 0, 0.1, 0, 5, 5;
  const auto d = top_cooccurrence_distance(LabelEmbeddings(e), y, 1);
  const double d01 = 0.1, d02 = std::sqrt(50.0), d12 = std::sqrt(4.9 * 4.9 + 25);
  CHECK(d.pairs_used == 1);
  CHECK(d.ratio == doctest::Approx(d01 / ((d01 + d02 + d12) / 3)));
  CHECK(d.ratio < 1.0);

  Eigen::MatrixXd simplex(3, 3);
  simplex << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  simplex /= std::sqrt(2.0);
  CHECK(top_cooccurrence_distance(LabelEmbeddings(simplex), y, 1).ratio == doctest::Approx(1.0));
  CHECK(top_cooccurrence_distance(LabelEmbeddings(simplex), y, 2).ratio == doctest::Approx(1.0));

  log::ScopedCapture capture;
  const auto many = top_cooccurrence_distance(LabelEmbeddings(e), y, 100);
  CHECK(many.pairs_used == 2);
  CHECK(capture.messages().size() == 1);
  const auto flat = top_cooccurrence_distance(LabelEmbeddings(Eigen::MatrixXd::Ones(3, 2)), y, 1);
  CHECK(flat.ratio == 0.0);
  CHECK(capture.messages().size() == 2);
}
