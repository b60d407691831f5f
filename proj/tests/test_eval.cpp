#include "doctest.h"

#include "aero/eval.hpp"

#include <random>

using namespace aero;
using eval::Segment;

namespace {

BinaryMatrix row_matrix(std::initializer_list<int> bits) {
  BinaryMatrix m(1, bits.size());
  std::size_t c = 0;
  for (int b : bits) m.set(0, c++, b != 0);
  return m;
}

BinaryMatrix random_binary(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double p) {
  std::bernoulli_distribution bit(p);
  BinaryMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m.set(r, c, bit(rng));
  }
  return m;
}

/// Walks each truth run cell by cell and credits the whole run when any
/// prediction inside it fires; counts afterwards with plain loops.
eval::Metrics brute_force(const BinaryMatrix& pred, const BinaryMatrix& truth) {
  std::vector<std::vector<int>> adj(pred.rows(), std::vector<int>(pred.cols()));
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    for (std::size_t c = 0; c < pred.cols(); ++c) adj[r][c] = pred(r, c);
    std::size_t c = 0;
    while (c < truth.cols()) {
      if (!truth(r, c)) {
        ++c;
        continue;
      }
      std::size_t e = c;
      bool any = false;
      for (; e < truth.cols() && truth(r, e); ++e) any = pred(r, e) || any;
      for (std::size_t k = c; k < e; ++k) adj[r][k] = adj[r][k] || any;
      c = e;
    }
  }
  eval::Metrics m;
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      if (adj[r][c] && truth(r, c)) ++m.tp;
      if (adj[r][c] && !truth(r, c)) ++m.fp;
      if (!adj[r][c] && truth(r, c)) ++m.fn;
    }
  }
  return m;
}

}  // namespace

TEST_CASE("extract_segments finds maximal runs") {
  CHECK(eval::extract_segments(row_matrix({0, 1, 1, 0, 1})) == std::vector<Segment>{{0, 1, 2}, {0, 4, 4}});
  CHECK(eval::extract_segments(row_matrix({0, 0, 0})).empty());
  CHECK(eval::extract_segments(row_matrix({1, 1, 1, 1})) == std::vector<Segment>{{0, 0, 3}});
}

TEST_CASE("point_adjust fills detected segments only") {
  const auto truth = row_matrix({0, 0, 0, 1, 1, 1, 0});
  CHECK(eval::point_adjust(row_matrix({0, 0, 0, 0, 1, 0, 0}), truth) == row_matrix({0, 0, 0, 1, 1, 1, 0}));
  const auto miss = row_matrix({0, 0, 1, 0, 0, 0, 0});
  CHECK(eval::point_adjust(miss, truth) == miss);
  const auto empty = row_matrix({0, 0, 0, 0, 0, 0, 0});
  CHECK(eval::point_adjust(empty, truth) == empty);
  CHECK_THROWS_AS(eval::point_adjust(row_matrix({1}), truth), std::invalid_argument);
}

TEST_CASE("prf formulas and conventions") {
  auto m = eval::prf(row_matrix({1, 1, 1, 0}), row_matrix({1, 1, 0, 0}));
  CHECK(m.tp == 2);
  CHECK(m.fp == 1);
  CHECK(m.fn == 0);
  CHECK(m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.recall == doctest::Approx(1.0));
  CHECK(m.f1 == doctest::Approx(0.8));

  m = eval::prf(row_matrix({0, 0}), row_matrix({0, 0}));
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);

  const auto t = row_matrix({0, 1, 1, 0});
  m = eval::prf(t, t);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);
}

TEST_CASE("point_adjust is idempotent and never removes positives") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pred = random_binary(rng, 5, 50, 0.1);
    const auto truth = random_binary(rng, 5, 50, 0.3);
    const auto once = eval::point_adjust(pred, truth);
    CHECK(eval::point_adjust(once, truth) == once);
    CHECK(once.count() >= pred.count());
    const auto m = eval::prf(once, truth);
    CHECK(m.precision >= 0.0);
    CHECK(m.precision <= 1.0);
    CHECK(m.recall <= 1.0);
    CHECK(m.f1 <= 1.0);
  }
}

TEST_CASE("adjusted counts match a segment-walking recount") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> density(0.02, 0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pred = random_binary(rng, 5, 50, density(rng));
    const auto truth = random_binary(rng, 5, 50, density(rng));
    const auto got = eval::evaluate(pred, truth, true);
    const auto want = brute_force(pred, truth);
    REQUIRE(got.tp == want.tp);
    REQUIRE(got.fp == want.fp);
    REQUIRE(got.fn == want.fn);
  }
}

TEST_CASE("metrics report uses percentages with two decimals") {
  eval::Metrics m;
  m.precision = 2.0 / 3.0;
  m.recall = 1.0;
  m.f1 = 0.8;
  const auto r = eval::metrics_report(m);
  CHECK(r.find("precision = 66.67") != std::string::npos);
  CHECK(r.find("recall = 100.00") != std::string::npos);
  CHECK(r.find("f1 = 80.00") != std::string::npos);
}

TEST_CASE("unknown ablation variant is rejected") {
  CHECK(eval::parse_variant("static_graph") == eval::Variant::static_graph);
  CHECK_THROWS_AS(eval::parse_variant("dynamic"), std::invalid_argument);
}
