#include "doctest.h"

#include "aero/noise.hpp"
#include "aero/optim.hpp"

#include <random>

using namespace aero;
using noise::DegreeNorm;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.values()) v = g(rng);
  return m;
}

}  // namespace

TEST_CASE("cosine graph of parallel and orthogonal rows") {
  auto g = noise::window_graph(Matrix{{1, 0}, {2, 0}});
  CHECK(g.similarity(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  g = noise::window_graph(Matrix{{1, 0}, {0, 1}});
  CHECK(std::abs(g.similarity(0, 1)) <= 1e-12);
  CHECK(g.adjacency(0, 0) == 0.0);
  CHECK(g.isolated(0));
}

TEST_CASE("zero-norm rows have zero similarity") {
  const auto g = noise::window_graph(Matrix{{0, 0, 0}, {1, 2, 3}, {2, 4, 6}});
  CHECK(g.similarity(0, 0) == 0.0);
  CHECK(g.similarity(0, 1) == 0.0);
  CHECK(g.similarity(1, 1) == doctest::Approx(1.0));
  CHECK(g.isolated(0));
  CHECK_FALSE(g.isolated(1));
}

TEST_CASE("hand-computed transition") {
  const auto g = noise::window_graph(Matrix{{1, 0}, {1, 1}, {0, 1}});
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(g.similarity(0, 1) == doctest::Approx(r));
  CHECK(g.similarity(0, 2) == doctest::Approx(0.0));
  CHECK(g.degrees[1] == doctest::Approx(std::sqrt(2.0)));
  const auto p = g.transition();
  const Matrix expected{{0, 1, 0}, {0.5, 0, 0.5}, {0, 1, 0}};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(p(i, j) == doctest::Approx(expected(i, j)));
  }
}

TEST_CASE("signed and absolute degree norms differ once weights change sign") {
  const Matrix e{{1, 0}, {1, 1}, {-1, 0}};
  const double r = 1.0 / std::sqrt(2.0);
  const auto s = noise::window_graph(e, DegreeNorm::signed_sum).transition();
  const auto a = noise::window_graph(e, DegreeNorm::absolute_sum).transition();
  // row 0 neighbours: +r and -1
  CHECK(s(0, 1) == doctest::Approx(r / std::abs(r - 1.0)));
  CHECK(s(0, 2) == doctest::Approx(-1.0 / std::abs(r - 1.0)));
  CHECK(a(0, 1) == doctest::Approx(r / (r + 1.0)));
  CHECK(a(0, 2) == doctest::Approx(-1.0 / (r + 1.0)));
}

TEST_CASE("graph invariants on random errors") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto e = random_matrix(rng, 6, 10);
    for (auto norm : {DegreeNorm::signed_sum, DegreeNorm::absolute_sum}) {
      const auto g = noise::window_graph(e, norm);
      for (std::size_t m = 0; m < 6; ++m) {
        CHECK(g.adjacency(m, m) == 0.0);
        CHECK(g.similarity(m, m) == doctest::Approx(1.0).epsilon(1e-12));
        double deg = 0.0;
        for (std::size_t n = 0; n < 6; ++n) {
          CHECK(g.similarity(m, n) == g.similarity(n, m));
          CHECK(g.similarity(m, n) <= 1.0);
          CHECK(g.similarity(m, n) >= -1.0);
          deg += g.adjacency(m, n);
        }
        CHECK(g.degrees[m] == doctest::Approx(deg));
      }
    }
  }
}

TEST_CASE("identical error rows give unit similarity") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto e = random_matrix(rng, 4, 12);
    for (std::size_t c = 0; c < 12; ++c) e(2, c) = e(0, c);
    const auto g = noise::window_graph(e);
    CHECK(std::abs(g.similarity(0, 2) - 1.0) <= 1e-12);
  }
}

TEST_CASE("absolute_sum rows of the transition have unit L1 norm") {
  std::mt19937_64 rng(4);
  const auto g = noise::window_graph(random_matrix(rng, 5, 7), DegreeNorm::absolute_sum);
  const auto p = g.transition();
  for (std::size_t m = 0; m < 5; ++m) {
    double l1 = 0.0;
    for (std::size_t n = 0; n < 5; ++n) l1 += std::abs(p(m, n));
    CHECK(l1 == doctest::Approx(1.0));
  }
}

TEST_CASE("gcn swap, empty adjacency and zero module") {
  noise::NoiseModule m(3, noise::Activation::identity);
  m.weight.value = Matrix::identity(3);
  const Matrix y{{1, 2, 3}, {4, 5, 6}};
  const auto g = noise::window_graph(Matrix{{1, 1, 0}, {2, 2, 0}});
  CHECK(noise::gcn_reconstruct(g, y, m) == Matrix{{4, 5, 6}, {1, 2, 3}});

  m.bias.value = Matrix{{0.1, 0.2, 0.3}};
  const auto iso = noise::window_graph(Matrix{{1, 0, 0}, {0, 1, 0}});
  const auto out = noise::gcn_reconstruct(iso, y, m);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(out(r, 0) == doctest::Approx(0.1));
    CHECK(out(r, 2) == doctest::Approx(0.3));
  }

  noise::NoiseModule zero(3);
  CHECK(noise::gcn_reconstruct(g, y, zero) == Matrix(2, 3));
}

TEST_CASE("a row never feeds its own message") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const auto e = random_matrix(rng, 5, 8);
    auto y = random_matrix(rng, 5, 8);
    for (auto norm : {DegreeNorm::signed_sum, DegreeNorm::absolute_sum}) {
      const auto g = noise::window_graph(e, norm);
      const auto before = noise::propagate(g, y);
      const std::size_t m = static_cast<std::size_t>(trial) % 5;
      auto y2 = y;
      for (std::size_t c = 0; c < 8; ++c) y2(m, c) += 10.0 * (c + 1);
      const auto after = noise::propagate(g, y2);
      for (std::size_t c = 0; c < 8; ++c) CHECK(after(m, c) == before(m, c));
    }
  }
}

TEST_CASE("complete graph mixes every other variate equally") {
  const auto g = noise::complete_graph(4);
  const auto p = g.transition();
  for (std::size_t m = 0; m < 4; ++m) {
    for (std::size_t n = 0; n < 4; ++n) CHECK(p(m, n) == doctest::Approx(m == n ? 0.0 : 1.0 / 3.0));
  }
}

TEST_CASE("untrained stage 2 leaves the stage-1 error and N=1 degenerates") {
  std::mt19937_64 rng(5);
  const auto y = random_matrix(rng, 3, 6);
  const auto y1 = random_matrix(rng, 3, 6);
  const auto out = noise::stage2_from_y1(y, y1, noise::NoiseModule(6));
  CHECK(out.y2 == Matrix(3, 6));
  CHECK(out.residual == out.error);

  noise::NoiseModule m(6);
  m.bias.value.fill(0.2);
  const auto single = noise::stage2_from_y1(random_matrix(rng, 1, 6), random_matrix(rng, 1, 6), m);
  CHECK(single.graph.adjacency(0, 0) == 0.0);
  for (double v : single.y2.values()) CHECK(v == doctest::Approx(std::tanh(0.2)));
}

TEST_CASE("stage-2 gradients pass the finite-difference check") {
  std::mt19937_64 rng(6);
  const auto y = random_matrix(rng, 4, 5);
  const auto e = random_matrix(rng, 4, 5);
  noise::NoiseModule m(5);
  m.weight.value = nn::glorot_uniform(5, 5, rng);
  m.bias.value = nn::glorot_uniform(1, 5, rng);
  const auto g = noise::window_graph(e);
  std::vector<nn::Parameter*> params = m.parameters();
  auto loss = [&](nn::Tape& t) {
    auto y2 = noise::gcn_reconstruct(t, g, y, m, temporal::Binding::trainable);
    return nn::mse(y2, t.constant(e));
  };
  CHECK(nn::grad_check(loss, params).max_rel_error < 1e-6);
}

TEST_CASE("graph mode names") {
  CHECK(noise::parse_graph_mode("window") == noise::GraphMode::window);
  CHECK(noise::parse_graph_mode("complete") == noise::GraphMode::complete);
  CHECK_THROWS_AS(noise::parse_graph_mode("dynamic"), std::invalid_argument);
  CHECK_THROWS_AS(noise::parse_degree_norm("l2"), std::invalid_argument);
}
