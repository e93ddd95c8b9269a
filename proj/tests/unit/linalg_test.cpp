#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "logbel/linalg.hpp"

namespace logbel {
namespace {

ScaledVector random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform() * 4.0 - 1.0;
  return ScaledVector(v, static_cast<long>(rng.index(200)) - 100);
}

ScaledMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::vector<double> d(r * c);
  for (auto& x : d) x = rng.uniform() * 2.0 - 0.5;
  return ScaledMatrix(r, c, d, static_cast<long>(rng.index(200)) - 100);
}

ScaledMatrix diag(const ScaledVector& v) {
  ScaledMatrix m(v.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m.mutable_mantissa()[i * v.size() + i] = v.mantissa()[i];
  m.shift_exponent(v.exponent());
  return m;
}

TEST(Identities, StarAndDiag) {
  Rng rng(71);
  OpCounters ops;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(9);
    const std::size_t m = 1 + rng.index(9);
    const auto a = random_vector(n, rng), b = random_vector(n, rng), c = random_vector(n, rng);
    const auto M = random_matrix(m, n, rng);
    const auto N = random_matrix(n, m, rng);
    EXPECT_LE(max_relative_difference(hadamard(a, b, ops), hadamard(b, a, ops)), 1e-12);
    EXPECT_LE(max_relative_difference(hadamard(a, hadamard(b, c, ops), ops), hadamard(hadamard(a, b, ops), c, ops)), 1e-12);
    EXPECT_LE(max_relative_difference(multiply(M, hadamard(a, b, ops), ops), multiply(scale_columns(M, a, ops), b, ops)), 1e-12);
    EXPECT_LE(max_relative_difference(multiply_transposed(N, hadamard(a, b, ops), ops),
                                      multiply_transposed(scale_rows(N, b, ops), a, ops)),
              1e-12);
  }
}

TEST(Scaled, DiagHelpersAgreeWithExplicitDiagonal) {
  Rng rng(72);
  OpCounters ops;
  for (int trial = 0; trial < 100; ++trial) {
    const auto M = random_matrix(3, 4, rng);
    const auto d = random_vector(4, rng);
    const auto e = random_vector(3, rng);
    EXPECT_LE(max_relative_difference(scale_columns(M, d, ops), multiply(M, diag(d), ops)), 1e-14);
    EXPECT_LE(max_relative_difference(scale_rows(M, e, ops), multiply(diag(e), M, ops)), 1e-14);
  }
}

TEST(Scaled, SurvivesProductsThatUnderflowDoubles) {
  OpCounters ops;
  ScaledVector v = ScaledVector::ones(2);
  const ScaledVector tiny({1e-200, 3e-200});
  for (int i = 0; i < 20; ++i) v = hadamard(v, tiny, ops);
  EXPECT_EQ(v.value(0), 0.0);
  const auto n = v.normalized();
  ASSERT_EQ(n.size(), 2u);
  EXPECT_NEAR(n[0], 1.0 / (1.0 + std::pow(3.0, 20)), 1e-15);
  EXPECT_NEAR(v.log_sum(), 20 * std::log(1e-200) + std::log(1.0 + std::pow(3.0, 20)), 1e-9);
}

TEST(Scaled, CountersFollowShapes) {
  OpCounters ops;
  const auto M = ScaledMatrix(3, 4);
  multiply(M, ScaledVector::ones(4), ops);
  EXPECT_EQ(ops.matrix_vector_mults, 1u);
  EXPECT_EQ(ops.scalar_mult_adds, 12u);
  multiply(M, ScaledMatrix(4, 5), ops);
  EXPECT_EQ(ops.matrix_matrix_mults, 1u);
  EXPECT_EQ(ops.scalar_mult_adds, 12u + 60u);
  multiply(M, Selection::identity(4));
  gather(Selection::identity(4), ScaledVector::ones(4));
  EXPECT_EQ(ops.scalar_mult_adds, 72u);
}

TEST(Scaled, SelectionProductsMatchDense) {
  Rng rng(73);
  OpCounters ops;
  const Selection s({2, 0, 1, 2, 0}, 3);
  const auto M = random_matrix(4, 5, rng);
  const auto P = random_matrix(3, 4, rng);
  const auto v = random_vector(3, rng);
  EXPECT_LE(max_relative_difference(multiply(M, s), multiply(M, s.to_dense(), ops)), 1e-15);
  EXPECT_LE(max_relative_difference(multiply(s, P), multiply(s.to_dense(), P, ops)), 1e-15);
  EXPECT_LE(max_relative_difference(gather(s, v), multiply(s.to_dense(), v, ops)), 1e-15);
  const auto w = random_vector(5, rng);
  EXPECT_LE(max_relative_difference(scatter_add(s, w), multiply_transposed(s.to_dense(), w, ops)), 1e-15);
}

}  // namespace
}  // namespace logbel
