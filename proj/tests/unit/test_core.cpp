#include <gtest/gtest.h>

#include <cmath>

#include "sfnn/activation.hpp"
#include "sfnn/error.hpp"
#include "sfnn/kernels.hpp"
#include "sfnn/rng.hpp"

using namespace sfnn;

namespace {

Matrix random_matrix(RngStream& rng, std::size_t r, std::size_t c, double zero_frac = 0.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform() < zero_frac ? 0.0 : rng.uniform(-2.0, 2.0);
  return m;
}

// Triple loop in textbook order.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

}  // namespace

TEST(Matrix, ShapeChecks) {
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ValidationError);
  Matrix m{{1, 2}, {3, 4}, {5, 6}};
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m(2, 1), 6.0);
  EXPECT_EQ(m.transposed()(1, 2), 6.0);
  EXPECT_EQ(m.slice_rows(1, 2), (Matrix{{3, 4}, {5, 6}}));
  const std::vector<std::size_t> idx = {2, 0};
  EXPECT_EQ(m.gather_rows(idx), (Matrix{{5, 6}, {1, 2}}));
  EXPECT_THROW(require_shape(m, 2, 2, "m"), ValidationError);
  m(0, 0) = std::nan("");
  EXPECT_FALSE(m.all_finite());
}

TEST(Kernels, MatmulMatchesNaiveOracle) {
  RngStream rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = random_matrix(rng, 7, 5);
    const Matrix b = random_matrix(rng, 5, 3);
    const Matrix expect = naive_matmul(a, b);
    const Matrix got = kernels::matmul(a, b);
    for (std::size_t i = 0; i < expect.size(); ++i) {
      const double e = expect.values()[i];
      EXPECT_LE(std::abs(got.values()[i] - e), 1e-12 * std::max(1.0, std::abs(e)));
    }
    const Matrix nt = kernels::matmul_nt(a, b.transposed());
    const Matrix tn = kernels::matmul_tn(a.transposed(), b);
    for (std::size_t i = 0; i < expect.size(); ++i) {
      EXPECT_NEAR(nt.values()[i], expect.values()[i], 1e-12 * std::max(1.0, std::abs(expect.values()[i])));
      EXPECT_NEAR(tn.values()[i], expect.values()[i], 1e-12 * std::max(1.0, std::abs(expect.values()[i])));
    }
  }
}

TEST(Kernels, SerialAndParallelAreBitwiseEqual) {
  RngStream rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_matrix(rng, 67, 41, 0.3);
    const Matrix b = random_matrix(rng, 41, 29, 0.1);
    EXPECT_EQ(kernels::serial::matmul(a, b), kernels::parallel::matmul(a, b));
    const Matrix bt = b.transposed();
    EXPECT_EQ(kernels::serial::matmul_nt(a, bt), kernels::parallel::matmul_nt(a, bt));
    const Matrix at = a.transposed();
    EXPECT_EQ(kernels::serial::matmul_tn(at, b), kernels::parallel::matmul_tn(at, b));
  }
}

TEST(Kernels, AffineAddsBiasAfterProduct) {
  const Matrix x{{1, 0, 1}};
  const Matrix w{{0.1, 5.0, 0.2}, {1.0, 1.0, 1.0}};
  const std::vector<double> b = {0.3, -1.0};
  const Matrix out = kernels::affine(x, w, b);
  EXPECT_EQ(out(0, 0), (0.0 + 0.1 + 0.2) + 0.3);
  EXPECT_EQ(out(0, 1), 1.0);
  EXPECT_THROW(kernels::affine(x, w, std::vector<double>{1.0}), ValidationError);
  EXPECT_EQ(kernels::column_sums(Matrix{{1, 2}, {3, 4}}), (std::vector<double>{4, 6}));
}

TEST(Activation, Examples) {
  EXPECT_EQ(activation_apply(ActivationKind::Sigmoid, Matrix{{0.0}})(0, 0), 0.5);
  EXPECT_EQ(activation_apply(ActivationKind::ReLU, Matrix{{-3.0}})(0, 0), 0.0);
  EXPECT_EQ(activation_apply(ActivationKind::Tanh, Matrix{{0.0}})(0, 0), 0.0);
  EXPECT_EQ(activate_derivative(ActivationKind::ReLU, 0.0), 0.0);
  EXPECT_TRUE(is_non_negative(ActivationKind::ReLU));
  EXPECT_TRUE(is_non_negative(ActivationKind::Sigmoid));
  EXPECT_FALSE(is_non_negative(ActivationKind::Tanh));
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

TEST(Activation, DerivativesMatchFiniteDifferences) {
  RngStream rng(3);
  const double h = 1e-6;
  for (auto kind : {ActivationKind::Sigmoid, ActivationKind::ReLU, ActivationKind::Tanh}) {
    for (int i = 0; i < 1000; ++i) {
      const double x = rng.uniform(-6.0, 6.0);
      if (kind == ActivationKind::ReLU && std::abs(x) < 1e-4) continue;
      const double fd = (activate(kind, x + h) - activate(kind, x - h)) / (2 * h);
      EXPECT_LE(std::abs(activate_derivative(kind, x) - fd), 1e-6) << to_string(kind) << " x=" << x;
      EXPECT_LE(std::abs(activate_derivative(kind, x)), 1.0);
    }
  }
}

TEST(Squash, ConstantsAndBounds) {
  const auto sg = squash_constants(SquashKind::Sigmoid);
  EXPECT_EQ(sg.s0, 0.5);
  EXPECT_EQ(sg.sp0, 0.25);
  EXPECT_EQ(sg.sp0, sg.s0 * (1 - sg.s0));
  const auto th = squash_constants(SquashKind::Tanh);
  EXPECT_EQ(th.s0, 0.0);
  EXPECT_EQ(th.sp0, 1.0);
  RngStream rng(4);
  const double h = 1e-5;
  for (auto kind : {SquashKind::Sigmoid, SquashKind::Tanh}) {
    for (int i = 0; i < 1000; ++i) {
      const double x = rng.uniform(-8.0, 8.0);
      EXPECT_LE(std::abs(squash_second_derivative(kind, x)), 1.0);
      const double fd = (squash(kind, x + h) - squash(kind, x - h)) / (2 * h);
      EXPECT_NEAR(squash_derivative(kind, x), fd, 1e-8);
      const double fd2 = (squash_derivative(kind, x + h) - squash_derivative(kind, x - h)) / (2 * h);
      EXPECT_NEAR(squash_second_derivative(kind, x), fd2, 1e-8);
    }
  }
}

TEST(Activation, NamesRoundTrip) {
  for (auto kind : {ActivationKind::Sigmoid, ActivationKind::ReLU, ActivationKind::Tanh}) {
    EXPECT_EQ(parse_activation(to_string(kind)), kind);
  }
  for (auto kind : {SquashKind::Sigmoid, SquashKind::Tanh}) EXPECT_EQ(parse_squash(to_string(kind)), kind);
  EXPECT_THROW(parse_activation("softplus"), ValidationError);
}

TEST(Rng, ReproducibleAndSplittable) {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
  // Children depend on the parent's identity, not its position.
  RngStream p(5);
  const auto first = p.split(3).next_u64();
  p.next_u64();
  EXPECT_EQ(p.split(3).next_u64(), first);
  EXPECT_NE(p.split(4).next_u64(), first);
  RngStream u(9);
  for (int i = 0; i < 10000; ++i) {
    const double v = u.uniform();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
    ASSERT_LT(u.below(7), 7u);
  }
}

TEST(Bernoulli, DegenerateAndRejected) {
  RngStream rng(1);
  EXPECT_EQ(sample_bernoulli(Matrix(3, 4, 1.0), rng), Matrix(3, 4, 1.0));
  EXPECT_EQ(sample_bernoulli(Matrix(3, 4, 0.0), rng), Matrix(3, 4, 0.0));
  EXPECT_NO_THROW(sample_bernoulli(Matrix(1, 1, 1.0 + 1e-13), rng));
  EXPECT_THROW(sample_bernoulli(Matrix(1, 1, 1.0 + 1e-9), rng), ValidationError);
  EXPECT_THROW(sample_bernoulli(Matrix(1, 1, -1e-9), rng), ValidationError);
}

TEST(Bernoulli, MeanWithinThreeStandardErrors) {
  RngStream rng(2);
  const std::size_t n = 100000;
  const Matrix draws = sample_bernoulli(Matrix(1, n, 0.5), rng);
  double mean = 0.0;
  for (double v : draws.values()) {
    ASSERT_TRUE(v == 0.0 || v == 1.0);
    mean += v;
  }
  mean /= static_cast<double>(n);
  EXPECT_LE(std::abs(mean - 0.5), 3.0 * std::sqrt(0.25 / static_cast<double>(n)));
}

TEST(Bernoulli, SameStreamSameBits) {
  RngStream a(77), b(77);
  Matrix p(5, 9, 0.3);
  EXPECT_EQ(sample_bernoulli(p, a), sample_bernoulli(p, b));
}
