#include "sfnn/kernels.hpp"

#include <string>

#include "sfnn/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sfnn::kernels {
namespace {

void check_inner(std::size_t lhs, std::size_t rhs, const char* op) {
  if (lhs != rhs) {
    throw ValidationError(std::string(op) + ": inner dimensions differ (" + std::to_string(lhs) +
                          " vs " + std::to_string(rhs) + ")");
  }
}

// out_row += sum_k a_row[k] * b.row(k), k ascending.
inline void accumulate_row(const double* a_row, const Matrix& b, double* out_row) {
  const std::size_t inner = b.rows();
  const std::size_t cols = b.cols();
  const double* bdata = b.data();
  for (std::size_t k = 0; k < inner; ++k) {
    const double coef = a_row[k];
    if (coef == 0.0) continue;
    const double* brow = bdata + k * cols;
    for (std::size_t j = 0; j < cols; ++j) out_row[j] += coef * brow[j];
  }
}

// Row i of a^T * b: sum_n a(n, i) * b.row(n), n ascending.
inline void accumulate_tn_row(const Matrix& a, std::size_t i, const Matrix& b, double* out_row) {
  const std::size_t cols = b.cols();
  for (std::size_t n = 0; n < a.rows(); ++n) {
    const double coef = a(n, i);
    if (coef == 0.0) continue;
    const double* brow = b.data() + n * cols;
    for (std::size_t j = 0; j < cols; ++j) out_row[j] += coef * brow[j];
  }
}

}  // namespace

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    accumulate_row(a.data() + i * a.cols(), b, out.data() + i * out.cols());
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "matmul_nt");
  return matmul(a, b.transposed());
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "matmul_tn");
  Matrix out(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) accumulate_tn_row(a, i, b, out.data() + i * out.cols());
  return out;
}

}  // namespace serial

namespace parallel {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    accumulate_row(a.data() + r * a.cols(), b, out.data() + r * out.cols());
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "matmul_nt");
  return matmul(a, b.transposed());
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "matmul_tn");
  Matrix out(a.cols(), b.cols());
  const auto rows = static_cast<std::ptrdiff_t>(a.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    accumulate_tn_row(a, r, b, out.data() + r * out.cols());
  }
  return out;
}

}  // namespace parallel

Matrix matmul(const Matrix& a, const Matrix& b) { return parallel::matmul(a, b); }
Matrix matmul_nt(const Matrix& a, const Matrix& b) { return parallel::matmul_nt(a, b); }
Matrix matmul_tn(const Matrix& a, const Matrix& b) { return parallel::matmul_tn(a, b); }

Matrix affine(const Matrix& x, const Matrix& w, std::span<const double> bias) {
  if (bias.size() != w.rows()) throw ValidationError("affine: bias length does not match weights");
  Matrix out = matmul_nt(x, w);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
  }
  return out;
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j];
  }
  return out;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace sfnn::kernels
