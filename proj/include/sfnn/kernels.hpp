#pragma once

#include <span>
#include <vector>

#include "sfnn/matrix.hpp"

// Dense products used by every forward and backward pass.
//
// Each product has a serial reference and an OpenMP version. Both share the
// same per-row inner kernel and accumulate in the same fixed order, so their
// results are bitwise identical regardless of thread count. Zero multipliers
// are skipped, which makes products with sampled binary matrices cheap.
namespace sfnn::kernels {

namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
}  // namespace serial

namespace parallel {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
}  // namespace parallel

// Library entry points; these use the parallel versions.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// x * W^T + bias (bias broadcast over rows). The bias is added after the
// product so the summation order matches an explicit accumulation
// 0 + W_1 + W_2 + ... + b.
Matrix affine(const Matrix& x, const Matrix& w, std::span<const double> bias);

std::vector<double> column_sums(const Matrix& m);

int max_threads();

}  // namespace sfnn::kernels
