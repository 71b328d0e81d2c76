#pragma once

#include <cstddef>
#include <span>

#include "deepnmt/tensor.hpp"

namespace deepnmt {

// Raw row-major GEMM kernels. `accumulate` adds into C instead of overwriting.
// C[n x m] = A[n x k] * B[k x m]
void gemm(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
          std::size_t m, bool accumulate = false);
// C[n x m] = A[n x k] * B[m x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate = false);
// C[k x m] = A[n x k]^T * B[n x m]
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate = false);

/// Matrix product over the trailing two axes, batched over identical leading axes.
/// A rank-2 right operand is shared across the batch.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T for rank-2 operands.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// In-place max-subtracted softmax of one row.
void softmax_inplace(std::span<double> row);

/// Softmax along `axis`. When `mask` is non-empty it must have the shape of
/// `x` and is added before normalization (use large negative entries to mask).
Tensor softmax(const Tensor& x, std::size_t axis, const Tensor& mask = {});

}  // namespace deepnmt
