#include "deepnmt/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace deepnmt {

namespace {

// Below this many multiply-adds the plain loops beat the blocked product.
constexpr std::size_t kBlasThreshold = 4096;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

bool use_blocked(std::size_t n, std::size_t k, std::size_t m) { return n * k * m >= kBlasThreshold; }

template <class Product>
void store(MutMap out, const Product& p, bool accumulate) {
  if (accumulate) {
    out.noalias() += p;
  } else {
    out.noalias() = p;
  }
}

}  // namespace

void gemm(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
          std::size_t m, bool accumulate) {
  if (use_blocked(n, k, m)) {
    store(MutMap(c, n, m), ConstMap(a, n, k) * ConstMap(b, k, m), accumulate);
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double* __restrict cr = c + i * m;
    if (!accumulate) std::fill(cr, cr + m, 0.0);
    const double* ar = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* __restrict br = b + p * m;
      for (std::size_t j = 0; j < m; ++j) cr[j] += av * br[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (use_blocked(n, k, m)) {
    store(MutMap(c, n, m), ConstMap(a, n, k) * ConstMap(b, m, k).transpose(), accumulate);
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* ar = a + i * k;
    double* cr = c + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* br = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
      cr[j] = accumulate ? cr[j] + s : s;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m, bool accumulate) {
  if (use_blocked(n, k, m)) {
    store(MutMap(c, k, m), ConstMap(a, n, k).transpose() * ConstMap(b, n, m), accumulate);
    return;
  }
  if (!accumulate) std::fill(c, c + k * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ar = a + i * k;
    const double* __restrict br = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      double* __restrict cr = c + p * m;
      for (std::size_t j = 0; j < m; ++j) cr[j] += av * br[j];
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  const std::size_t n = a.shape()[a.rank() - 2];
  const std::size_t k = a.shape().back();
  const std::size_t kb = b.shape()[b.rank() - 2];
  const std::size_t m = b.shape().back();
  const Shape lead_a(a.shape().begin(), a.shape().end() - 2);
  const Shape lead_b(b.shape().begin(), b.shape().end() - 2);
  if (k != kb || (!lead_b.empty() && lead_a != lead_b)) {
    throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  if (!a.all_finite() || !b.all_finite()) throw NonFiniteError("matmul: non-finite operand");
  Shape out_shape = lead_a;
  out_shape.push_back(n);
  out_shape.push_back(m);
  Tensor out(out_shape);
  const std::size_t batch = a.size() / (n * k);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const double* bp = lead_b.empty() ? b.data() : b.data() + bi * k * m;
    gemm(a.data() + bi * n * k, bp, out.data() + bi * n * m, n, k, m);
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw DimensionError("matmul_nt shape mismatch: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
  }
  Tensor out({a.rows(), b.rows()});
  gemm_nt(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.rows());
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose needs rank 2, got " + shape_str(a.shape()));
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

void softmax_inplace(std::span<double> row) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : row) mx = std::max(mx, v);
  double total = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    total += v;
  }
  const double inv = 1.0 / total;
  for (double& v : row) v *= inv;
}

Tensor softmax(const Tensor& x, std::size_t axis, const Tensor& mask) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
  }
  if (!mask.empty() && mask.shape() != x.shape()) {
    throw DimensionError("softmax mask " + shape_str(mask.shape()) + " vs input " +
                         shape_str(x.shape()));
  }
  if (!x.all_finite()) throw NonFiniteError("softmax: non-finite input");
  Tensor out = x;
  if (!mask.empty()) out += mask;
  const std::size_t len = x.shape()[axis];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];
  const std::size_t outer = x.size() / (len * inner);
  std::vector<double> buf(len);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      double* base = out.data() + o * len * inner + in;
      for (std::size_t j = 0; j < len; ++j) buf[j] = base[j * inner];
      softmax_inplace(buf);
      for (std::size_t j = 0; j < len; ++j) base[j * inner] = buf[j];
    }
  }
  return out;
}

}  // namespace deepnmt
