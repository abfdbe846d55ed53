#pragma once

// Dense CPU kernels. Every kernel exists twice: a plain serial reference
// (kernels::serial) and an OpenMP version (kernels::parallel) that splits
// work so each output element is produced by exactly one thread with the
// same inner-loop order as the reference. The two are therefore
// bit-identical, which the test suite asserts and the benchmark tool
// measures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#else
inline int omp_in_parallel() { return 0; }
#endif

namespace mmf::kernels {

enum class Backend { Serial, Parallel };

// Process-wide kernel backend, defaults to Parallel.
Backend& backend();

// Tanh-approximation GELU constants.
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

// Additive bias for masked-out attention scores.
inline constexpr double kMaskBias = -1e9;

namespace detail {

template <typename T>
inline T gelu_scalar(T x) {
  const T u = static_cast<T>(kGeluC) * (x + static_cast<T>(kGeluA) * x * x * x);
  return static_cast<T>(0.5) * x * (static_cast<T>(1) + std::tanh(u));
}

template <typename T>
inline T gelu_grad_scalar(T x) {
  const T u = static_cast<T>(kGeluC) * (x + static_cast<T>(kGeluA) * x * x * x);
  const T th = std::tanh(u);
  const T sech2 = static_cast<T>(1) - th * th;
  const T du = static_cast<T>(kGeluC) *
               (static_cast<T>(1) + static_cast<T>(3 * kGeluA) * x * x);
  return static_cast<T>(0.5) * (static_cast<T>(1) + th) +
         static_cast<T>(0.5) * x * sech2 * du;
}

// Four-accumulator dot product; fixed summation order.
template <typename T>
inline T dot(const T* a, const T* b, int n) {
  T acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 += a[i] * b[i];
    acc1 += a[i + 1] * b[i + 1];
    acc2 += a[i + 2] * b[i + 2];
    acc3 += a[i + 3] * b[i + 3];
  }
  T acc = (acc0 + acc1) + (acc2 + acc3);
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// One output row of op(A)op(B); shared by serial and parallel variants so
// the element-level arithmetic order is identical in both.
template <typename T>
inline void matmul_row(const T* a, bool ta, const T* b, bool tb, T* c_row,
                       int i, int m, int k, int n, bool accumulate) {
  (void)m;
  if (!accumulate) std::memset(c_row, 0, sizeof(T) * static_cast<size_t>(n));
  if (!ta && !tb) {
    const T* arow = a + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const T av = arow[kk];
      const T* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) c_row[j] += av * brow[j];
    }
  } else if (!ta && tb) {
    const T* arow = a + static_cast<size_t>(i) * k;
    for (int j = 0; j < n; ++j)
      c_row[j] += dot(arow, b + static_cast<size_t>(j) * k, k);
  } else if (ta && !tb) {
    // A stored k x m, logical A^T.
    for (int kk = 0; kk < k; ++kk) {
      const T av = a[static_cast<size_t>(kk) * m + i];
      const T* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) c_row[j] += av * brow[j];
    }
  } else {
    // A stored k x m, B stored n x k.
    for (int j = 0; j < n; ++j) {
      T acc = 0;
      for (int kk = 0; kk < k; ++kk)
        acc += a[static_cast<size_t>(kk) * m + i] * b[static_cast<size_t>(j) * k + kk];
      c_row[j] += acc;
    }
  }
}

template <typename T>
inline void softmax_row(const T* x, T* y, int n) {
  T mx = x[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
  T sum = 0;
  for (int j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  const T inv = static_cast<T>(1) / sum;
  for (int j = 0; j < n; ++j) y[j] *= inv;
}

// dx_j += y_j * (dy_j - sum_l dy_l y_l)
template <typename T>
inline void softmax_row_backward(const T* y, const T* dy, T* dx, int n) {
  T s = 0;
  for (int j = 0; j < n; ++j) s += dy[j] * y[j];
  for (int j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - s);
}

template <typename T>
inline void layer_norm_row(const T* x, const T* gamma, const T* beta, T eps,
                           T* y, T* xhat, T* inv_std, int d) {
  T mean = 0;
  for (int j = 0; j < d; ++j) mean += x[j];
  mean /= static_cast<T>(d);
  T var = 0;
  for (int j = 0; j < d; ++j) {
    const T c = x[j] - mean;
    var += c * c;
  }
  var /= static_cast<T>(d);  // population variance
  const T istd = static_cast<T>(1) / std::sqrt(var + eps);
  *inv_std = istd;
  for (int j = 0; j < d; ++j) {
    xhat[j] = (x[j] - mean) * istd;
    y[j] = gamma[j] * xhat[j] + beta[j];
  }
}

// dx += istd * (g - mean(g) - xhat * mean(g * xhat)), g = gamma .* dy
template <typename T>
inline void layer_norm_row_backward(const T* dy, const T* gamma, const T* xhat,
                                    T inv_std, T* dx, int d) {
  T mg = 0, mgx = 0;
  for (int j = 0; j < d; ++j) {
    const T g = gamma[j] * dy[j];
    mg += g;
    mgx += g * xhat[j];
  }
  mg /= static_cast<T>(d);
  mgx /= static_cast<T>(d);
  for (int j = 0; j < d; ++j)
    dx[j] += inv_std * (gamma[j] * dy[j] - mg - xhat[j] * mgx);
}

}  // namespace detail

// -------------------------------------------------------------------------
// Serial reference implementations.
// -------------------------------------------------------------------------
namespace serial {

// c[m x n] (+)= op(a) * op(b); op(a) is m x k, op(b) is k x n.
template <typename T>
void matmul(const T* a, bool ta, const T* b, bool tb, T* c, int m, int k,
            int n, bool accumulate = false) {
  for (int i = 0; i < m; ++i)
    detail::matmul_row(a, ta, b, tb, c + static_cast<size_t>(i) * n, i, m, k,
                       n, accumulate);
}

template <typename T>
void softmax_rows(const T* x, T* y, int m, int n) {
  for (int i = 0; i < m; ++i)
    detail::softmax_row(x + static_cast<size_t>(i) * n,
                        y + static_cast<size_t>(i) * n, n);
}

template <typename T>
void softmax_rows_backward(const T* y, const T* dy, T* dx, int m, int n) {
  for (int i = 0; i < m; ++i)
    detail::softmax_row_backward(y + static_cast<size_t>(i) * n,
                                 dy + static_cast<size_t>(i) * n,
                                 dx + static_cast<size_t>(i) * n, n);
}

template <typename T>
void layer_norm(const T* x, const T* gamma, const T* beta, T eps, T* y,
                T* xhat, T* inv_std, int m, int d) {
  for (int i = 0; i < m; ++i)
    detail::layer_norm_row(x + static_cast<size_t>(i) * d, gamma, beta, eps,
                           y + static_cast<size_t>(i) * d,
                           xhat + static_cast<size_t>(i) * d, inv_std + i, d);
}

template <typename T>
void layer_norm_backward_x(const T* dy, const T* gamma, const T* xhat,
                           const T* inv_std, T* dx, int m, int d) {
  for (int i = 0; i < m; ++i)
    detail::layer_norm_row_backward(dy + static_cast<size_t>(i) * d, gamma,
                                    xhat + static_cast<size_t>(i) * d,
                                    inv_std[i], dx + static_cast<size_t>(i) * d,
                                    d);
}

template <typename T>
void gelu(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = detail::gelu_scalar(x[i]);
}

template <typename T>
void gelu_backward(const T* x, const T* dy, T* dx, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * detail::gelu_grad_scalar(x[i]);
}

template <typename T>
void add(const T* a, const T* b, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <typename T>
void mul(const T* a, const T* b, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

// y += alpha * x
template <typename T>
void axpy(T alpha, const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// y[i] += a[i] * b[i] elementwise product accumulate
template <typename T>
void mul_acc(const T* a, const T* b, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

template <typename T>
void scale(const T* x, T alpha, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

// x is m x n, bias length n: y = x + bias per row.
template <typename T>
void add_bias_rows(const T* x, const T* bias, T* y, int m, int n) {
  for (int i = 0; i < m; ++i) {
    const T* xr = x + static_cast<size_t>(i) * n;
    T* yr = y + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) yr[j] = xr[j] + bias[j];
  }
}

// out[j] += sum_i x[i, j]; summed per column so the parallel variant can
// reproduce the same association order.
template <typename T>
void col_sum_acc(const T* x, T* out, int m, int n) {
  for (int j = 0; j < n; ++j) {
    T acc = 0;
    for (int i = 0; i < m; ++i) acc += x[static_cast<size_t>(i) * n + j];
    out[j] += acc;
  }
}

// dst[k x m] += src[m x k]^T
template <typename T>
void add_transposed(const T* src, T* dst, int m, int k) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j)
      dst[static_cast<size_t>(j) * m + i] += src[static_cast<size_t>(i) * k + j];
}

}  // namespace serial

// -------------------------------------------------------------------------
// OpenMP implementations. Work is split so that each output element is
// written by one thread using the same per-element arithmetic as the
// reference; results match the serial kernels bit for bit. The `if`
// clauses keep tiny workloads serial and avoid nesting inside caller-level
// parallel regions.
// -------------------------------------------------------------------------
namespace parallel {

inline bool worth_forking(int64_t work) {
  return work >= 16384 && !omp_in_parallel();
}

template <typename T>
void matmul(const T* a, bool ta, const T* b, bool tb, T* c, int m, int k,
            int n, bool accumulate = false) {
#pragma omp parallel for schedule(static) \
    if (worth_forking(static_cast<int64_t>(m) * k * n))
  for (int i = 0; i < m; ++i)
    detail::matmul_row(a, ta, b, tb, c + static_cast<size_t>(i) * n, i, m, k,
                       n, accumulate);
}

template <typename T>
void softmax_rows(const T* x, T* y, int m, int n) {
#pragma omp parallel for schedule(static) \
    if (worth_forking(static_cast<int64_t>(m) * n))
  for (int i = 0; i < m; ++i)
    detail::softmax_row(x + static_cast<size_t>(i) * n,
                        y + static_cast<size_t>(i) * n, n);
}

template <typename T>
void softmax_rows_backward(const T* y, const T* dy, T* dx, int m, int n) {
#pragma omp parallel for schedule(static) \
    if (worth_forking(static_cast<int64_t>(m) * n))
  for (int i = 0; i < m; ++i)
    detail::softmax_row_backward(y + static_cast<size_t>(i) * n,
                                 dy + static_cast<size_t>(i) * n,
                                 dx + static_cast<size_t>(i) * n, n);
}

template <typename T>
void layer_norm(const T* x, const T* gamma, const T* beta, T eps, T* y,
                T* xhat, T* inv_std, int m, int d) {
#pragma omp parallel for schedule(static) \
    if (worth_forking(static_cast<int64_t>(m) * d))
  for (int i = 0; i < m; ++i)
    detail::layer_norm_row(x + static_cast<size_t>(i) * d, gamma, beta, eps,
                           y + static_cast<size_t>(i) * d,
                           xhat + static_cast<size_t>(i) * d, inv_std + i, d);
}

template <typename T>
void layer_norm_backward_x(const T* dy, const T* gamma, const T* xhat,
                           const T* inv_std, T* dx, int m, int d) {
#pragma omp parallel for schedule(static) \
    if (worth_forking(static_cast<int64_t>(m) * d))
  for (int i = 0; i < m; ++i)
    detail::layer_norm_row_backward(dy + static_cast<size_t>(i) * d, gamma,
                                    xhat + static_cast<size_t>(i) * d,
                                    inv_std[i], dx + static_cast<size_t>(i) * d,
                                    d);
}

template <typename T>
void gelu(const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static) if (worth_forking(n))
  for (int64_t i = 0; i < n; ++i) y[i] = detail::gelu_scalar(x[i]);
}

template <typename T>
void gelu_backward(const T* x, const T* dy, T* dx, int64_t n) {
#pragma omp parallel for schedule(static) if (worth_forking(n))
  for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * detail::gelu_grad_scalar(x[i]);
}

template <typename T>
void add(const T* a, const T* b, T* y, int64_t n) {
#pragma omp parallel for schedule(static) if (worth_forking(n))
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <typename T>
void mul(const T* a, const T* b, T* y, int64_t n) {
#pragma omp parallel for schedule(static) if (worth_forking(n))
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

template <typename T>
void axpy(T alpha, const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static) if (worth_forking(n))
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void mul_acc(const T* a, const T* b, T* y, int64_t n) {
#pragma omp parallel for schedule(static) if (worth_forking(n))
  for (int64_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

template <typename T>
void scale(const T* x, T alpha, T* y, int64_t n) {
#pragma omp parallel for schedule(static) if (worth_forking(n))
  for (int64_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

template <typename T>
void add_bias_rows(const T* x, const T* bias, T* y, int m, int n) {
#pragma omp parallel for schedule(static) \
    if (worth_forking(static_cast<int64_t>(m) * n))
  for (int i = 0; i < m; ++i) {
    const T* xr = x + static_cast<size_t>(i) * n;
    T* yr = y + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) yr[j] = xr[j] + bias[j];
  }
}

// Column reduction: parallelized over columns so each output element still
// has a single writer and the row-major accumulation order is preserved.
template <typename T>
void col_sum_acc(const T* x, T* out, int m, int n) {
#pragma omp parallel for schedule(static) \
    if (worth_forking(static_cast<int64_t>(m) * n))
  for (int j = 0; j < n; ++j) {
    T acc = 0;
    for (int i = 0; i < m; ++i) acc += x[static_cast<size_t>(i) * n + j];
    out[j] += acc;
  }
}

template <typename T>
void add_transposed(const T* src, T* dst, int m, int k) {
#pragma omp parallel for schedule(static) \
    if (worth_forking(static_cast<int64_t>(m) * k))
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < m; ++i)
      dst[static_cast<size_t>(j) * m + i] += src[static_cast<size_t>(i) * k + j];
}

}  // namespace parallel

// -------------------------------------------------------------------------
// Dispatch through the process-wide backend.
// -------------------------------------------------------------------------

#define MMF_DISPATCH(fn, ...)                  \
  do {                                         \
    if (backend() == Backend::Serial)          \
      serial::fn(__VA_ARGS__);                 \
    else                                       \
      parallel::fn(__VA_ARGS__);               \
  } while (0)

template <typename T>
void matmul(const T* a, bool ta, const T* b, bool tb, T* c, int m, int k,
            int n, bool accumulate = false) {
  MMF_DISPATCH(matmul, a, ta, b, tb, c, m, k, n, accumulate);
}
template <typename T>
void softmax_rows(const T* x, T* y, int m, int n) {
  MMF_DISPATCH(softmax_rows, x, y, m, n);
}
template <typename T>
void softmax_rows_backward(const T* y, const T* dy, T* dx, int m, int n) {
  MMF_DISPATCH(softmax_rows_backward, y, dy, dx, m, n);
}
template <typename T>
void layer_norm(const T* x, const T* gamma, const T* beta, T eps, T* y,
                T* xhat, T* inv_std, int m, int d) {
  MMF_DISPATCH(layer_norm, x, gamma, beta, eps, y, xhat, inv_std, m, d);
}
template <typename T>
void layer_norm_backward_x(const T* dy, const T* gamma, const T* xhat,
                           const T* inv_std, T* dx, int m, int d) {
  MMF_DISPATCH(layer_norm_backward_x, dy, gamma, xhat, inv_std, dx, m, d);
}
template <typename T>
void gelu(const T* x, T* y, int64_t n) {
  MMF_DISPATCH(gelu, x, y, n);
}
template <typename T>
void gelu_backward(const T* x, const T* dy, T* dx, int64_t n) {
  MMF_DISPATCH(gelu_backward, x, dy, dx, n);
}
template <typename T>
void add(const T* a, const T* b, T* y, int64_t n) {
  MMF_DISPATCH(add, a, b, y, n);
}
template <typename T>
void mul(const T* a, const T* b, T* y, int64_t n) {
  MMF_DISPATCH(mul, a, b, y, n);
}
template <typename T>
void axpy(T alpha, const T* x, T* y, int64_t n) {
  MMF_DISPATCH(axpy, alpha, x, y, n);
}
template <typename T>
void mul_acc(const T* a, const T* b, T* y, int64_t n) {
  MMF_DISPATCH(mul_acc, a, b, y, n);
}
template <typename T>
void scale(const T* x, T alpha, T* y, int64_t n) {
  MMF_DISPATCH(scale, x, alpha, y, n);
}
template <typename T>
void add_bias_rows(const T* x, const T* bias, T* y, int m, int n) {
  MMF_DISPATCH(add_bias_rows, x, bias, y, m, n);
}
template <typename T>
void col_sum_acc(const T* x, T* out, int m, int n) {
  MMF_DISPATCH(col_sum_acc, x, out, m, n);
}
template <typename T>
void add_transposed(const T* src, T* dst, int m, int k) {
  MMF_DISPATCH(add_transposed, src, dst, m, k);
}

#undef MMF_DISPATCH

}  // namespace mmf::kernels
