#include "clvsa/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace clvsa::kernels {
namespace {

std::atomic<Mode> g_mode{Mode::parallel};

// below this many multiply-adds the OpenMP fork costs more than it saves
constexpr std::int64_t kMinParallelWork = 1 << 15;

bool parallel_for(std::int64_t work) {
  return g_mode.load(std::memory_order_relaxed) == Mode::parallel &&
         work >= kMinParallelWork;
}

}  // namespace

Mode mode() { return g_mode.load(std::memory_order_relaxed); }
void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

void matvec(const double* w, const double* x, const double* b, double* y,
            int m, int n) {
  const bool par = parallel_for(static_cast<std::int64_t>(m) * n);
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < m; ++i) {
    const double* row = w + static_cast<std::int64_t>(i) * n;
    double acc = b ? b[i] : 0.0;
    for (int j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void matvec_grad_x(const double* w, const double* gy, double* gx, int m,
                   int n) {
  const bool par = parallel_for(static_cast<std::int64_t>(m) * n);
  // column gather: each gx[j] is accumulated by exactly one thread
#pragma omp parallel for schedule(static) if (par)
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i) acc += w[static_cast<std::int64_t>(i) * n + j] * gy[i];
    gx[j] += acc;
  }
}

void matvec_grad_w(const double* gy, const double* x, double* gw, int m,
                   int n) {
  const bool par = parallel_for(static_cast<std::int64_t>(m) * n);
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < m; ++i) {
    double* row = gw + static_cast<std::int64_t>(i) * n;
    const double gyi = gy[i];
    for (int j = 0; j < n; ++j) row[j] += gyi * x[j];
  }
}

void conv1d_rows(const double* in, const double* w, const double* b,
                 double* out, int rows, int cols, int cin, int cout,
                 int width) {
  const int half = width / 2;
  const std::int64_t work =
      static_cast<std::int64_t>(rows) * cols * cin * cout * width;
  const bool par = parallel_for(work);
#pragma omp parallel for schedule(static) collapse(2) if (par)
  for (int f = 0; f < rows; ++f) {
    for (int t = 0; t < cols; ++t) {
      double* o = out + (static_cast<std::int64_t>(f) * cols + t) * cout;
      for (int co = 0; co < cout; ++co) o[co] = b ? b[co] : 0.0;
      for (int dx = 0; dx < width; ++dx) {
        const int tt = t + dx - half;
        if (tt < 0 || tt >= cols) continue;
        const double* src =
            in + (static_cast<std::int64_t>(f) * cols + tt) * cin;
        const double* wk = w + static_cast<std::int64_t>(dx) * cin * cout;
        for (int ci = 0; ci < cin; ++ci) {
          const double v = src[ci];
          const double* wrow = wk + static_cast<std::int64_t>(ci) * cout;
          for (int co = 0; co < cout; ++co) o[co] += v * wrow[co];
        }
      }
    }
  }
}

void conv1d_rows_grad_in(const double* w, const double* gout, double* gin,
                         int rows, int cols, int cin, int cout, int width) {
  const int half = width / 2;
  const std::int64_t work =
      static_cast<std::int64_t>(rows) * cols * cin * cout * width;
  const bool par = parallel_for(work);
  // gather form: each input element is owned by one iteration
#pragma omp parallel for schedule(static) collapse(2) if (par)
  for (int f = 0; f < rows; ++f) {
    for (int ts = 0; ts < cols; ++ts) {
      double* gi = gin + (static_cast<std::int64_t>(f) * cols + ts) * cin;
      for (int dx = 0; dx < width; ++dx) {
        const int t = ts - dx + half;  // output position reading input ts
        if (t < 0 || t >= cols) continue;
        const double* go =
            gout + (static_cast<std::int64_t>(f) * cols + t) * cout;
        const double* wk = w + static_cast<std::int64_t>(dx) * cin * cout;
        for (int ci = 0; ci < cin; ++ci) {
          const double* wrow = wk + static_cast<std::int64_t>(ci) * cout;
          double acc = 0.0;
          for (int co = 0; co < cout; ++co) acc += wrow[co] * go[co];
          gi[ci] += acc;
        }
      }
    }
  }
}

void conv1d_rows_grad_w(const double* in, const double* gout, double* gw,
                        int rows, int cols, int cin, int cout, int width) {
  const int half = width / 2;
  const std::int64_t work =
      static_cast<std::int64_t>(rows) * cols * cin * cout * width;
  const bool par = parallel_for(work);
#pragma omp parallel for schedule(static) collapse(2) if (par)
  for (int dx = 0; dx < width; ++dx) {
    for (int ci = 0; ci < cin; ++ci) {
      double* grow =
          gw + (static_cast<std::int64_t>(dx) * cin + ci) * cout;
      for (int f = 0; f < rows; ++f) {
        for (int t = 0; t < cols; ++t) {
          const int tt = t + dx - half;
          if (tt < 0 || tt >= cols) continue;
          const double v =
              in[(static_cast<std::int64_t>(f) * cols + tt) * cin + ci];
          const double* go =
              gout + (static_cast<std::int64_t>(f) * cols + t) * cout;
          for (int co = 0; co < cout; ++co) grow[co] += v * go[co];
        }
      }
    }
  }
}

void conv1d_rows_grad_b(const double* gout, double* gb, int rows, int cols,
                        int cout) {
  for (int f = 0; f < rows; ++f)
    for (int t = 0; t < cols; ++t) {
      const double* go =
          gout + (static_cast<std::int64_t>(f) * cols + t) * cout;
      for (int co = 0; co < cout; ++co) gb[co] += go[co];
    }
}

#define CLVSA_EW_LOOP(expr)                          \
  const bool par = parallel_for(n);                  \
  _Pragma("omp parallel for schedule(static) if (par)") \
  for (std::int64_t i = 0; i < n; ++i) {             \
    expr;                                            \
  }

void ew_add(const double* a, const double* b, double* y, std::int64_t n) {
  CLVSA_EW_LOOP(y[i] = a[i] + b[i])
}
void ew_sub(const double* a, const double* b, double* y, std::int64_t n) {
  CLVSA_EW_LOOP(y[i] = a[i] - b[i])
}
void ew_mul(const double* a, const double* b, double* y, std::int64_t n) {
  CLVSA_EW_LOOP(y[i] = a[i] * b[i])
}
void ew_sigmoid(const double* x, double* y, std::int64_t n) {
  CLVSA_EW_LOOP(y[i] = 1.0 / (1.0 + std::exp(-x[i])))
}
void ew_tanh(const double* x, double* y, std::int64_t n) {
  CLVSA_EW_LOOP(y[i] = std::tanh(x[i]))
}
void ew_relu(const double* x, double* y, std::int64_t n) {
  CLVSA_EW_LOOP(y[i] = x[i] > 0.0 ? x[i] : 0.0)
}
void ew_exp(const double* x, double* y, std::int64_t n) {
  CLVSA_EW_LOOP(y[i] = std::exp(x[i]))
}
void ew_square(const double* x, double* y, std::int64_t n) {
  CLVSA_EW_LOOP(y[i] = x[i] * x[i])
}
void ew_neg(const double* x, double* y, std::int64_t n) {
  CLVSA_EW_LOOP(y[i] = -x[i])
}
void ew_scale(const double* x, double c, double* y, std::int64_t n) {
  CLVSA_EW_LOOP(y[i] = c * x[i])
}
void ew_clamp(const double* x, double lo, double hi, double* y,
              std::int64_t n) {
  CLVSA_EW_LOOP(y[i] = std::min(hi, std::max(lo, x[i])))
}

void acc_add(const double* g, double* dst, std::int64_t n) {
  CLVSA_EW_LOOP(dst[i] += g[i])
}
void acc_scaled(const double* g, double c, double* dst, std::int64_t n) {
  CLVSA_EW_LOOP(dst[i] += c * g[i])
}
void acc_mul(const double* g, const double* other, double* dst,
             std::int64_t n) {
  CLVSA_EW_LOOP(dst[i] += g[i] * other[i])
}
void acc_sigmoid_grad(const double* g, const double* y, double* dst,
                      std::int64_t n) {
  CLVSA_EW_LOOP(dst[i] += g[i] * y[i] * (1.0 - y[i]))
}
void acc_tanh_grad(const double* g, const double* y, double* dst,
                   std::int64_t n) {
  CLVSA_EW_LOOP(dst[i] += g[i] * (1.0 - y[i] * y[i]))
}
void acc_relu_grad(const double* g, const double* x, double* dst,
                   std::int64_t n) {
  CLVSA_EW_LOOP(dst[i] += x[i] > 0.0 ? g[i] : 0.0)
}
void acc_exp_grad(const double* g, const double* y, double* dst,
                  std::int64_t n) {
  CLVSA_EW_LOOP(dst[i] += g[i] * y[i])
}
void acc_square_grad(const double* g, const double* x, double* dst,
                     std::int64_t n) {
  CLVSA_EW_LOOP(dst[i] += 2.0 * g[i] * x[i])
}
void acc_clamp_grad(const double* g, const double* x, double lo, double hi,
                    double* dst, std::int64_t n) {
  CLVSA_EW_LOOP(dst[i] += (x[i] > lo && x[i] < hi) ? g[i] : 0.0)
}

#undef CLVSA_EW_LOOP

double reduce_sum(const double* x, std::int64_t n) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double reduce_dot(const double* a, const double* b, std::int64_t n) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void softmax_slices(const double* x, double* y, std::int64_t slices, int n) {
  const bool par = parallel_for(slices * n);
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t s = 0; s < slices; ++s) {
    const double* xs = x + s * n;
    double* ys = y + s * n;
    double mx = xs[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, xs[i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      ys[i] = std::exp(xs[i] - mx);
      z += ys[i];
    }
    for (int i = 0; i < n; ++i) ys[i] /= z;
  }
}

void softmax_slices_grad(const double* g, const double* y, double* dst,
                         std::int64_t slices, int n) {
  const bool par = parallel_for(slices * n);
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t s = 0; s < slices; ++s) {
    const double* gs = g + s * n;
    const double* ys = y + s * n;
    double* ds = dst + s * n;
    double inner = 0.0;
    for (int i = 0; i < n; ++i) inner += gs[i] * ys[i];
    for (int i = 0; i < n; ++i) ds[i] += ys[i] * (gs[i] - inner);
  }
}

void weighted_sum(const double* w, const double* const* vectors, int count,
                  double* out, std::int64_t dim) {
  const bool par = parallel_for(static_cast<std::int64_t>(count) * dim);
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t d = 0; d < dim; ++d) {
    double acc = 0.0;
    for (int e = 0; e < count; ++e) acc += w[e] * vectors[e][d];
    out[d] = acc;
  }
}

void weighted_sum_grad_w(const double* g, const double* const* vectors,
                         int count, double* gw, std::int64_t dim) {
  const bool par = parallel_for(static_cast<std::int64_t>(count) * dim);
#pragma omp parallel for schedule(static) if (par)
  for (int e = 0; e < count; ++e) gw[e] += reduce_dot(g, vectors[e], dim);
}

void weighted_sum_grad_v(const double* g, const double* w, int count,
                         double* const* gv, std::int64_t dim) {
  for (int e = 0; e < count; ++e) acc_scaled(g, w[e], gv[e], dim);
}

}  // namespace clvsa::kernels
