#pragma once

#include <cstdint>

// Dense numeric kernels backing the tape operations. Every kernel exists in a
// serial and an OpenMP variant; the parallel variants split work across
// independent output elements only, and each element keeps a fixed
// accumulation order, so both paths produce bit-identical results. The serial
// path is kept as the reference for tests and for the kernel benchmark.
namespace clvsa::kernels {

enum class Mode { serial, parallel };

Mode mode();
void set_mode(Mode m);

// y[m] = W[m x n] * x + b (b may be null)
void matvec(const double* w, const double* x, const double* b, double* y,
            int m, int n);
// gx[n] += W^T * gy
void matvec_grad_x(const double* w, const double* gy, double* gx, int m, int n);
// gW[m x n] += gy * x^T
void matvec_grad_w(const double* gy, const double* x, double* gw, int m, int n);

// 1-D convolution along the column axis of a [rows x cols x cin] block with
// zero padding of (width-1)/2, the same kernel applied to every row.
// w is [width x cin x cout], out is [rows x cols x cout].
void conv1d_rows(const double* in, const double* w, const double* b,
                 double* out, int rows, int cols, int cin, int cout,
                 int width);
void conv1d_rows_grad_in(const double* w, const double* gout, double* gin,
                         int rows, int cols, int cin, int cout, int width);
void conv1d_rows_grad_w(const double* in, const double* gout, double* gw,
                        int rows, int cols, int cin, int cout, int width);
void conv1d_rows_grad_b(const double* gout, double* gb, int rows, int cols,
                        int cout);

// elementwise forward maps
void ew_add(const double* a, const double* b, double* y, std::int64_t n);
void ew_sub(const double* a, const double* b, double* y, std::int64_t n);
void ew_mul(const double* a, const double* b, double* y, std::int64_t n);
void ew_sigmoid(const double* x, double* y, std::int64_t n);
void ew_tanh(const double* x, double* y, std::int64_t n);
void ew_relu(const double* x, double* y, std::int64_t n);
void ew_exp(const double* x, double* y, std::int64_t n);
void ew_square(const double* x, double* y, std::int64_t n);
void ew_neg(const double* x, double* y, std::int64_t n);
void ew_scale(const double* x, double c, double* y, std::int64_t n);
void ew_clamp(const double* x, double lo, double hi, double* y,
              std::int64_t n);

// gradient accumulators: dst += f(g, ...)
void acc_add(const double* g, double* dst, std::int64_t n);
void acc_scaled(const double* g, double c, double* dst, std::int64_t n);
void acc_mul(const double* g, const double* other, double* dst,
             std::int64_t n);
void acc_sigmoid_grad(const double* g, const double* y, double* dst,
                      std::int64_t n);
void acc_tanh_grad(const double* g, const double* y, double* dst,
                   std::int64_t n);
void acc_relu_grad(const double* g, const double* x, double* dst,
                   std::int64_t n);
void acc_exp_grad(const double* g, const double* y, double* dst,
                  std::int64_t n);
void acc_square_grad(const double* g, const double* x, double* dst,
                     std::int64_t n);
void acc_clamp_grad(const double* g, const double* x, double lo, double hi,
                    double* dst, std::int64_t n);

// reductions run serially in index order regardless of mode, so the result
// does not depend on the thread count
double reduce_sum(const double* x, std::int64_t n);
double reduce_dot(const double* a, const double* b, std::int64_t n);

// softmax over contiguous slices of length n (max-subtracted)
void softmax_slices(const double* x, double* y, std::int64_t slices, int n);
void softmax_slices_grad(const double* g, const double* y, double* dst,
                         std::int64_t slices, int n);

// out[d] = sum_e w[e] * v_e[d]  (vectors is an array of e pointers)
void weighted_sum(const double* w, const double* const* vectors, int count,
                  double* out, std::int64_t dim);
void weighted_sum_grad_w(const double* g, const double* const* vectors,
                         int count, double* gw, std::int64_t dim);
void weighted_sum_grad_v(const double* g, const double* w, int count,
                         double* const* gv, std::int64_t dim);

}  // namespace clvsa::kernels
