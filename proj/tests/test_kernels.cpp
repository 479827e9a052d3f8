#include <doctest.h>

#include <cstring>
#include <random>
#include <vector>

#include "clvsa/kernels.hpp"

namespace k = clvsa::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct ModeGuard {
  ~ModeGuard() { k::set_mode(k::Mode::parallel); }
};

}  // namespace

// The OpenMP variants only split independent output elements, so they must
// agree with the serial reference bit for bit, at sizes well above the
// parallel cutoff.
TEST_CASE("serial and parallel kernels agree bitwise") {
  ModeGuard guard;
  std::mt19937_64 rng(123);

  SUBCASE("matvec family") {
    const int m = 960, n = 1920;
    const auto w = random_vec(std::size_t(m) * n, rng);
    const auto x = random_vec(n, rng);
    const auto b = random_vec(m, rng);
    const auto gy = random_vec(m, rng);
    std::vector<double> y_s(m), y_p(m), gx_s(n, 0.1), gx_p(n, 0.1),
        gw_s(std::size_t(m) * n, 0.2), gw_p(std::size_t(m) * n, 0.2);
    k::set_mode(k::Mode::serial);
    k::matvec(w.data(), x.data(), b.data(), y_s.data(), m, n);
    k::matvec_grad_x(w.data(), gy.data(), gx_s.data(), m, n);
    k::matvec_grad_w(gy.data(), x.data(), gw_s.data(), m, n);
    k::set_mode(k::Mode::parallel);
    k::matvec(w.data(), x.data(), b.data(), y_p.data(), m, n);
    k::matvec_grad_x(w.data(), gy.data(), gx_p.data(), m, n);
    k::matvec_grad_w(gy.data(), x.data(), gw_p.data(), m, n);
    CHECK(bit_equal(y_s, y_p));
    CHECK(bit_equal(gx_s, gx_p));
    CHECK(bit_equal(gw_s, gw_p));
  }

  SUBCASE("conv1d family") {
    const int rows = 5, cols = 48, cin = 33, cout = 32, width = 3;
    const auto in = random_vec(std::size_t(rows) * cols * cin, rng);
    const auto w = random_vec(std::size_t(width) * cin * cout, rng);
    const auto b = random_vec(cout, rng);
    const auto gout = random_vec(std::size_t(rows) * cols * cout, rng);
    std::vector<double> o_s(gout.size()), o_p(gout.size());
    std::vector<double> gi_s(in.size(), 0.3), gi_p(in.size(), 0.3);
    std::vector<double> gw_s(w.size(), -0.1), gw_p(w.size(), -0.1);
    std::vector<double> gb_s(cout, 0.0), gb_p(cout, 0.0);
    k::set_mode(k::Mode::serial);
    k::conv1d_rows(in.data(), w.data(), b.data(), o_s.data(), rows, cols,
                   cin, cout, width);
    k::conv1d_rows_grad_in(w.data(), gout.data(), gi_s.data(), rows, cols,
                           cin, cout, width);
    k::conv1d_rows_grad_w(in.data(), gout.data(), gw_s.data(), rows, cols,
                          cin, cout, width);
    k::conv1d_rows_grad_b(gout.data(), gb_s.data(), rows, cols, cout);
    k::set_mode(k::Mode::parallel);
    k::conv1d_rows(in.data(), w.data(), b.data(), o_p.data(), rows, cols,
                   cin, cout, width);
    k::conv1d_rows_grad_in(w.data(), gout.data(), gi_p.data(), rows, cols,
                           cin, cout, width);
    k::conv1d_rows_grad_w(in.data(), gout.data(), gw_p.data(), rows, cols,
                          cin, cout, width);
    k::conv1d_rows_grad_b(gout.data(), gb_p.data(), rows, cols, cout);
    CHECK(bit_equal(o_s, o_p));
    CHECK(bit_equal(gi_s, gi_p));
    CHECK(bit_equal(gw_s, gw_p));
    CHECK(bit_equal(gb_s, gb_p));
  }

  SUBCASE("elementwise and softmax") {
    const std::size_t n = 1 << 17;
    const auto a = random_vec(n, rng);
    const auto b = random_vec(n, rng);
    std::vector<double> y_s(n), y_p(n), acc_s(n, 0.5), acc_p(n, 0.5);
    k::set_mode(k::Mode::serial);
    k::ew_sigmoid(a.data(), y_s.data(), n);
    k::acc_mul(a.data(), b.data(), acc_s.data(), n);
    k::set_mode(k::Mode::parallel);
    k::ew_sigmoid(a.data(), y_p.data(), n);
    k::acc_mul(a.data(), b.data(), acc_p.data(), n);
    CHECK(bit_equal(y_s, y_p));
    CHECK(bit_equal(acc_s, acc_p));

    const int slice = 64;
    std::vector<double> sm_s(n), sm_p(n), smg_s(n, 0.0), smg_p(n, 0.0);
    k::set_mode(k::Mode::serial);
    k::softmax_slices(a.data(), sm_s.data(), n / slice, slice);
    k::softmax_slices_grad(b.data(), sm_s.data(), smg_s.data(), n / slice,
                           slice);
    k::set_mode(k::Mode::parallel);
    k::softmax_slices(a.data(), sm_p.data(), n / slice, slice);
    k::softmax_slices_grad(b.data(), sm_p.data(), smg_p.data(), n / slice,
                           slice);
    CHECK(bit_equal(sm_s, sm_p));
    CHECK(bit_equal(smg_s, smg_p));
  }

  SUBCASE("weighted sum") {
    const int count = 48;
    const std::size_t dim = 960;
    const auto w = random_vec(count, rng);
    const auto g = random_vec(dim, rng);
    std::vector<std::vector<double>> vecs;
    std::vector<const double*> ptrs;
    for (int e = 0; e < count; ++e) {
      vecs.push_back(random_vec(dim, rng));
      ptrs.push_back(vecs.back().data());
    }
    std::vector<double> out_s(dim), out_p(dim), gw_s(count, 0.0),
        gw_p(count, 0.0);
    k::set_mode(k::Mode::serial);
    k::weighted_sum(w.data(), ptrs.data(), count, out_s.data(), dim);
    k::weighted_sum_grad_w(g.data(), ptrs.data(), count, gw_s.data(), dim);
    k::set_mode(k::Mode::parallel);
    k::weighted_sum(w.data(), ptrs.data(), count, out_p.data(), dim);
    k::weighted_sum_grad_w(g.data(), ptrs.data(), count, gw_p.data(), dim);
    CHECK(bit_equal(out_s, out_p));
    CHECK(bit_equal(gw_s, gw_p));
  }
}

TEST_CASE("matvec against a naive triple check") {
  std::mt19937_64 rng(7);
  const int m = 11, n = 13;
  const auto w = random_vec(std::size_t(m) * n, rng);
  const auto x = random_vec(n, rng);
  const auto b = random_vec(m, rng);
  std::vector<double> y(m);
  k::matvec(w.data(), x.data(), b.data(), y.data(), m, n);
  for (int i = 0; i < m; ++i) {
    double acc = b[i];
    for (int j = 0; j < n; ++j) acc += w[std::size_t(i) * n + j] * x[j];
    CHECK(y[i] == doctest::Approx(acc).epsilon(1e-14));
  }
}
