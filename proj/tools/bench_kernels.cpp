// Times the serial reference against the OpenMP kernel path at the tensor
// shapes the model actually uses. Both paths must agree bit for bit; the
// unit tests enforce that, this tool reports the speed difference.
#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "clvsa/kernels.hpp"

using clvsa::kernels::Mode;
using Clock = std::chrono::steady_clock;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

template <class Fn>
double time_ms(Fn&& fn, int reps) {
  fn();  // warm up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() /
         static_cast<double>(reps);
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s serial %9.4f ms   openmp %9.4f ms   speedup %.2fx\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
  std::mt19937_64 rng(42);

  {
    // attention mixer at paper scale: 960 x 1920
    const int m = 960, n = 1920;
    const std::vector<double> w = random_vec(static_cast<std::size_t>(m) * n,
                                             rng);
    const std::vector<double> x = random_vec(n, rng);
    std::vector<double> y(m);
    auto run = [&] {
      clvsa::kernels::matvec(w.data(), x.data(), nullptr, y.data(), m, n);
    };
    clvsa::kernels::set_mode(Mode::serial);
    const double s = time_ms(run, 50);
    clvsa::kernels::set_mode(Mode::parallel);
    const double p = time_ms(run, 50);
    report("matvec 960x1920", s, p);
  }

  {
    // gate convolution at paper scale: 5x6 grid, 33 -> 32 channels
    const int rows = 5, cols = 6, cin = 33, cout = 32, width = 3;
    const std::vector<double> in =
        random_vec(static_cast<std::size_t>(rows) * cols * cin, rng);
    const std::vector<double> w =
        random_vec(static_cast<std::size_t>(width) * cin * cout, rng);
    const std::vector<double> b = random_vec(cout, rng);
    std::vector<double> out(static_cast<std::size_t>(rows) * cols * cout);
    auto run = [&] {
      clvsa::kernels::conv1d_rows(in.data(), w.data(), b.data(), out.data(),
                                  rows, cols, cin, cout, width);
    };
    clvsa::kernels::set_mode(Mode::serial);
    const double s = time_ms(run, 2000);
    clvsa::kernels::set_mode(Mode::parallel);
    const double p = time_ms(run, 2000);
    report("conv1d 5x6x33->32", s, p);
  }

  {
    // weighted context over 48 encoder states of width 960
    const int count = 48;
    const std::size_t dim = 960;
    const std::vector<double> w = random_vec(count, rng);
    std::vector<std::vector<double>> vecs;
    std::vector<const double*> ptrs;
    for (int e = 0; e < count; ++e) {
      vecs.push_back(random_vec(dim, rng));
      ptrs.push_back(vecs.back().data());
    }
    std::vector<double> out(dim);
    auto run = [&] {
      clvsa::kernels::weighted_sum(w.data(), ptrs.data(), count, out.data(),
                                   static_cast<std::int64_t>(dim));
    };
    clvsa::kernels::set_mode(Mode::serial);
    const double s = time_ms(run, 2000);
    clvsa::kernels::set_mode(Mode::parallel);
    const double p = time_ms(run, 2000);
    report("weighted_sum 48x960", s, p);
  }

  {
    // elementwise gate math on the 5x6x32 grid
    const std::size_t n = 5 * 6 * 32;
    const std::vector<double> a = random_vec(n, rng);
    std::vector<double> y(n);
    auto run = [&] {
      clvsa::kernels::ew_sigmoid(a.data(), y.data(),
                                 static_cast<std::int64_t>(n));
    };
    clvsa::kernels::set_mode(Mode::serial);
    const double s = time_ms(run, 5000);
    clvsa::kernels::set_mode(Mode::parallel);
    const double p = time_ms(run, 5000);
    report("sigmoid 960", s, p);
  }

  clvsa::kernels::set_mode(Mode::parallel);
  return 0;
}
