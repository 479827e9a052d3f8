#include <doctest.h>

#include <cmath>
#include <random>

#include "clvsa/gradcheck.hpp"
#include "clvsa/tape.hpp"

using namespace clvsa;
using diff::NodeRef;
using diff::Tape;
using diff::Tensor;

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({1}, {std::nan("")}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({1}, {INFINITY}), std::invalid_argument);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t[5] == 0.0);
  Tensor empty({0});
  CHECK(empty.size() == 0);
}

TEST_CASE("elementwise examples") {
  Tape tape;
  SUBCASE("sigmoid(0) = 0.5") {
    NodeRef x = tape.leaf(Tensor::scalar(0.0));
    CHECK(diff::sigmoid(x).value()[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("hadamard([1,2],[3,4]) = [3,8]") {
    NodeRef a = tape.leaf(Tensor({2}, {1, 2}));
    NodeRef b = tape.leaf(Tensor({2}, {3, 4}));
    NodeRef h = diff::elementwise(diff::EwKind::hadamard, a, b);
    CHECK(h.value()[0] == 3.0);
    CHECK(h.value()[1] == 8.0);
  }
  SUBCASE("add(x, zeros) = x") {
    NodeRef x = tape.leaf(Tensor({3}, {1.5, -2.0, 0.25}));
    NodeRef z = tape.leaf(Tensor({3}));
    NodeRef s = diff::add(x, z);
    for (int i = 0; i < 3; ++i) CHECK(s.value()[i] == x.value()[i]);
  }
  SUBCASE("shape mismatch rejected") {
    NodeRef a = tape.leaf(Tensor({2}));
    NodeRef b = tape.leaf(Tensor({3}));
    CHECK_THROWS_AS(diff::add(a, b), std::invalid_argument);
  }
  SUBCASE("binary kind requires b, unary rejects it") {
    NodeRef a = tape.leaf(Tensor({2}));
    CHECK_THROWS_AS(diff::elementwise(diff::EwKind::add, a),
                    std::invalid_argument);
    NodeRef b = tape.leaf(Tensor({2}));
    CHECK_THROWS_AS(diff::elementwise(diff::EwKind::tanh, a, b),
                    std::invalid_argument);
  }
}

TEST_CASE("affine examples") {
  Tape tape;
  SUBCASE("identity") {
    NodeRef w = tape.leaf(Tensor({2, 2}, {1, 0, 0, 1}));
    NodeRef x = tape.leaf(Tensor({2}, {2, 3}));
    NodeRef b = tape.leaf(Tensor({2}));
    NodeRef y = diff::affine(w, x, b);
    CHECK(y.value()[0] == 2.0);
    CHECK(y.value()[1] == 3.0);
  }
  SUBCASE("row sum") {
    NodeRef w = tape.leaf(Tensor({1, 2}, {1, 1}));
    NodeRef x = tape.leaf(Tensor({2}, {2, 3}));
    NodeRef b = tape.leaf(Tensor({1}, {1}));
    CHECK(diff::affine(w, x, b).value()[0] == 6.0);
  }
  SUBCASE("zero weights return the bias") {
    NodeRef w = tape.leaf(Tensor({2, 3}));
    NodeRef x = tape.leaf(Tensor({3}, {9, -4, 2}));
    NodeRef b = tape.leaf(Tensor({2}, {0.5, -0.5}));
    NodeRef y = diff::affine(w, x, b);
    CHECK(y.value()[0] == 0.5);
    CHECK(y.value()[1] == -0.5);
  }
  SUBCASE("dimension mismatch") {
    NodeRef w = tape.leaf(Tensor({2, 3}));
    NodeRef x = tape.leaf(Tensor({2}));
    NodeRef b = tape.leaf(Tensor({2}));
    CHECK_THROWS_AS(diff::affine(w, x, b), std::invalid_argument);
  }
}

TEST_CASE("conv1d_row_shared examples") {
  Tape tape;
  SUBCASE("box kernel with zero padding") {
    NodeRef input = tape.leaf(Tensor({1, 4, 1}, {1, 2, 3, 4}));
    NodeRef w = tape.leaf(Tensor({3, 1, 1}, {1, 1, 1}));
    NodeRef b = tape.leaf(Tensor({1}));
    NodeRef out = diff::conv1d_row_shared(input, diff::make_kernel(w, b));
    CHECK(out.value()[0] == 3.0);
    CHECK(out.value()[1] == 6.0);
    CHECK(out.value()[2] == 9.0);
    CHECK(out.value()[3] == 7.0);
  }
  SUBCASE("delta kernel is the identity") {
    NodeRef input = tape.leaf(Tensor({2, 3, 1}, {1, 2, 3, 4, 5, 6}));
    NodeRef w = tape.leaf(Tensor({3, 1, 1}, {0, 1, 0}));
    NodeRef b = tape.leaf(Tensor({1}));
    NodeRef out = diff::conv1d_row_shared(input, diff::make_kernel(w, b));
    for (int i = 0; i < 6; ++i) CHECK(out.value()[i] == input.value()[i]);
  }
  SUBCASE("zero kernel, zero bias") {
    NodeRef input = tape.leaf(Tensor({1, 4, 1}, {1, 2, 3, 4}));
    NodeRef w = tape.leaf(Tensor({3, 1, 1}));
    NodeRef b = tape.leaf(Tensor({1}));
    NodeRef out = diff::conv1d_row_shared(input, diff::make_kernel(w, b));
    for (int i = 0; i < 4; ++i) CHECK(out.value()[i] == 0.0);
  }
  SUBCASE("identical rows produce identical outputs (weight sharing)") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> row(6 * 2);
    for (double& v : row) v = u(rng);
    std::vector<double> both = row;
    both.insert(both.end(), row.begin(), row.end());
    NodeRef input = tape.leaf(Tensor({2, 6, 2}, both));
    std::vector<double> wv(3 * 2 * 4);
    for (double& v : wv) v = u(rng);
    NodeRef w = tape.leaf(Tensor({3, 2, 4}, wv));
    NodeRef b = tape.leaf(Tensor({4}, {0.1, -0.2, 0.3, 0.4}));
    NodeRef out = diff::conv1d_row_shared(input, diff::make_kernel(w, b));
    for (int i = 0; i < 6 * 4; ++i)
      CHECK(out.value()[i] == out.value()[6 * 4 + i]);
  }
  SUBCASE("channel mismatch") {
    NodeRef input = tape.leaf(Tensor({1, 4, 2}));
    NodeRef w = tape.leaf(Tensor({3, 1, 1}));
    NodeRef b = tape.leaf(Tensor({1}));
    CHECK_THROWS_AS(diff::conv1d_row_shared(input, diff::make_kernel(w, b)),
                    std::invalid_argument);
  }
  SUBCASE("even kernel width rejected") {
    NodeRef w = tape.leaf(Tensor({2, 1, 1}));
    NodeRef b = tape.leaf(Tensor({1}));
    CHECK_THROWS_AS(diff::make_kernel(w, b), std::invalid_argument);
  }
}

TEST_CASE("softmax_last examples and invariants") {
  Tape tape;
  SUBCASE("uniform") {
    NodeRef x = tape.leaf(Tensor({3}));
    NodeRef y = diff::softmax_last(x);
    for (int i = 0; i < 3; ++i)
      CHECK(y.value()[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("[ln2, 0] -> [2/3, 1/3]") {
    NodeRef x = tape.leaf(Tensor({2}, {std::log(2.0), 0.0}));
    NodeRef y = diff::softmax_last(x);
    CHECK(y.value()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(y.value()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }
  SUBCASE("slices sum to one and shifts do not matter") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-20, 20);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> v(7);
      for (double& x : v) x = u(rng);
      const double c = u(rng);
      std::vector<double> shifted = v;
      for (double& x : shifted) x += c;
      Tape t;
      NodeRef a = diff::softmax_last(t.leaf(Tensor({7}, v)));
      NodeRef b = diff::softmax_last(t.leaf(Tensor({7}, shifted)));
      double sum = 0.0;
      for (int i = 0; i < 7; ++i) {
        sum += a.value()[i];
        CHECK(std::abs(a.value()[i] - b.value()[i]) <= 1e-12);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("concat_last examples") {
  Tape tape;
  SUBCASE("[1,2] ++ [3]") {
    NodeRef a = tape.leaf(Tensor({2}, {1, 2}));
    NodeRef b = tape.leaf(Tensor({1}, {3}));
    NodeRef c = diff::concat_last(a, b);
    CHECK(c.value().size() == 3);
    CHECK(c.value()[2] == 3.0);
  }
  SUBCASE("concat with empty is the identity") {
    NodeRef a = tape.leaf(Tensor({3}, {1, 2, 3}));
    NodeRef e = tape.leaf(Tensor({0}));
    NodeRef c = diff::concat_last(a, e);
    CHECK(c.value().size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(c.value()[i] == a.value()[i]);
  }
  SUBCASE("gradient reaches the right halves") {
    NodeRef a = tape.leaf(Tensor({2}, {0.4, -0.7}));
    NodeRef b = tape.leaf(Tensor({1}, {0.9}));
    NodeRef c = diff::concat_last(a, b);
    NodeRef proj = tape.constant(Tensor({3}, {2, 3, 5}));
    tape.backward(diff::dot(c, proj));
    CHECK(a.grad()[0] == 2.0);
    CHECK(a.grad()[1] == 3.0);
    CHECK(b.grad()[0] == 5.0);
  }
}

TEST_CASE("cross_entropy examples") {
  Tape tape;
  SUBCASE("perfect prediction") {
    NodeRef p = tape.leaf(Tensor({3}, {1, 0, 0}));
    CHECK(diff::cross_entropy(p, 0).value()[0] == doctest::Approx(0.0));
  }
  SUBCASE("uniform three-way is ln 3") {
    NodeRef p = tape.leaf(Tensor({3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
    CHECK(diff::cross_entropy(p, 1).value()[0] ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }
  SUBCASE("half-confidence is ln 2") {
    NodeRef p = tape.leaf(Tensor({2}, {0.5, 0.5}));
    CHECK(diff::cross_entropy(p, 0).value()[0] ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("label out of range") {
    NodeRef p = tape.leaf(Tensor({3}, {0.2, 0.3, 0.5}));
    CHECK_THROWS_AS(diff::cross_entropy(p, 3), std::invalid_argument);
    CHECK_THROWS_AS(diff::cross_entropy(p, -1), std::invalid_argument);
  }
  SUBCASE("saturated softmax is floored, not infinite") {
    NodeRef p = tape.leaf(Tensor({2}, {1.0, 0.0}));
    const double v = diff::cross_entropy(p, 1).value()[0];
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(-std::log(1e-12)));
  }
}

TEST_CASE("reparameterize examples") {
  Tape tape;
  SUBCASE("eps = 0 gives mu") {
    NodeRef mu = tape.leaf(Tensor({2}, {1.5, -0.5}));
    NodeRef lv = tape.leaf(Tensor({2}, {0.3, -0.3}));
    NodeRef z = diff::reparameterize(mu, lv, Tensor({2}));
    CHECK(z.value()[0] == 1.5);
    CHECK(z.value()[1] == -0.5);
  }
  SUBCASE("unit variance") {
    NodeRef mu = tape.leaf(Tensor({1}));
    NodeRef lv = tape.leaf(Tensor({1}));
    NodeRef z = diff::reparameterize(mu, lv, Tensor({1}, {1.0}));
    CHECK(z.value()[0] == 1.0);
  }
  SUBCASE("monte carlo mean approaches mu") {
    const double mu_val = 0.7, logvar = -0.4;
    const double sigma = std::exp(0.5 * logvar);
    const int n = 100000;
    std::mt19937_64 rng(21);
    std::normal_distribution<double> gauss(0, 1);
    Tape t;
    NodeRef m = t.leaf(Tensor::scalar(mu_val));
    NodeRef lv = t.leaf(Tensor::scalar(logvar));
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      sum += diff::reparameterize(m, lv, Tensor::scalar(gauss(rng)))
                 .value()[0];
    CHECK(std::abs(sum / n - mu_val) <=
          3.0 * sigma / std::sqrt(double(n)));
  }
}

TEST_CASE("dropout examples") {
  std::mt19937_64 rng(5);
  Tape tape;
  NodeRef x = tape.leaf(Tensor({4}, {1, 2, 3, 4}));
  SUBCASE("rate 0 is identity") {
    NodeRef y = diff::dropout(x, 0.0, true, rng);
    CHECK(y.index == x.index);
  }
  SUBCASE("not training is identity") {
    NodeRef y = diff::dropout(x, 0.5, false, rng);
    CHECK(y.index == x.index);
  }
  SUBCASE("rate out of range") {
    CHECK_THROWS_AS(diff::dropout(x, 1.0, true, rng), std::invalid_argument);
    CHECK_THROWS_AS(diff::dropout(x, -0.1, true, rng),
                    std::invalid_argument);
  }
  SUBCASE("empirical drop fraction and inverted scaling") {
    const double rate = 0.3;
    const int n = 100000;
    Tape t;
    NodeRef ones = t.leaf(Tensor({n}, std::vector<double>(n, 1.0)));
    NodeRef y = diff::dropout(ones, rate, true, rng);
    int dropped = 0;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      if (y.value()[i] == 0.0)
        ++dropped;
      else
        CHECK(y.value()[i] == doctest::Approx(1.0 / (1.0 - rate)));
      sum += y.value()[i];
    }
    CHECK(std::abs(double(dropped) / n - rate) <= 0.01);
    CHECK(sum / n == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("backward examples") {
  SUBCASE("d(x^2)/dx at 3 is 6") {
    Tape tape;
    NodeRef x = tape.leaf(Tensor::scalar(3.0));
    tape.backward(diff::square(x));
    CHECK(x.grad()[0] == doctest::Approx(6.0));
  }
  SUBCASE("sigmoid'(0) = 0.25") {
    Tape tape;
    NodeRef x = tape.leaf(Tensor::scalar(0.0));
    tape.backward(diff::sigmoid(x));
    CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("sum of softmax has zero gradient") {
    Tape tape;
    NodeRef v = tape.leaf(Tensor({4}, {0.3, -1.2, 2.0, 0.1}));
    tape.backward(diff::sum(diff::softmax_last(v)));
    for (int i = 0; i < 4; ++i) CHECK(std::abs(v.grad()[i]) <= 1e-15);
  }
  SUBCASE("non-scalar loss rejected") {
    Tape tape;
    NodeRef x = tape.leaf(Tensor({2}, {1, 2}));
    CHECK_THROWS_AS(tape.backward(x), std::invalid_argument);
  }
  SUBCASE("second backward without reset rejected") {
    Tape tape;
    NodeRef x = tape.leaf(Tensor::scalar(2.0));
    NodeRef loss = diff::square(x);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
    tape.reset_grads();
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(4.0));
  }
  SUBCASE("gradient accumulates across fan-out") {
    Tape tape;
    NodeRef x = tape.leaf(Tensor::scalar(1.5));
    // loss = x*x + x so dloss/dx = 2x + 1 = 4
    tape.backward(diff::add(diff::hadamard(x, x), x));
    CHECK(x.grad()[0] == doctest::Approx(4.0));
  }
}

TEST_CASE("grad_check on a quadratic is exact to rounding") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> q(9);
  for (double& v : q) v = u(rng);
  Tensor x0({3}, {0.3, -0.8, 0.5});
  const Tensor qm({3, 3}, q);
  const auto f = [&qm](Tape& t, const std::vector<NodeRef>& p) {
    NodeRef qx = diff::matvec(t.constant(qm), p[0]);
    return diff::dot(p[0], qx);
  };
  const diff::GradCheckResult r = diff::grad_check(f, {x0});
  CHECK(r.max_rel_err < 1e-9);
  CHECK(r.coords_checked == 3);
}

TEST_CASE("grad_check rejects nondeterministic functions") {
  int calls = 0;
  const auto f = [&calls](Tape&, const std::vector<NodeRef>& p) {
    ++calls;
    return diff::scale(p[0], static_cast<double>(calls));
  };
  CHECK_THROWS_AS(diff::grad_check(f, {Tensor::scalar(1.0)}),
                  std::invalid_argument);
}

TEST_CASE("tape replay with the same seed is bit-identical") {
  auto run = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0, 1);
    Tape tape;
    std::vector<double> xs(16);
    for (double& v : xs) v = gauss(rng);
    NodeRef x = tape.leaf(Tensor({16}, xs));
    NodeRef y = diff::dropout(diff::tanh(x), 0.25, true, rng);
    NodeRef loss = diff::sum(diff::square(y));
    tape.backward(loss);
    std::vector<double> out{loss.value()[0]};
    for (int i = 0; i < 16; ++i) out.push_back(x.grad()[i]);
    return out;
  };
  CHECK(run(99) == run(99));
  CHECK(run(99) != run(100));
}
