#include "clvsa/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "clvsa/kernels.hpp"

namespace clvsa::diff {
namespace {

struct TamperState {
  bool enabled = false;
  OpTag tag = OpTag::leaf;
  double factor = 1.0;
};
TamperState g_tamper;

Tape& shared_tape(NodeRef a, NodeRef b) {
  if (!a.valid() || !b.valid())
    throw std::invalid_argument("op: invalid node reference");
  if (a.tape != b.tape)
    throw std::invalid_argument("op: nodes belong to different tapes");
  return *a.tape;
}

void require_same_shape(const NodeRef& a, const NodeRef& b,
                        const char* what) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                a.value().shape_str() + " vs " +
                                b.value().shape_str());
}

}  // namespace

const char* op_name(OpTag tag) {
  switch (tag) {
    case OpTag::leaf: return "leaf";
    case OpTag::constant: return "constant";
    case OpTag::add: return "add";
    case OpTag::sub: return "sub";
    case OpTag::hadamard: return "hadamard";
    case OpTag::sigmoid: return "sigmoid";
    case OpTag::tanh: return "tanh";
    case OpTag::relu: return "relu";
    case OpTag::exp: return "exp";
    case OpTag::square: return "square";
    case OpTag::neg: return "neg";
    case OpTag::scale: return "scale";
    case OpTag::clamp: return "clamp";
    case OpTag::affine: return "affine";
    case OpTag::matvec: return "matvec";
    case OpTag::conv1d_row_shared: return "conv1d_row_shared";
    case OpTag::softmax_last: return "softmax_last";
    case OpTag::concat_last: return "concat_last";
    case OpTag::cross_entropy: return "cross_entropy";
    case OpTag::reparameterize: return "reparameterize";
    case OpTag::dropout: return "dropout";
    case OpTag::sum: return "sum";
    case OpTag::dot: return "dot";
    case OpTag::stack_scalars: return "stack_scalars";
    case OpTag::weighted_sum: return "weighted_sum";
    case OpTag::reshape: return "reshape";
  }
  return "?";
}

const Tensor& NodeRef::value() const { return tape->node(index).value; }
const Tensor& NodeRef::grad() const { return tape->node(index).grad; }

NodeRef Tape::leaf(Tensor value) {
  return emplace(std::move(value), OpTag::leaf, {}, nullptr);
}

NodeRef Tape::constant(Tensor value) {
  return emplace(std::move(value), OpTag::constant, {}, nullptr);
}

NodeRef Tape::emplace(Tensor value, OpTag op, std::vector<int> parents,
                      std::function<void(Tape&, Node&)> backprop) {
  for (int p : parents)
    if (p < 0 || p >= size())
      throw std::logic_error("tape: parent does not precede child");
  Node n;
  n.grad = Tensor::zeros_like(value);
  n.value = std::move(value);
  n.op = op;
  n.parents = std::move(parents);
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return NodeRef{this, size() - 1};
}

void Tape::backward(NodeRef loss) {
  if (loss.tape != this)
    throw std::invalid_argument("backward: loss lives on another tape");
  if (backward_done_)
    throw std::logic_error(
        "backward: already ran on this tape; call reset_grads() first");
  Node& l = node(loss.index);
  if (l.value.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  l.grad[0] = 1.0;
  for (int i = loss.index; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.backprop) continue;
    if (g_tamper.enabled && n.op == g_tamper.tag)
      for (std::int64_t j = 0; j < n.grad.size(); ++j)
        n.grad[j] *= g_tamper.factor;
    n.backprop(*this, n);
  }
  backward_done_ = true;
}

void Tape::reset_grads() {
  for (Node& n : nodes_) n.grad.fill(0.0);
  backward_done_ = false;
}

void Tape::set_backward_tamper(OpTag tag, double factor) {
  g_tamper = {true, tag, factor};
}

void Tape::clear_backward_tamper() { g_tamper = {}; }

namespace {

using Fwd = void (*)(const double*, const double*, double*, std::int64_t);

NodeRef binary_ew(OpTag tag, NodeRef a, NodeRef b) {
  Tape& t = shared_tape(a, b);
  require_same_shape(a, b, op_name(tag));
  Tensor out = Tensor::zeros_like(a.value());
  const std::int64_t n = out.size();
  switch (tag) {
    case OpTag::add:
      kernels::ew_add(a.value().data(), b.value().data(), out.data(), n);
      break;
    case OpTag::sub:
      kernels::ew_sub(a.value().data(), b.value().data(), out.data(), n);
      break;
    case OpTag::hadamard:
      kernels::ew_mul(a.value().data(), b.value().data(), out.data(), n);
      break;
    default:
      throw std::logic_error("binary_ew: bad tag");
  }
  return t.emplace(std::move(out), tag, {a.index, b.index},
                   [tag, ai = a.index, bi = b.index](Tape& tp, Node& self) {
                     const std::int64_t m = self.grad.size();
                     Node& pa = tp.node(ai);
                     Node& pb = tp.node(bi);
                     switch (tag) {
                       case OpTag::add:
                         kernels::acc_add(self.grad.data(), pa.grad.data(), m);
                         kernels::acc_add(self.grad.data(), pb.grad.data(), m);
                         break;
                       case OpTag::sub:
                         kernels::acc_add(self.grad.data(), pa.grad.data(), m);
                         kernels::acc_scaled(self.grad.data(), -1.0,
                                             pb.grad.data(), m);
                         break;
                       case OpTag::hadamard:
                         kernels::acc_mul(self.grad.data(), pb.value.data(),
                                          pa.grad.data(), m);
                         kernels::acc_mul(self.grad.data(), pa.value.data(),
                                          pb.grad.data(), m);
                         break;
                       default:
                         break;
                     }
                   });
}

NodeRef unary_ew(OpTag tag, NodeRef x) {
  if (!x.valid()) throw std::invalid_argument("op: invalid node reference");
  Tape& t = *x.tape;
  Tensor out = Tensor::zeros_like(x.value());
  const std::int64_t n = out.size();
  switch (tag) {
    case OpTag::sigmoid:
      kernels::ew_sigmoid(x.value().data(), out.data(), n);
      break;
    case OpTag::tanh:
      kernels::ew_tanh(x.value().data(), out.data(), n);
      break;
    case OpTag::relu:
      kernels::ew_relu(x.value().data(), out.data(), n);
      break;
    case OpTag::exp:
      kernels::ew_exp(x.value().data(), out.data(), n);
      break;
    case OpTag::square:
      kernels::ew_square(x.value().data(), out.data(), n);
      break;
    case OpTag::neg:
      kernels::ew_neg(x.value().data(), out.data(), n);
      break;
    default:
      throw std::logic_error("unary_ew: bad tag");
  }
  return t.emplace(std::move(out), tag, {x.index},
                   [tag, xi = x.index](Tape& tp, Node& self) {
                     const std::int64_t m = self.grad.size();
                     Node& px = tp.node(xi);
                     switch (tag) {
                       case OpTag::sigmoid:
                         kernels::acc_sigmoid_grad(self.grad.data(),
                                                   self.value.data(),
                                                   px.grad.data(), m);
                         break;
                       case OpTag::tanh:
                         kernels::acc_tanh_grad(self.grad.data(),
                                                self.value.data(),
                                                px.grad.data(), m);
                         break;
                       case OpTag::relu:
                         kernels::acc_relu_grad(self.grad.data(),
                                                px.value.data(),
                                                px.grad.data(), m);
                         break;
                       case OpTag::exp:
                         kernels::acc_exp_grad(self.grad.data(),
                                               self.value.data(),
                                               px.grad.data(), m);
                         break;
                       case OpTag::square:
                         kernels::acc_square_grad(self.grad.data(),
                                                  px.value.data(),
                                                  px.grad.data(), m);
                         break;
                       case OpTag::neg:
                         kernels::acc_scaled(self.grad.data(), -1.0,
                                             px.grad.data(), m);
                         break;
                       default:
                         break;
                     }
                   });
}

}  // namespace

NodeRef elementwise(EwKind kind, NodeRef a, NodeRef b) {
  switch (kind) {
    case EwKind::add:
    case EwKind::hadamard:
      if (!b.valid())
        throw std::invalid_argument("elementwise: binary kind needs b");
      return kind == EwKind::add ? add(a, b) : hadamard(a, b);
    case EwKind::sigmoid:
    case EwKind::tanh:
    case EwKind::relu:
      if (b.valid())
        throw std::invalid_argument("elementwise: unary kind takes no b");
      if (kind == EwKind::sigmoid) return sigmoid(a);
      if (kind == EwKind::tanh) return tanh(a);
      return relu(a);
  }
  throw std::invalid_argument("elementwise: unknown op-kind");
}

NodeRef add(NodeRef a, NodeRef b) { return binary_ew(OpTag::add, a, b); }
NodeRef sub(NodeRef a, NodeRef b) { return binary_ew(OpTag::sub, a, b); }
NodeRef hadamard(NodeRef a, NodeRef b) {
  return binary_ew(OpTag::hadamard, a, b);
}
NodeRef sigmoid(NodeRef x) { return unary_ew(OpTag::sigmoid, x); }
NodeRef tanh(NodeRef x) { return unary_ew(OpTag::tanh, x); }
NodeRef relu(NodeRef x) { return unary_ew(OpTag::relu, x); }
NodeRef exp(NodeRef x) { return unary_ew(OpTag::exp, x); }
NodeRef square(NodeRef x) { return unary_ew(OpTag::square, x); }
NodeRef neg(NodeRef x) { return unary_ew(OpTag::neg, x); }

NodeRef scale(NodeRef x, double c) {
  Tape& t = *x.tape;
  Tensor out = Tensor::zeros_like(x.value());
  kernels::ew_scale(x.value().data(), c, out.data(), out.size());
  return t.emplace(std::move(out), OpTag::scale, {x.index},
                   [c, xi = x.index](Tape& tp, Node& self) {
                     kernels::acc_scaled(self.grad.data(), c,
                                         tp.node(xi).grad.data(),
                                         self.grad.size());
                   });
}

NodeRef clamp(NodeRef x, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
  Tape& t = *x.tape;
  Tensor out = Tensor::zeros_like(x.value());
  kernels::ew_clamp(x.value().data(), lo, hi, out.data(), out.size());
  return t.emplace(std::move(out), OpTag::clamp, {x.index},
                   [lo, hi, xi = x.index](Tape& tp, Node& self) {
                     Node& px = tp.node(xi);
                     kernels::acc_clamp_grad(self.grad.data(),
                                             px.value.data(), lo, hi,
                                             px.grad.data(), self.grad.size());
                   });
}

namespace {

NodeRef matvec_impl(NodeRef w, NodeRef x, NodeRef b, bool with_bias) {
  Tape& t = shared_tape(w, x);
  const Tensor& wv = w.value();
  const Tensor& xv = x.value();
  if (wv.rank() != 2 || xv.rank() != 1)
    throw std::invalid_argument("affine: W must be rank 2 and x rank 1");
  const int m = wv.dim(0);
  const int n = wv.dim(1);
  if (xv.dim(0) != n)
    throw std::invalid_argument("affine: inner dimensions disagree: W " +
                                wv.shape_str() + " vs x " + xv.shape_str());
  const double* bias = nullptr;
  if (with_bias) {
    shared_tape(w, b);
    if (b.value().rank() != 1 || b.value().dim(0) != m)
      throw std::invalid_argument("affine: bias must have length " +
                                  std::to_string(m));
    bias = b.value().data();
  }
  Tensor out({m});
  kernels::matvec(wv.data(), xv.data(), bias, out.data(), m, n);
  std::vector<int> parents = {w.index, x.index};
  if (with_bias) parents.push_back(b.index);
  return t.emplace(
      std::move(out), with_bias ? OpTag::affine : OpTag::matvec,
      std::move(parents),
      [m, n, wi = w.index, xi = x.index, bi = b.index,
       with_bias](Tape& tp, Node& self) {
        Node& pw = tp.node(wi);
        Node& px = tp.node(xi);
        kernels::matvec_grad_w(self.grad.data(), px.value.data(),
                               pw.grad.data(), m, n);
        kernels::matvec_grad_x(pw.value.data(), self.grad.data(),
                               px.grad.data(), m, n);
        if (with_bias)
          kernels::acc_add(self.grad.data(), tp.node(bi).grad.data(), m);
      });
}

}  // namespace

NodeRef affine(NodeRef w, NodeRef x, NodeRef b) {
  return matvec_impl(w, x, b, true);
}

NodeRef matvec(NodeRef w, NodeRef x) { return matvec_impl(w, x, {}, false); }

Kernel make_kernel(NodeRef weights, NodeRef bias) {
  shared_tape(weights, bias);
  const Tensor& wv = weights.value();
  if (wv.rank() != 3)
    throw std::invalid_argument("kernel: weights must be [width x in x out]");
  Kernel k;
  k.weights = weights;
  k.bias = bias;
  k.width = wv.dim(0);
  k.in_channels = wv.dim(1);
  k.out_channels = wv.dim(2);
  if (k.width % 2 == 0 || k.width < 1)
    throw std::invalid_argument("kernel: width must be odd");
  if (bias.value().rank() != 1 || bias.value().dim(0) != k.out_channels)
    throw std::invalid_argument("kernel: bias must have length out_channels");
  return k;
}

NodeRef conv1d_row_shared(NodeRef input, const Kernel& k) {
  Tape& t = shared_tape(input, k.weights);
  const Tensor& in = input.value();
  if (in.rank() != 3)
    throw std::invalid_argument("conv1d: input must be [F x T x Cin]");
  const int rows = in.dim(0);
  const int cols = in.dim(1);
  const int cin = in.dim(2);
  if (cin != k.in_channels)
    throw std::invalid_argument(
        "conv1d: channel mismatch, input has " + std::to_string(cin) +
        " but kernel expects " + std::to_string(k.in_channels));
  const int cout = k.out_channels;
  Tensor out({rows, cols, cout});
  kernels::conv1d_rows(in.data(), k.weights.value().data(),
                       k.bias.value().data(), out.data(), rows, cols, cin,
                       cout, k.width);
  return t.emplace(
      std::move(out), OpTag::conv1d_row_shared,
      {input.index, k.weights.index, k.bias.index},
      [rows, cols, cin, cout, width = k.width, ii = input.index,
       wi = k.weights.index, bi = k.bias.index](Tape& tp, Node& self) {
        Node& pin = tp.node(ii);
        Node& pw = tp.node(wi);
        Node& pb = tp.node(bi);
        kernels::conv1d_rows_grad_in(pw.value.data(), self.grad.data(),
                                     pin.grad.data(), rows, cols, cin, cout,
                                     width);
        kernels::conv1d_rows_grad_w(pin.value.data(), self.grad.data(),
                                    pw.grad.data(), rows, cols, cin, cout,
                                    width);
        kernels::conv1d_rows_grad_b(self.grad.data(), pb.grad.data(), rows,
                                    cols, cout);
      });
}

NodeRef softmax_last(NodeRef x) {
  Tape& t = *x.tape;
  const Tensor& xv = x.value();
  if (xv.rank() < 1 || xv.dim(xv.rank() - 1) < 1)
    throw std::invalid_argument("softmax_last: last axis must be nonempty");
  const int n = xv.dim(xv.rank() - 1);
  const std::int64_t slices = xv.size() / n;
  Tensor out = Tensor::zeros_like(xv);
  kernels::softmax_slices(xv.data(), out.data(), slices, n);
  return t.emplace(std::move(out), OpTag::softmax_last, {x.index},
                   [slices, n, xi = x.index](Tape& tp, Node& self) {
                     kernels::softmax_slices_grad(self.grad.data(),
                                                  self.value.data(),
                                                  tp.node(xi).grad.data(),
                                                  slices, n);
                   });
}

NodeRef concat_last(NodeRef a, NodeRef b) {
  Tape& t = shared_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != bv.rank() || av.rank() < 1)
    throw std::invalid_argument("concat_last: rank mismatch");
  for (int i = 0; i + 1 < av.rank(); ++i)
    if (av.dim(i) != bv.dim(i))
      throw std::invalid_argument("concat_last: shapes differ off the last axis: " +
                                  av.shape_str() + " vs " + bv.shape_str());
  const int na = av.dim(av.rank() - 1);
  const int nb = bv.dim(bv.rank() - 1);
  std::vector<int> shape = av.shape();
  shape.back() = na + nb;
  Tensor out(std::move(shape));
  const std::int64_t outer = na + nb > 0 ? out.size() / (na + nb) : 0;
  for (std::int64_t o = 0; o < outer; ++o) {
    double* dst = out.data() + o * (na + nb);
    const double* pa = av.data() + o * na;
    const double* pb = bv.data() + o * nb;
    for (int i = 0; i < na; ++i) dst[i] = pa[i];
    for (int i = 0; i < nb; ++i) dst[na + i] = pb[i];
  }
  return t.emplace(std::move(out), OpTag::concat_last, {a.index, b.index},
                   [na, nb, ai = a.index, bi = b.index](Tape& tp, Node& self) {
                     Node& pa = tp.node(ai);
                     Node& pb = tp.node(bi);
                     const std::int64_t outer =
                         na + nb > 0 ? self.grad.size() / (na + nb) : 0;
                     for (std::int64_t o = 0; o < outer; ++o) {
                       const double* g = self.grad.data() + o * (na + nb);
                       double* ga = pa.grad.data() + o * na;
                       double* gb = pb.grad.data() + o * nb;
                       for (int i = 0; i < na; ++i) ga[i] += g[i];
                       for (int i = 0; i < nb; ++i) gb[i] += g[na + i];
                     }
                   });
}

NodeRef cross_entropy(NodeRef probs, int label) {
  Tape& t = *probs.tape;
  const Tensor& pv = probs.value();
  if (pv.rank() != 1)
    throw std::invalid_argument("cross_entropy: probs must be a vector");
  if (label < 0 || label >= pv.dim(0))
    throw std::invalid_argument("cross_entropy: label " +
                                std::to_string(label) + " out of range");
  const double p = pv[label];
  Tensor out = Tensor::scalar(-std::log(std::max(p, 1e-12)));
  return t.emplace(std::move(out), OpTag::cross_entropy, {probs.index},
                   [label, pi = probs.index](Tape& tp, Node& self) {
                     Node& pp = tp.node(pi);
                     const double pl = pp.value[label];
                     // in the floored regime the clamped log is constant
                     if (pl >= 1e-12) pp.grad[label] -= self.grad[0] / pl;
                   });
}

NodeRef reparameterize(NodeRef mu, NodeRef logvar, const Tensor& eps) {
  Tape& t = shared_tape(mu, logvar);
  require_same_shape(mu, logvar, "reparameterize");
  if (!mu.value().same_shape(eps))
    throw std::invalid_argument("reparameterize: eps shape mismatch");
  const std::int64_t n = eps.size();
  Tensor sigma = Tensor::zeros_like(eps);
  for (std::int64_t i = 0; i < n; ++i)
    sigma[i] = std::exp(0.5 * logvar.value()[i]);
  Tensor out = Tensor::zeros_like(eps);
  for (std::int64_t i = 0; i < n; ++i)
    out[i] = mu.value()[i] + sigma[i] * eps[i];
  return t.emplace(
      std::move(out), OpTag::reparameterize, {mu.index, logvar.index},
      [mi = mu.index, li = logvar.index, sigma = std::move(sigma),
       eps](Tape& tp, Node& self) {
        Node& pm = tp.node(mi);
        Node& pl = tp.node(li);
        const std::int64_t n = self.grad.size();
        kernels::acc_add(self.grad.data(), pm.grad.data(), n);
        for (std::int64_t i = 0; i < n; ++i)
          pl.grad[i] += 0.5 * self.grad[i] * sigma[i] * eps[i];
      });
}

NodeRef dropout(NodeRef x, double rate, bool training,
                std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;  // identity outside training
  Tape& t = *x.tape;
  const std::int64_t n = x.value().size();
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor mask = Tensor::zeros_like(x.value());
  for (std::int64_t i = 0; i < n; ++i)
    mask[i] = u(rng) < rate ? 0.0 : keep_scale;
  Tensor out = Tensor::zeros_like(x.value());
  kernels::ew_mul(x.value().data(), mask.data(), out.data(), n);
  return t.emplace(std::move(out), OpTag::dropout, {x.index},
                   [mask = std::move(mask), xi = x.index](Tape& tp,
                                                          Node& self) {
                     kernels::acc_mul(self.grad.data(), mask.data(),
                                      tp.node(xi).grad.data(),
                                      self.grad.size());
                   });
}

NodeRef sum(NodeRef x) {
  Tape& t = *x.tape;
  Tensor out = Tensor::scalar(kernels::reduce_sum(x.value().data(),
                                                  x.value().size()));
  return t.emplace(std::move(out), OpTag::sum, {x.index},
                   [xi = x.index](Tape& tp, Node& self) {
                     Node& px = tp.node(xi);
                     const double g = self.grad[0];
                     for (std::int64_t i = 0; i < px.grad.size(); ++i)
                       px.grad[i] += g;
                   });
}

NodeRef dot(NodeRef a, NodeRef b) {
  Tape& t = shared_tape(a, b);
  require_same_shape(a, b, "dot");
  Tensor out = Tensor::scalar(kernels::reduce_dot(
      a.value().data(), b.value().data(), a.value().size()));
  return t.emplace(std::move(out), OpTag::dot, {a.index, b.index},
                   [ai = a.index, bi = b.index](Tape& tp, Node& self) {
                     Node& pa = tp.node(ai);
                     Node& pb = tp.node(bi);
                     const double g = self.grad[0];
                     kernels::acc_scaled(pb.value.data(), g, pa.grad.data(),
                                         pa.grad.size());
                     kernels::acc_scaled(pa.value.data(), g, pb.grad.data(),
                                         pb.grad.size());
                   });
}

NodeRef stack_scalars(const std::vector<NodeRef>& xs) {
  if (xs.empty())
    throw std::invalid_argument("stack_scalars: nothing to stack");
  Tape& t = *xs.front().tape;
  std::vector<int> parents;
  Tensor out({static_cast<int>(xs.size())});
  for (std::size_t i = 0; i < xs.size(); ++i) {
    shared_tape(xs.front(), xs[i]);
    if (xs[i].value().size() != 1)
      throw std::invalid_argument("stack_scalars: inputs must be scalar");
    out[static_cast<std::int64_t>(i)] = xs[i].value()[0];
    parents.push_back(xs[i].index);
  }
  return t.emplace(std::move(out), OpTag::stack_scalars, parents,
                   [parents](Tape& tp, Node& self) {
                     for (std::size_t i = 0; i < parents.size(); ++i)
                       tp.node(parents[i]).grad[0] +=
                           self.grad[static_cast<std::int64_t>(i)];
                   });
}

NodeRef weighted_sum(NodeRef weights, const std::vector<NodeRef>& vectors) {
  if (vectors.empty())
    throw std::invalid_argument("weighted_sum: empty vector list");
  Tape& t = shared_tape(weights, vectors.front());
  const Tensor& wv = weights.value();
  if (wv.rank() != 1 ||
      wv.dim(0) != static_cast<int>(vectors.size()))
    throw std::invalid_argument(
        "weighted_sum: weight count must match vector count");
  std::vector<int> parents = {weights.index};
  std::vector<const double*> ptrs;
  for (const NodeRef& v : vectors) {
    shared_tape(weights, v);
    require_same_shape(vectors.front(), v, "weighted_sum");
    parents.push_back(v.index);
    ptrs.push_back(v.value().data());
  }
  const std::int64_t dim = vectors.front().value().size();
  Tensor out = Tensor::zeros_like(vectors.front().value());
  kernels::weighted_sum(wv.data(), ptrs.data(),
                        static_cast<int>(vectors.size()), out.data(), dim);
  return t.emplace(
      std::move(out), OpTag::weighted_sum, parents,
      [parents, dim](Tape& tp, Node& self) {
        const int count = static_cast<int>(parents.size()) - 1;
        Node& pw = tp.node(parents[0]);
        std::vector<const double*> vals(static_cast<std::size_t>(count));
        std::vector<double*> grads(static_cast<std::size_t>(count));
        for (int e = 0; e < count; ++e) {
          Node& pv = tp.node(parents[static_cast<std::size_t>(e) + 1]);
          vals[static_cast<std::size_t>(e)] = pv.value.data();
          grads[static_cast<std::size_t>(e)] = pv.grad.data();
        }
        kernels::weighted_sum_grad_w(self.grad.data(), vals.data(), count,
                                     pw.grad.data(), dim);
        kernels::weighted_sum_grad_v(self.grad.data(), pw.value.data(), count,
                                     grads.data(), dim);
      });
}

NodeRef reshape(NodeRef x, std::vector<int> shape) {
  Tape& t = *x.tape;
  if (shape_product(shape) != x.value().size())
    throw std::invalid_argument("reshape: element count changes");
  std::vector<double> vals(x.value().data(),
                           x.value().data() + x.value().size());
  Tensor reshaped(std::move(shape), std::move(vals));
  return t.emplace(std::move(reshaped), OpTag::reshape, {x.index},
                   [xi = x.index](Tape& tp, Node& self) {
                     kernels::acc_add(self.grad.data(),
                                      tp.node(xi).grad.data(),
                                      self.grad.size());
                   });
}

}  // namespace clvsa::diff
