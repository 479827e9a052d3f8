#pragma once

#include <functional>
#include <random>
#include <vector>

#include "clvsa/tensor.hpp"

namespace clvsa::diff {

enum class OpTag {
  leaf,
  constant,
  add,
  sub,
  hadamard,
  sigmoid,
  tanh,
  relu,
  exp,
  square,
  neg,
  scale,
  clamp,
  affine,
  matvec,
  conv1d_row_shared,
  softmax_last,
  concat_last,
  cross_entropy,
  reparameterize,
  dropout,
  sum,
  dot,
  stack_scalars,
  weighted_sum,
  reshape,
};

const char* op_name(OpTag tag);

class Tape;

// Cheap handle into a tape; a node never outlives its tape.
struct NodeRef {
  Tape* tape = nullptr;
  int index = -1;

  bool valid() const { return tape != nullptr; }
  const Tensor& value() const;
  const Tensor& grad() const;
};

struct Node {
  Tensor value;
  Tensor grad;  // same shape as value, zero until backward()
  OpTag op = OpTag::leaf;
  std::vector<int> parents;
  std::function<void(Tape&, Node&)> backprop;  // accumulates into parents
};

// Reverse-mode tape. Nodes are stored in creation order, so every parent
// precedes its children; backward() walks the list once in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  NodeRef leaf(Tensor value);
  NodeRef constant(Tensor value);
  NodeRef emplace(Tensor value, OpTag op, std::vector<int> parents,
                  std::function<void(Tape&, Node&)> backprop);

  // reverse topological gradient accumulation; the loss must be scalar and
  // a second call without reset_grads() is an error
  void backward(NodeRef loss);
  void reset_grads();

  int size() const { return static_cast<int>(nodes_.size()); }
  Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  const Node& node(int i) const {
    return nodes_[static_cast<std::size_t>(i)];
  }

  // Test hook: scales the outgoing gradient of every node carrying the given
  // tag so the gradient checker can prove it detects a broken rule.
  static void set_backward_tamper(OpTag tag, double factor);
  static void clear_backward_tamper();

 private:
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

enum class EwKind { add, hadamard, sigmoid, tanh, relu };

// The five spec elementwise kinds behind one entry point; binary kinds
// require b, unary kinds reject it.
NodeRef elementwise(EwKind kind, NodeRef a, NodeRef b = {});

NodeRef add(NodeRef a, NodeRef b);
NodeRef sub(NodeRef a, NodeRef b);
NodeRef hadamard(NodeRef a, NodeRef b);
NodeRef sigmoid(NodeRef x);
NodeRef tanh(NodeRef x);
NodeRef relu(NodeRef x);
NodeRef exp(NodeRef x);
NodeRef square(NodeRef x);
NodeRef neg(NodeRef x);
NodeRef scale(NodeRef x, double c);
NodeRef clamp(NodeRef x, double lo, double hi);

// y = W x + b with W [m x n], x [n], b [m]
NodeRef affine(NodeRef w, NodeRef x, NodeRef b);
// y = W x (no bias)
NodeRef matvec(NodeRef w, NodeRef x);

// Convolution parameters: weights [width x in x out] with odd width, bias
// [out]. Gradients flow into both tensors.
struct Kernel {
  NodeRef weights;
  NodeRef bias;
  int width = 0;
  int in_channels = 0;
  int out_channels = 0;
};
Kernel make_kernel(NodeRef weights, NodeRef bias);

// input [F x T x Cin] -> [F x T x Cout]; the kernel slides along T only with
// zero padding of (width-1)/2 so T is preserved, and the same weights are
// applied to every feature row.
NodeRef conv1d_row_shared(NodeRef input, const Kernel& k);

NodeRef softmax_last(NodeRef x);
NodeRef concat_last(NodeRef a, NodeRef b);

// -log(probs[label]) with the log argument floored at 1e-12
NodeRef cross_entropy(NodeRef probs, int label);

// mu + exp(logvar/2) * eps; eps is data, not a node, so no gradient reaches it
NodeRef reparameterize(NodeRef mu, NodeRef logvar, const Tensor& eps);

// inverted dropout: zero with probability rate, scale survivors by
// 1/(1-rate); identity when not training
NodeRef dropout(NodeRef x, double rate, bool training, std::mt19937_64& rng);

NodeRef sum(NodeRef x);
NodeRef dot(NodeRef a, NodeRef b);
NodeRef stack_scalars(const std::vector<NodeRef>& xs);
// out[d] = sum_e weights[e] * vectors[e][d]
NodeRef weighted_sum(NodeRef weights, const std::vector<NodeRef>& vectors);
NodeRef reshape(NodeRef x, std::vector<int> shape);

}  // namespace clvsa::diff
