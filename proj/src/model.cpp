#include "clvsa/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "clvsa/rng.hpp"

namespace clvsa::model {

using diff::NodeRef;
using diff::Tape;
using diff::Tensor;

ModelKind parse_model_kind(std::string_view name) {
  if (name == "clvsa") return ModelKind::clvsa;
  if (name == "clsa") return ModelKind::clsa;
  if (name == "seq2seq") return ModelKind::seq2seq;
  if (name == "lstm") return ModelKind::lstm;
  if (name == "cnn") return ModelKind::cnn;
  throw std::invalid_argument("unknown model kind: " + std::string(name));
}

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::clvsa: return "clvsa";
    case ModelKind::clsa: return "clsa";
    case ModelKind::seq2seq: return "seq2seq";
    case ModelKind::lstm: return "lstm";
    case ModelKind::cnn: return "cnn";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (rows < 1 || cols < 1 || layers < 1 || channels < 1)
    throw std::invalid_argument("model config: bad geometry");
  if (kernel_width < 1 || kernel_width % 2 == 0)
    throw std::invalid_argument("model config: kernel width must be odd");
  if (z_dim < 1 || prior_hidden < 1 || posterior_hidden < 1 ||
      clf_hidden1 < 1 || clf_hidden2 < 1)
    throw std::invalid_argument("model config: bad layer widths");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("model config: dropout must be in [0, 1)");
  if (variational && !use_encoder)
    throw std::invalid_argument(
        "model config: the variational path requires the encoder");
  if (attention && !use_encoder && kind != ModelKind::cnn)
    throw std::invalid_argument(
        "model config: inter-attention requires the encoder");
}

int ParamStore::add(std::string name, Tensor t) {
  if (contains(name))
    throw std::invalid_argument("param store: duplicate name " + name);
  const int idx = count();
  index_.emplace(name, idx);
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(t));
  return idx;
}

int ParamStore::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

std::int64_t ParamStore::total_size() const {
  std::int64_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

namespace {

Tensor init_uniform(std::vector<int> shape, int fan_in,
                    std::mt19937_64& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng = make_rng(seed, /*stream=*/0xC0DEuLL);
  const int d = cfg_.hidden_dim();
  const int c = cfg_.channels;
  const int k = cfg_.kernel_width;

  auto add_matrix = [&](const std::string& name, int m, int n) {
    params_.add(name, init_uniform({m, n}, n, rng));
    params_.add(name + "_b", Tensor({m}));
  };
  auto add_kernel = [&](const std::string& name, int cin, int cout) {
    params_.add(name, init_uniform({k, cin, cout}, k * cin, rng));
    params_.add(name + "_b", Tensor({cout}));
  };

  auto add_stack = [&](const std::string& prefix, bool inter) {
    for (int l = 0; l < cfg_.layers; ++l) {
      const std::string lp = prefix + ".l" + std::to_string(l) + ".";
      if (cfg_.convolutional) {
        const int cin = (l == 0 ? 1 : c) + c;  // [x, h] channel concat
        for (const char* g : {"w_i", "w_f", "w_o", "w_c"})
          add_kernel(lp + g, cin, c);
      } else {
        const int xdim = l == 0 ? cfg_.frame_dim() : d;
        for (const char* g : {"w_i", "w_f", "w_o", "w_c"})
          add_matrix(lp + g, d, xdim + d);
      }
      if (cfg_.attention) {
        params_.add(lp + "self_mix", init_uniform({d, 2 * d}, 2 * d, rng));
        if (inter)
          params_.add(lp + "inter_mix", init_uniform({d, 2 * d}, 2 * d, rng));
      }
    }
  };

  auto add_classifier = [&](const std::string& prefix, int input_dim) {
    add_matrix(prefix + ".w1", cfg_.clf_hidden1, input_dim);
    add_matrix(prefix + ".w2", cfg_.clf_hidden2, cfg_.clf_hidden1);
    add_matrix(prefix + ".w3", 3, cfg_.clf_hidden2);
  };
  auto add_gaussian_head = [&](const std::string& prefix, int input_dim,
                               int hidden) {
    add_matrix(prefix + ".w1", hidden, input_dim);
    add_matrix(prefix + ".wm", cfg_.z_dim, hidden);
    add_matrix(prefix + ".wv", cfg_.z_dim, hidden);
  };

  if (cfg_.kind == ModelKind::cnn) {
    add_kernel("cnn.k1", 1, c);
    add_kernel("cnn.k2", c, c);
    add_classifier("clf", d);
    return;
  }

  if (cfg_.use_encoder) add_stack("enc", /*inter=*/false);
  add_stack("dec", /*inter=*/cfg_.attention && cfg_.use_encoder);
  if (cfg_.variational) {
    add_stack("bwd", /*inter=*/cfg_.attention && cfg_.use_encoder &&
                               cfg_.backward_inter_attention);
    add_classifier("bwdclf", d);
    add_gaussian_head("prior", d + cfg_.z_dim, cfg_.prior_hidden);
    add_gaussian_head("post", d, cfg_.posterior_hidden);
  }
  add_classifier("clf", cfg_.variational ? d + cfg_.z_dim : d);
}

Model::Bound Model::bind(Tape& tape) const {
  Bound b;
  b.nodes.reserve(static_cast<std::size_t>(params_.count()));
  for (int i = 0; i < params_.count(); ++i)
    b.nodes.push_back(tape.leaf(params_.tensor(i)));
  return b;
}

NodeRef Model::bound(const Bound& b, const std::string& name) const {
  const int idx = params_.index_of(name);
  if (idx < 0) throw std::logic_error("model: unknown parameter " + name);
  return b.nodes[static_cast<std::size_t>(idx)];
}

LstmStateNodes convlstm_step(const ConvLstmParamNodes& p, NodeRef x,
                             const LstmStateNodes& state) {
  NodeRef xh = diff::concat_last(x, state.h);
  NodeRef i = diff::sigmoid(diff::conv1d_row_shared(xh, p.w_i));
  NodeRef f = diff::sigmoid(diff::conv1d_row_shared(xh, p.w_f));
  NodeRef o = diff::sigmoid(diff::conv1d_row_shared(xh, p.w_o));
  NodeRef g = diff::tanh(diff::conv1d_row_shared(xh, p.w_c));
  NodeRef c = diff::add(diff::hadamard(f, state.c), diff::hadamard(i, g));
  NodeRef h = diff::hadamard(o, diff::tanh(c));
  return {h, c};
}

LstmStateNodes fclstm_step(const FcLstmParamNodes& p, NodeRef x,
                           const LstmStateNodes& state) {
  NodeRef xh = diff::concat_last(x, state.h);
  NodeRef i = diff::sigmoid(diff::affine(p.w_i, xh, p.b_i));
  NodeRef f = diff::sigmoid(diff::affine(p.w_f, xh, p.b_f));
  NodeRef o = diff::sigmoid(diff::affine(p.w_o, xh, p.b_o));
  NodeRef g = diff::tanh(diff::affine(p.w_c, xh, p.b_c));
  NodeRef c = diff::add(diff::hadamard(f, state.c), diff::hadamard(i, g));
  NodeRef h = diff::hadamard(o, diff::tanh(c));
  return {h, c};
}

NodeRef self_attend(NodeRef h, const std::vector<NodeRef>& history,
                    NodeRef mixer, NodeRef* weights_out) {
  NodeRef context;
  if (history.empty()) {
    // first step: nothing to attend over
    context = h.tape->constant(Tensor::zeros_like(h.value()));
    if (weights_out) *weights_out = NodeRef{};
  } else {
    std::vector<NodeRef> scores;
    scores.reserve(history.size());
    for (const NodeRef& past : history) scores.push_back(diff::dot(h, past));
    NodeRef weights = diff::softmax_last(diff::stack_scalars(scores));
    if (weights_out) *weights_out = weights;
    context = diff::weighted_sum(weights, history);
  }
  return diff::tanh(diff::matvec(mixer, diff::concat_last(h, context)));
}

NodeRef inter_attend(NodeRef hd, const std::vector<NodeRef>& encoder_states,
                     NodeRef mixer, NodeRef* weights_out) {
  if (encoder_states.empty())
    throw std::invalid_argument("inter_attend: empty encoder sequence");
  std::vector<NodeRef> scores;
  scores.reserve(encoder_states.size());
  for (const NodeRef& enc : encoder_states)
    scores.push_back(diff::dot(hd, enc));
  NodeRef weights = diff::softmax_last(diff::stack_scalars(scores));
  if (weights_out) *weights_out = weights;
  NodeRef context = diff::weighted_sum(weights, encoder_states);
  return diff::tanh(diff::matvec(mixer, diff::concat_last(hd, context)));
}

NodeRef Model::frame_input(Tape& tape, const market::Frame& frame) const {
  if (frame.values.dim(0) != cfg_.rows || frame.values.dim(1) != cfg_.cols)
    throw std::invalid_argument("model: frame geometry mismatch");
  std::vector<double> vals(frame.values.data(),
                           frame.values.data() + frame.values.size());
  if (cfg_.convolutional)
    return tape.constant(Tensor({cfg_.rows, cfg_.cols, 1}, std::move(vals)));
  return tape.constant(Tensor({cfg_.frame_dim()}, std::move(vals)));
}

LstmStateNodes Model::zero_state(Tape& tape) const {
  if (cfg_.convolutional) {
    Tensor z({cfg_.rows, cfg_.cols, cfg_.channels});
    return {tape.constant(z), tape.constant(z)};
  }
  Tensor z({cfg_.hidden_dim()});
  return {tape.constant(z), tape.constant(z)};
}

NodeRef Model::layer_step(const Bound& b, const std::string& prefix,
                          int layer, NodeRef x, LstmStateNodes& state,
                          std::vector<NodeRef>& self_history,
                          const std::vector<NodeRef>* encoder_states,
                          ModelOutput* record) const {
  const std::string lp = prefix + ".l" + std::to_string(layer) + ".";
  if (cfg_.convolutional) {
    ConvLstmParamNodes p{
        diff::make_kernel(bound(b, lp + "w_i"), bound(b, lp + "w_i_b")),
        diff::make_kernel(bound(b, lp + "w_f"), bound(b, lp + "w_f_b")),
        diff::make_kernel(bound(b, lp + "w_o"), bound(b, lp + "w_o_b")),
        diff::make_kernel(bound(b, lp + "w_c"), bound(b, lp + "w_c_b"))};
    state = convlstm_step(p, x, state);
  } else {
    FcLstmParamNodes p{bound(b, lp + "w_i"), bound(b, lp + "w_i_b"),
                       bound(b, lp + "w_f"), bound(b, lp + "w_f_b"),
                       bound(b, lp + "w_o"), bound(b, lp + "w_o_b"),
                       bound(b, lp + "w_c"), bound(b, lp + "w_c_b")};
    state = fclstm_step(p, x, state);
  }

  NodeRef h = cfg_.convolutional ? diff::reshape(state.h, {cfg_.hidden_dim()})
                                 : state.h;
  if (!cfg_.attention) return h;

  NodeRef self_w;
  NodeRef mixed =
      self_attend(h, self_history, bound(b, lp + "self_mix"), &self_w);
  if (record && self_w.valid()) record->attention_weights.push_back(self_w);
  self_history.push_back(mixed);

  if (!encoder_states) return mixed;
  NodeRef inter_w;
  NodeRef refined = inter_attend(mixed, *encoder_states,
                                 bound(b, lp + "inter_mix"), &inter_w);
  if (record) record->attention_weights.push_back(inter_w);
  return refined;
}

std::vector<NodeRef> Model::run_stack(
    Tape& tape, const Bound& b, const std::string& prefix,
    const market::TradingDay& day,
    const std::vector<NodeRef>* encoder_states, ModelOutput* record) const {
  std::vector<LstmStateNodes> states;
  std::vector<std::vector<NodeRef>> histories(
      static_cast<std::size_t>(cfg_.layers));
  for (int l = 0; l < cfg_.layers; ++l) states.push_back(zero_state(tape));

  std::vector<NodeRef> outputs;
  outputs.reserve(day.frames.size());
  for (const market::Frame& frame : day.frames) {
    NodeRef x = frame_input(tape, frame);
    for (int l = 0; l < cfg_.layers; ++l) {
      NodeRef out = layer_step(b, prefix, l, x,
                               states[static_cast<std::size_t>(l)],
                               histories[static_cast<std::size_t>(l)],
                               encoder_states, record);
      x = cfg_.convolutional && l + 1 < cfg_.layers
              ? diff::reshape(out, {cfg_.rows, cfg_.cols, cfg_.channels})
              : out;
    }
    outputs.push_back(x);
  }
  return outputs;
}

std::vector<NodeRef> Model::encode_day(Tape& tape, const Bound& b,
                                       const market::TradingDay& day) const {
  if (!cfg_.use_encoder)
    throw std::logic_error("encode_day: this configuration has no encoder");
  return run_stack(tape, b, "enc", day, nullptr, nullptr);
}

NodeRef Model::classifier(const Bound& b, const std::string& prefix,
                          NodeRef input, Mode mode,
                          std::mt19937_64& rng) const {
  const bool training = mode == Mode::train;
  NodeRef a1 = diff::relu(diff::affine(bound(b, prefix + ".w1"), input,
                                       bound(b, prefix + ".w1_b")));
  a1 = diff::dropout(a1, cfg_.dropout, training, rng);
  NodeRef a2 = diff::relu(diff::affine(bound(b, prefix + ".w2"), a1,
                                       bound(b, prefix + ".w2_b")));
  a2 = diff::dropout(a2, cfg_.dropout, training, rng);
  NodeRef logits = diff::affine(bound(b, prefix + ".w3"), a2,
                                bound(b, prefix + ".w3_b"));
  return diff::softmax_last(logits);
}

GaussianNodes Model::gaussian_head(const Bound& b, const std::string& prefix,
                                   NodeRef input) const {
  NodeRef h = diff::relu(diff::affine(bound(b, prefix + ".w1"), input,
                                      bound(b, prefix + ".w1_b")));
  NodeRef mu =
      diff::affine(bound(b, prefix + ".wm"), h, bound(b, prefix + ".wm_b"));
  NodeRef logvar = diff::clamp(
      diff::affine(bound(b, prefix + ".wv"), h, bound(b, prefix + ".wv_b")),
      -10.0, 10.0);
  return {mu, logvar};
}

std::vector<NodeRef> Model::decode_day_backward(
    Tape& tape, const Bound& b, const market::TradingDay& reversed_day,
    const std::vector<NodeRef>& encoder_states, ModelOutput& out) const {
  if (!cfg_.variational)
    throw std::logic_error(
        "decode_day_backward: variational flag is off for this model");
  const bool inter =
      cfg_.attention && cfg_.use_encoder && cfg_.backward_inter_attention;
  std::vector<NodeRef> hidden = run_stack(
      tape, b, "bwd", reversed_day, inter ? &encoder_states : nullptr, &out);
  // the backward classifier conditions on the backward hidden state alone;
  // its dropout stays off so the posterior path is deterministic given eps
  std::mt19937_64 unused_rng(0);
  out.backward_probs.reserve(hidden.size());
  for (const NodeRef& h : hidden)
    out.backward_probs.push_back(
        classifier(b, "bwdclf", h, Mode::eval, unused_rng));
  return hidden;
}

GaussianNodes Model::posterior_params(Tape&, const Bound& b,
                                      NodeRef aligned_backward_hidden) const {
  if (!cfg_.variational)
    throw std::logic_error("posterior_params: variational flag is off");
  return gaussian_head(b, "post", aligned_backward_hidden);
}

void Model::decode_day_forward(Tape& tape, const Bound& b,
                               const market::TradingDay& day_b,
                               const std::vector<NodeRef>& encoder_states,
                               const std::vector<NodeRef>& backward_hidden,
                               Mode mode, std::mt19937_64& rng,
                               ModelOutput& out) const {
  if (cfg_.use_encoder && encoder_states.empty())
    throw std::invalid_argument("decode_day_forward: missing encoder states");
  const std::vector<NodeRef>* enc =
      cfg_.attention && cfg_.use_encoder ? &encoder_states : nullptr;
  std::vector<NodeRef> hidden = run_stack(tape, b, "dec", day_b, enc, &out);

  const std::size_t steps = hidden.size();
  if (cfg_.variational && mode == Mode::train &&
      backward_hidden.size() != steps)
    throw std::invalid_argument(
        "decode_day_forward: backward hidden count mismatch");

  NodeRef z_prev = tape.constant(Tensor({cfg_.z_dim}));  // z_0 = 0
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t t = 0; t < steps; ++t) {
    NodeRef clf_input = hidden[t];
    if (cfg_.variational) {
      GaussianNodes prior =
          gaussian_head(b, "prior", diff::concat_last(hidden[t], z_prev));
      out.prior.push_back(prior);
      NodeRef z_t;
      if (mode == Mode::train) {
        // the backward decoder saw frames T..t at reversed index L-1-t
        GaussianNodes post =
            posterior_params(tape, b, backward_hidden[steps - 1 - t]);
        out.posterior.push_back(post);
        Tensor eps({cfg_.z_dim});
        for (std::int64_t i = 0; i < eps.size(); ++i) eps[i] = gauss(rng);
        z_t = diff::reparameterize(post.mu, post.logvar, eps);
      } else {
        z_t = prior.mu;  // evaluation draws nothing
      }
      out.z.push_back(z_t);
      z_prev = z_t;
      clf_input = diff::concat_last(hidden[t], z_t);
    }
    out.forward_probs.push_back(classifier(b, "clf", clf_input, mode, rng));
  }
}

ModelOutput Model::cnn_forward(Tape& tape, const Bound& b,
                               const market::TradingDay& day_b, Mode mode,
                               std::mt19937_64& rng) const {
  ModelOutput out;
  diff::Kernel k1 =
      diff::make_kernel(bound(b, "cnn.k1"), bound(b, "cnn.k1_b"));
  diff::Kernel k2 =
      diff::make_kernel(bound(b, "cnn.k2"), bound(b, "cnn.k2_b"));
  for (const market::Frame& frame : day_b.frames) {
    NodeRef x = frame_input(tape, frame);
    NodeRef c1 = diff::relu(diff::conv1d_row_shared(x, k1));
    NodeRef c2 = diff::relu(diff::conv1d_row_shared(c1, k2));
    NodeRef flat = diff::reshape(c2, {cfg_.hidden_dim()});
    out.forward_probs.push_back(classifier(b, "clf", flat, mode, rng));
  }
  return out;
}

ModelOutput Model::forward_pass(Tape& tape, const Bound& b,
                                const market::DayPair& pair, Mode mode,
                                std::mt19937_64& rng) const {
  if (cfg_.kind == ModelKind::cnn)
    return cnn_forward(tape, b, pair.day_b, mode, rng);

  ModelOutput out;
  std::vector<NodeRef> encoder_states;
  if (cfg_.use_encoder) encoder_states = encode_day(tape, b, pair.day_a);

  std::vector<NodeRef> backward_hidden;
  if (cfg_.variational && mode == Mode::train)
    backward_hidden = decode_day_backward(tape, b, pair.day_b_reversed,
                                          encoder_states, out);

  decode_day_forward(tape, b, pair.day_b, encoder_states, backward_hidden,
                     mode, rng, out);
  return out;
}

std::vector<int> predict_classes(const ModelOutput& out) {
  std::vector<int> classes;
  classes.reserve(out.forward_probs.size());
  for (const NodeRef& probs : out.forward_probs) {
    const Tensor& p = probs.value();
    int best = 0;
    for (int i = 1; i < p.dim(0); ++i)
      if (p[i] > p[best]) best = i;
    classes.push_back(best);
  }
  return classes;
}

}  // namespace clvsa::model
