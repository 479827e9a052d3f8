#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "clvsa/marketdata.hpp"
#include "clvsa/tape.hpp"

namespace clvsa::model {

enum class ModelKind { clvsa, clsa, seq2seq, lstm, cnn };

ModelKind parse_model_kind(std::string_view name);
const char* model_kind_name(ModelKind kind);

struct ModelConfig {
  ModelKind kind = ModelKind::clvsa;
  int rows = market::kFrameRows;
  int cols = market::kBarsPerFrame;
  int layers = 2;
  int channels = 32;
  int kernel_width = 3;
  int z_dim = 64;
  int prior_hidden = 512;
  int posterior_hidden = 256;
  int clf_hidden1 = 200;
  int clf_hidden2 = 50;
  double dropout = 0.1;
  bool variational = true;
  bool attention = true;
  bool convolutional = true;
  bool use_encoder = true;
  // the backward decoder mirrors the forward one, inter-attention included;
  // this switch exists to probe the alternative
  bool backward_inter_attention = true;

  int frame_dim() const { return rows * cols; }
  int hidden_dim() const { return rows * cols * channels; }
  void validate() const;
};

// Named parameter tensors in fixed creation order; the order defines the
// binding layout, checkpoint layout and rng draw order.
class ParamStore {
 public:
  int add(std::string name, diff::Tensor t);
  int index_of(const std::string& name) const;  // -1 when absent
  bool contains(const std::string& name) const {
    return index_of(name) >= 0;
  }
  int count() const { return static_cast<int>(tensors_.size()); }
  const std::string& name(int i) const {
    return names_[static_cast<std::size_t>(i)];
  }
  diff::Tensor& tensor(int i) { return tensors_[static_cast<std::size_t>(i)]; }
  const diff::Tensor& tensor(int i) const {
    return tensors_[static_cast<std::size_t>(i)];
  }
  std::int64_t total_size() const;

 private:
  std::vector<std::string> names_;
  std::vector<diff::Tensor> tensors_;
  std::unordered_map<std::string, int> index_;
};

struct GaussianNodes {
  diff::NodeRef mu;
  diff::NodeRef logvar;  // clamped to [-10, 10]
};

struct ModelOutput {
  std::vector<diff::NodeRef> forward_probs;   // per step, [3]
  std::vector<diff::NodeRef> backward_probs;  // reversed order, train only
  std::vector<GaussianNodes> prior;
  std::vector<GaussianNodes> posterior;
  std::vector<diff::NodeRef> z;                  // sample (train) / prior mean (eval)
  std::vector<diff::NodeRef> attention_weights;  // every softmaxed weight vector
};

enum class Mode { train, eval };

struct LstmStateNodes {
  diff::NodeRef h;
  diff::NodeRef c;
};

struct ConvLstmParamNodes {
  diff::Kernel w_i, w_f, w_o, w_c;
};

struct FcLstmParamNodes {
  diff::NodeRef w_i, b_i, w_f, b_f, w_o, b_o, w_c, b_c;
};

// One convolutional LSTM update over the channel concatenation [x, h]:
// gates through sigmoid, candidate through tanh, c' = f.c + i.g, h' = o.tanh(c').
LstmStateNodes convlstm_step(const ConvLstmParamNodes& p, diff::NodeRef x,
                             const LstmStateNodes& state);
// Same cell with fully connected gates over the flattened concatenation.
LstmStateNodes fclstm_step(const FcLstmParamNodes& p, diff::NodeRef x,
                           const LstmStateNodes& state);

// Dot-product attention over the step's own history (empty history yields a
// zero context); mixes tanh(mixer [h, context]).
diff::NodeRef self_attend(diff::NodeRef h,
                          const std::vector<diff::NodeRef>& history,
                          diff::NodeRef mixer,
                          diff::NodeRef* weights_out = nullptr);
// Dot-product attention over the encoder's final-layer states.
diff::NodeRef inter_attend(diff::NodeRef hd,
                           const std::vector<diff::NodeRef>& encoder_states,
                           diff::NodeRef mixer,
                           diff::NodeRef* weights_out = nullptr);

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct Bound {
    std::vector<diff::NodeRef> nodes;  // aligned with ParamStore order
  };
  Bound bind(diff::Tape& tape) const;

  std::vector<diff::NodeRef> encode_day(diff::Tape& tape, const Bound& b,
                                        const market::TradingDay& day) const;

  // runs the mirror decoder over the reversed day; emits hidden vectors in
  // reversed order and fills backward_probs
  std::vector<diff::NodeRef> decode_day_backward(
      diff::Tape& tape, const Bound& b, const market::TradingDay& reversed_day,
      const std::vector<diff::NodeRef>& encoder_states,
      ModelOutput& out) const;

  GaussianNodes posterior_params(diff::Tape& tape, const Bound& b,
                                 diff::NodeRef aligned_backward_hidden) const;

  void decode_day_forward(diff::Tape& tape, const Bound& b,
                          const market::TradingDay& day_b,
                          const std::vector<diff::NodeRef>& encoder_states,
                          const std::vector<diff::NodeRef>& backward_hidden,
                          Mode mode, std::mt19937_64& rng,
                          ModelOutput& out) const;

  ModelOutput forward_pass(diff::Tape& tape, const Bound& b,
                           const market::DayPair& pair, Mode mode,
                           std::mt19937_64& rng) const;

 private:
  diff::NodeRef bound(const Bound& b, const std::string& name) const;
  diff::NodeRef frame_input(diff::Tape& tape,
                            const market::Frame& frame) const;
  LstmStateNodes zero_state(diff::Tape& tape) const;
  diff::NodeRef layer_step(const Bound& b, const std::string& prefix,
                           int layer, diff::NodeRef x,
                           LstmStateNodes& state,
                           std::vector<diff::NodeRef>& self_history,
                           const std::vector<diff::NodeRef>* encoder_states,
                           ModelOutput* record) const;
  std::vector<diff::NodeRef> run_stack(
      diff::Tape& tape, const Bound& b, const std::string& prefix,
      const market::TradingDay& day,
      const std::vector<diff::NodeRef>* encoder_states,
      ModelOutput* record) const;
  diff::NodeRef classifier(const Bound& b, const std::string& prefix,
                           diff::NodeRef input, Mode mode,
                           std::mt19937_64& rng) const;
  GaussianNodes gaussian_head(const Bound& b, const std::string& prefix,
                              diff::NodeRef input) const;
  ModelOutput cnn_forward(diff::Tape& tape, const Bound& b,
                          const market::TradingDay& day_b, Mode mode,
                          std::mt19937_64& rng) const;

  ModelConfig cfg_;
  ParamStore params_;
};

// per-step argmax classes (0 Up / 1 Flat / 2 Down)
std::vector<int> predict_classes(const ModelOutput& out);

}  // namespace clvsa::model
