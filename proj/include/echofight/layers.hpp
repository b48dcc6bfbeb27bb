#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "echofight/nn.hpp"
#include "echofight/rng.hpp"

namespace echofight::nn {

enum class LayerKind { linear, conv1d, conv2d, gru, relu, softmax };

const char* layer_kind_name(LayerKind k);

// Update gate z, reset gate r, tanh candidate with the reset applied to the
// previous hidden state before the recurrent matmul:
//   z = sigmoid(x Wz + h Uz + bz)
//   r = sigmoid(x Wr + h Ur + br)
//   n = tanh(x Wn + (r . h) Un + bn)
//   h' = (1 - z) . h + z . n
struct GruParams {
  Tensor wz, wr, wn;  // [in, hidden]
  Tensor uz, ur, un;  // [hidden, hidden]
  Tensor bz, br, bn;  // [hidden]
};

struct GruVars {
  Var wz, wr, wn, uz, ur, un, bz, br, bn;
};

GruVars register_gru(Graph& g, GruParams& p);
Var gru_cell(Graph& g, Var x, Var h, const GruVars& p);

// One layer of the declared set. Parameter tensors are owned by the spec;
// declared input/output shapes exclude the batch dim and are validated on
// every forward call.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  Shape in_shape;
  Shape out_shape;

  // linear / conv
  Tensor w, b;
  int stride_h = 1, stride_w = 1, pad_h = 0, pad_w = 0;

  // gru
  GruParams gru;
  int hidden = 0;

  static LayerSpec make_linear(int in, int out);
  static LayerSpec make_conv1d(int in_ch, int in_len, int out_ch, int kernel, int stride, int pad);
  static LayerSpec make_conv2d(int in_ch, int in_h, int in_w, int out_ch, int kh, int kw, int sh,
                               int sw, int ph, int pw);
  static LayerSpec make_gru(int in, int hidden);
  static LayerSpec make_relu(Shape shape);
  static LayerSpec make_softmax(int n);

  // Fan-in scaled uniform init; GRU recurrent matrices get orthogonal init.
  void init(Rng& rng);

  // Graph-building form. Input is [B, in_shape...]; hidden [B, hidden] for
  // gru only.
  std::pair<Var, std::optional<Var>> apply(Graph& g, Var input,
                                           std::optional<Var> hidden = std::nullopt);

  std::vector<std::pair<std::string, Tensor*>> named_params(const std::string& prefix);
};

// Runs one layer on concrete tensors, recording the computation on g for a
// later backward(). Input may carry a leading batch dim or match in_shape
// exactly (treated as batch 1). Hidden must be supplied iff kind == gru.
struct ForwardResult {
  Tensor output;
  std::optional<Tensor> new_hidden;
  Var output_var;
  std::optional<Var> hidden_var;
};
ForwardResult forward(Graph& g, LayerSpec& layer, const Tensor& input,
                      const std::optional<Tensor>& hidden = std::nullopt);

// Ordered list of named parameters; ordering defines checkpoint layout and
// Adam slot alignment.
using ParamStore = std::vector<std::pair<std::string, Tensor*>>;

// Adam with bias correction. Accumulator slots are created lazily on the
// first step and keyed by position in the param list.
struct AdamState {
  int64_t step = 0;
  double step_size = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> m, v;
};

// Applies one update to every param (requires populated grads, throws
// StateError otherwise), increments step by exactly 1, zeroes grads.
void adam_step(const std::vector<Tensor*>& params, AdamState& state);

double global_grad_norm(const std::vector<Tensor*>& params);
// Scales all grads so the global norm is at most max_norm.
void clip_grad_norm(const std::vector<Tensor*>& params, double max_norm);

// Fills a tensor with an orthogonal matrix (rows orthonormal) via
// Gram-Schmidt on a gaussian sample; square shapes only.
void orthogonal_init(Tensor& t, Rng& rng);

}  // namespace echofight::nn
