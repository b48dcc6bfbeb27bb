#include "echofight/layers.hpp"

#include <cmath>

namespace echofight::nn {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::linear: return "linear";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::gru: return "gru";
    case LayerKind::relu: return "relu";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

GruVars register_gru(Graph& g, GruParams& p) {
  GruVars v;
  v.wz = g.param(p.wz);
  v.wr = g.param(p.wr);
  v.wn = g.param(p.wn);
  v.uz = g.param(p.uz);
  v.ur = g.param(p.ur);
  v.un = g.param(p.un);
  v.bz = g.param(p.bz);
  v.br = g.param(p.br);
  v.bn = g.param(p.bn);
  return v;
}

Var gru_cell(Graph& g, Var x, Var h, const GruVars& p) {
  const Var none;
  Var z = g.sigmoid(g.add(g.linear(x, p.wz, p.bz), g.linear(h, p.uz, none)));
  Var r = g.sigmoid(g.add(g.linear(x, p.wr, p.br), g.linear(h, p.ur, none)));
  Var n = g.tanh(g.add(g.linear(x, p.wn, p.bn), g.linear(g.mul(r, h), p.un, none)));
  // h' = h - z.h + z.n
  return g.add(g.sub(h, g.mul(z, h)), g.mul(z, n));
}

namespace {
int conv_len(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

void fan_in_uniform(Tensor& t, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data) v = rng.uniform(-bound, bound);
}
}  // namespace

void orthogonal_init(Tensor& t, Rng& rng) {
  if (t.shape.size() != 2 || t.shape[0] != t.shape[1])
    throw ShapeError("orthogonal_init: square matrix required, got " + shape_str(t.shape));
  const int n = t.shape[0];
  // Gaussian sample, then modified Gram-Schmidt over rows.
  for (auto& v : t.data) v = rng.gaussian();
  for (int i = 0; i < n; ++i) {
    double* ri = t.data.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < i; ++j) {
      const double* rj = t.data.data() + static_cast<size_t>(j) * n;
      double dot = 0.0;
      for (int k = 0; k < n; ++k) dot += ri[k] * rj[k];
      for (int k = 0; k < n; ++k) ri[k] -= dot * rj[k];
    }
    double norm = 0.0;
    for (int k = 0; k < n; ++k) norm += ri[k] * ri[k];
    norm = std::sqrt(norm);
    if (norm < 1e-12) {  // degenerate draw; fall back to a unit vector
      for (int k = 0; k < n; ++k) ri[k] = (k == i) ? 1.0 : 0.0;
    } else {
      for (int k = 0; k < n; ++k) ri[k] /= norm;
    }
  }
}

LayerSpec LayerSpec::make_linear(int in, int out) {
  LayerSpec l;
  l.kind = LayerKind::linear;
  l.in_shape = {in};
  l.out_shape = {out};
  l.w = Tensor({in, out});
  l.b = Tensor({out});
  return l;
}

LayerSpec LayerSpec::make_conv1d(int in_ch, int in_len, int out_ch, int kernel, int stride,
                                 int pad) {
  LayerSpec l;
  l.kind = LayerKind::conv1d;
  l.in_shape = {in_ch, in_len};
  l.out_shape = {out_ch, conv_len(in_len, kernel, stride, pad)};
  l.w = Tensor({out_ch, in_ch, kernel});
  l.b = Tensor({out_ch});
  l.stride_w = stride;
  l.pad_w = pad;
  return l;
}

LayerSpec LayerSpec::make_conv2d(int in_ch, int in_h, int in_w, int out_ch, int kh, int kw, int sh,
                                 int sw, int ph, int pw) {
  LayerSpec l;
  l.kind = LayerKind::conv2d;
  l.in_shape = {in_ch, in_h, in_w};
  l.out_shape = {out_ch, conv_len(in_h, kh, sh, ph), conv_len(in_w, kw, sw, pw)};
  l.w = Tensor({out_ch, in_ch, kh, kw});
  l.b = Tensor({out_ch});
  l.stride_h = sh;
  l.stride_w = sw;
  l.pad_h = ph;
  l.pad_w = pw;
  return l;
}

LayerSpec LayerSpec::make_gru(int in, int hidden) {
  LayerSpec l;
  l.kind = LayerKind::gru;
  l.in_shape = {in};
  l.out_shape = {hidden};
  l.hidden = hidden;
  l.gru.wz = Tensor({in, hidden});
  l.gru.wr = Tensor({in, hidden});
  l.gru.wn = Tensor({in, hidden});
  l.gru.uz = Tensor({hidden, hidden});
  l.gru.ur = Tensor({hidden, hidden});
  l.gru.un = Tensor({hidden, hidden});
  l.gru.bz = Tensor({hidden});
  l.gru.br = Tensor({hidden});
  l.gru.bn = Tensor({hidden});
  return l;
}

LayerSpec LayerSpec::make_relu(Shape shape) {
  LayerSpec l;
  l.kind = LayerKind::relu;
  l.in_shape = shape;
  l.out_shape = std::move(shape);
  return l;
}

LayerSpec LayerSpec::make_softmax(int n) {
  LayerSpec l;
  l.kind = LayerKind::softmax;
  l.in_shape = {n};
  l.out_shape = {n};
  return l;
}

void LayerSpec::init(Rng& rng) {
  switch (kind) {
    case LayerKind::linear:
      fan_in_uniform(w, in_shape[0], rng);
      fan_in_uniform(b, in_shape[0], rng);
      break;
    case LayerKind::conv1d:
      fan_in_uniform(w, in_shape[0] * w.dim(2), rng);
      fan_in_uniform(b, in_shape[0] * w.dim(2), rng);
      break;
    case LayerKind::conv2d:
      fan_in_uniform(w, in_shape[0] * w.dim(2) * w.dim(3), rng);
      fan_in_uniform(b, in_shape[0] * w.dim(2) * w.dim(3), rng);
      break;
    case LayerKind::gru: {
      const int in = in_shape[0];
      fan_in_uniform(gru.wz, in, rng);
      fan_in_uniform(gru.wr, in, rng);
      fan_in_uniform(gru.wn, in, rng);
      orthogonal_init(gru.uz, rng);
      orthogonal_init(gru.ur, rng);
      orthogonal_init(gru.un, rng);
      // biases stay zero
      break;
    }
    case LayerKind::relu:
    case LayerKind::softmax:
      break;
  }
}

std::pair<Var, std::optional<Var>> LayerSpec::apply(Graph& g, Var input,
                                                    std::optional<Var> hidden) {
  switch (kind) {
    case LayerKind::linear:
      return {g.linear(input, g.param(w), g.param(b)), std::nullopt};
    case LayerKind::conv1d:
      return {g.conv1d(input, g.param(w), g.param(b), stride_w, pad_w), std::nullopt};
    case LayerKind::conv2d:
      return {g.conv2d(input, g.param(w), g.param(b), stride_h, stride_w, pad_h, pad_w),
              std::nullopt};
    case LayerKind::gru: {
      GruVars p = register_gru(g, gru);
      Var h = gru_cell(g, input, *hidden, p);
      return {h, h};
    }
    case LayerKind::relu:
      return {g.relu(input), std::nullopt};
    case LayerKind::softmax:
      return {g.softmax_rows(input), std::nullopt};
  }
  throw StateError("apply: unknown layer kind");
}

ForwardResult forward(Graph& g, LayerSpec& layer, const Tensor& input,
                      const std::optional<Tensor>& hidden) {
  if (hidden.has_value() != (layer.kind == LayerKind::gru))
    throw std::invalid_argument(std::string("forward: hidden state must be supplied iff the "
                                            "layer is a gru; layer is ") +
                                layer_kind_name(layer.kind));

  // Accept [in_shape...] as batch 1 or [B, in_shape...].
  Shape batched = layer.in_shape;
  batched.insert(batched.begin(), 1);
  Shape got = input.shape;
  bool add_batch = false;
  if (got == layer.in_shape) {
    add_batch = true;
  } else if (!(got.size() == batched.size() &&
               std::equal(got.begin() + 1, got.end(), batched.begin() + 1))) {
    throw ShapeError(std::string("forward(") + layer_kind_name(layer.kind) + "): expected " +
                     shape_str(layer.in_shape) + " or [B]+" + shape_str(layer.in_shape) +
                     ", got " + shape_str(input.shape));
  }

  Var x = g.constant(input);
  if (add_batch) x = g.reshape(x, batched);

  std::optional<Var> h;
  if (hidden) {
    const int batch = add_batch ? 1 : input.shape[0];
    const Shape want_h{batch, layer.hidden};
    Shape hs = hidden->shape;
    Var hv = g.constant(*hidden);
    if (hs == Shape{layer.hidden}) {
      hv = g.reshape(hv, want_h);
    } else if (hs != want_h) {
      throw ShapeError("forward(gru): hidden expected " + shape_str(want_h) + ", got " +
                       shape_str(hs));
    }
    h = hv;
  }

  auto [out, new_h] = layer.apply(g, x, h);
  ForwardResult r;
  r.output_var = out;
  r.hidden_var = new_h;
  r.output = g.tensor(out);
  if (add_batch) {
    r.output.shape = layer.out_shape;  // drop the synthetic batch dim
  }
  if (new_h) r.new_hidden = g.tensor(*new_h);
  return r;
}

std::vector<std::pair<std::string, Tensor*>> LayerSpec::named_params(const std::string& prefix) {
  switch (kind) {
    case LayerKind::linear:
    case LayerKind::conv1d:
    case LayerKind::conv2d:
      return {{prefix + ".w", &w}, {prefix + ".b", &b}};
    case LayerKind::gru:
      return {{prefix + ".wz", &gru.wz}, {prefix + ".wr", &gru.wr}, {prefix + ".wn", &gru.wn},
              {prefix + ".uz", &gru.uz}, {prefix + ".ur", &gru.ur}, {prefix + ".un", &gru.un},
              {prefix + ".bz", &gru.bz}, {prefix + ".br", &gru.br}, {prefix + ".bn", &gru.bn}};
    case LayerKind::relu:
    case LayerKind::softmax:
      return {};
  }
  return {};
}

void adam_step(const std::vector<Tensor*>& params, AdamState& state) {
  for (const Tensor* p : params)
    if (!p->has_grad())
      throw StateError("adam_step: missing gradients (run backward first)");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->data.size(), 0.0);
      state.v[i].assign(params[i]->data.size(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw StateError("adam_step: state tracks a different parameter list");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (state.m[i].size() != p.data.size())
      throw StateError("adam_step: accumulator shape mismatch for parameter " +
                       std::to_string(i));
    for (size_t j = 0; j < p.data.size(); ++j) {
      const double g = p.grad[j];
      state.m[i][j] = state.beta1 * state.m[i][j] + (1.0 - state.beta1) * g;
      state.v[i][j] = state.beta2 * state.v[i][j] + (1.0 - state.beta2) * g * g;
      const double mhat = state.m[i][j] / bc1;
      const double vhat = state.v[i][j] / bc2;
      p.data[j] -= state.step_size * mhat / (std::sqrt(vhat) + state.eps);
    }
    p.zero_grad();
  }
}

double global_grad_norm(const std::vector<Tensor*>& params) {
  double sq = 0.0;
  for (const Tensor* p : params)
    for (double g : p->grad) sq += g * g;
  return std::sqrt(sq);
}

void clip_grad_norm(const std::vector<Tensor*>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (Tensor* p : params)
    for (double& g : p->grad) g *= scale;
}

}  // namespace echofight::nn
