#include "echofight/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace echofight::nn {

int64_t numel_of(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::from(Shape s, std::vector<double> values) {
  Tensor t;
  t.shape = std::move(s);
  if (numel_of(t.shape) != static_cast<int64_t>(values.size()))
    throw ShapeError("Tensor::from: " + std::to_string(values.size()) + " values for shape " +
                     shape_str(t.shape));
  t.data = std::move(values);
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

namespace {
// Softmax of one row with max subtraction.
void softmax_row(const double* x, double* p, int n) {
  double m = x[0];
  for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    p[i] = std::exp(x[i] - m);
    s += p[i];
  }
  const double inv = 1.0 / s;
  for (int i = 0; i < n; ++i) p[i] *= inv;
}

void log_softmax_row(const double* x, double* lp, int n) {
  double m = x[0];
  for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(x[i] - m);
  const double lse = m + std::log(s);
  for (int i = 0; i < n; ++i) lp[i] = x[i] - lse;
}
}  // namespace

Tensor softmax(const Tensor& logits) {
  if (logits.shape.empty() || logits.numel() == 0)
    throw std::invalid_argument("softmax: empty tensor");
  if (!logits.all_finite()) throw std::invalid_argument("softmax: non-finite logits");
  const int n = logits.shape.back();
  const int rows = static_cast<int>(logits.numel() / n);
  Tensor out(logits.shape);
  for (int r = 0; r < rows; ++r)
    softmax_row(logits.data.data() + static_cast<size_t>(r) * n,
                out.data.data() + static_cast<size_t>(r) * n, n);
  return out;
}

enum class Op : uint8_t {
  kConst,
  kParam,
  kReshape,
  kRows,
  kLinear,
  kConv1d,
  kConv2d,
  kRelu,
  kTanh,
  kSigmoid,
  kExp,
  kSquare,
  kClamp,
  kAdd,
  kSub,
  kMul,
  kMin,
  kAddScalar,
  kMulScalar,
  kSoftmaxRows,
  kLogSoftmaxRows,
  kGatherRows,
  kSumRows,
  kSumAll,
  kMeanAll,
};

struct Graph::Node {
  Op op = Op::kConst;
  Shape shape;
  std::vector<double> val;
  std::vector<double> grad;
  int a = -1, b = -1, c = -1;       // parents
  int i0 = 0, i1 = 0, i2 = 0, i3 = 0;  // op attributes (stride/pad/slice)
  double d0 = 0.0, d1 = 0.0;
  std::vector<int> idx;   // gather indices
  Tensor* bound = nullptr;
};

Graph::Graph() = default;
Graph::~Graph() = default;
Graph::Graph(Graph&&) noexcept = default;
Graph& Graph::operator=(Graph&&) noexcept = default;

Var Graph::push(Node&& n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Graph::check(Var v) const {
  if (nodes_.empty()) throw StateError("graph: no recorded computation");
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw StateError("graph: variable does not belong to this recorded computation");
}

Graph::Node& Graph::at(Var v) {
  check(v);
  return nodes_[static_cast<size_t>(v.id)];
}

const Graph::Node& Graph::at(Var v) const {
  check(v);
  return nodes_[static_cast<size_t>(v.id)];
}

const Shape& Graph::shape(Var v) const { return at(v).shape; }
const std::vector<double>& Graph::val(Var v) const { return at(v).val; }

Tensor Graph::tensor(Var v) const {
  const Node& n = at(v);
  return Tensor::from(n.shape, n.val);
}

double Graph::scalar(Var v) const {
  const Node& n = at(v);
  if (n.val.size() != 1) throw std::invalid_argument("graph: not a scalar: " + shape_str(n.shape));
  return n.val[0];
}

Var Graph::constant(const Tensor& t) {
  Node n;
  n.op = Op::kConst;
  n.shape = t.shape;
  n.val = t.data;
  return push(std::move(n));
}

Var Graph::constant(Shape shape, std::vector<double> data) {
  return constant(Tensor::from(std::move(shape), std::move(data)));
}

Var Graph::param(Tensor& p) {
  Node n;
  n.op = Op::kParam;
  n.shape = p.shape;
  n.val = p.data;
  n.bound = &p;
  return push(std::move(n));
}

Var Graph::reshape(Var x, Shape shape) {
  const Node& xn = at(x);
  if (numel_of(shape) != static_cast<int64_t>(xn.val.size()))
    throw ShapeError("reshape: " + shape_str(xn.shape) + " to " + shape_str(shape));
  Node n;
  n.op = Op::kReshape;
  n.shape = std::move(shape);
  n.val = xn.val;
  n.a = x.id;
  return push(std::move(n));
}

Var Graph::rows(Var x, int row0, int count) {
  const Node& xn = at(x);
  if (xn.shape.empty()) throw ShapeError("rows: scalar input");
  const int b = xn.shape[0];
  if (row0 < 0 || count < 0 || row0 + count > b)
    throw std::invalid_argument("rows: slice out of range");
  const size_t stride = xn.val.size() / static_cast<size_t>(b);
  Node n;
  n.op = Op::kRows;
  n.shape = xn.shape;
  n.shape[0] = count;
  n.val.assign(xn.val.begin() + row0 * stride, xn.val.begin() + (row0 + count) * stride);
  n.a = x.id;
  n.i0 = row0;
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// linear

Var Graph::linear(Var x, Var w, Var b) {
  const Node& xn = at(x);
  const Node& wn = at(w);
  if (xn.shape.size() != 2 || wn.shape.size() != 2 || xn.shape[1] != wn.shape[0])
    throw ShapeError("linear: input " + shape_str(xn.shape) + " vs weight " + shape_str(wn.shape));
  const int batch = xn.shape[0], in = xn.shape[1], out = wn.shape[1];
  const double* bias = nullptr;
  if (b.valid()) {
    const Node& bn = at(b);
    if (bn.shape != Shape{out})
      throw ShapeError("linear: bias " + shape_str(bn.shape) + ", expected [" +
                       std::to_string(out) + "]");
    bias = bn.val.data();
  }
  Node n;
  n.op = Op::kLinear;
  n.shape = {batch, out};
  n.val.assign(static_cast<size_t>(batch) * out, 0.0);
  n.a = x.id;
  n.b = w.id;
  n.c = b.valid() ? b.id : -1;
  const double* xv = xn.val.data();
  const double* wv = wn.val.data();
  double* y = n.val.data();
  for (int bb = 0; bb < batch; ++bb) {
    double* yrow = y + static_cast<size_t>(bb) * out;
    if (bias)
      std::copy(bias, bias + out, yrow);
    for (int k = 0; k < in; ++k) {
      const double xk = xv[static_cast<size_t>(bb) * in + k];
      if (xk == 0.0) continue;
      const double* wrow = wv + static_cast<size_t>(k) * out;
      for (int o = 0; o < out; ++o) yrow[o] += xk * wrow[o];
    }
  }
  return push(std::move(n));
}

namespace {
struct ConvDims {
  int batch, in_ch, in_h, in_w, out_ch, k_h, k_w, s_h, s_w, p_h, p_w, out_h, out_w;
};

int conv_out(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }
}  // namespace

Var Graph::conv1d(Var x, Var w, Var b, int stride, int pad) {
  // Copy shapes up front: pushing reshape nodes may reallocate the arena.
  const Shape xs = at(x).shape;
  const Shape ws = at(w).shape;
  if (xs.size() != 3 || ws.size() != 3 || xs[1] != ws[1])
    throw ShapeError("conv1d: input " + shape_str(xs) + " vs kernel " + shape_str(ws));
  // Reuse the 2D kernel with height 1.
  Var x4 = reshape(x, {xs[0], xs[1], 1, xs[2]});
  Var w4 = reshape(w, {ws[0], ws[1], 1, ws[2]});
  Var y4 = conv2d(x4, w4, b, 1, stride, 0, pad);
  const Shape ys = at(y4).shape;
  return reshape(y4, {ys[0], ys[1], ys[3]});
}

Var Graph::conv2d(Var x, Var w, Var b, int stride_h, int stride_w, int pad_h, int pad_w) {
  const Node& xn = at(x);
  const Node& wn = at(w);
  if (xn.shape.size() != 4 || wn.shape.size() != 4 || xn.shape[1] != wn.shape[1])
    throw ShapeError("conv2d: input " + shape_str(xn.shape) + " vs kernel " + shape_str(wn.shape));
  if (stride_h < 1 || stride_w < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  ConvDims d;
  d.batch = xn.shape[0];
  d.in_ch = xn.shape[1];
  d.in_h = xn.shape[2];
  d.in_w = xn.shape[3];
  d.out_ch = wn.shape[0];
  d.k_h = wn.shape[2];
  d.k_w = wn.shape[3];
  d.s_h = stride_h;
  d.s_w = stride_w;
  d.p_h = pad_h;
  d.p_w = pad_w;
  d.out_h = conv_out(d.in_h, d.k_h, d.s_h, d.p_h);
  d.out_w = conv_out(d.in_w, d.k_w, d.s_w, d.p_w);
  if (d.out_h < 1 || d.out_w < 1)
    throw ShapeError("conv2d: kernel " + shape_str(wn.shape) + " does not fit input " +
                     shape_str(xn.shape));
  const double* bias = nullptr;
  if (b.valid()) {
    const Node& bn = at(b);
    if (bn.shape != Shape{d.out_ch})
      throw ShapeError("conv2d: bias " + shape_str(bn.shape) + ", expected [" +
                       std::to_string(d.out_ch) + "]");
    bias = bn.val.data();
  }

  Node n;
  n.op = Op::kConv2d;
  n.shape = {d.batch, d.out_ch, d.out_h, d.out_w};
  n.val.assign(static_cast<size_t>(numel_of(n.shape)), 0.0);
  n.a = x.id;
  n.b = w.id;
  n.c = b.valid() ? b.id : -1;
  n.i0 = stride_h;
  n.i1 = stride_w;
  n.i2 = pad_h;
  n.i3 = pad_w;

  const double* xv = xn.val.data();
  const double* wv = wn.val.data();
  double* y = n.val.data();
  for (int bb = 0; bb < d.batch; ++bb) {
    for (int oc = 0; oc < d.out_ch; ++oc) {
      for (int oy = 0; oy < d.out_h; ++oy) {
        for (int ox = 0; ox < d.out_w; ++ox) {
          double acc = bias ? bias[oc] : 0.0;
          for (int ic = 0; ic < d.in_ch; ++ic) {
            const double* xp = xv + ((static_cast<size_t>(bb) * d.in_ch + ic) * d.in_h) * d.in_w;
            const double* wp = wv + ((static_cast<size_t>(oc) * d.in_ch + ic) * d.k_h) * d.k_w;
            for (int ky = 0; ky < d.k_h; ++ky) {
              const int iy = oy * d.s_h + ky - d.p_h;
              if (iy < 0 || iy >= d.in_h) continue;
              for (int kx = 0; kx < d.k_w; ++kx) {
                const int ix = ox * d.s_w + kx - d.p_w;
                if (ix < 0 || ix >= d.in_w) continue;
                acc += xp[static_cast<size_t>(iy) * d.in_w + ix] *
                       wp[static_cast<size_t>(ky) * d.k_w + kx];
              }
            }
          }
          y[((static_cast<size_t>(bb) * d.out_ch + oc) * d.out_h + oy) * d.out_w + ox] = acc;
        }
      }
    }
  }
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// elementwise

#define EF_UNARY(NAME, OPK, EXPR)                             \
  Var Graph::NAME(Var x) {                                    \
    const Node& xn = at(x);                                   \
    Node n;                                                   \
    n.op = OPK;                                               \
    n.shape = xn.shape;                                       \
    n.val.resize(xn.val.size());                              \
    n.a = x.id;                                               \
    for (size_t i = 0; i < xn.val.size(); ++i) {              \
      const double v = xn.val[i];                             \
      n.val[i] = (EXPR);                                      \
    }                                                         \
    return push(std::move(n));                                \
  }

EF_UNARY(relu, Op::kRelu, v > 0.0 ? v : 0.0)
EF_UNARY(tanh, Op::kTanh, std::tanh(v))
EF_UNARY(sigmoid, Op::kSigmoid, 1.0 / (1.0 + std::exp(-v)))
EF_UNARY(exp, Op::kExp, std::exp(v))
EF_UNARY(square, Op::kSquare, v * v)
#undef EF_UNARY

Var Graph::clamp(Var x, double lo, double hi) {
  const Node& xn = at(x);
  Node n;
  n.op = Op::kClamp;
  n.shape = xn.shape;
  n.val.resize(xn.val.size());
  n.a = x.id;
  n.d0 = lo;
  n.d1 = hi;
  for (size_t i = 0; i < xn.val.size(); ++i) n.val[i] = std::min(std::max(xn.val[i], lo), hi);
  return push(std::move(n));
}

namespace {
void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b)
    throw ShapeError(std::string(what) + ": " + shape_str(a) + " vs " + shape_str(b) +
                     " (no broadcasting)");
}
}  // namespace

#define EF_BINARY(NAME, OPK, EXPR)                                 \
  Var Graph::NAME(Var a, Var b) {                                  \
    const Node& an = at(a);                                        \
    const Node& bn = at(b);                                        \
    require_same_shape(an.shape, bn.shape, #NAME);                 \
    Node n;                                                        \
    n.op = OPK;                                                    \
    n.shape = an.shape;                                            \
    n.val.resize(an.val.size());                                   \
    n.a = a.id;                                                    \
    n.b = b.id;                                                    \
    for (size_t i = 0; i < an.val.size(); ++i) {                   \
      const double x = an.val[i];                                  \
      const double y = bn.val[i];                                  \
      n.val[i] = (EXPR);                                           \
    }                                                              \
    return push(std::move(n));                                     \
  }

EF_BINARY(add, Op::kAdd, x + y)
EF_BINARY(sub, Op::kSub, x - y)
EF_BINARY(mul, Op::kMul, x* y)
EF_BINARY(min, Op::kMin, x <= y ? x : y)
#undef EF_BINARY

Var Graph::add_scalar(Var x, double s) {
  const Node& xn = at(x);
  Node n;
  n.op = Op::kAddScalar;
  n.shape = xn.shape;
  n.val.resize(xn.val.size());
  n.a = x.id;
  n.d0 = s;
  for (size_t i = 0; i < xn.val.size(); ++i) n.val[i] = xn.val[i] + s;
  return push(std::move(n));
}

Var Graph::mul_scalar(Var x, double s) {
  const Node& xn = at(x);
  Node n;
  n.op = Op::kMulScalar;
  n.shape = xn.shape;
  n.val.resize(xn.val.size());
  n.a = x.id;
  n.d0 = s;
  for (size_t i = 0; i < xn.val.size(); ++i) n.val[i] = xn.val[i] * s;
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// row ops and reductions

namespace {
void require_matrix(const Shape& s, const char* what) {
  if (s.size() != 2) throw ShapeError(std::string(what) + ": expected [B,n], got " + shape_str(s));
}
}  // namespace

Var Graph::softmax_rows(Var x) {
  const Node& xn = at(x);
  require_matrix(xn.shape, "softmax_rows");
  Node n;
  n.op = Op::kSoftmaxRows;
  n.shape = xn.shape;
  n.val.resize(xn.val.size());
  n.a = x.id;
  const int cols = xn.shape[1];
  for (int r = 0; r < xn.shape[0]; ++r)
    softmax_row(xn.val.data() + static_cast<size_t>(r) * cols,
                n.val.data() + static_cast<size_t>(r) * cols, cols);
  return push(std::move(n));
}

Var Graph::log_softmax_rows(Var x) {
  const Node& xn = at(x);
  require_matrix(xn.shape, "log_softmax_rows");
  Node n;
  n.op = Op::kLogSoftmaxRows;
  n.shape = xn.shape;
  n.val.resize(xn.val.size());
  n.a = x.id;
  const int cols = xn.shape[1];
  for (int r = 0; r < xn.shape[0]; ++r)
    log_softmax_row(xn.val.data() + static_cast<size_t>(r) * cols,
                    n.val.data() + static_cast<size_t>(r) * cols, cols);
  return push(std::move(n));
}

Var Graph::gather_rows(Var x, const std::vector<int>& idx) {
  const Node& xn = at(x);
  require_matrix(xn.shape, "gather_rows");
  if (static_cast<int>(idx.size()) != xn.shape[0])
    throw ShapeError("gather_rows: " + std::to_string(idx.size()) + " indices for " +
                     std::to_string(xn.shape[0]) + " rows");
  const int cols = xn.shape[1];
  Node n;
  n.op = Op::kGatherRows;
  n.shape = {xn.shape[0]};
  n.val.resize(static_cast<size_t>(xn.shape[0]));
  n.a = x.id;
  n.idx = idx;
  for (int r = 0; r < xn.shape[0]; ++r) {
    const int j = idx[static_cast<size_t>(r)];
    if (j < 0 || j >= cols) throw std::invalid_argument("gather_rows: index out of range");
    n.val[static_cast<size_t>(r)] = xn.val[static_cast<size_t>(r) * cols + j];
  }
  return push(std::move(n));
}

Var Graph::sum_rows(Var x) {
  const Node& xn = at(x);
  require_matrix(xn.shape, "sum_rows");
  const int cols = xn.shape[1];
  Node n;
  n.op = Op::kSumRows;
  n.shape = {xn.shape[0]};
  n.val.assign(static_cast<size_t>(xn.shape[0]), 0.0);
  n.a = x.id;
  for (int r = 0; r < xn.shape[0]; ++r) {
    double acc = 0.0;
    const double* p = xn.val.data() + static_cast<size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += p[c];
    n.val[static_cast<size_t>(r)] = acc;
  }
  return push(std::move(n));
}

Var Graph::sum_all(Var x) {
  const Node& xn = at(x);
  Node n;
  n.op = Op::kSumAll;
  n.shape = {1};
  double acc = 0.0;
  for (double v : xn.val) acc += v;
  n.val = {acc};
  n.a = x.id;
  return push(std::move(n));
}

Var Graph::mean_all(Var x) {
  const Node& xn = at(x);
  if (xn.val.empty()) throw std::invalid_argument("mean_all: empty tensor");
  Node n;
  n.op = Op::kMeanAll;
  n.shape = {1};
  double acc = 0.0;
  for (double v : xn.val) acc += v;
  n.val = {acc / static_cast<double>(xn.val.size())};
  n.a = x.id;
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// backward

void Graph::backward(Var loss) {
  Node& ln = at(loss);
  if (ln.val.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(ln.shape));

  for (Node& n : nodes_) n.grad.assign(n.val.size(), 0.0);
  ln.grad[0] = 1.0;

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    const double* g = n.grad.data();
    switch (n.op) {
      case Op::kConst:
      case Op::kParam:
        break;
      case Op::kReshape: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        for (size_t j = 0; j < n.grad.size(); ++j) an.grad[j] += g[j];
        break;
      }
      case Op::kRows: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        const size_t stride = an.val.size() / static_cast<size_t>(an.shape[0]);
        double* ag = an.grad.data() + static_cast<size_t>(n.i0) * stride;
        for (size_t j = 0; j < n.grad.size(); ++j) ag[j] += g[j];
        break;
      }
      case Op::kLinear: {
        Node& xn = nodes_[static_cast<size_t>(n.a)];
        Node& wn = nodes_[static_cast<size_t>(n.b)];
        const int batch = xn.shape[0], in = xn.shape[1], out = wn.shape[1];
        const double* xv = xn.val.data();
        const double* wv = wn.val.data();
        double* xg = xn.grad.data();
        double* wg = wn.grad.data();
        for (int bb = 0; bb < batch; ++bb) {
          const double* grow = g + static_cast<size_t>(bb) * out;
          for (int k = 0; k < in; ++k) {
            const double* wrow = wv + static_cast<size_t>(k) * out;
            double* wgrow = wg + static_cast<size_t>(k) * out;
            const double xk = xv[static_cast<size_t>(bb) * in + k];
            double acc = 0.0;
            for (int o = 0; o < out; ++o) {
              acc += grow[o] * wrow[o];
              wgrow[o] += xk * grow[o];
            }
            xg[static_cast<size_t>(bb) * in + k] += acc;
          }
          if (n.c >= 0) {
            Node& bn = nodes_[static_cast<size_t>(n.c)];
            double* bg = bn.grad.data();
            for (int o = 0; o < out; ++o) bg[o] += grow[o];
          }
        }
        break;
      }
      case Op::kConv2d: {
        Node& xn = nodes_[static_cast<size_t>(n.a)];
        Node& wn = nodes_[static_cast<size_t>(n.b)];
        const int batch = xn.shape[0], in_ch = xn.shape[1], in_h = xn.shape[2],
                  in_w = xn.shape[3];
        const int out_ch = wn.shape[0], k_h = wn.shape[2], k_w = wn.shape[3];
        const int out_h = n.shape[2], out_w = n.shape[3];
        const int s_h = n.i0, s_w = n.i1, p_h = n.i2, p_w = n.i3;
        const double* xv = xn.val.data();
        const double* wv = wn.val.data();
        double* xg = xn.grad.data();
        double* wg = wn.grad.data();
        double* bg = n.c >= 0 ? nodes_[static_cast<size_t>(n.c)].grad.data() : nullptr;
        for (int bb = 0; bb < batch; ++bb) {
          for (int oc = 0; oc < out_ch; ++oc) {
            for (int oy = 0; oy < out_h; ++oy) {
              for (int ox = 0; ox < out_w; ++ox) {
                const double gv =
                    g[((static_cast<size_t>(bb) * out_ch + oc) * out_h + oy) * out_w + ox];
                if (bg) bg[oc] += gv;
                if (gv == 0.0) continue;
                for (int ic = 0; ic < in_ch; ++ic) {
                  const size_t xoff = (static_cast<size_t>(bb) * in_ch + ic) * in_h;
                  const size_t woff = (static_cast<size_t>(oc) * in_ch + ic) * k_h;
                  for (int ky = 0; ky < k_h; ++ky) {
                    const int iy = oy * s_h + ky - p_h;
                    if (iy < 0 || iy >= in_h) continue;
                    for (int kx = 0; kx < k_w; ++kx) {
                      const int ix = ox * s_w + kx - p_w;
                      if (ix < 0 || ix >= in_w) continue;
                      const size_t xi = (xoff + iy) * in_w + ix;
                      const size_t wi = (woff + ky) * k_w + kx;
                      xg[xi] += gv * wv[wi];
                      wg[wi] += gv * xv[xi];
                    }
                  }
                }
              }
            }
          }
        }
        break;
      }
      case Op::kRelu: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        for (size_t j = 0; j < n.grad.size(); ++j)
          if (an.val[j] > 0.0) an.grad[j] += g[j];
        break;
      }
      case Op::kTanh: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        for (size_t j = 0; j < n.grad.size(); ++j) an.grad[j] += g[j] * (1.0 - n.val[j] * n.val[j]);
        break;
      }
      case Op::kSigmoid: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        for (size_t j = 0; j < n.grad.size(); ++j)
          an.grad[j] += g[j] * n.val[j] * (1.0 - n.val[j]);
        break;
      }
      case Op::kExp: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        for (size_t j = 0; j < n.grad.size(); ++j) an.grad[j] += g[j] * n.val[j];
        break;
      }
      case Op::kSquare: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        for (size_t j = 0; j < n.grad.size(); ++j) an.grad[j] += g[j] * 2.0 * an.val[j];
        break;
      }
      case Op::kClamp: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        for (size_t j = 0; j < n.grad.size(); ++j)
          if (an.val[j] >= n.d0 && an.val[j] <= n.d1) an.grad[j] += g[j];
        break;
      }
      case Op::kAdd: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        Node& bn = nodes_[static_cast<size_t>(n.b)];
        for (size_t j = 0; j < n.grad.size(); ++j) {
          an.grad[j] += g[j];
          bn.grad[j] += g[j];
        }
        break;
      }
      case Op::kSub: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        Node& bn = nodes_[static_cast<size_t>(n.b)];
        for (size_t j = 0; j < n.grad.size(); ++j) {
          an.grad[j] += g[j];
          bn.grad[j] -= g[j];
        }
        break;
      }
      case Op::kMul: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        Node& bn = nodes_[static_cast<size_t>(n.b)];
        for (size_t j = 0; j < n.grad.size(); ++j) {
          an.grad[j] += g[j] * bn.val[j];
          bn.grad[j] += g[j] * an.val[j];
        }
        break;
      }
      case Op::kMin: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        Node& bn = nodes_[static_cast<size_t>(n.b)];
        for (size_t j = 0; j < n.grad.size(); ++j) {
          if (an.val[j] <= bn.val[j])
            an.grad[j] += g[j];
          else
            bn.grad[j] += g[j];
        }
        break;
      }
      case Op::kAddScalar: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        for (size_t j = 0; j < n.grad.size(); ++j) an.grad[j] += g[j];
        break;
      }
      case Op::kMulScalar: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        for (size_t j = 0; j < n.grad.size(); ++j) an.grad[j] += g[j] * n.d0;
        break;
      }
      case Op::kSoftmaxRows: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        const int cols = n.shape[1];
        for (int r = 0; r < n.shape[0]; ++r) {
          const double* p = n.val.data() + static_cast<size_t>(r) * cols;
          const double* gr = g + static_cast<size_t>(r) * cols;
          double dot = 0.0;
          for (int c = 0; c < cols; ++c) dot += gr[c] * p[c];
          double* ag = an.grad.data() + static_cast<size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) ag[c] += p[c] * (gr[c] - dot);
        }
        break;
      }
      case Op::kLogSoftmaxRows: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        const int cols = n.shape[1];
        for (int r = 0; r < n.shape[0]; ++r) {
          const double* lp = n.val.data() + static_cast<size_t>(r) * cols;
          const double* gr = g + static_cast<size_t>(r) * cols;
          double gsum = 0.0;
          for (int c = 0; c < cols; ++c) gsum += gr[c];
          double* ag = an.grad.data() + static_cast<size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) ag[c] += gr[c] - std::exp(lp[c]) * gsum;
        }
        break;
      }
      case Op::kGatherRows: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        const int cols = an.shape[1];
        for (int r = 0; r < an.shape[0]; ++r)
          an.grad[static_cast<size_t>(r) * cols + n.idx[static_cast<size_t>(r)]] += g[r];
        break;
      }
      case Op::kSumRows: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        const int cols = an.shape[1];
        for (int r = 0; r < an.shape[0]; ++r) {
          double* ag = an.grad.data() + static_cast<size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) ag[c] += g[r];
        }
        break;
      }
      case Op::kSumAll: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        for (size_t j = 0; j < an.grad.size(); ++j) an.grad[j] += g[0];
        break;
      }
      case Op::kMeanAll: {
        Node& an = nodes_[static_cast<size_t>(n.a)];
        const double scale = g[0] / static_cast<double>(an.val.size());
        for (size_t j = 0; j < an.grad.size(); ++j) an.grad[j] += scale;
        break;
      }
      case Op::kConv1d:
        break;  // lowered to conv2d at construction
    }
  }

  // Push gradients out to bound parameters. Parameters untouched by the loss
  // end up with allocated all-zero grads.
  for (Node& n : nodes_) {
    if (n.op != Op::kParam) continue;
    n.bound->ensure_grad();
    for (size_t j = 0; j < n.grad.size(); ++j) n.bound->grad[j] += n.grad[j];
  }
}

void Graph::clear() { nodes_.clear(); }

size_t Graph::size() const { return nodes_.size(); }

}  // namespace echofight::nn
