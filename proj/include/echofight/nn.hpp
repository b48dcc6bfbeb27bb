#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "echofight/errors.hpp"

namespace echofight::nn {

using Shape = std::vector<int>;

int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor. grad stays empty until a backward pass (or
// ensure_grad) touches it; when present it has the same length as data.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0)
      : shape(std::move(s)), data(static_cast<size_t>(numel_of(shape)), fill) {}
  static Tensor from(Shape s, std::vector<double> values);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  bool has_grad() const { return !grad.empty(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
  bool all_finite() const;
};

// Numerically stable softmax over the last axis of a [n] or [B, n] tensor.
// Rejects non-finite logits.
Tensor softmax(const Tensor& logits);

// Handle into a Graph's node arena.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so the
// creation order is already topological; backward() walks it in reverse.
// All shapes are batch-first: the leading dim of layer inputs is the batch.
class Graph {
 public:
  Graph();
  ~Graph();
  Graph(Graph&&) noexcept;
  Graph& operator=(Graph&&) noexcept;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // -- leaves --
  Var constant(const Tensor& t);
  Var constant(Shape shape, std::vector<double> data);
  // Registers an external parameter; backward() accumulates into p.grad.
  // Register each parameter once per graph and reuse the Var.
  Var param(Tensor& p);

  // -- structure --
  Var reshape(Var x, Shape shape);
  // First-dim slice [row0, row0+count).
  Var rows(Var x, int row0, int count);

  // -- layers --
  // x:[B,in] w:[in,out] b:[out] or invalid Var for no bias -> [B,out]
  Var linear(Var x, Var w, Var b);
  // x:[B,C,L] w:[OC,C,K] b:[OC]|invalid -> [B,OC,LO]
  Var conv1d(Var x, Var w, Var b, int stride, int pad);
  // x:[B,C,H,W] w:[OC,C,KH,KW] b:[OC]|invalid -> [B,OC,HO,WO]
  Var conv2d(Var x, Var w, Var b, int stride_h, int stride_w, int pad_h, int pad_w);

  // -- elementwise --
  Var relu(Var x);
  Var tanh(Var x);
  Var sigmoid(Var x);
  Var exp(Var x);
  Var square(Var x);
  Var clamp(Var x, double lo, double hi);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var min(Var a, Var b);  // ties keep a's gradient
  Var add_scalar(Var x, double s);
  Var mul_scalar(Var x, double s);

  // -- rows / reductions --
  Var softmax_rows(Var x);      // [B,n] -> [B,n]
  Var log_softmax_rows(Var x);  // [B,n] -> [B,n]
  // [B,n] with idx[B] -> [B]; out[b] = x[b, idx[b]]
  Var gather_rows(Var x, const std::vector<int>& idx);
  Var sum_rows(Var x);  // [B,n] -> [B]
  Var sum_all(Var x);   // -> scalar [1]
  Var mean_all(Var x);  // -> scalar [1]

  // -- access --
  const Shape& shape(Var v) const;
  const std::vector<double>& val(Var v) const;
  Tensor tensor(Var v) const;
  double scalar(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Every
  // registered parameter ends with an allocated grad; parameters the loss
  // never reached keep zeros.
  void backward(Var loss);

  void clear();
  size_t size() const;

 private:
  struct Node;
  Var push(Node&& n);
  Node& at(Var v);
  const Node& at(Var v) const;
  void check(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace echofight::nn
