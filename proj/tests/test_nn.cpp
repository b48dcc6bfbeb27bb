#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "echofight/checkpoint.hpp"
#include "echofight/layers.hpp"
#include "echofight/nn.hpp"
#include "echofight/rng.hpp"
#include "oracles.hpp"

using namespace echofight;
using nn::Graph;
using nn::LayerSpec;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(s));
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

// Central finite differences of a scalar-valued forward over every entry of
// every parameter, compared against the recorded analytic gradients.
void check_gradients(const std::vector<Tensor*>& params,
                     const std::function<double()>& loss_value,
                     const std::function<void()>& run_backward, double h = 1e-5) {
  for (Tensor* p : params) p->grad.clear();
  run_backward();
  for (Tensor* p : params) {
    REQUIRE(p->has_grad());
    for (size_t i = 0; i < p->data.size(); ++i) {
      const double saved = p->data[i];
      p->data[i] = saved + h;
      const double up = loss_value();
      p->data[i] = saved - h;
      const double down = loss_value();
      p->data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      INFO("param entry ", i, " analytic=", p->grad[i], " numeric=", numeric);
      CHECK(oracles::grad_close(p->grad[i], numeric));
    }
  }
}

}  // namespace

TEST_CASE("linear layer with identity weights is the identity map") {
  auto layer = LayerSpec::make_linear(4, 4);
  for (int i = 0; i < 4; ++i) layer.w.data[static_cast<size_t>(i) * 4 + i] = 1.0;
  Tensor x = Tensor::from({4}, {0.5, -1.0, 2.0, 0.0});
  Graph g;
  auto r = nn::forward(g, layer, x);
  CHECK(r.output.shape == Shape{4});
  CHECK(r.output.data == x.data);
}

TEST_CASE("conv1d stride arithmetic 2x100 -> 16x22") {
  auto layer = LayerSpec::make_conv1d(2, 100, 16, 16, 4, 0);
  CHECK(layer.out_shape == Shape{16, 22});
  Rng rng(3);
  layer.init(rng);
  Tensor x = random_tensor({2, 100}, rng);
  Graph g;
  auto r = nn::forward(g, layer, x);
  CHECK(r.output.shape == Shape{16, 22});
}

TEST_CASE("gru with zero weights and zero hidden stays at zero") {
  auto layer = LayerSpec::make_gru(6, 5);
  Tensor x({6});
  x.data = {1.0, -1.0, 0.3, 0.0, 2.0, -0.5};
  Tensor h({5});
  Graph g;
  auto r = nn::forward(g, layer, x, h);
  REQUIRE(r.new_hidden.has_value());
  for (double v : r.new_hidden->data) CHECK(v == 0.0);
}

TEST_CASE("forward validates shapes and hidden usage") {
  auto layer = LayerSpec::make_linear(4, 3);
  Graph g;
  CHECK_THROWS_AS((void)nn::forward(g, layer, Tensor({5})), echofight::ShapeError);
  CHECK_THROWS_AS((void)nn::forward(g, layer, Tensor({4}), Tensor({3})), std::invalid_argument);
  auto gru = LayerSpec::make_gru(4, 3);
  CHECK_THROWS_AS((void)nn::forward(g, gru, Tensor({4})), std::invalid_argument);
}

TEST_CASE("backward requires a scalar loss and a recorded graph") {
  Graph g;
  CHECK_THROWS_AS(g.backward(Var{0}), echofight::StateError);
  Tensor w = Tensor::from({2, 2}, {1, 2, 3, 4});
  Var wv = g.param(w);
  CHECK_THROWS_AS(g.backward(wv), std::invalid_argument);
}

TEST_CASE("loss sum(W x) has gradient outer(1, x)") {
  Tensor w({3, 2});
  Tensor x = Tensor::from({1, 3}, {2.0, -1.0, 0.5});
  Rng rng(5);
  for (auto& v : w.data) v = rng.uniform(-1, 1);
  Graph g;
  Var y = g.linear(g.constant(x), g.param(w), Var{});
  g.backward(g.sum_all(y));
  for (int k = 0; k < 3; ++k)
    for (int o = 0; o < 2; ++o) CHECK(w.grad[static_cast<size_t>(k) * 2 + o] == x.data[static_cast<size_t>(k)]);
}

TEST_CASE("unreached parameters end with zero gradients") {
  Tensor a({2, 2}), b({2, 2});
  a.data = {1, 2, 3, 4};
  b.data = {5, 6, 7, 8};
  Graph g;
  Var av = g.param(a);
  (void)g.param(b);  // registered, never used by the loss
  g.backward(g.sum_all(av));
  REQUIRE(b.has_grad());
  for (double v : b.grad) CHECK(v == 0.0);
  for (double v : a.grad) CHECK(v == 1.0);
}

TEST_CASE("finite differences: linear layer") {
  Rng rng(11);
  auto layer = LayerSpec::make_linear(5, 3);
  layer.init(rng);
  Tensor x = random_tensor({2, 5}, rng);
  Tensor probe = random_tensor({2, 3}, rng);

  auto value = [&] {
    Graph g;
    Var y = g.linear(g.constant(x), g.param(layer.w), g.param(layer.b));
    return g.scalar(g.sum_all(g.mul(y, g.constant(probe))));
  };
  auto backward = [&] {
    Graph g;
    Var y = g.linear(g.constant(x), g.param(layer.w), g.param(layer.b));
    g.backward(g.sum_all(g.mul(y, g.constant(probe))));
  };
  check_gradients({&layer.w, &layer.b}, value, backward);
}

TEST_CASE("finite differences: conv1d layer") {
  Rng rng(13);
  auto layer = LayerSpec::make_conv1d(2, 12, 3, 4, 2, 1);
  layer.init(rng);
  Tensor x = random_tensor({2, 2, 12}, rng);
  Tensor probe = random_tensor({2, 3, 6}, rng);

  auto value = [&] {
    Graph g;
    Var y = g.conv1d(g.constant(x), g.param(layer.w), g.param(layer.b), 2, 1);
    return g.scalar(g.sum_all(g.mul(y, g.constant(probe))));
  };
  auto backward = [&] {
    Graph g;
    Var y = g.conv1d(g.constant(x), g.param(layer.w), g.param(layer.b), 2, 1);
    g.backward(g.sum_all(g.mul(y, g.constant(probe))));
  };
  check_gradients({&layer.w, &layer.b}, value, backward);
}

TEST_CASE("finite differences: conv2d layer") {
  Rng rng(17);
  auto layer = LayerSpec::make_conv2d(2, 8, 5, 3, 3, 3, 2, 2, 1, 1);
  layer.init(rng);
  Tensor x = random_tensor({2, 2, 8, 5}, rng);
  const Shape out{2, 3, 4, 3};
  Tensor probe = random_tensor(out, rng);

  auto value = [&] {
    Graph g;
    Var y = g.conv2d(g.constant(x), g.param(layer.w), g.param(layer.b), 2, 2, 1, 1);
    return g.scalar(g.sum_all(g.mul(y, g.constant(probe))));
  };
  auto backward = [&] {
    Graph g;
    Var y = g.conv2d(g.constant(x), g.param(layer.w), g.param(layer.b), 2, 2, 1, 1);
    g.backward(g.sum_all(g.mul(y, g.constant(probe))));
  };
  check_gradients({&layer.w, &layer.b}, value, backward);
}

TEST_CASE("finite differences: gru cell") {
  Rng rng(19);
  auto layer = LayerSpec::make_gru(4, 3);
  layer.init(rng);
  Tensor x = random_tensor({2, 4}, rng);
  Tensor h0 = random_tensor({2, 3}, rng, 0.5);
  Tensor probe = random_tensor({2, 3}, rng);

  std::vector<Tensor*> params;
  for (auto& [name, t] : layer.named_params("gru")) params.push_back(t);

  auto value = [&] {
    Graph g;
    auto p = nn::register_gru(g, layer.gru);
    Var h1 = nn::gru_cell(g, g.constant(x), g.constant(h0), p);
    Var h2 = nn::gru_cell(g, g.constant(x), h1, p);  // two steps through time
    return g.scalar(g.sum_all(g.mul(h2, g.constant(probe))));
  };
  auto backward = [&] {
    Graph g;
    auto p = nn::register_gru(g, layer.gru);
    Var h1 = nn::gru_cell(g, g.constant(x), g.constant(h0), p);
    Var h2 = nn::gru_cell(g, g.constant(x), h1, p);
    g.backward(g.sum_all(g.mul(h2, g.constant(probe))));
  };
  check_gradients(params, value, backward);
}

TEST_CASE("finite differences: softmax, relu and reductions composite") {
  Rng rng(23);
  Tensor w = random_tensor({4, 6}, rng);
  Tensor x = random_tensor({3, 4}, rng);
  const std::vector<int> picks{1, 5, 0};

  auto build = [&](Graph& g) {
    Var y = g.relu(g.linear(g.constant(x), g.param(w), Var{}));
    Var lp = g.log_softmax_rows(y);
    Var picked = g.gather_rows(lp, picks);
    Var probs = g.softmax_rows(y);
    Var ent = g.sum_rows(g.mul(probs, g.log_softmax_rows(y)));
    return g.sub(g.mean_all(picked), g.mean_all(ent));
  };
  auto value = [&] {
    Graph g;
    return g.scalar(build(g));
  };
  auto backward = [&] {
    Graph g;
    g.backward(build(g));
  };
  check_gradients({&w}, value, backward);
}

TEST_CASE("finite differences: clipped-surrogate style composite") {
  Rng rng(29);
  Tensor w = random_tensor({3, 5}, rng);
  Tensor x = random_tensor({4, 3}, rng);
  const std::vector<int> acts{0, 2, 4, 1};
  Tensor old_lp = random_tensor({4}, rng, 0.5);
  Tensor adv = random_tensor({4}, rng, 2.0);

  auto build = [&](Graph& g) {
    Var logits = g.linear(g.constant(x), g.param(w), Var{});
    Var lp = g.gather_rows(g.log_softmax_rows(logits), acts);
    Var ratio = g.exp(g.sub(lp, g.constant(old_lp)));
    Var a = g.constant(adv);
    Var surr = g.min(g.mul(ratio, a), g.mul(g.clamp(ratio, 0.8, 1.2), a));
    return g.mul_scalar(g.mean_all(surr), -1.0);
  };
  auto value = [&] {
    Graph g;
    return g.scalar(build(g));
  };
  auto backward = [&] {
    Graph g;
    g.backward(build(g));
  };
  check_gradients({&w}, value, backward);
}

TEST_CASE("softmax contract") {
  Tensor even({40}, 1.7);
  const Tensor p = nn::softmax(even);
  for (double v : p.data) CHECK(v == doctest::Approx(0.025).epsilon(1e-12));

  const Tensor big = Tensor::from({2}, {1000.0, 0.0});
  const Tensor pb = nn::softmax(big);
  CHECK(pb.data[0] == doctest::Approx(1.0));
  CHECK(pb.data[1] == doctest::Approx(0.0));
  CHECK(std::isfinite(pb.data[0]));

  Rng rng(31);
  Tensor r = random_tensor({40}, rng, 3.0);
  const Tensor pr = nn::softmax(r);
  double sum = 0.0;
  for (double v : pr.data) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);

  Tensor bad = Tensor::from({2}, {std::nan(""), 0.0});
  CHECK_THROWS_AS((void)nn::softmax(bad), std::invalid_argument);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  Tensor p = Tensor::from({3}, {1.0, -2.0, 3.0});
  p.ensure_grad();
  nn::AdamState st;
  const auto before = p.data;
  nn::adam_step({&p}, st);
  CHECK(p.data == before);
  CHECK(st.step == 1);
}

TEST_CASE("adam: first step moves by about -lr * sign(g)") {
  Tensor p = Tensor::from({2}, {0.0, 0.0});
  p.ensure_grad();
  p.grad = {4.0, -0.5};
  nn::AdamState st;
  nn::adam_step({&p}, st);
  CHECK(p.data[0] == doctest::Approx(-3e-4).epsilon(1e-4));
  CHECK(p.data[1] == doctest::Approx(3e-4).epsilon(1e-3));
  // grads zeroed afterwards
  for (double g : p.grad) CHECK(g == 0.0);
}

TEST_CASE("adam: missing grads raise state errors, runs are bit-identical") {
  Tensor p = Tensor::from({2}, {1.0, 2.0});
  nn::AdamState st;
  CHECK_THROWS_AS(nn::adam_step({&p}, st), echofight::StateError);

  auto run = [] {
    Rng rng(77);
    Tensor q = Tensor::from({4}, {0.1, 0.2, 0.3, 0.4});
    nn::AdamState s;
    for (int it = 0; it < 5; ++it) {
      q.ensure_grad();
      for (auto& g : q.grad) g = rng.uniform(-1, 1);
      nn::adam_step({&q}, s);
    }
    return q.data;
  };
  CHECK(run() == run());
}

TEST_CASE("gradient clipping caps the global norm") {
  Tensor a = Tensor::from({2}, {0.0, 0.0});
  Tensor b = Tensor::from({1}, {0.0});
  a.ensure_grad();
  b.ensure_grad();
  a.grad = {3.0, 4.0};
  b.grad = {12.0};
  CHECK(nn::global_grad_norm({&a, &b}) == doctest::Approx(13.0));
  nn::clip_grad_norm({&a, &b}, 0.5);
  CHECK(nn::global_grad_norm({&a, &b}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("orthogonal init produces orthonormal rows") {
  Rng rng(41);
  Tensor t({16, 16});
  nn::orthogonal_init(t, rng);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j <= i; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 16; ++k)
        dot += t.data[static_cast<size_t>(i) * 16 + k] * t.data[static_cast<size_t>(j) * 16 + k];
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
    }
}

TEST_CASE("checkpoint round trip verifies names and shapes") {
  Rng rng(43);
  auto l1 = LayerSpec::make_linear(3, 4);
  auto l2 = LayerSpec::make_gru(4, 2);
  l1.init(rng);
  l2.init(rng);
  nn::ParamStore store;
  for (auto& e : l1.named_params("fc")) store.push_back(e);
  for (auto& e : l2.named_params("gru")) store.push_back(e);

  nn::CheckpointInfo info;
  info.seed = 99;
  info.round = 7;
  info.encoder = "melspec";
  nn::save_checkpoint("ckpt_test", store, info);

  // float32 storage: values survive to float precision
  const auto saved_w = l1.w.data;
  for (auto& [name, t] : store)
    for (auto& v : t->data) v = 0.0;
  const auto loaded = nn::load_checkpoint("ckpt_test", store);
  CHECK(loaded.seed == 99);
  CHECK(loaded.round == 7);
  CHECK(loaded.encoder == "melspec");
  for (size_t i = 0; i < saved_w.size(); ++i)
    CHECK(l1.w.data[i] == doctest::Approx(saved_w[i]).epsilon(1e-6));

  // shape mismatch must be rejected before any data is touched
  auto bad = LayerSpec::make_linear(3, 5);
  nn::ParamStore bad_store;
  for (auto& e : bad.named_params("fc")) bad_store.push_back(e);
  for (auto& e : l2.named_params("gru")) bad_store.push_back(e);
  CHECK_THROWS_AS((void)nn::load_checkpoint("ckpt_test", bad_store), echofight::ConfigError);

  std::remove("ckpt_test.manifest");
  std::remove("ckpt_test.bin");
}

TEST_CASE("declared output shapes match computed shapes for the model configs") {
  // every layer configuration used by the three encoders and the policy head
  struct Case {
    LayerSpec layer;
    Shape batch_in;
  };
  Rng rng(47);
  std::vector<Case> cases;
  cases.push_back({LayerSpec::make_conv1d(2, 100, 16, 16, 4, 0), {1, 2, 100}});
  cases.push_back({LayerSpec::make_conv1d(16, 22, 32, 6, 4, 0), {1, 16, 22}});
  cases.push_back({LayerSpec::make_linear(256, 256), {1, 256}});
  cases.push_back({LayerSpec::make_conv2d(2, 80, 5, 16, 3, 3, 2, 2, 1, 1), {1, 2, 80, 5}});
  cases.push_back({LayerSpec::make_conv2d(16, 40, 3, 32, 3, 3, 1, 3, 1, 0), {1, 16, 40, 3}});
  cases.push_back({LayerSpec::make_linear(512, 256), {1, 512}});
  cases.push_back({LayerSpec::make_linear(256, 40), {1, 256}});
  for (auto& c : cases) {
    c.layer.init(rng);
    Tensor x(c.batch_in);
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    Graph g;
    auto r = nn::forward(g, c.layer, x);
    Shape want = c.layer.out_shape;
    want.insert(want.begin(), 1);
    CHECK(r.output.shape == want);
  }

  // the Fig. 1 / Fig. 2 shape ladder
  CHECK(LayerSpec::make_conv1d(2, 100, 16, 16, 4, 0).out_shape == Shape{16, 22});
  CHECK(LayerSpec::make_conv1d(16, 22, 32, 6, 4, 0).out_shape == Shape{32, 5});
  CHECK(LayerSpec::make_conv2d(2, 80, 5, 16, 3, 3, 2, 2, 1, 1).out_shape == Shape{16, 40, 3});
  CHECK(LayerSpec::make_conv2d(16, 40, 3, 32, 3, 3, 1, 3, 1, 0).out_shape == Shape{32, 40, 1});
}
