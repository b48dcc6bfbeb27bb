#include "echofight/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "echofight/checkpoint.hpp"
#include "echofight/errors.hpp"

namespace echofight::ppo {

using nn::Graph;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {
// rng stream tags
constexpr uint64_t kInitStream = 0x11;
constexpr uint64_t kAgentStream = 0x21;
constexpr uint64_t kOpponentStream = 0x22;
constexpr uint64_t kShuffleStream = 0x31;
constexpr uint64_t kRoundStream = 0x41;
}  // namespace

void Hyperparams::validate() const {
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("ppo: gamma must lie in (0, 1]");
  if (lambda <= 0.0 || lambda > 1.0) throw ConfigError("ppo: lambda must lie in (0, 1]");
  if (clip_epsilon <= 0.0) throw ConfigError("ppo: clip_epsilon must be positive");
  if (step_size <= 0.0) throw ConfigError("ppo: step_size must be positive");
  if (surrogate_epochs < 1 || minibatch < 1 || bptt_chunk < 1)
    throw ConfigError("ppo: epochs, minibatch and bptt_chunk must be >= 1");
  if (gru_hidden < 1) throw ConfigError("ppo: gru_hidden must be >= 1");
  if (rollout_horizon < 1 || training_rounds < 0)
    throw ConfigError("ppo: bad rollout_horizon / training_rounds");
  if (reward_scale <= 0.0) throw ConfigError("ppo: reward_scale must be positive");
}

PolicyNet::PolicyNet(const encoders::EncoderConfig& ecfg, int gru_hidden_units)
    : encoder(ecfg), gru_hidden(gru_hidden_units) {
  gru = nn::LayerSpec::make_gru(encoder.flattened_len(), gru_hidden);
  fc1 = nn::LayerSpec::make_linear(gru_hidden, 256);
  fc2 = nn::LayerSpec::make_linear(256, 256);
  head = nn::LayerSpec::make_linear(256, arena::kNumActions);
  value = nn::LayerSpec::make_linear(gru_hidden, 1);
}

void PolicyNet::init(Rng& rng) {
  encoder.init(rng);
  gru.init(rng);
  fc1.init(rng);
  fc2.init(rng);
  head.init(rng);
  value.init(rng);
}

nn::ParamStore PolicyNet::named_params() {
  nn::ParamStore store = encoder.named_params();
  for (auto& e : gru.named_params("gru")) store.push_back(e);
  for (auto& e : fc1.named_params("fcn.fc1")) store.push_back(e);
  for (auto& e : fc2.named_params("fcn.fc2")) store.push_back(e);
  for (auto& e : head.named_params("fcn.head")) store.push_back(e);
  for (auto& e : value.named_params("value")) store.push_back(e);
  return store;
}

std::vector<Tensor*> PolicyNet::param_ptrs() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

PolicyNet::Heads PolicyNet::register_heads(Graph& g) {
  Heads h;
  h.gru = nn::register_gru(g, gru.gru);
  h.fc1w = g.param(fc1.w);
  h.fc1b = g.param(fc1.b);
  h.fc2w = g.param(fc2.w);
  h.fc2b = g.param(fc2.b);
  h.hw = g.param(head.w);
  h.hb = g.param(head.b);
  h.vw = g.param(value.w);
  h.vb = g.param(value.b);
  return h;
}

PolicyNet::StepVars PolicyNet::head_step(Graph& g, const Heads& h, Var feature, Var hidden) {
  StepVars s;
  s.hidden = nn::gru_cell(g, feature, hidden, h.gru);
  Var x = g.relu(g.linear(s.hidden, h.fc1w, h.fc1b));
  x = g.relu(g.linear(x, h.fc2w, h.fc2b));
  s.logits = g.linear(x, h.hw, h.hb);
  const int batch = g.shape(s.hidden)[0];
  s.value = g.reshape(g.linear(s.hidden, h.vw, h.vb), {batch});
  return s;
}

PolicyStep policy_forward(PolicyNet& net, const encoders::AudioFeature& feature,
                          const Tensor& hidden) {
  if (feature.kind != net.encoder.kind())
    throw ShapeError(std::string("policy_forward: feature kind ") +
                     encoders::encoder_kind_name(feature.kind) + " does not match encoder " +
                     encoders::encoder_kind_name(net.encoder.kind()));
  if (feature.flattened_len != net.encoder.flattened_len() ||
      static_cast<int>(feature.tensor.numel()) != net.encoder.flattened_len())
    throw ShapeError("policy_forward: feature length " +
                     std::to_string(feature.tensor.numel()) + ", expected " +
                     std::to_string(net.encoder.flattened_len()));
  if (static_cast<int>(hidden.numel()) != net.gru_hidden)
    throw ShapeError("policy_forward: hidden length " + std::to_string(hidden.numel()) +
                     ", expected " + std::to_string(net.gru_hidden));

  Graph g;
  auto heads = net.register_heads(g);
  Var feat = g.constant(Shape{1, net.encoder.flattened_len()}, feature.tensor.data);
  Var h0 = g.constant(Shape{1, net.gru_hidden}, hidden.data);
  auto step = net.head_step(g, heads, feat, h0);
  Var probs = g.softmax_rows(step.logits);

  PolicyStep out;
  out.probs = Tensor::from({arena::kNumActions}, g.val(probs));
  out.value = g.val(step.value)[0];
  out.hidden = Tensor::from({net.gru_hidden}, g.val(step.hidden));
  return out;
}

double RolloutBuffer::reward_sum() const {
  double acc = 0.0;
  for (double r : rewards) acc += r;
  return acc;
}

void compute_gae(RolloutBuffer& buffer, double v_last, const Hyperparams& hp) {
  const size_t t_max = buffer.size();
  if (t_max == 0) throw std::invalid_argument("compute_gae: empty buffer");
  if (buffer.rewards.size() != t_max || buffer.values.size() != t_max ||
      buffer.done.size() != t_max)
    throw std::invalid_argument("compute_gae: buffer arrays disagree in length");

  buffer.adv.assign(t_max, 0.0);
  buffer.ret.assign(t_max, 0.0);
  double carry = 0.0;
  for (size_t i = t_max; i-- > 0;) {
    const double mask = buffer.done[i] ? 0.0 : 1.0;
    const double v_next = (i + 1 < t_max) ? buffer.values[i + 1] : v_last;
    const double delta = buffer.rewards[i] + hp.gamma * v_next * mask - buffer.values[i];
    carry = delta + hp.gamma * hp.lambda * mask * carry;
    buffer.adv[i] = carry;
    buffer.ret[i] = carry + buffer.values[i];
  }
}

LossParts ppo_loss(PolicyNet& net, const ChunkBatch& batch, const Hyperparams& hp, Graph& g,
                   Var* loss_var) {
  const RolloutBuffer& buf = *batch.buffer;
  const int n_chunks = static_cast<int>(batch.chunk_starts.size());
  const int chunk_len = batch.chunk_len;
  if (n_chunks == 0 || chunk_len < 1) throw std::invalid_argument("ppo_loss: empty minibatch");
  if (buf.adv.size() != buf.size())
    throw StateError("ppo_loss: advantages missing (run compute_gae)");
  const int t_total = static_cast<int>(buf.size());

  // gather per-row step indices, position-major: row k*n_chunks + c
  const int rows = n_chunks * chunk_len;
  std::vector<int> step_of(static_cast<size_t>(rows), -1);  // -1 = padded
  int valid = 0;
  for (int k = 0; k < chunk_len; ++k) {
    for (int c = 0; c < n_chunks; ++c) {
      const int t = batch.chunk_starts[static_cast<size_t>(c)] + k;
      if (t < t_total && t < batch.chunk_starts[static_cast<size_t>(c)] + chunk_len) {
        step_of[static_cast<size_t>(k * n_chunks + c)] = t;
        ++valid;
      }
    }
  }
  if (valid == 0) throw std::invalid_argument("ppo_loss: minibatch covers no steps");
  const double inv_valid = 1.0 / static_cast<double>(valid);

  // advantage normalization over the minibatch (constants w.r.t. theta)
  double mean = 0.0;
  for (int r = 0; r < rows; ++r) {
    const int t = step_of[static_cast<size_t>(r)];
    if (t >= 0) mean += buf.adv[static_cast<size_t>(t)];
  }
  mean *= inv_valid;
  double var = 0.0;
  for (int r = 0; r < rows; ++r) {
    const int t = step_of[static_cast<size_t>(r)];
    if (t >= 0) {
      const double d = buf.adv[static_cast<size_t>(t)] - mean;
      var += d * d;
    }
  }
  const double stddev = std::sqrt(var * inv_valid);

  auto adv_of = [&](int t) {
    const double a = buf.adv[static_cast<size_t>(t)];
    if (std::isnan(a)) throw std::invalid_argument("ppo_loss: NaN advantage");
    return hp.normalize_advantages ? (a - mean) / (stddev + 1e-8) : a;
  };

  // batched observation tensor, padded rows are zeros
  Shape obs_shape = net.encoder.input_shape();
  Shape batched = obs_shape;
  batched.insert(batched.begin(), rows);
  Tensor obs(batched);
  const size_t obs_stride = static_cast<size_t>(nn::numel_of(obs_shape));
  for (int r = 0; r < rows; ++r) {
    const int t = step_of[static_cast<size_t>(r)];
    if (t < 0) continue;
    std::copy(buf.obs[static_cast<size_t>(t)].data.begin(),
              buf.obs[static_cast<size_t>(t)].data.end(),
              obs.data.begin() + static_cast<size_t>(r) * obs_stride);
  }

  // initial hidden per chunk from the stored rollout snapshots
  Tensor h0({n_chunks, net.gru_hidden});
  for (int c = 0; c < n_chunks; ++c) {
    const auto& h = buf.hidden[static_cast<size_t>(batch.chunk_starts[static_cast<size_t>(c)])];
    std::copy(h.begin(), h.end(), h0.data.begin() + static_cast<size_t>(c) * net.gru_hidden);
  }

  auto heads = net.register_heads(g);
  Var feat_all = net.encoder.apply(g, g.constant(obs));
  Var h = g.constant(h0);

  Var surr_sum, vloss_sum, ent_sum, ratio_sum;
  double max_ratio_dev = 0.0;
  bool first = true;
  for (int k = 0; k < chunk_len; ++k) {
    Var feat_k = g.rows(feat_all, k * n_chunks, n_chunks);
    auto step = net.head_step(g, heads, feat_k, h);
    h = step.hidden;

    std::vector<int> acts(static_cast<size_t>(n_chunks), 0);
    std::vector<double> lp_old(static_cast<size_t>(n_chunks), 0.0);
    std::vector<double> advs(static_cast<size_t>(n_chunks), 0.0);
    std::vector<double> rets(static_cast<size_t>(n_chunks), 0.0);
    std::vector<double> mask(static_cast<size_t>(n_chunks), 0.0);
    for (int c = 0; c < n_chunks; ++c) {
      const int t = step_of[static_cast<size_t>(k * n_chunks + c)];
      if (t < 0) continue;
      acts[static_cast<size_t>(c)] = buf.actions[static_cast<size_t>(t)];
      lp_old[static_cast<size_t>(c)] = buf.logp_old[static_cast<size_t>(t)];
      advs[static_cast<size_t>(c)] = adv_of(t);
      rets[static_cast<size_t>(c)] = buf.ret[static_cast<size_t>(t)];
      mask[static_cast<size_t>(c)] = 1.0;
    }
    Var mask_v = g.constant(Shape{n_chunks}, mask);
    Var adv_v = g.constant(Shape{n_chunks}, advs);

    Var lp = g.gather_rows(g.log_softmax_rows(step.logits), acts);
    Var ratio = g.exp(g.sub(lp, g.constant(Shape{n_chunks}, lp_old)));
    Var unclipped = g.mul(ratio, adv_v);
    Var clipped = g.mul(g.clamp(ratio, 1.0 - hp.clip_epsilon, 1.0 + hp.clip_epsilon), adv_v);
    Var surr_k = g.sum_all(g.mul(g.min(unclipped, clipped), mask_v));

    Var verr = g.sub(step.value, g.constant(Shape{n_chunks}, rets));
    Var vloss_k = g.sum_all(g.mul(g.square(verr), mask_v));

    Var probs = g.softmax_rows(step.logits);
    Var plogp = g.sum_rows(g.mul(probs, g.log_softmax_rows(step.logits)));
    Var ent_k = g.mul_scalar(g.sum_all(g.mul(plogp, mask_v)), -1.0);

    Var ratio_k = g.sum_all(g.mul(ratio, mask_v));
    for (int c = 0; c < n_chunks; ++c)
      if (mask[static_cast<size_t>(c)] > 0.0)
        max_ratio_dev = std::max(max_ratio_dev, std::abs(g.val(ratio)[static_cast<size_t>(c)] - 1.0));
    if (first) {
      surr_sum = surr_k;
      vloss_sum = vloss_k;
      ent_sum = ent_k;
      ratio_sum = ratio_k;
      first = false;
    } else {
      surr_sum = g.add(surr_sum, surr_k);
      vloss_sum = g.add(vloss_sum, vloss_k);
      ent_sum = g.add(ent_sum, ent_k);
      ratio_sum = g.add(ratio_sum, ratio_k);
    }
  }

  Var surrogate = g.mul_scalar(surr_sum, inv_valid);
  Var vloss = g.mul_scalar(vloss_sum, inv_valid);
  Var entropy = g.mul_scalar(ent_sum, inv_valid);
  Var loss = g.add(g.mul_scalar(surrogate, -1.0),
                   g.sub(g.mul_scalar(vloss, hp.value_coef),
                         g.mul_scalar(entropy, hp.entropy_coef)));

  LossParts parts;
  parts.surrogate = g.scalar(surrogate);
  parts.policy = -parts.surrogate;
  parts.value = g.scalar(vloss);
  parts.entropy = g.scalar(entropy);
  parts.mean_ratio = g.scalar(ratio_sum) * inv_valid;
  parts.max_ratio_dev = max_ratio_dev;
  parts.total = g.scalar(loss);
  if (loss_var) *loss_var = loss;
  return parts;
}

int opponent_act(const arena::GameState& state, int player, const OpponentSpec& spec, Rng& rng,
                 const arena::ActionTable& table) {
  switch (spec.kind) {
    case OpponentSpec::Kind::scripted:
      return arena::scripted_opponent(state, player, spec.skill, rng, table);
    case OpponentSpec::Kind::mcts:
      if (!arena::can_act(state, player)) return arena::kNoAction;
      return arena::mcts_opponent(state, player, spec.budget, rng, table);
    case OpponentSpec::Kind::random:
      return arena::random_legal_action(state, player, rng, table);
    case OpponentSpec::Kind::none:
      return arena::kNoAction;
  }
  return arena::kNoAction;
}

namespace {
int sample_action(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

int argmax_action(const std::vector<double>& probs) {
  int best = 0;
  for (size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[static_cast<size_t>(best)]) best = static_cast<int>(i);
  return best;
}
}  // namespace

RolloutResult collect_rollout(PolicyNet& net, const arena::ActionTable& table,
                              const arena::SoundDesign& design, const OpponentSpec& opponent,
                              const Hyperparams& hp, uint64_t seed, int frame_limit,
                              bool greedy) {
  const bool mel = net.encoder.kind() == encoders::EncoderKind::melspec;
  arena::GameState state = arena::reset(seed, frame_limit);
  Rng act_rng(derive_seed(seed, kAgentStream));
  Rng opp_rng(derive_seed(seed, kOpponentStream));
  arena::Mixer mixer(&design, arena::kStageWidth);
  encoders::AudioRingBuffer ring;
  ring.reset();
  dsp::AudioFrame last_frame = dsp::AudioFrame::silence();

  RolloutResult out;
  RolloutBuffer& buf = out.buffer;
  std::vector<double> hidden = net.initial_hidden();
  std::vector<arena::SoundEvent> events;

  Graph g;
  const int horizon = std::min(hp.rollout_horizon, frame_limit);
  for (int t = 0; t < horizon && !state.over; ++t) {
    Tensor obs = mel ? net.encoder.preprocess(ring) : net.encoder.preprocess(last_frame);

    g.clear();
    auto heads = net.register_heads(g);
    Shape batched = obs.shape;
    batched.insert(batched.begin(), 1);
    Var x = g.reshape(g.constant(obs), batched);
    Var feat = net.encoder.apply(g, x);
    Var h0 = g.constant(Shape{1, net.gru_hidden}, hidden);
    auto step_vars = net.head_step(g, heads, feat, h0);
    Var lp_all = g.log_softmax_rows(step_vars.logits);

    std::vector<double> probs = nn::softmax(g.tensor(step_vars.logits)).data;
    const int action = greedy ? argmax_action(probs) : sample_action(probs, act_rng);
    const double logp = g.val(lp_all)[static_cast<size_t>(action)];
    const double value = g.val(step_vars.value)[0];

    const int opp_action = opponent_act(state, 1, opponent, opp_rng, table);

    events.clear();
    const auto rewards = arena::step(state, action, opp_action, table, &events);
    last_frame = mixer.render(events, state.players[0].x, t);
    if (mel) ring.push(last_frame);

    buf.obs.push_back(std::move(obs));
    buf.actions.push_back(action);
    buf.rewards.push_back(rewards.r1);
    buf.logp_old.push_back(logp);
    buf.values.push_back(value);
    buf.done.push_back(state.over ? 1 : 0);
    buf.hidden.push_back(hidden);
    hidden = g.val(step_vars.hidden);
  }

  if (!state.over) {
    // horizon cut the round short: bootstrap from the value of the next state
    Tensor obs = mel ? net.encoder.preprocess(ring) : net.encoder.preprocess(last_frame);
    g.clear();
    auto heads = net.register_heads(g);
    Shape batched = obs.shape;
    batched.insert(batched.begin(), 1);
    Var x = g.reshape(g.constant(obs), batched);
    Var feat = net.encoder.apply(g, x);
    Var h0 = g.constant(Shape{1, net.gru_hidden}, hidden);
    auto step_vars = net.head_step(g, heads, feat, h0);
    buf.v_last = g.val(step_vars.value)[0];
  } else {
    buf.v_last = 0.0;
  }

  out.result = arena::result_of(state);
  return out;
}

void write_train_log(const std::string& path, const std::vector<RoundLog>& log) {
  std::ofstream f(path);
  if (!f) throw ConfigError("train: cannot write " + path);
  f << "round,steps,reward_sum,win,policy_loss,value_loss,entropy\n";
  f.precision(10);
  for (const auto& r : log)
    f << r.round << "," << r.steps << "," << r.reward_sum << "," << r.win << "," << r.policy_loss
      << "," << r.value_loss << "," << r.entropy << "\n";
}

TrainResult train(const TrainConfig& cfg) {
  cfg.hp.validate();
  std::filesystem::create_directories(cfg.out_dir);
  const arena::ActionTable table = arena::ActionTable::defaults();
  const arena::SoundDesign design = arena::SoundDesign::by_name(cfg.design);

  TrainResult result{PolicyNet(cfg.encoder, cfg.hp.gru_hidden), {}, "", ""};
  PolicyNet& net = result.net;
  Rng init_rng(derive_seed(cfg.seed, kInitStream));
  net.init(init_rng);

  nn::AdamState adam;
  adam.step_size = cfg.hp.step_size;
  auto params = net.param_ptrs();
  const auto store = net.named_params();

  nn::CheckpointInfo info;
  info.seed = cfg.seed;
  info.encoder = encoders::encoder_kind_name(net.encoder.kind());

  auto ckpt_base = [&](int round) {
    return cfg.out_dir + "/ckpt-" + std::to_string(round);
  };
  info.round = 0;
  nn::save_checkpoint(ckpt_base(0), store, info);
  result.final_checkpoint = ckpt_base(0);

  for (int round = 1; round <= cfg.hp.training_rounds; ++round) {
    const uint64_t round_seed = derive_seed(cfg.seed, kRoundStream + static_cast<uint64_t>(round));
    auto rollout = collect_rollout(net, table, design, cfg.opponent, cfg.hp, round_seed,
                                   cfg.frame_limit, /*greedy=*/false);
    RolloutBuffer& buf = rollout.buffer;
    const double raw_reward_sum = buf.reward_sum();
    // optimize on scaled rewards; the log keeps the raw sum
    for (auto& r : buf.rewards) r *= cfg.hp.reward_scale;
    compute_gae(buf, buf.v_last, cfg.hp);

    std::vector<int> starts;
    for (int t = 0; t < static_cast<int>(buf.size()); t += cfg.hp.bptt_chunk) starts.push_back(t);

    Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream + static_cast<uint64_t>(round)));
    double pl = 0.0, vl = 0.0, ent = 0.0;
    int updates = 0;
    for (int epoch = 0; epoch < cfg.hp.surrogate_epochs; ++epoch) {
      shuffle_rng.shuffle(starts);
      for (size_t at = 0; at < starts.size(); at += static_cast<size_t>(cfg.hp.minibatch)) {
        ChunkBatch batch;
        batch.buffer = &buf;
        batch.chunk_len = cfg.hp.bptt_chunk;
        const size_t end = std::min(starts.size(), at + static_cast<size_t>(cfg.hp.minibatch));
        batch.chunk_starts.assign(starts.begin() + static_cast<std::ptrdiff_t>(at),
                                  starts.begin() + static_cast<std::ptrdiff_t>(end));
        Graph g;
        Var loss;
        const LossParts parts = ppo_loss(net, batch, cfg.hp, g, &loss);
        if (!std::isfinite(parts.total)) {
          info.round = round;
          nn::save_checkpoint(cfg.out_dir + "/ckpt-diagnostic", store, info);
          write_train_log(cfg.out_dir + "/train_log.csv", result.log);
          throw std::runtime_error("train: non-finite loss at round " + std::to_string(round) +
                                   "; diagnostic checkpoint written");
        }
        g.backward(loss);
        nn::clip_grad_norm(params, cfg.hp.grad_clip);
        nn::adam_step(params, adam);
        pl += parts.policy;
        vl += parts.value;
        ent += parts.entropy;
        ++updates;
      }
    }

    RoundLog rl;
    rl.round = round;
    rl.steps = static_cast<int>(buf.size());
    rl.reward_sum = raw_reward_sum;
    rl.win = rollout.result.winner == arena::Winner::p1 ? 1 : 0;
    if (updates > 0) {
      rl.policy_loss = pl / updates;
      rl.value_loss = vl / updates;
      rl.entropy = ent / updates;
    }
    result.log.push_back(rl);

    if (cfg.hp.checkpoint_every > 0 && round % cfg.hp.checkpoint_every == 0) {
      info.round = round;
      nn::save_checkpoint(ckpt_base(round), store, info);
      result.final_checkpoint = ckpt_base(round);
    }
  }

  info.round = cfg.hp.training_rounds;
  nn::save_checkpoint(ckpt_base(cfg.hp.training_rounds), store, info);
  result.final_checkpoint = ckpt_base(cfg.hp.training_rounds);
  result.log_path = cfg.out_dir + "/train_log.csv";
  write_train_log(result.log_path, result.log);
  return result;
}

}  // namespace echofight::ppo
