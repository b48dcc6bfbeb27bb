#pragma once

#include <optional>
#include <string>
#include <vector>

#include "echofight/arena.hpp"
#include "echofight/encoders.hpp"
#include "echofight/layers.hpp"
#include "echofight/opponents.hpp"

namespace echofight::ppo {

// Defaults follow the published PPO table: Adam 3e-4, 10 surrogate epochs,
// minibatch 64, gamma 0.99, lambda 0.95, GRU 512. The clip epsilon and the
// value/entropy coefficients are not in that table; 0.2 / 0.5 / 0.01 are the
// standard PPO settings and are flagged as such in the config docs.
struct Hyperparams {
  double step_size = 3e-4;
  int surrogate_epochs = 10;
  int minibatch = 64;  // counted in BPTT chunks
  double gamma = 0.99;
  double lambda = 0.95;
  int gru_hidden = 512;
  double clip_epsilon = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int rollout_horizon = 3600;
  int training_rounds = 900;
  int bptt_chunk = 16;
  double grad_clip = 0.5;
  bool normalize_advantages = true;
  // Optimization-side reward scaling: HP deltas are O(10..400) while the
  // clipped surrogate works on normalized advantages, so unscaled returns
  // let the value regression monopolize the shared trunk and the gradient
  // clip. Logs, invariants and reports always use raw rewards.
  double reward_scale = 0.01;
  int checkpoint_every = 50;

  void validate() const;  // throws ConfigError on out-of-range values
};

// Encoder -> GRU -> 256 -> 256 -> 40-way softmax, with a scalar value head
// sharing the GRU trunk.
struct PolicyNet {
  encoders::Encoder encoder;
  nn::LayerSpec gru;
  nn::LayerSpec fc1, fc2, head, value;
  int gru_hidden = 512;

  PolicyNet(const encoders::EncoderConfig& ecfg, int gru_hidden_units);
  void init(Rng& rng);
  nn::ParamStore named_params();
  std::vector<nn::Tensor*> param_ptrs();
  std::vector<double> initial_hidden() const { return std::vector<double>(gru_hidden, 0.0); }

  // Registered parameter handles for one graph.
  struct Heads {
    nn::GruVars gru;
    nn::Var fc1w, fc1b, fc2w, fc2b, hw, hb, vw, vb;
  };
  Heads register_heads(nn::Graph& g);
  // feature [B, flat] + hidden [B, H] -> (logits [B,40], value [B], h' [B,H])
  struct StepVars {
    nn::Var logits, value, hidden;
  };
  StepVars head_step(nn::Graph& g, const Heads& h, nn::Var feature, nn::Var hidden);
};

// One full forward step from an already-encoded feature (Fig. 2 from the
// feature onward). The feature kind must match the net's encoder.
struct PolicyStep {
  nn::Tensor probs;  // [40]
  double value = 0.0;
  nn::Tensor hidden;  // [H]
};
PolicyStep policy_forward(PolicyNet& net, const encoders::AudioFeature& feature,
                          const nn::Tensor& hidden);

// Trajectory store for one collected round.
struct RolloutBuffer {
  std::vector<nn::Tensor> obs;  // preprocessed encoder inputs per step
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> logp_old;
  std::vector<double> values;
  std::vector<uint8_t> done;
  std::vector<std::vector<double>> hidden;  // GRU state before each step
  double v_last = 0.0;                      // V after the final step, 0 if terminal
  std::vector<double> adv, ret;             // filled by compute_gae

  size_t size() const { return actions.size(); }
  double reward_sum() const;
};

// Backward-recursive GAE with episode boundaries cutting both the bootstrap
// and the propagation. ret[t] = adv[t] + values[t].
void compute_gae(RolloutBuffer& buffer, double v_last, const Hyperparams& hp);

// A minibatch: fixed-length chunk windows into one buffer (ragged tails are
// mask-padded).
struct ChunkBatch {
  const RolloutBuffer* buffer = nullptr;
  std::vector<int> chunk_starts;
  int chunk_len = 16;
};

struct LossParts {
  double total = 0.0;
  double policy = 0.0;   // -surrogate
  double value = 0.0;    // mean squared value error (unscaled)
  double entropy = 0.0;  // mean policy entropy
  double mean_ratio = 0.0;
  double max_ratio_dev = 0.0;  // max |rho - 1| over the minibatch
  double surrogate = 0.0;      // mean clipped surrogate, over the advantages used
};

// Builds the clipped-surrogate loss on g:
//   loss = -mean(min(rho A, clip(rho) A)) + value_coef * mean((V - R)^2)
//          - entropy_coef * mean(entropy)
// Advantages are normalized per minibatch when hp.normalize_advantages.
// loss_var (when given) receives the graph node to run backward() on.
LossParts ppo_loss(PolicyNet& net, const ChunkBatch& batch, const Hyperparams& hp, nn::Graph& g,
                   nn::Var* loss_var = nullptr);

struct OpponentSpec {
  enum class Kind { scripted, mcts, random, none };
  Kind kind = Kind::scripted;
  double skill = 0.5;
  int budget = 2000;
};
int opponent_act(const arena::GameState& state, int player, const OpponentSpec& spec, Rng& rng,
                 const arena::ActionTable& table);

struct RolloutResult {
  RolloutBuffer buffer;
  arena::RoundResult result;
};

// Plays one round with the agent as player 1, observing only rendered audio.
// Actions are sampled from the policy (or argmax when greedy).
RolloutResult collect_rollout(PolicyNet& net, const arena::ActionTable& table,
                              const arena::SoundDesign& design, const OpponentSpec& opponent,
                              const Hyperparams& hp, uint64_t seed, int frame_limit,
                              bool greedy = false);

struct TrainConfig {
  encoders::EncoderConfig encoder;
  Hyperparams hp;
  std::string design = "informative";
  OpponentSpec opponent;
  uint64_t seed = 1;
  int frame_limit = arena::kDefaultFrameLimit;
  std::string out_dir = ".";
  bool quiet = true;
};

struct RoundLog {
  int round = 0;
  int steps = 0;
  double reward_sum = 0.0;
  int win = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  PolicyNet net;
  std::vector<RoundLog> log;
  std::string final_checkpoint;  // base path (no extension)
  std::string log_path;
};

// Full training run: per round, collect one rollout, compute GAE, then
// surrogate_epochs passes of minibatched updates with gradient-norm clipping.
// Writes ckpt-0, a checkpoint every checkpoint_every rounds, the final
// checkpoint, and a CSV log. Deterministic in (config, seed). A non-finite
// loss saves a diagnostic checkpoint and aborts.
TrainResult train(const TrainConfig& cfg);

void write_train_log(const std::string& path, const std::vector<RoundLog>& log);

}  // namespace echofight::ppo
