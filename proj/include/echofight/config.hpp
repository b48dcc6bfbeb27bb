#pragma once

#include <string>

#include "echofight/encoders.hpp"
#include "echofight/ppo.hpp"

namespace echofight::evalkit {

// Full run configuration. Every key has a default; unknown sections or keys
// in a config file are hard errors.
struct RunConfig {
  encoders::EncoderConfig encoder;
  ppo::Hyperparams hp;
  int frame_limit = arena::kDefaultFrameLimit;
  std::string actions_file;  // empty = built-in table
  std::string design = "informative";
  ppo::OpponentSpec opponent;
  int eval_rounds = 90;
  bool eval_greedy = true;
  int eval_workers = 1;
  int trials = 3;

  arena::ActionTable action_table() const;
};

// INI-style text: [section] headers, "key = value" lines, '#' comments.
RunConfig parse_config_text(const std::string& text, const std::string& where = "<config>");
RunConfig load_config(const std::string& path);

// CI-scale profile: short rounds, small GRU, few epochs.
void apply_smoke_profile(RunConfig& cfg);
// Full protocol: 900 training rounds, 90 evaluation rounds, MCTS opponent.
void apply_paper_profile(RunConfig& cfg);

}  // namespace echofight::evalkit
