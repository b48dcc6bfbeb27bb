#pragma once

#include <string>
#include <vector>

#include "echofight/config.hpp"
#include "echofight/ppo.hpp"

namespace echofight::evalkit {

struct RoundRecord {
  int round = 0;
  arena::Winner winner = arena::Winner::draw;
  int hp_self = 0;
  int hp_opp = 0;
  int frames = 0;
};

// The two competition metrics over a batch of rounds, with per-round detail.
// win_ratio = wins / total rounds (draws are non-wins);
// avg_hp_diff = mean over rounds of (hp_self - hp_opp) at round end.
struct EvalReport {
  std::string design;
  encoders::EncoderKind encoder = encoders::EncoderKind::melspec;
  int trials = 1;
  double win_ratio = 0.0;
  double avg_hp_diff = 0.0;
  std::vector<RoundRecord> rounds;

  void recompute();  // fills win_ratio / avg_hp_diff from the records
};

bool operator==(const RoundRecord& a, const RoundRecord& b);
bool operator==(const EvalReport& a, const EvalReport& b);

// Plays `rounds` independent rounds (per-round seeds derived from seed by
// round index) of net-as-player-1 against the configured opponent.
// Deterministic given (net, seed); rounds can run on eval_workers threads,
// results are merged in round order.
EvalReport evaluate(ppo::PolicyNet& net, const arena::SoundDesign& design,
                    const ppo::OpponentSpec& opponent, int rounds, uint64_t seed,
                    const RunConfig& cfg);

// Symmetry harness: the same deterministic (greedy) net drives both players,
// each observing its own audio. Rounds come in seed-paired position-mirrored
// pairs, so the report's avg_hp_diff is exactly zero.
EvalReport evaluate_mirror_selfplay(ppo::PolicyNet& net, const arena::SoundDesign& design,
                                    int round_pairs, uint64_t seed, const RunConfig& cfg);

// Report files: a summary line and per-round detail, parse(emit(r)) == r.
void write_report(const std::string& path, const EvalReport& report);
EvalReport read_report(const std::string& path);

struct CompareRow {
  std::string design;
  encoders::EncoderKind encoder = encoders::EncoderKind::melspec;
  int trial = 0;  // 1-based; 0 marks the per-combination mean row
  double win_ratio = 0.0;
  double avg_hp_diff = 0.0;
};

struct CompareTable {
  std::vector<CompareRow> rows;
  bool complete = true;
};

// Runs trials x (train + evaluate) for every (design, encoder) combination.
// budget_seconds > 0 stops starting new trials once exceeded and flags the
// table incomplete. Trial seeds derive from cfg seed, design and encoder so
// identical configurations reproduce identical rows.
CompareTable compare_designs(const RunConfig& cfg,
                             const std::vector<std::string>& designs,
                             const std::vector<encoders::EncoderKind>& encoder_kinds,
                             int trials, uint64_t seed, const std::string& out_dir,
                             double budget_seconds = 0.0);

void write_compare_csv(const std::string& path, const CompareTable& table);
std::string format_compare_table(const CompareTable& table);

// Mel-spectrogram dump of a replay segment (frames [from, to) heard by
// player 1, channels averaged): header "melspec-v1 80 <T> <hop> <window>",
// then an 80 x T CSV matrix.
void inspect_audio(const arena::Replay& replay, const arena::SoundDesign& design,
                   const arena::ActionTable& table, int from_frame, int to_frame,
                   const std::string& out_path);

// Re-runs a replay and verifies the logged HP trajectory frame by frame.
bool verify_replay(const arena::Replay& replay, const arena::ActionTable& table);

}  // namespace echofight::evalkit
