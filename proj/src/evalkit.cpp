#include "echofight/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "echofight/errors.hpp"

namespace echofight::evalkit {

using arena::GameState;
using arena::SoundDesign;
using arena::Winner;
using ppo::PolicyNet;

void EvalReport::recompute() {
  int wins = 0;
  double hp_sum = 0.0;
  for (const auto& r : rounds) {
    wins += r.winner == Winner::p1;
    hp_sum += static_cast<double>(r.hp_self - r.hp_opp);
  }
  const double n = rounds.empty() ? 1.0 : static_cast<double>(rounds.size());
  win_ratio = static_cast<double>(wins) / n;
  avg_hp_diff = hp_sum / n;
}

bool operator==(const RoundRecord& a, const RoundRecord& b) {
  return a.round == b.round && a.winner == b.winner && a.hp_self == b.hp_self &&
         a.hp_opp == b.hp_opp && a.frames == b.frames;
}

bool operator==(const EvalReport& a, const EvalReport& b) {
  return a.design == b.design && a.encoder == b.encoder && a.trials == b.trials &&
         a.win_ratio == b.win_ratio && a.avg_hp_diff == b.avg_hp_diff && a.rounds == b.rounds;
}

namespace {
constexpr uint64_t kEvalStream = 0x51;

RoundRecord run_one_round(PolicyNet& net, const arena::ActionTable& table,
                          const SoundDesign& design, const ppo::OpponentSpec& opp,
                          const RunConfig& cfg, uint64_t round_seed, int round_index) {
  const auto ro = ppo::collect_rollout(net, table, design, opp, cfg.hp, round_seed,
                                       cfg.frame_limit, cfg.eval_greedy);
  RoundRecord rec;
  rec.round = round_index;
  rec.winner = ro.result.winner;
  rec.hp_self = ro.result.hp_self_end;
  rec.hp_opp = ro.result.hp_opp_end;
  rec.frames = ro.result.frames_played;
  return rec;
}
}  // namespace

EvalReport evaluate(PolicyNet& net, const SoundDesign& design, const ppo::OpponentSpec& opponent,
                    int rounds, uint64_t seed, const RunConfig& cfg) {
  if (rounds < 1) throw std::invalid_argument("evaluate: rounds must be >= 1");
  EvalReport report;
  report.design = design.name();
  report.encoder = net.encoder.kind();
  report.rounds.resize(static_cast<size_t>(rounds));

  const int workers = std::max(1, std::min(cfg.eval_workers, rounds));
  if (workers == 1) {
    for (int r = 0; r < rounds; ++r) {
      const uint64_t rs = derive_seed(seed, kEvalStream + static_cast<uint64_t>(r));
      report.rounds[static_cast<size_t>(r)] = run_one_round(net, cfg.action_table(), design,
                                                            opponent, cfg, rs, r);
    }
  } else {
    // independent model replicas per worker; rounds strided by worker id and
    // written into their slots, so the merged order is round order
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        PolicyNet replica = net;
        const arena::ActionTable table = cfg.action_table();
        for (int r = w; r < rounds; r += workers) {
          const uint64_t rs = derive_seed(seed, kEvalStream + static_cast<uint64_t>(r));
          report.rounds[static_cast<size_t>(r)] =
              run_one_round(replica, table, design, opponent, cfg, rs, r);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  report.recompute();
  return report;
}

namespace {
// One agent side of a two-agent (self-play) round.
struct AgentSide {
  encoders::AudioRingBuffer ring;
  dsp::AudioFrame last_frame;
  std::vector<double> hidden;
  arena::Mixer mixer;

  AgentSide(const SoundDesign* design, int hidden_size)
      : last_frame(dsp::AudioFrame::silence()), hidden(static_cast<size_t>(hidden_size), 0.0),
        mixer(design, arena::kStageWidth) {
    ring.reset();
  }
};

int greedy_action(PolicyNet& net, AgentSide& side) {
  const bool mel = net.encoder.kind() == encoders::EncoderKind::melspec;
  nn::Tensor obs = mel ? net.encoder.preprocess(side.ring) : net.encoder.preprocess(side.last_frame);
  nn::Graph g;
  auto heads = net.register_heads(g);
  nn::Shape batched = obs.shape;
  batched.insert(batched.begin(), 1);
  nn::Var x = g.reshape(g.constant(obs), batched);
  nn::Var feat = net.encoder.apply(g, x);
  nn::Var h0 = g.constant(nn::Shape{1, net.gru_hidden}, side.hidden);
  auto sv = net.head_step(g, heads, feat, h0);
  side.hidden = g.val(sv.hidden);
  const auto& logits = g.val(sv.logits);
  int best = 0;
  for (size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[static_cast<size_t>(best)]) best = static_cast<int>(i);
  return best;
}
}  // namespace

EvalReport evaluate_mirror_selfplay(PolicyNet& net, const SoundDesign& design, int round_pairs,
                                    uint64_t seed, const RunConfig& cfg) {
  const arena::ActionTable table = cfg.action_table();
  EvalReport report;
  report.design = design.name();
  report.encoder = net.encoder.kind();

  const bool mel = net.encoder.kind() == encoders::EncoderKind::melspec;
  for (int pair = 0; pair < round_pairs; ++pair) {
    const uint64_t rs = derive_seed(seed, 0x61 + static_cast<uint64_t>(pair));
    for (int swapped = 0; swapped < 2; ++swapped) {
      GameState state = swapped ? arena::reset_swapped(rs, cfg.frame_limit)
                                : arena::reset(rs, cfg.frame_limit);
      AgentSide sides[2] = {AgentSide(&design, net.gru_hidden),
                            AgentSide(&design, net.gru_hidden)};
      std::vector<arena::SoundEvent> events;
      while (!state.over) {
        const int a1 = greedy_action(net, sides[0]);
        const int a2 = greedy_action(net, sides[1]);
        events.clear();
        arena::step(state, a1, a2, table, &events);
        for (int i = 0; i < 2; ++i) {
          sides[i].last_frame = sides[i].mixer.render(events, state.players[i].x, state.frame);
          if (mel) sides[i].ring.push(sides[i].last_frame);
        }
      }
      const auto res = arena::result_of(state);
      RoundRecord rec;
      rec.round = pair * 2 + swapped;
      rec.winner = res.winner;
      rec.hp_self = res.hp_self_end;
      rec.hp_opp = res.hp_opp_end;
      rec.frames = res.frames_played;
      report.rounds.push_back(rec);
    }
  }
  report.recompute();
  return report;
}

void write_report(const std::string& path, const EvalReport& report) {
  std::ofstream f(path);
  if (!f) throw ConfigError("report: cannot write " + path);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g", report.win_ratio, report.avg_hp_diff);
  f << "design,encoder,trials,win_ratio,avg_hp_diff\n";
  f << report.design << "," << encoders::encoder_kind_name(report.encoder) << ","
    << report.trials << "," << buf << "\n";
  f << "round,winner,hp_self,hp_opp,frames\n";
  for (const auto& r : report.rounds)
    f << r.round << "," << arena::winner_name(r.winner) << "," << r.hp_self << "," << r.hp_opp
      << "," << r.frames << "\n";
}

EvalReport read_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("report: cannot open " + path);
  std::string line;
  std::getline(f, line);
  if (line != "design,encoder,trials,win_ratio,avg_hp_diff")
    throw ConfigError("report: bad summary header in " + path);
  EvalReport report;
  std::getline(f, line);
  {
    std::istringstream ss(line);
    std::string design, enc, trials, wr, hp;
    std::getline(ss, design, ',');
    std::getline(ss, enc, ',');
    std::getline(ss, trials, ',');
    std::getline(ss, wr, ',');
    std::getline(ss, hp, ',');
    report.design = design;
    report.encoder = encoders::encoder_kind_from(enc);
    report.trials = std::stoi(trials);
    report.win_ratio = std::stod(wr);
    report.avg_hp_diff = std::stod(hp);
  }
  std::getline(f, line);
  if (line != "round,winner,hp_self,hp_opp,frames")
    throw ConfigError("report: bad detail header in " + path);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string round, winner, hps, hpo, frames;
    std::getline(ss, round, ',');
    std::getline(ss, winner, ',');
    std::getline(ss, hps, ',');
    std::getline(ss, hpo, ',');
    std::getline(ss, frames, ',');
    RoundRecord rec;
    rec.round = std::stoi(round);
    rec.winner = winner == "p1" ? Winner::p1 : winner == "p2" ? Winner::p2 : Winner::draw;
    rec.hp_self = std::stoi(hps);
    rec.hp_opp = std::stoi(hpo);
    rec.frames = std::stoi(frames);
    report.rounds.push_back(rec);
  }
  return report;
}

CompareTable compare_designs(const RunConfig& cfg, const std::vector<std::string>& designs,
                             const std::vector<encoders::EncoderKind>& encoder_kinds,
                             int trials, uint64_t seed, const std::string& out_dir,
                             double budget_seconds) {
  if (designs.size() * encoder_kinds.size() < 2)
    throw std::invalid_argument("compare_designs: need at least two (design, encoder) combos");
  std::filesystem::create_directories(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  auto out_of_budget = [&] {
    if (budget_seconds <= 0.0) return false;
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sec > budget_seconds;
  };

  CompareTable table;
  uint64_t combo_tag = 0;
  for (const auto& dname : designs) {
    for (const auto ekind : encoder_kinds) {
      ++combo_tag;
      double wr_sum = 0.0, hp_sum = 0.0;
      int done = 0;
      for (int trial = 1; trial <= trials; ++trial) {
        if (out_of_budget()) {
          table.complete = false;
          break;
        }
        ppo::TrainConfig tc;
        tc.encoder = cfg.encoder;
        tc.encoder.kind = ekind;
        tc.hp = cfg.hp;
        tc.design = dname;
        tc.opponent = cfg.opponent;
        tc.frame_limit = cfg.frame_limit;
        tc.seed = derive_seed(seed, combo_tag * 1000 + static_cast<uint64_t>(trial));
        tc.out_dir = out_dir + "/" + dname + "-" + encoders::encoder_kind_name(ekind) + "-t" +
                     std::to_string(trial);
        auto trained = ppo::train(tc);

        const SoundDesign design = SoundDesign::by_name(dname);
        const auto report = evaluate(trained.net, design, cfg.opponent, cfg.eval_rounds,
                                     derive_seed(tc.seed, 0x71), cfg);
        CompareRow row;
        row.design = dname;
        row.encoder = ekind;
        row.trial = trial;
        row.win_ratio = report.win_ratio;
        row.avg_hp_diff = report.avg_hp_diff;
        table.rows.push_back(row);
        wr_sum += row.win_ratio;
        hp_sum += row.avg_hp_diff;
        ++done;
      }
      if (done > 0) {
        CompareRow mean;
        mean.design = dname;
        mean.encoder = ekind;
        mean.trial = 0;
        mean.win_ratio = wr_sum / done;
        mean.avg_hp_diff = hp_sum / done;
        table.rows.push_back(mean);
      }
    }
  }
  return table;
}

void write_compare_csv(const std::string& path, const CompareTable& table) {
  std::ofstream f(path);
  if (!f) throw ConfigError("compare: cannot write " + path);
  f << "design,encoder,trial,win_ratio,avg_hp_diff\n";
  char buf[128];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", r.win_ratio, r.avg_hp_diff);
    f << r.design << "," << encoders::encoder_kind_name(r.encoder) << ","
      << (r.trial == 0 ? std::string("mean") : std::to_string(r.trial)) << "," << buf << "\n";
  }
  if (!table.complete) f << "# incomplete: budget exhausted\n";
}

std::string format_compare_table(const CompareTable& table) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %-10s %-6s %10s %12s\n", "design", "encoder", "trial",
                "win_ratio", "avgHP_diff");
  out << line;
  for (const auto& r : table.rows) {
    std::snprintf(line, sizeof line, "%-14s %-10s %-6s %10.4f %12.2f\n", r.design.c_str(),
                  encoders::encoder_kind_name(r.encoder),
                  r.trial == 0 ? "mean" : std::to_string(r.trial).c_str(), r.win_ratio,
                  r.avg_hp_diff);
    out << line;
  }
  if (!table.complete) out << "(incomplete: budget exhausted)\n";
  return out.str();
}

void inspect_audio(const arena::Replay& replay, const SoundDesign& design,
                   const arena::ActionTable& table, int from_frame, int to_frame,
                   const std::string& out_path) {
  if (from_frame < 0 || to_frame <= from_frame)
    throw std::invalid_argument("inspect_audio: bad frame range");

  GameState state = arena::reset(replay.seed, replay.frame_limit);
  arena::Mixer mixer(&design, arena::kStageWidth);
  std::vector<arena::SoundEvent> events;
  std::vector<double> mono;
  mono.reserve(static_cast<size_t>(to_frame - from_frame) * dsp::kSamplesPerFrame);
  for (const auto& rec : replay.records) {
    if (state.over || rec.frame >= to_frame) break;
    events.clear();
    arena::step(state, rec.a1, rec.a2, table, &events);
    const auto frame = mixer.render(events, state.players[0].x, rec.frame);
    if (rec.frame >= from_frame) {
      for (int i = 0; i < dsp::kSamplesPerFrame; ++i)
        mono.push_back(0.5 * (frame.left[static_cast<size_t>(i)] + frame.right[static_cast<size_t>(i)]));
    }
  }
  const int window = 1200, hop = 480;
  if (static_cast<int>(mono.size()) < window)
    throw std::invalid_argument("inspect_audio: segment shorter than one STFT window");
  const auto bank = dsp::build_mel_filterbank(80, 2048, dsp::kSampleRate);
  const auto spec = dsp::stft_mel(mono, bank, window, hop);

  std::ofstream f(out_path);
  if (!f) throw ConfigError("inspect_audio: cannot write " + out_path);
  f << "melspec-v1 " << spec.n_mels << " " << spec.n_cols << " " << hop << " " << window << "\n";
  f.precision(10);
  for (int m = 0; m < spec.n_mels; ++m) {
    for (int t = 0; t < spec.n_cols; ++t) {
      if (t) f << ",";
      f << spec.at(m, t);
    }
    f << "\n";
  }
}

bool verify_replay(const arena::Replay& replay, const arena::ActionTable& table) {
  GameState state = arena::reset(replay.seed, replay.frame_limit);
  for (const auto& rec : replay.records) {
    if (state.over) return false;
    arena::step(state, rec.a1, rec.a2, table);
    if (state.players[0].hp != rec.hp1 || state.players[1].hp != rec.hp2) return false;
  }
  return true;
}

}  // namespace echofight::evalkit
