#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "echofight/cli.hpp"
#include "echofight/errors.hpp"
#include "echofight/evalkit.hpp"

using namespace echofight;
using namespace echofight::evalkit;

namespace {
RunConfig tiny_cfg() {
  RunConfig cfg;
  cfg.encoder.kind = encoders::EncoderKind::onedcnn;
  cfg.encoder.cnn1_channels = 4;
  cfg.encoder.cnn2_channels = 4;
  cfg.hp.gru_hidden = 8;
  cfg.hp.bptt_chunk = 8;
  cfg.frame_limit = 240;
  cfg.eval_rounds = 5;
  cfg.opponent.kind = ppo::OpponentSpec::Kind::scripted;
  cfg.opponent.skill = 0.5;
  return cfg;
}

ppo::PolicyNet tiny_net(const RunConfig& cfg, uint64_t seed = 7) {
  ppo::PolicyNet net(cfg.encoder, cfg.hp.gru_hidden);
  Rng rng(seed);
  net.init(rng);
  return net;
}

int cli(std::initializer_list<const char*> args) {
  std::vector<const char*> argv{"echofight"};
  argv.insert(argv.end(), args.begin(), args.end());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}
}  // namespace

TEST_CASE("metric arithmetic is exact") {
  EvalReport r;
  r.design = "informative";
  r.encoder = encoders::EncoderKind::melspec;
  // 57 wins of 90
  for (int i = 0; i < 90; ++i) {
    RoundRecord rec;
    rec.round = i;
    rec.winner = i < 57 ? arena::Winner::p1 : arena::Winner::p2;
    rec.hp_self = i < 57 ? 120 : 0;
    rec.hp_opp = i < 57 ? 0 : 95;
    rec.frames = 500;
    r.rounds.push_back(rec);
  }
  r.recompute();
  CHECK(r.win_ratio == 57.0 / 90.0);
  const double want = (57.0 * 120.0 - 33.0 * 95.0) / 90.0;
  CHECK(r.avg_hp_diff == doctest::Approx(want).epsilon(1e-15));

  // all draws with equal HP: both metrics exactly zero
  EvalReport d;
  for (int i = 0; i < 10; ++i) {
    RoundRecord rec;
    rec.round = i;
    rec.winner = arena::Winner::draw;
    rec.hp_self = 200;
    rec.hp_opp = 200;
    d.rounds.push_back(rec);
  }
  d.recompute();
  CHECK(d.win_ratio == 0.0);
  CHECK(d.avg_hp_diff == 0.0);

  // metrics are order-independent: shuffling records changes nothing
  EvalReport shuffled = r;
  Rng rng(5);
  rng.shuffle(shuffled.rounds);
  shuffled.recompute();
  CHECK(shuffled.win_ratio == r.win_ratio);
  CHECK(shuffled.avg_hp_diff == doctest::Approx(r.avg_hp_diff).epsilon(1e-12));
}

TEST_CASE("report files round trip exactly") {
  EvalReport r;
  r.design = "sparse";
  r.encoder = encoders::EncoderKind::fftfcn;
  r.trials = 2;
  for (int i = 0; i < 7; ++i) {
    RoundRecord rec;
    rec.round = i;
    rec.winner = i % 3 == 0 ? arena::Winner::draw : (i % 2 ? arena::Winner::p1 : arena::Winner::p2);
    rec.hp_self = 400 - 13 * i;
    rec.hp_opp = 400 - 29 * i;
    rec.frames = 100 + i;
    r.rounds.push_back(rec);
  }
  r.recompute();
  write_report("report_rt.csv", r);
  const EvalReport back = read_report("report_rt.csv");
  CHECK(back == r);
  std::remove("report_rt.csv");
}

TEST_CASE("config parsing: defaults, overrides, hard errors") {
  const RunConfig d = parse_config_text("");
  CHECK(d.hp.gru_hidden == 512);
  CHECK(d.hp.minibatch == 64);
  CHECK(d.eval_rounds == 90);
  CHECK(d.design == "informative");

  const RunConfig c = parse_config_text(
      "[encoder]\n"
      "kind = melspec\n"
      "conv1.kernel = 3x3\n"
      "conv1.stride = 2x2\n"
      "conv2.stride = 1x3\n"
      "[ppo]\n"
      "gru_hidden = 64\n"
      "gamma = 0.97\n"
      "[arena]\n"
      "frame_limit = 1200\n"
      "[design]\n"
      "name = sparse\n"
      "[opponent]\n"
      "kind = mcts\n"
      "budget = 500\n"
      "[eval]\n"
      "rounds = 12\n"
      "greedy = false\n");
  CHECK(c.encoder.kind == encoders::EncoderKind::melspec);
  CHECK(c.encoder.mel_conv1.kernel_h == 3);
  CHECK(c.encoder.mel_conv2.stride_w == 3);
  CHECK(c.hp.gru_hidden == 64);
  CHECK(c.hp.gamma == 0.97);
  CHECK(c.frame_limit == 1200);
  CHECK(c.design == "sparse");
  CHECK(c.opponent.kind == ppo::OpponentSpec::Kind::mcts);
  CHECK(c.opponent.budget == 500);
  CHECK(c.eval_rounds == 12);
  CHECK(c.eval_greedy == false);

  CHECK_THROWS_AS((void)parse_config_text("[encoder]\nmystery = 1\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("[submarine]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("[ppo]\ngamma = fast\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config_text("gamma = 0.5\n"), ConfigError);
  CHECK_THROWS_AS((void)load_config("missing_config_file.cfg"), ConfigError);
}

TEST_CASE("evaluate: deterministic, worker-count independent, seed-sensitive") {
  const RunConfig cfg = tiny_cfg();
  auto net = tiny_net(cfg);
  const auto design = arena::SoundDesign::by_name(cfg.design);

  const auto a = evaluate(net, design, cfg.opponent, cfg.eval_rounds, 11, cfg);
  const auto b = evaluate(net, design, cfg.opponent, cfg.eval_rounds, 11, cfg);
  CHECK(a == b);

  write_report("eval_a.csv", a);
  write_report("eval_b.csv", b);
  CHECK(slurp("eval_a.csv") == slurp("eval_b.csv"));  // byte-for-byte
  std::remove("eval_a.csv");
  std::remove("eval_b.csv");

  RunConfig threaded = cfg;
  threaded.eval_workers = 3;
  const auto c = evaluate(net, design, cfg.opponent, cfg.eval_rounds, 11, threaded);
  CHECK(c == a);  // merged in round order regardless of workers

  const auto d = evaluate(net, design, cfg.opponent, cfg.eval_rounds, 12, cfg);
  CHECK(d.rounds.size() == a.rounds.size());
}

TEST_CASE("mirror self-play has exactly zero average HP difference") {
  RunConfig cfg = tiny_cfg();
  cfg.frame_limit = 300;
  auto net = tiny_net(cfg, 19);
  const auto design = arena::SoundDesign::by_name("informative");
  const auto report = evaluate_mirror_selfplay(net, design, 3, 21, cfg);
  REQUIRE(report.rounds.size() == 6);
  CHECK(report.avg_hp_diff == 0.0);
  // each pair is an exact label mirror
  for (size_t i = 0; i < report.rounds.size(); i += 2) {
    CHECK(report.rounds[i].hp_self == report.rounds[i + 1].hp_opp);
    CHECK(report.rounds[i].hp_opp == report.rounds[i + 1].hp_self);
    CHECK(report.rounds[i].frames == report.rounds[i + 1].frames);
  }
}

TEST_CASE("cli: exit codes and artifacts") {
  namespace fs = std::filesystem;
  fs::remove_all("cli_tmp");
  fs::create_directories("cli_tmp");
  {
    std::ofstream f("cli_tmp/tiny.cfg");
    f << "[encoder]\nkind = onedcnn\nconv1.channels = 4\nconv2.channels = 4\n"
      << "[ppo]\ngru_hidden = 8\nbptt_chunk = 8\n"
      << "[arena]\nframe_limit = 200\n[eval]\nrounds = 3\n";
  }

  // unknown subcommand and missing config file
  CHECK(cli({"conquer"}) == 2);
  CHECK(cli({"evaluate", "--config", "cli_tmp/nope.cfg", "--untrained"}) == 2);
  CHECK(cli({"evaluate", "--mystery-flag"}) == 2);

  // evaluate an untrained net: writes report.csv
  CHECK(cli({"evaluate", "--config", "cli_tmp/tiny.cfg", "--seed", "7", "--out", "cli_tmp",
             "--untrained"}) == 0);
  CHECK(fs::exists("cli_tmp/report.csv"));
  const auto report = read_report("cli_tmp/report.csv");
  CHECK(report.rounds.size() == 3);

  // evaluate without a checkpoint is a config error
  CHECK(cli({"evaluate", "--config", "cli_tmp/tiny.cfg"}) == 2);

  // train a couple of rounds, then evaluate from the checkpoint
  {
    std::ofstream f("cli_tmp/train.cfg");
    f << "[encoder]\nkind = onedcnn\nconv1.channels = 4\nconv2.channels = 4\n"
      << "[ppo]\ngru_hidden = 8\nbptt_chunk = 8\ntraining_rounds = 2\nsurrogate_epochs = 1\n"
      << "checkpoint_every = 0\n[arena]\nframe_limit = 120\n[eval]\nrounds = 2\n";
  }
  CHECK(cli({"train", "--config", "cli_tmp/train.cfg", "--seed", "3", "--out", "cli_tmp/run"}) == 0);
  CHECK(fs::exists("cli_tmp/run/ckpt-2.manifest"));
  CHECK(fs::exists("cli_tmp/run/train_log.csv"));
  CHECK(cli({"evaluate", "--config", "cli_tmp/train.cfg", "--seed", "4", "--out", "cli_tmp/run",
             "--checkpoint", "cli_tmp/run/ckpt-2"}) == 0);

  // checkpoint/encoder mismatch is a config error
  {
    std::ofstream f("cli_tmp/fft.cfg");
    f << "[encoder]\nkind = fftfcn\n[ppo]\ngru_hidden = 8\n[eval]\nrounds = 2\n";
  }
  CHECK(cli({"evaluate", "--config", "cli_tmp/fft.cfg", "--checkpoint", "cli_tmp/run/ckpt-2"}) ==
        2);

  // write a replay, verify it, and dump its spectrogram
  {
    arena::Replay rep;
    rep.seed = 31;
    rep.frame_limit = 300;
    rep.design = "informative";
    auto table = arena::ActionTable::defaults();
    auto s = arena::reset(rep.seed, rep.frame_limit);
    Rng rng(derive_seed(rep.seed, 3));
    for (int i = 0; i < 120 && !s.over; ++i) {
      const int a1 = static_cast<int>(rng.uniform_int(arena::kNumActions));
      const int a2 = static_cast<int>(rng.uniform_int(arena::kNumActions));
      arena::step(s, a1, a2, table);
      rep.records.push_back({s.frame - 1, a1, a2, s.players[0].hp, s.players[1].hp});
    }
    arena::write_replay("cli_tmp/round.csv", rep);
  }
  CHECK(cli({"replay", "--replay", "cli_tmp/round.csv"}) == 0);
  CHECK(cli({"inspect-audio", "--replay", "cli_tmp/round.csv", "--from", "0", "--to", "90",
             "--out-file", "cli_tmp/spec.csv"}) == 0);
  {
    std::ifstream f("cli_tmp/spec.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header.rfind("melspec-v1 80 ", 0) == 0);
    int rows = 0;
    std::string line;
    while (std::getline(f, line)) rows += !line.empty();
    CHECK(rows == 80);
  }

  // a corrupted replay is a runtime failure (exit 3)
  {
    auto rep = arena::read_replay("cli_tmp/round.csv");
    rep.records[10].hp1 -= 1;
    arena::write_replay("cli_tmp/broken.csv", rep);
  }
  CHECK(cli({"replay", "--replay", "cli_tmp/broken.csv"}) == 3);

  fs::remove_all("cli_tmp");
}

TEST_CASE("inspect-audio: fireball launch band shows only under the informative design") {
  namespace fs = std::filesystem;
  fs::remove_all("insp_tmp");
  fs::create_directories("insp_tmp");

  // stage a round where p1 fires a fireball from long range
  arena::Replay rep;
  rep.seed = 71;
  rep.frame_limit = 300;
  rep.design = "informative";
  const auto table = arena::ActionTable::defaults();
  auto s = arena::reset(rep.seed, rep.frame_limit);
  for (int i = 0; i < 90 && !s.over; ++i) {
    const int a1 = i == 0 ? 14 : arena::kNoAction;  // FIREBALL
    arena::step(s, a1, arena::kNoAction, table);
    rep.records.push_back({s.frame - 1, a1, arena::kNoAction, s.players[0].hp, s.players[1].hp});
  }
  arena::write_replay("insp_tmp/round.csv", rep);

  auto dump = [&](const char* design, const char* out) {
    const auto d = arena::SoundDesign::by_name(design);
    inspect_audio(rep, d, table, 0, 90, std::string("insp_tmp/") + out);
    // parse the matrix back
    std::ifstream f(std::string("insp_tmp/") + out);
    std::string header;
    std::getline(f, header);
    REQUIRE(header.rfind("melspec-v1 80 ", 0) == 0);
    std::vector<std::vector<double>> m;
    std::string line;
    while (std::getline(f, line)) {
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
      if (!row.empty()) m.push_back(row);
    }
    REQUIRE(m.size() == 80);
    return m;
  };
  const auto inf = dump("informative", "inf.csv");
  const auto sp = dump("sparse", "sp.csv");

  // the launch cue sweeps 2000..3000 Hz; compare mean log energy in the mel
  // rows whose centers fall in that band
  const auto bank = dsp::build_mel_filterbank(80, 2048, dsp::kSampleRate);
  double inf_band = 0.0, sp_band = 0.0;
  int cells = 0;
  for (int r = 0; r < 80; ++r) {
    if (bank.center_hz[static_cast<size_t>(r)] < 1900.0 ||
        bank.center_hz[static_cast<size_t>(r)] > 3100.0)
      continue;
    for (size_t c = 0; c < inf[static_cast<size_t>(r)].size(); ++c) {
      inf_band += inf[static_cast<size_t>(r)][c];
      sp_band += sp[static_cast<size_t>(r)][c];
      ++cells;
    }
  }
  REQUIRE(cells > 0);
  // informative shows a strong band where sparse has (near) silence
  CHECK(inf_band / cells > sp_band / cells + 1.0);
  fs::remove_all("insp_tmp");
}

TEST_CASE("compare grid shape and determinism at miniature scale") {
  namespace fs = std::filesystem;
  fs::remove_all("cmp_tmp");
  RunConfig cfg = tiny_cfg();
  cfg.hp.training_rounds = 1;
  cfg.hp.surrogate_epochs = 1;
  cfg.frame_limit = 120;
  cfg.eval_rounds = 2;

  const std::vector<std::string> designs{"informative", "sparse"};
  const std::vector<encoders::EncoderKind> kinds{encoders::EncoderKind::onedcnn};
  const auto a = compare_designs(cfg, designs, kinds, 2, 5, "cmp_tmp/a");
  const auto b = compare_designs(cfg, designs, kinds, 2, 5, "cmp_tmp/b");
  REQUIRE(a.rows.size() == b.rows.size());
  CHECK(a.rows.size() == 6);  // 2 combos x (2 trials + 1 mean row)
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].win_ratio == b.rows[i].win_ratio);
    CHECK(a.rows[i].avg_hp_diff == b.rows[i].avg_hp_diff);
  }
  CHECK(a.complete);

  write_compare_csv("cmp_tmp/compare.csv", a);
  const auto text = format_compare_table(a);
  CHECK(text.find("informative") != std::string::npos);
  CHECK(text.find("mean") != std::string::npos);

  // single-combo grids are rejected
  CHECK_THROWS_AS((void)compare_designs(cfg, {"informative"}, kinds, 1, 5, "cmp_tmp/c"),
                  std::invalid_argument);

  // an exhausted budget yields a partial table flagged incomplete
  const auto partial = compare_designs(cfg, designs, kinds, 2, 5, "cmp_tmp/d", 1e-9);
  CHECK(!partial.complete);
  CHECK(partial.rows.size() < a.rows.size());
  write_compare_csv("cmp_tmp/partial.csv", partial);
  CHECK(slurp("cmp_tmp/partial.csv").find("incomplete") != std::string::npos);
  fs::remove_all("cmp_tmp");
}
