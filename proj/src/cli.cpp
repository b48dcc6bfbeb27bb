#include "echofight/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "echofight/checkpoint.hpp"
#include "echofight/errors.hpp"
#include "echofight/evalkit.hpp"

namespace echofight::evalkit {

namespace {
struct CommonArgs {
  std::string config_path;
  uint64_t seed = 1;
  std::string out_dir = ".";
  bool smoke = false;
  bool paper_scale = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file");
  cmd->add_option("--seed", args.seed, "master seed");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_flag("--smoke", args.smoke, "CI-scale profile (150 train / 30 eval rounds)");
  cmd->add_flag("--paper-scale", args.paper_scale, "full protocol (900 train / 90 eval rounds)");
}

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = load_config(args.config_path);
  if (args.smoke) apply_smoke_profile(cfg);
  if (args.paper_scale) apply_paper_profile(cfg);
  return cfg;
}

std::vector<encoders::EncoderKind> parse_encoder_list(const std::string& csv) {
  std::vector<encoders::EncoderKind> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(encoders::encoder_kind_from(item));
  return out;
}

std::vector<std::string> parse_name_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

int cmd_train(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  ppo::TrainConfig tc;
  tc.encoder = cfg.encoder;
  tc.hp = cfg.hp;
  tc.design = cfg.design;
  tc.opponent = cfg.opponent;
  tc.seed = args.seed;
  tc.frame_limit = cfg.frame_limit;
  tc.out_dir = args.out_dir;
  const auto result = ppo::train(tc);
  std::cout << "trained " << result.log.size() << " rounds; final checkpoint "
            << result.final_checkpoint << "\n";
  if (!result.log.empty()) {
    double reward = 0.0;
    int wins = 0;
    const size_t tail = std::min<size_t>(result.log.size(), 25);
    for (size_t i = result.log.size() - tail; i < result.log.size(); ++i) {
      reward += result.log[i].reward_sum;
      wins += result.log[i].win;
    }
    std::cout << "last " << tail << " rounds: mean reward " << reward / static_cast<double>(tail)
              << ", wins " << wins << "/" << tail << "\n";
  }
  return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& checkpoint, bool untrained) {
  const RunConfig cfg = resolve_config(args);
  ppo::PolicyNet net(cfg.encoder, cfg.hp.gru_hidden);
  if (untrained) {
    Rng rng(derive_seed(args.seed, 0x11));
    net.init(rng);
  } else {
    if (checkpoint.empty())
      throw ConfigError("evaluate: --checkpoint is required (or pass --untrained)");
    const auto store = net.named_params();
    const auto info = nn::load_checkpoint(checkpoint, store);
    if (!info.encoder.empty() &&
        info.encoder != encoders::encoder_kind_name(net.encoder.kind()))
      throw ConfigError("evaluate: checkpoint encoder '" + info.encoder +
                        "' does not match configured encoder '" +
                        encoders::encoder_kind_name(net.encoder.kind()) + "'");
  }
  const arena::SoundDesign design = arena::SoundDesign::by_name(cfg.design);
  const auto report = evaluate(net, design, cfg.opponent, cfg.eval_rounds, args.seed, cfg);
  std::filesystem::create_directories(args.out_dir);
  const std::string path = args.out_dir + "/report.csv";
  write_report(path, report);
  std::cout << "design " << report.design << ", encoder "
            << encoders::encoder_kind_name(report.encoder) << ": win_ratio " << report.win_ratio
            << ", avg_hp_diff " << report.avg_hp_diff << " over " << report.rounds.size()
            << " rounds -> " << path << "\n";
  return 0;
}

int cmd_compare(const CommonArgs& args, const std::string& designs_csv,
                const std::string& encoders_csv, int trials, double budget) {
  const RunConfig cfg = resolve_config(args);
  const auto designs = parse_name_list(designs_csv);
  const auto kinds = parse_encoder_list(encoders_csv);
  const auto table =
      compare_designs(cfg, designs, kinds, trials, args.seed, args.out_dir, budget);
  std::filesystem::create_directories(args.out_dir);
  write_compare_csv(args.out_dir + "/compare.csv", table);
  std::cout << format_compare_table(table);
  return table.complete ? 0 : 3;
}

int cmd_inspect(const CommonArgs& args, const std::string& replay_path,
                const std::string& design_name, int from, int to, const std::string& out_file) {
  const RunConfig cfg = resolve_config(args);
  const auto replay = arena::read_replay(replay_path);
  const auto design = arena::SoundDesign::by_name(design_name.empty() ? replay.design : design_name);
  inspect_audio(replay, design, cfg.action_table(), from, to, out_file);
  std::cout << "wrote " << out_file << "\n";
  return 0;
}

int cmd_replay(const CommonArgs& args, const std::string& replay_path) {
  const RunConfig cfg = resolve_config(args);
  const auto replay = arena::read_replay(replay_path);
  if (!verify_replay(replay, cfg.action_table())) {
    std::cout << "replay MISMATCH: re-run diverges from the log\n";
    return 3;
  }
  std::cout << "replay verified: " << replay.records.size() << " frames bit-identical\n";
  return 0;
}
}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"echofight: audio-only fighting-game agent trainer and sound-design evaluator"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, cmp_args, ins_args, rep_args;

  auto* train_cmd = app.add_subcommand("train", "train an agent with PPO");
  add_common(train_cmd, train_args);

  auto* eval_cmd = app.add_subcommand("evaluate", "run the win-ratio / HP-difference evaluation");
  add_common(eval_cmd, eval_args);
  std::string checkpoint;
  bool untrained = false;
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint base path (no extension)");
  eval_cmd->add_flag("--untrained", untrained, "evaluate a freshly initialized policy");

  auto* cmp_cmd = app.add_subcommand("compare", "train + evaluate a design x encoder grid");
  add_common(cmp_cmd, cmp_args);
  std::string designs_csv = "informative,sparse";
  std::string encoders_csv = "melspec";
  int trials = 3;
  double budget = 0.0;
  cmp_cmd->add_option("--designs", designs_csv, "comma-separated sound designs");
  cmp_cmd->add_option("--encoders", encoders_csv, "comma-separated encoder kinds");
  cmp_cmd->add_option("--trials", trials, "trials per combination");
  cmp_cmd->add_option("--budget", budget, "wall-clock budget in seconds (0 = unlimited)");

  auto* ins_cmd = app.add_subcommand("inspect-audio", "dump a replay segment's mel spectrogram");
  add_common(ins_cmd, ins_args);
  std::string replay_path, design_name, out_file = "melspec.csv";
  int from = 0, to = 60;
  ins_cmd->add_option("--replay", replay_path, "replay CSV")->required();
  ins_cmd->add_option("--design", design_name, "sound design (default: the replay's)");
  ins_cmd->add_option("--from", from, "first frame");
  ins_cmd->add_option("--to", to, "one past the last frame");
  ins_cmd->add_option("--out-file", out_file, "output CSV path");

  auto* rep_cmd = app.add_subcommand("replay", "re-run a logged round and verify it");
  add_common(rep_cmd, rep_args);
  std::string verify_path;
  rep_cmd->add_option("--replay", verify_path, "replay CSV")->required();

  try {
    app.parse(argc, argv);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args, checkpoint, untrained);
    if (cmp_cmd->parsed()) return cmd_compare(cmp_args, designs_csv, encoders_csv, trials, budget);
    if (ins_cmd->parsed()) return cmd_inspect(ins_args, replay_path, design_name, from, to, out_file);
    if (rep_cmd->parsed()) return cmd_replay(rep_args, verify_path);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help exits cleanly, usage errors map to 2
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace echofight::evalkit
