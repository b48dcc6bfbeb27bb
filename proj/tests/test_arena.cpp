#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "echofight/arena.hpp"
#include "echofight/errors.hpp"
#include "echofight/opponents.hpp"
#include "echofight/rng.hpp"

using namespace echofight;
using namespace echofight::arena;

namespace {
const ActionTable& table() {
  static const ActionTable t = ActionTable::defaults();
  return t;
}

double rms(const std::vector<double>& v) {
  double acc = 0.0;
  for (double s : v) acc += s * s;
  return std::sqrt(acc / static_cast<double>(v.size()));
}

// Plays until the round ends or max_frames, both players scripted.
GameState play_scripted(uint64_t seed, double skill, int max_frames = kDefaultFrameLimit) {
  GameState s = reset(seed, max_frames);
  Rng r1(derive_seed(seed, 1)), r2(derive_seed(seed, 2));
  while (!s.over) {
    const int a1 = scripted_opponent(s, 0, skill, r1, table());
    const int a2 = scripted_opponent(s, 1, skill, r2, table());
    step(s, a1, a2, table());
  }
  return s;
}
}  // namespace

TEST_CASE("action table fits the fixed category layout") {
  const auto& t = table();
  std::map<ActionCategory, int> counts;
  for (const auto& d : t.all()) {
    CHECK(d.name != "CROUCH");
    counts[d.category] += 1;
  }
  CHECK(counts[ActionCategory::throw_ground] == 2);
  CHECK(counts[ActionCategory::attack_ground] == 12);
  CHECK(counts[ActionCategory::skill_ground] == 3);
  CHECK(counts[ActionCategory::movement_ground] == 7);
  CHECK(counts[ActionCategory::guard_ground] == 2);
  CHECK(counts[ActionCategory::attack_air] == 12);
  CHECK(counts[ActionCategory::skill_air] == 2);
}

TEST_CASE("action table file round trip and validation") {
  table().save("actions_rt.txt");
  const ActionTable loaded = ActionTable::load("actions_rt.txt");
  for (int i = 0; i < kNumActions; ++i) {
    CHECK(loaded[i].name == table()[i].name);
    CHECK(loaded[i].damage == table()[i].damage);
    CHECK(loaded[i].category == table()[i].category);
    CHECK(loaded[i].projectile_speed == table()[i].projectile_speed);
  }
  std::remove("actions_rt.txt");
  CHECK_THROWS_AS((void)ActionTable::load("does_not_exist.txt"), ConfigError);
}

TEST_CASE("reset: full HP, frame 0, seed-independent start") {
  const GameState a = reset(0);
  CHECK(a.players[0].hp == 400);
  CHECK(a.players[1].hp == 400);
  CHECK(a.frame == 0);

  const GameState b = reset(0);
  CHECK(std::memcmp(&a, &b, sizeof(GameState)) == 0);

  const GameState c = reset(12345);
  CHECK(c.players[0].hp == a.players[0].hp);
  CHECK(c.players[0].x == a.players[0].x);
  CHECK(c.players[1].x == a.players[1].x);
}

TEST_CASE("idle players out of range: no HP change, zero rewards") {
  GameState s = reset(1);
  const auto r = step(s, kNoAction, kNoAction, table());
  CHECK(r.r1 == 0.0);
  CHECK(r.r2 == 0.0);
  CHECK(s.players[0].hp == 400);
  CHECK(s.players[1].hp == 400);
  CHECK(s.frame == 1);
}

TEST_CASE("a landed hit pays out the exact HP swing") {
  GameState s = reset(2);
  // stand the players next to each other
  s.players[0].x = 400.0;
  s.players[1].x = 440.0;
  const int jab = 2;  // 8 damage, 3 startup
  std::vector<SoundEvent> events;
  double r1_total = 0.0;
  for (int i = 0; i < 12 && s.players[1].hp == 400; ++i) {
    const auto r = step(s, i == 0 ? jab : kNoAction, kNoAction, table(), &events);
    r1_total += r.r1;
  }
  CHECK(s.players[1].hp == 392);
  CHECK(r1_total == 8.0);
  bool saw_hit = false;
  for (const auto& e : events) saw_hit = saw_hit || e.type == EventType::hit;
  CHECK(saw_hit);
}

TEST_CASE("guard reduces damage and emits the guard cue") {
  GameState s = reset(3);
  s.players[0].x = 400.0;
  s.players[1].x = 440.0;
  std::vector<SoundEvent> events;
  // p2 guards first (1 frame startup), then p1 swings a 16-damage hook
  step(s, kNoAction, 24, table(), &events);
  step(s, 4, kNoAction, table(), &events);
  for (int i = 0; i < 10 && s.players[1].hp == 400; ++i) step(s, kNoAction, kNoAction, table(), &events);
  CHECK(s.players[1].hp == 396);  // 16 / 4
  bool saw_guard = false;
  for (const auto& e : events) saw_guard = saw_guard || e.type == EventType::guard_block;
  CHECK(saw_guard);
}

TEST_CASE("fireball: launch cue, travel cues, impact damage") {
  GameState s = reset(4);
  s.players[0].x = 200.0;
  s.players[1].x = 700.0;
  std::vector<SoundEvent> events;
  step(s, 14, kNoAction, table(), &events);  // FIREBALL, 30 damage
  int guard_frames = 0;
  while (!s.over && s.players[1].hp == 400 && guard_frames < 120) {
    step(s, kNoAction, kNoAction, table(), &events);
    ++guard_frames;
  }
  CHECK(s.players[1].hp == 370);
  int launches = 0, travels = 0, hits = 0, heavies = 0;
  for (const auto& e : events) {
    launches += e.type == EventType::projectile_launch;
    travels += e.type == EventType::projectile_travel;
    hits += e.type == EventType::hit;
    heavies += e.type == EventType::heavy_damage;
  }
  CHECK(launches == 1);
  CHECK(travels > 2);
  CHECK(hits == 1);
  CHECK(heavies == 1);  // 30 damage crosses the heavy threshold
}

TEST_CASE("jumping clears projectiles") {
  GameState s = reset(5);
  s.players[0].x = 200.0;
  s.players[1].x = 500.0;
  step(s, 14, kNoAction, table());
  // let the projectile spawn, then have p2 jump over it
  for (int i = 0; i < 12; ++i) step(s, kNoAction, kNoAction, table());
  CHECK(s.n_projectiles == 1);
  step(s, kNoAction, 21, table());  // JUMP_UP
  for (int i = 0; i < 27 && !s.over; ++i) step(s, kNoAction, kNoAction, table());
  CHECK(s.players[1].hp == 400);  // passed underneath while airborne
  for (int i = 0; i < 60 && s.n_projectiles > 0; ++i) step(s, kNoAction, kNoAction, table());
  CHECK(s.n_projectiles == 0);  // ran off the stage edge
  CHECK(s.players[1].hp == 400);
}

TEST_CASE("round ends by knockout or time limit with footnote winner rule") {
  // knockout
  GameState s = reset(6, 600);
  s.players[1].hp = 5;
  s.players[0].x = 400.0;
  s.players[1].x = 430.0;
  step(s, 2, kNoAction, table());
  for (int i = 0; i < 10 && !s.over; ++i) step(s, kNoAction, kNoAction, table());
  CHECK(s.over);
  CHECK(result_of(s).winner == Winner::p1);
  CHECK_THROWS_AS((void)step(s, kNoAction, kNoAction, table()), StateError);

  // time limit, higher HP wins
  GameState t = reset(7, 10);
  t.players[0].hp = 300;
  for (int i = 0; i < 10; ++i) step(t, kNoAction, kNoAction, table());
  CHECK(t.over);
  CHECK(result_of(t).winner == Winner::p2);

  // equal HP at the limit is a draw
  GameState d = reset(8, 5);
  for (int i = 0; i < 5; ++i) step(d, kNoAction, kNoAction, table());
  CHECK(result_of(d).winner == Winner::draw);
}

TEST_CASE("zero-sum rewards and telescoping over random rounds") {
  Rng rng(99);
  for (int round = 0; round < 25; ++round) {
    GameState s = reset(1000 + round, 900);
    double sum_r1 = 0.0, sum_r2 = 0.0;
    while (!s.over) {
      const int a1 = static_cast<int>(rng.uniform_int(kNumActions));
      const int a2 = static_cast<int>(rng.uniform_int(kNumActions));
      const auto r = step(s, a1, a2, table());
      CHECK(r.r1 + r.r2 == 0.0);
      sum_r1 += r.r1;
      sum_r2 += r.r2;
      CHECK(s.players[0].hp <= 400);
      CHECK(s.players[1].hp <= 400);
    }
    const double hp_identity = static_cast<double>(400 - s.players[1].hp) +
                               static_cast<double>(s.players[0].hp - 400);
    CHECK(sum_r1 == hp_identity);
    CHECK(sum_r2 == -hp_identity);
    CHECK(s.players[0].x >= kStageMin);
    CHECK(s.players[0].x <= kStageMax);
  }
}

TEST_CASE("HP never increases") {
  Rng rng(123);
  GameState s = reset(55, 1200);
  int prev1 = 400, prev2 = 400;
  while (!s.over) {
    step(s, static_cast<int>(rng.uniform_int(kNumActions)),
         static_cast<int>(rng.uniform_int(kNumActions)), table());
    CHECK(s.players[0].hp <= prev1);
    CHECK(s.players[1].hp <= prev2);
    prev1 = s.players[0].hp;
    prev2 = s.players[1].hp;
  }
}

TEST_CASE("trajectories are bit-identical given seed and actions") {
  auto run = [](uint64_t seed) {
    GameState s = reset(seed, 1200);
    Rng rng(derive_seed(seed, 9));
    std::vector<int> hps;
    std::vector<double> xs;
    while (!s.over) {
      step(s, static_cast<int>(rng.uniform_int(kNumActions)),
           static_cast<int>(rng.uniform_int(kNumActions)), table());
      hps.push_back(s.players[0].hp);
      hps.push_back(s.players[1].hp);
      xs.push_back(s.players[0].x);
      xs.push_back(s.players[1].x);
    }
    return std::make_pair(hps, xs);
  };
  CHECK(run(77) == run(77));

  // scripted play determinism end to end
  const GameState a = play_scripted(31, 0.8);
  const GameState b = play_scripted(31, 0.8);
  CHECK(a.frame == b.frame);
  CHECK(a.players[0].hp == b.players[0].hp);
  CHECK(a.players[1].hp == b.players[1].hp);
}

TEST_CASE("label swap: swapped start positions mirror the round exactly") {
  const uint64_t seed = 404;
  Rng ra1(derive_seed(seed, 1)), ra2(derive_seed(seed, 2));
  GameState a = reset(seed, 900);
  while (!a.over) {
    const int x1 = scripted_opponent(a, 0, 1.0, ra1, table());
    const int x2 = scripted_opponent(a, 1, 1.0, ra2, table());
    step(a, x1, x2, table());
  }
  // same seeds, roles swapped
  Rng rb1(derive_seed(seed, 1)), rb2(derive_seed(seed, 2));
  GameState b = reset_swapped(seed, 900);
  while (!b.over) {
    const int x2 = scripted_opponent(b, 1, 1.0, rb1, table());
    const int x1 = scripted_opponent(b, 0, 1.0, rb2, table());
    step(b, x1, x2, table());
  }
  CHECK(a.frame == b.frame);
  CHECK(a.players[0].hp == b.players[1].hp);
  CHECK(a.players[1].hp == b.players[0].hp);
  CHECK(a.players[0].x == b.players[1].x);
  CHECK(a.players[1].x == b.players[0].x);
}

TEST_CASE("sound designs: every event has an entry, sparse mutes launches") {
  const SoundDesign inf = SoundDesign::informative();
  const SoundDesign sp = SoundDesign::sparse();
  for (int i = 0; i < kNumEventTypes; ++i) {
    const auto t = static_cast<EventType>(i);
    CHECK(!inf.cue(t).silent());  // informative voices everything
  }
  CHECK(sp.cue(EventType::projectile_launch).silent());
  CHECK(sp.cue(EventType::action_skill_ground).silent());
  CHECK(sp.cue(EventType::action_skill_air).silent());
  CHECK(!sp.cue(EventType::hit).silent());

  // asset contract: mono 48 kHz, at most one second
  for (int i = 0; i < kNumEventTypes; ++i) {
    const auto& a = inf.cue(static_cast<EventType>(i));
    CHECK(a.samples.size() <= 48000);
  }
}

TEST_CASE("sound design file round trip") {
  const SoundDesign sp = SoundDesign::sparse();
  sp.save("design_rt.txt");
  const SoundDesign loaded = SoundDesign::load("design_rt.txt");
  CHECK(loaded.name() == "sparse");
  for (int i = 0; i < kNumEventTypes; ++i) {
    const auto t = static_cast<EventType>(i);
    REQUIRE(loaded.cue(t).samples.size() == sp.cue(t).samples.size());
    CHECK(loaded.cue(t).samples == sp.cue(t).samples);
  }
  std::remove("design_rt.txt");

  // missing entries are rejected
  {
    std::ofstream f("design_bad.txt");
    f << "sounddesign-v1\nname broken\ncue hit silence\n";
  }
  CHECK_THROWS_AS((void)SoundDesign::load("design_bad.txt"), ConfigError);
  std::remove("design_bad.txt");
}

TEST_CASE("wav loading: 16-bit PCM mono 48 kHz only") {
  // write a minimal valid wav: 480 samples of a ramp
  const int n = 480;
  {
    std::ofstream f("cue.wav", std::ios::binary);
    auto u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto u16 = [&](uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
    f.write("RIFF", 4);
    u32(36 + n * 2);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    u32(16);
    u16(1);      // PCM
    u16(1);      // mono
    u32(48000);  // rate
    u32(48000 * 2);
    u16(2);
    u16(16);  // bits
    f.write("data", 4);
    u32(n * 2);
    for (int i = 0; i < n; ++i) {
      const int16_t s = static_cast<int16_t>(i * 50 - 12000);
      f.write(reinterpret_cast<const char*>(&s), 2);
    }
  }
  const SoundAsset a = load_wav("cue.wav");
  REQUIRE(a.samples.size() == 480);
  CHECK(a.samples[0] == doctest::Approx(-12000.0 / 32768.0));

  // a design can reference it
  {
    SoundDesign base = SoundDesign::sparse();
    base.save("design_wav.txt");
    std::ifstream in("design_wav.txt");
    std::stringstream body;
    body << in.rdbuf();
    std::string text = body.str();
    const std::string from = "cue hit synth noise 0 0 0.55 90";
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    text.replace(at, from.size(), "cue hit wav cue.wav");
    std::ofstream out("design_wav.txt");
    out << text;
  }
  const SoundDesign d = SoundDesign::load("design_wav.txt");
  CHECK(d.cue(EventType::hit).samples.size() == 480);
  std::remove("design_wav.txt");

  // wrong format rejected
  {
    std::ofstream f("bad.wav", std::ios::binary);
    f << "not a riff file at all";
  }
  CHECK_THROWS_AS((void)load_wav("bad.wav"), ConfigError);
  std::remove("bad.wav");
  std::remove("cue.wav");
}

TEST_CASE("mixer: silence, center pan, side pan") {
  const SoundDesign design = SoundDesign::informative();
  Mixer mixer(&design, kStageWidth);

  // no active sounds -> all-zero frame
  const auto quiet = mixer.render({}, 480.0, 0);
  for (double v : quiet.left) CHECK(v == 0.0);
  for (double v : quiet.right) CHECK(v == 0.0);

  // source at the listener: both channels identical
  mixer.reset();
  const auto centered =
      mixer.render({SoundEvent{EventType::hit, 480.0, 0}}, 480.0, 0);
  CHECK(centered.left == centered.right);
  CHECK(rms(centered.left) > 0.0);

  // source far right of the listener: right channel louder
  mixer.reset();
  const auto side = mixer.render({SoundEvent{EventType::hit, 900.0, 0}}, 100.0, 0);
  CHECK(rms(side.right) > rms(side.left));

  // silence cue produces no voice even though the event exists
  const SoundDesign sp = SoundDesign::sparse();
  Mixer sparse_mixer(&sp, kStageWidth);
  const auto mute =
      sparse_mixer.render({SoundEvent{EventType::projectile_launch, 480.0, 0}}, 480.0, 0);
  for (double v : mute.left) CHECK(v == 0.0);

  // rendered frames always stay in [-1, 1]
  Mixer loud(&design, kStageWidth);
  std::vector<SoundEvent> pile;
  for (int i = 0; i < 10; ++i) pile.push_back(SoundEvent{EventType::hit, 480.0, 0});
  const auto clipped = loud.render(pile, 480.0, 0);
  CHECK(clipped.valid());
}

TEST_CASE("scripted opponent: attack when adjacent, uniform at skill 0, deterministic") {
  // opponent adjacent and recovering -> an attack-category action
  GameState s = reset(9);
  s.players[0].x = 500.0;
  s.players[1].x = 540.0;
  s.players[1].action = 13;  // ROUNDHOUSE, long recovery
  s.players[1].action_elapsed = 15;
  Rng rng(1);
  const int a = scripted_opponent(s, 0, 1.0, rng, table());
  const auto cat = table()[a].category;
  const bool attacky = cat == ActionCategory::attack_ground ||
                       cat == ActionCategory::throw_ground ||
                       cat == ActionCategory::skill_ground;
  CHECK(attacky);
  CHECK(table()[a].damage > 0);

  // skill 0: uniform over all 40 actions (chi-square, 10k draws, p > 0.01)
  Rng r2(2);
  std::array<int, kNumActions> counts{};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) counts[static_cast<size_t>(scripted_opponent(s, 0, 0.0, r2, table()))] += 1;
  const double expected = static_cast<double>(draws) / kNumActions;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 39 degrees of freedom, p = 0.01 critical value
  CHECK(chi2 < 62.43);

  // same state and seed -> same action
  Rng r3(3), r4(3);
  CHECK(scripted_opponent(s, 0, 0.7, r3, table()) == scripted_opponent(s, 0, 0.7, r4, table()));
}

TEST_CASE("scripted opponent guards incoming fireballs") {
  GameState s = reset(10);
  s.players[0].x = 300.0;
  s.players[1].x = 600.0;
  s.projectiles[0] = Projectile{0, 480.0, 14.0, 30, 5};
  s.n_projectiles = 1;
  Rng rng(4);
  const int a = scripted_opponent(s, 1, 1.0, rng, table());
  CHECK(table()[a].category == ActionCategory::guard_ground);
}

TEST_CASE("mcts opponent: budget 0 fallback, determinism, terminal error") {
  GameState s = reset(11);
  s.players[0].x = 500.0;
  s.players[1].x = 544.0;
  Rng ra(5), rb(5);
  CHECK(mcts_opponent(s, 0, 0, ra, table()) == scripted_opponent(s, 0, 1.0, rb, table()));

  Rng rc(6), rd(6);
  CHECK(mcts_opponent(s, 0, 300, rc, table()) == mcts_opponent(s, 0, 300, rd, table()));

  GameState done = reset(12, 1);
  step(done, kNoAction, kNoAction, table());
  Rng re(7);
  CHECK_THROWS_AS((void)mcts_opponent(done, 0, 100, re, table()), StateError);
}

TEST_CASE("mcts beats a random player at a small budget") {
  int wins = 0;
  const int rounds = 8;
  for (int round = 0; round < rounds; ++round) {
    const uint64_t seed = 5000 + round;
    GameState s = reset(seed, 1800);
    Rng mr(derive_seed(seed, 1)), rr(derive_seed(seed, 2));
    while (!s.over) {
      const int a1 = can_act(s, 0) ? mcts_opponent(s, 0, 400, mr, table()) : kNoAction;
      const int a2 = random_legal_action(s, 1, rr, table());
      step(s, a1, a2, table());
    }
    wins += result_of(s).winner == Winner::p1;
  }
  CHECK(wins >= rounds - 2);
}

TEST_CASE("replay file round trip") {
  Replay rep;
  rep.seed = 42;
  rep.frame_limit = 900;
  rep.design = "sparse";
  GameState s = reset(rep.seed, rep.frame_limit);
  Rng rng(derive_seed(rep.seed, 3));
  for (int i = 0; i < 50; ++i) {
    const int a1 = static_cast<int>(rng.uniform_int(kNumActions));
    const int a2 = static_cast<int>(rng.uniform_int(kNumActions));
    step(s, a1, a2, table());
    rep.records.push_back({s.frame - 1, a1, a2, s.players[0].hp, s.players[1].hp});
  }
  write_replay("replay_rt.csv", rep);
  const Replay back = read_replay("replay_rt.csv");
  CHECK(back.seed == rep.seed);
  CHECK(back.frame_limit == rep.frame_limit);
  CHECK(back.design == rep.design);
  REQUIRE(back.records.size() == rep.records.size());
  for (size_t i = 0; i < back.records.size(); ++i) {
    CHECK(back.records[i].frame == rep.records[i].frame);
    CHECK(back.records[i].hp1 == rep.records[i].hp1);
  }
  std::remove("replay_rt.csv");
}

TEST_CASE("scripted rounds usually finish before the time limit") {
  int finished_early = 0;
  for (int i = 0; i < 6; ++i) {
    const GameState s = play_scripted(7000 + i, 0.6);
    finished_early += s.frame < kDefaultFrameLimit;
  }
  CHECK(finished_early >= 4);
}
