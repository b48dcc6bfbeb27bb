#include "echofight/arena.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "echofight/errors.hpp"

namespace echofight::arena {

const char* winner_name(Winner w) {
  switch (w) {
    case Winner::p1: return "p1";
    case Winner::p2: return "p2";
    case Winner::draw: return "draw";
  }
  return "?";
}

namespace {
GameState start_state(uint64_t seed, int frame_limit, bool swapped) {
  GameState s;
  s.frame_limit = frame_limit;
  s.rng_seed = seed;
  const double left = 300.0, right = kStageWidth - 300.0;
  s.players[0].x = swapped ? right : left;
  s.players[1].x = swapped ? left : right;
  s.players[0].facing = swapped ? -1 : 1;
  s.players[1].facing = swapped ? 1 : -1;
  return s;
}

bool in_active_window(const PlayerState& p, const ActionDef& d) {
  return p.action_elapsed >= d.startup && p.action_elapsed < d.startup + d.active;
}

bool guarding(const PlayerState& p, const ActionTable& table) {
  if (p.action == kNoAction) return false;
  const ActionDef& d = table[p.action];
  return d.category == ActionCategory::guard_ground && in_active_window(p, d);
}

void emit(std::vector<SoundEvent>* events, EventType type, double x, int owner) {
  if (events) events->push_back(SoundEvent{type, x, owner});
}

EventType action_start_event(ActionCategory c) {
  switch (c) {
    case ActionCategory::throw_ground: return EventType::action_throw;
    case ActionCategory::attack_ground: return EventType::action_attack_ground;
    case ActionCategory::skill_ground: return EventType::action_skill_ground;
    case ActionCategory::movement_ground: return EventType::action_movement;
    case ActionCategory::guard_ground: return EventType::action_guard;
    case ActionCategory::attack_air: return EventType::action_attack_air;
    case ActionCategory::skill_air: return EventType::action_skill_air;
  }
  return EventType::action_movement;
}
}  // namespace

GameState reset(uint64_t seed, int frame_limit) { return start_state(seed, frame_limit, false); }

GameState reset_swapped(uint64_t seed, int frame_limit) {
  return start_state(seed, frame_limit, true);
}

dsp::AudioFrame render_audio(Mixer& mixer, const GameState& state,
                             const std::vector<SoundEvent>& events, int listener) {
  return mixer.render(events, state.players[listener].x, state.frame);
}

bool can_act(const GameState& state, int player) {
  const PlayerState& p = state.players[player];
  return p.action == kNoAction && p.lock_frames == 0;
}

bool action_usable(const GameState& state, int player, int action, const ActionTable& table) {
  if (action == kNoAction) return false;
  const ActionDef& d = table[action];
  const bool air = d.category == ActionCategory::attack_air || d.category == ActionCategory::skill_air;
  return state.players[player].airborne ? air : !air;
}

StepRewards step(GameState& state, int a1, int a2, const ActionTable& table,
                 std::vector<SoundEvent>* events) {
  if (state.over) throw StateError("step: round already ended");

  const int hp_before[2] = {state.players[0].hp, state.players[1].hp};
  if (state.frame == 0) emit(events, EventType::round_start, kStageWidth * 0.5, -1);

  // 1. action intake; inputs are ignored while busy or out of context
  const int requested[2] = {a1, a2};
  for (int i = 0; i < 2; ++i) {
    PlayerState& p = state.players[i];
    const int a = requested[i];
    if (a == kNoAction || !can_act(state, i)) continue;
    if (a < 0 || a >= kNumActions) throw std::invalid_argument("step: action id out of range");
    if (!action_usable(state, i, a, table)) continue;
    const ActionDef& d = table[a];
    if (d.jump) {
      // Jumps do not hold the action slot, so air attacks can start mid-air.
      p.airborne = true;
      p.air_frames_left = kAirTime;
      p.air_dx = static_cast<double>(d.move_dx) * p.facing;
    } else {
      p.action = a;
      p.action_elapsed = 0;
      p.has_hit = false;
    }
    emit(events, action_start_event(d.category), p.x, i);
  }

  // 2. movement
  for (int i = 0; i < 2; ++i) {
    PlayerState& p = state.players[i];
    if (p.airborne) {
      p.x += p.air_dx;
      const double s = static_cast<double>(kAirTime - p.air_frames_left) / kAirTime;
      p.y = kJumpHeight * 4.0 * s * (1.0 - s);
      p.air_frames_left -= 1;
      if (p.air_frames_left <= 0) {
        p.airborne = false;
        p.y = 0.0;
        p.lock_frames = kLandingLock;
        p.action = kNoAction;  // an unfinished air move is lost on landing
        p.air_dx = 0.0;
      }
    } else if (p.action != kNoAction) {
      const ActionDef& d = table[p.action];
      if (d.category == ActionCategory::movement_ground && !d.jump && in_active_window(p, d))
        p.x += static_cast<double>(d.move_dx) * p.facing;
    }
    p.x = std::min(kStageMax, std::max(kStageMin, p.x));
  }

  // keep bodies apart; each player yields half the overlap, backward
  const double gap = std::abs(state.players[0].x - state.players[1].x);
  if (gap < kMinSeparation) {
    const double push = (kMinSeparation - gap) * 0.5;
    for (int i = 0; i < 2; ++i) {
      PlayerState& p = state.players[i];
      p.x = std::min(kStageMax, std::max(kStageMin, p.x - p.facing * push));
    }
  }

  // 3. melee hits, both evaluated against the same pre-damage state
  int pending[2] = {0, 0};
  for (int i = 0; i < 2; ++i) {
    PlayerState& p = state.players[i];
    if (p.action == kNoAction || p.has_hit) continue;
    const ActionDef& d = table[p.action];
    if (!d.is_attack() || !in_active_window(p, d)) continue;
    PlayerState& t = state.players[1 - i];
    const bool air_attack =
        d.category == ActionCategory::attack_air || d.category == ActionCategory::skill_air;
    if (!air_attack && t.airborne) continue;  // grounded moves whiff on airborne targets
    if (std::abs(p.x - t.x) > static_cast<double>(d.range)) continue;
    p.has_hit = true;
    const bool guardable = d.category != ActionCategory::throw_ground;
    if (guardable && guarding(t, table)) {
      const int dmg = std::max(d.damage / 4, 1);
      pending[1 - i] += dmg;
      emit(events, EventType::guard_block, t.x, 1 - i);
    } else {
      pending[1 - i] += d.damage;
      emit(events, EventType::hit, t.x, 1 - i);
      if (d.damage >= kHeavyDamage) emit(events, EventType::heavy_damage, t.x, 1 - i);
    }
  }

  // 4. projectile spawn (on the first active frame of a fireball skill)
  for (int i = 0; i < 2; ++i) {
    PlayerState& p = state.players[i];
    if (p.action == kNoAction) continue;
    const ActionDef& d = table[p.action];
    if (d.projectile_speed == 0 || p.action_elapsed != d.startup) continue;
    int own = 0;
    for (int k = 0; k < state.n_projectiles; ++k)
      if (state.projectiles[k].owner == i) ++own;
    if (own >= 2 || state.n_projectiles >= kMaxProjectiles) continue;
    Projectile pr;
    pr.owner = i;
    pr.x = p.x + 40.0 * p.facing;
    pr.vel = static_cast<double>(d.projectile_speed) * p.facing;
    pr.damage = d.damage;
    pr.age = 0;
    state.projectiles[state.n_projectiles++] = pr;
    emit(events, EventType::projectile_launch, pr.x, i);
  }

  // 5. projectile travel and impact
  for (int k = 0; k < state.n_projectiles;) {
    Projectile& pr = state.projectiles[k];
    pr.x += pr.vel;
    pr.age += 1;
    bool dead = pr.x < 0.0 || pr.x > kStageWidth;
    if (!dead) {
      PlayerState& t = state.players[1 - pr.owner];
      if (!t.airborne && std::abs(pr.x - t.x) <= kProjectileRadius) {
        if (guarding(t, table)) {
          pending[1 - pr.owner] += std::max(pr.damage / 4, 1);
          emit(events, EventType::guard_block, t.x, 1 - pr.owner);
        } else {
          pending[1 - pr.owner] += pr.damage;
          emit(events, EventType::hit, t.x, 1 - pr.owner);
          if (pr.damage >= kHeavyDamage) emit(events, EventType::heavy_damage, t.x, 1 - pr.owner);
        }
        dead = true;
      } else if (pr.age % kTravelCuePeriod == 0) {
        emit(events, EventType::projectile_travel, pr.x, pr.owner);
      }
    }
    if (dead) {
      state.projectiles[k] = state.projectiles[state.n_projectiles - 1];
      state.n_projectiles -= 1;
    } else {
      ++k;
    }
  }

  // 6. apply damage simultaneously
  state.players[0].hp -= pending[0];
  state.players[1].hp -= pending[1];

  // 7. advance action clocks, locks and facing
  for (int i = 0; i < 2; ++i) {
    PlayerState& p = state.players[i];
    if (p.action != kNoAction) {
      p.action_elapsed += 1;
      if (p.action_elapsed >= table[p.action].total_frames()) p.action = kNoAction;
    }
    if (p.lock_frames > 0) p.lock_frames -= 1;
    const double dx = state.players[1 - i].x - p.x;
    if (dx != 0.0) p.facing = dx > 0.0 ? 1 : -1;
  }

  state.frame += 1;
  if (state.players[0].hp <= 0 || state.players[1].hp <= 0 || state.frame >= state.frame_limit)
    state.over = true;

  StepRewards r;
  r.r1 = static_cast<double>(hp_before[1] - state.players[1].hp) +
         static_cast<double>(state.players[0].hp - hp_before[0]);
  r.r2 = -r.r1;
  return r;
}

RoundResult result_of(const GameState& state) {
  RoundResult r;
  r.hp_self_end = state.players[0].hp;
  r.hp_opp_end = state.players[1].hp;
  r.frames_played = state.frame;
  if (r.hp_self_end == r.hp_opp_end)
    r.winner = Winner::draw;
  else
    r.winner = r.hp_self_end > r.hp_opp_end ? Winner::p1 : Winner::p2;
  return r;
}

void write_replay(const std::string& path, const Replay& replay) {
  std::ofstream f(path);
  if (!f) throw ConfigError("replay: cannot write " + path);
  f << "# replay-v1 seed=" << replay.seed << " frame_limit=" << replay.frame_limit
    << " design=" << replay.design << "\n";
  f << "frame,a1,a2,hp1,hp2\n";
  for (const auto& r : replay.records)
    f << r.frame << "," << r.a1 << "," << r.a2 << "," << r.hp1 << "," << r.hp2 << "\n";
}

Replay read_replay(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("replay: cannot open " + path);
  Replay rep;
  std::string line;
  std::getline(f, line);
  {
    std::istringstream ss(line);
    std::string tag, word;
    ss >> tag >> word;
    if (tag != "#" || word != "replay-v1")
      throw ConfigError("replay: bad header in " + path);
    while (ss >> word) {
      const auto eq = word.find('=');
      if (eq == std::string::npos) throw ConfigError("replay: malformed header field " + word);
      const std::string key = word.substr(0, eq), value = word.substr(eq + 1);
      if (key == "seed")
        rep.seed = std::stoull(value);
      else if (key == "frame_limit")
        rep.frame_limit = std::stoi(value);
      else if (key == "design")
        rep.design = value;
      else
        throw ConfigError("replay: unknown header field " + key);
    }
  }
  std::getline(f, line);  // column header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    Replay::Record r;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%d,%d", &r.frame, &r.a1, &r.a2, &r.hp1, &r.hp2) != 5)
      throw ConfigError("replay: malformed record '" + line + "' in " + path);
    rep.records.push_back(r);
  }
  return rep;
}

}  // namespace echofight::arena
