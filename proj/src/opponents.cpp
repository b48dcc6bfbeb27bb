#include "echofight/opponents.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "echofight/errors.hpp"

namespace echofight::arena {

namespace {
constexpr int kGroundActions = 26;  // ids 0..25
constexpr int kAirFirst = 26;       // ids 26..39

// action ids from the default layout the heuristic leans on
constexpr int kJab = 2;
constexpr int kFireball = 14;
constexpr int kWalkFwd = 17;
constexpr int kDashFwd = 19;
constexpr int kJumpUp = 21;
constexpr int kGuardHigh = 24;
constexpr int kAirKick = 30;

// Nearest projectile heading toward the player, or -1.
int incoming_projectile(const GameState& s, int player) {
  const double px = s.players[player].x;
  int best = -1;
  double best_d = 1e9;
  for (int k = 0; k < s.n_projectiles; ++k) {
    const Projectile& pr = s.projectiles[k];
    if (pr.owner == player) continue;
    const double d = std::abs(pr.x - px);
    const bool approaching = (pr.x < px) == (pr.vel > 0.0);
    if (approaching && d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}
}  // namespace

int random_legal_action(const GameState& state, int player, Rng& rng, const ActionTable& table) {
  (void)table;
  if (state.players[player].airborne)
    return kAirFirst + static_cast<int>(rng.uniform_int(kNumActions - kAirFirst));
  return static_cast<int>(rng.uniform_int(kGroundActions));
}

int scripted_opponent(const GameState& state, int player, double skill, Rng& rng,
                      const ActionTable& table) {
  // weakening knob: random substitution with probability (1 - skill)
  if (rng.uniform() >= skill) return static_cast<int>(rng.uniform_int(kNumActions));

  const PlayerState& me = state.players[player];
  const PlayerState& opp = state.players[1 - player];
  const double dist = std::abs(me.x - opp.x);

  if (me.airborne) {
    const ActionDef& kick = table[kAirKick];
    return dist <= kick.range ? kAirKick : kNoAction;
  }

  // incoming fireball: block it (or jump it when it is still far)
  const int proj = incoming_projectile(state, player);
  if (proj >= 0) {
    const double d = std::abs(state.projectiles[proj].x - me.x);
    if (d < 150.0) return kGuardHigh;
    if (d < 280.0) return kJumpUp;
  }

  // opponent is swinging within reach: guard with probability rising in the
  // threatened damage
  if (opp.action != kNoAction && !opp.airborne) {
    const ActionDef& od = table[opp.action];
    if (od.is_attack() && opp.action_elapsed < od.startup + od.active &&
        dist <= od.range + 24.0) {
      const double threat = std::min(0.9, od.damage / 50.0);
      if (rng.uniform() < threat) return kGuardHigh;
    }
  }

  // best in-range attack: maximum damage among ground attacks and throws
  int best = kNoAction;
  int best_damage = 0;
  for (int id = 0; id < kGroundActions; ++id) {
    const ActionDef& d = table[id];
    if (!d.is_attack() || d.projectile_speed != 0) continue;
    if (d.category == ActionCategory::attack_air || d.category == ActionCategory::skill_air)
      continue;
    if (dist <= d.range && d.damage > best_damage) {
      best = id;
      best_damage = d.damage;
    }
  }
  if (best != kNoAction) {
    // prefer a fast poke when the opponent is about to recover
    if (opp.action != kNoAction && table[opp.action].total_frames() - opp.action_elapsed < 4 &&
        dist <= table[kJab].range)
      return kJab;
    return best;
  }

  // out of reach: occasionally fire from long range, otherwise close in
  if (dist > 260.0 && rng.uniform() < 0.45) return kFireball;
  return dist > 180.0 ? kDashFwd : kWalkFwd;
}

namespace {
struct McNode {
  int action = kNoAction;
  int visits = 0;
  double value_sum = 0.0;
  bool expanded = false;
  std::vector<McNode> children;
};

void legal_actions(const GameState& s, int player, std::vector<int>& out) {
  out.clear();
  if (s.players[player].airborne) {
    for (int id = kAirFirst; id < kNumActions; ++id) out.push_back(id);
  } else {
    for (int id = 0; id < kGroundActions; ++id) out.push_back(id);
  }
}

// Advance until `player` can act again (or the round ends / the frame cap is
// hit), with the opponent acting uniformly at random.
int advance_macro(GameState& s, int player, int my_action, Rng& rng, const ActionTable& table,
                  int max_frames) {
  int frames = 0;
  int pending = my_action;
  while (!s.over && frames < max_frames) {
    int acts[2] = {kNoAction, kNoAction};
    if (pending != kNoAction && can_act(s, player)) {
      acts[player] = pending;
      pending = kNoAction;
    }
    if (can_act(s, 1 - player)) acts[1 - player] = random_legal_action(s, 1 - player, rng, table);
    step(s, acts[0], acts[1], table);
    ++frames;
    if (pending == kNoAction && can_act(s, player)) break;
  }
  return frames;
}

double rollout_score(GameState& s, int player, int base_hp_diff, Rng& rng,
                     const ActionTable& table, int frames) {
  for (int f = 0; f < frames && !s.over; ++f) {
    int acts[2] = {kNoAction, kNoAction};
    for (int i = 0; i < 2; ++i)
      if (can_act(s, i)) acts[i] = random_legal_action(s, i, rng, table);
    step(s, acts[0], acts[1], table);
  }
  const int end = s.players[player].hp - s.players[1 - player].hp;
  // HP swing since the search root, squashed to [-1, 1]
  return std::tanh(static_cast<double>(end - base_hp_diff) / 60.0);
}
}  // namespace

int mcts_opponent(const GameState& state, int player, int iteration_budget, Rng& rng,
                  const ActionTable& table) {
  if (state.over) throw StateError("mcts_opponent: terminal state");
  if (iteration_budget <= 0) return scripted_opponent(state, player, 1.0, rng, table);
  if (!can_act(state, player)) return kNoAction;  // input would be ignored anyway

  constexpr int kMacroCap = 20;
  constexpr int kRolloutFrames = 56;
  constexpr int kMaxDepth = 4;
  constexpr double kUcb = 1.1;

  McNode root;
  root.expanded = true;
  std::vector<int> legal;
  legal_actions(state, player, legal);
  root.children.resize(legal.size());
  for (size_t i = 0; i < legal.size(); ++i) root.children[i].action = legal[i];

  const int base_hp_diff = state.players[player].hp - state.players[1 - player].hp;
  std::vector<McNode*> path;
  for (int it = 0; it < iteration_budget; ++it) {
    GameState sim = state;
    path.clear();
    McNode* node = &root;
    int depth = 0;

    // selection + expansion down the open-loop tree
    while (!sim.over && node->expanded && !node->children.empty() && depth < kMaxDepth) {
      McNode* pick = nullptr;
      double best = -1e18;
      const double log_n = std::log(static_cast<double>(node->visits + 1));
      for (auto& c : node->children) {
        double score;
        if (c.visits == 0)
          score = 1e9 - static_cast<double>(c.action);  // visit unseen children first, stable order
        else
          score = c.value_sum / c.visits + kUcb * std::sqrt(log_n / c.visits);
        if (score > best) {
          best = score;
          pick = &c;
        }
      }
      advance_macro(sim, player, pick->action, rng, table, kMacroCap);
      path.push_back(pick);
      node = pick;
      ++depth;
    }

    if (!sim.over && !node->expanded && node->visits > 0 && depth < kMaxDepth) {
      legal_actions(sim, player, legal);
      node->children.resize(legal.size());
      for (size_t i = 0; i < legal.size(); ++i) node->children[i].action = legal[i];
      node->expanded = true;
    }

    const double value = rollout_score(sim, player, base_hp_diff, rng, table, kRolloutFrames);
    root.visits += 1;
    for (McNode* n : path) {
      n->visits += 1;
      n->value_sum += value;
    }
  }

  int best_action = root.children.empty() ? kNoAction : root.children[0].action;
  int best_visits = -1;
  for (const auto& c : root.children) {
    if (c.visits > best_visits) {
      best_visits = c.visits;
      best_action = c.action;
    }
  }
  return best_action;
}

}  // namespace echofight::arena
