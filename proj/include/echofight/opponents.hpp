#pragma once

#include "echofight/arena.hpp"
#include "echofight/rng.hpp"

namespace echofight::arena {

// Full-information heuristic stand-in for the weakened MCTS opponent. With
// probability (1 - skill) it substitutes a uniformly random action over all
// 40 ids; skill 0 is therefore pure noise and skill 1 pure heuristic.
int scripted_opponent(const GameState& state, int player, double skill, Rng& rng,
                      const ActionTable& table);

// UCT over the simulator's forward model with the opponent modeled as
// uniformly random. The budget is counted in iterations so results are
// reproducible; budget 0 falls back to scripted_opponent(skill = 1). Returns
// the most-visited root action. Throws StateError on a terminal state.
int mcts_opponent(const GameState& state, int player, int iteration_budget, Rng& rng,
                  const ActionTable& table);

// Uniformly random action over the context-legal ids.
int random_legal_action(const GameState& state, int player, Rng& rng, const ActionTable& table);

}  // namespace echofight::arena
