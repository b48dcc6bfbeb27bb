#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "echofight/actions.hpp"
#include "echofight/sound.hpp"

namespace echofight::arena {

constexpr int kMaxHp = 400;
constexpr double kStageWidth = 960.0;
constexpr double kStageMin = 40.0;   // playable strip; characters never leave it
constexpr double kStageMax = 920.0;
constexpr int kDefaultFrameLimit = 3600;  // 60 s at 60 fps
constexpr int kMaxProjectiles = 4;
constexpr double kProjectileRadius = 24.0;
constexpr double kMinSeparation = 30.0;
constexpr int kHeavyDamage = 30;      // threshold for the heavy-damage cue
constexpr int kTravelCuePeriod = 6;   // frames between projectile-travel cues
constexpr int kAirTime = 28;          // jump duration in frames
constexpr double kJumpHeight = 60.0;
constexpr int kLandingLock = 2;

struct PlayerState {
  double x = 0.0;
  double y = 0.0;
  int hp = kMaxHp;
  int action = kNoAction;  // current action id, kNoAction when idle
  int action_elapsed = 0;
  bool has_hit = false;  // current action instance already connected
  bool airborne = false;
  int air_frames_left = 0;
  double air_dx = 0.0;
  int lock_frames = 0;  // landing stun
  int facing = 1;       // +1 toward larger x
};

struct Projectile {
  int owner = 0;
  double x = 0.0;
  double vel = 0.0;
  int damage = 0;
  int age = 0;
};

struct GameState {
  int frame = 0;
  int frame_limit = kDefaultFrameLimit;
  bool over = false;
  PlayerState players[2];
  Projectile projectiles[kMaxProjectiles];
  int n_projectiles = 0;
  // Round seed. The simulator itself is deterministic in the actions; the
  // seed is carried so opponents and policies can derive their streams.
  uint64_t rng_seed = 0;
};

enum class Winner { p1, p2, draw };
const char* winner_name(Winner w);

struct RoundResult {
  Winner winner = Winner::draw;
  int hp_self_end = 0;  // player 1's view
  int hp_opp_end = 0;
  int frames_played = 0;
};

// Canonical start: both at full HP on symmetric positions; the seed only
// drives in-round randomness of whoever consumes it.
GameState reset(uint64_t seed, int frame_limit = kDefaultFrameLimit);

// If start positions are swapped the round is the label-mirror of the normal
// one; used by the self-play symmetry harness.
GameState reset_swapped(uint64_t seed, int frame_limit = kDefaultFrameLimit);

struct StepRewards {
  double r1 = 0.0;
  double r2 = 0.0;
};

// Advances exactly one frame. a1/a2 are action ids or kNoAction; inputs are
// ignored while a player is mid-action. Both players' hits are resolved
// against the same pre-damage state, so the step is symmetric under label
// swap and r1 + r2 == 0 exactly. Throws StateError after the round ended.
StepRewards step(GameState& state, int a1, int a2, const ActionTable& table,
                 std::vector<SoundEvent>* events = nullptr);

// Renders one stereo frame heard by the given player (0 or 1): this frame's
// events start voices on the mixer, carried voices keep playing, and the mix
// is panned relative to the listener's position.
dsp::AudioFrame render_audio(Mixer& mixer, const GameState& state,
                             const std::vector<SoundEvent>& events, int listener);

// True when the player may start a new action this frame.
bool can_act(const GameState& state, int player);
// Action is usable in the player's current air/ground context.
bool action_usable(const GameState& state, int player, int action, const ActionTable& table);

RoundResult result_of(const GameState& state);

// Replay logs: "# replay-v1 seed=<n> frame_limit=<n> design=<name>" then a
// frame,a1,a2,hp1,hp2 CSV body.
struct Replay {
  uint64_t seed = 0;
  int frame_limit = kDefaultFrameLimit;
  std::string design = "informative";
  struct Record {
    int frame;
    int a1, a2;
    int hp1, hp2;
  };
  std::vector<Record> records;
};

void write_replay(const std::string& path, const Replay& replay);
Replay read_replay(const std::string& path);

}  // namespace echofight::arena
