#pragma once

#include <array>
#include <string>
#include <vector>

#include "echofight/dsp.hpp"

namespace echofight::arena {

// One entry per in-game event kind; designs map each to a cue or silence.
enum class EventType {
  action_throw,
  action_attack_ground,
  action_skill_ground,
  action_movement,
  action_guard,
  action_attack_air,
  action_skill_air,
  hit,
  guard_block,
  projectile_launch,
  projectile_travel,
  round_start,
  heavy_damage,
};
constexpr int kNumEventTypes = 13;

const char* event_type_name(EventType t);
EventType event_type_from(const std::string& name);

struct SoundEvent {
  EventType type;
  double x = 0.0;  // source position on the stage
  int owner = -1;  // emitting player, -1 for neutral events
};

// Mono 48 kHz cue, at most one second.
struct SoundAsset {
  std::vector<double> samples;
  bool silent() const { return samples.empty(); }
};

struct SynthSpec {
  enum class Wave { sine, noise, sweep };
  Wave wave = Wave::sine;
  double freq = 440.0;
  double freq2 = 0.0;  // sweep end frequency
  double amp = 0.5;
  int ms = 80;
};

SoundAsset synthesize(const SynthSpec& spec, uint64_t noise_seed);
SoundAsset load_wav(const std::string& path);  // 16-bit PCM mono 48 kHz only

// Every event type has an entry; silence is an explicit entry, not a missing
// one.
class SoundDesign {
 public:
  enum class CueKind { silence, synth, wav };
  struct CueDef {
    CueKind kind = CueKind::silence;
    SynthSpec synth;
    std::string wav_path;
  };

  static SoundDesign informative();
  // Same palette with projectile launches and skill startups muted.
  static SoundDesign sparse();
  static SoundDesign by_name(const std::string& name);  // informative|sparse or a file path
  static SoundDesign load(const std::string& path);     // "sounddesign-v1" text
  void save(const std::string& path) const;

  const std::string& name() const { return name_; }
  const SoundAsset& cue(EventType t) const { return assets_[static_cast<size_t>(t)]; }
  const CueDef& def(EventType t) const { return defs_[static_cast<size_t>(t)]; }

 private:
  void realize();  // synthesize / load all cue assets
  std::string name_;
  std::array<CueDef, kNumEventTypes> defs_;
  std::array<SoundAsset, kNumEventTypes> assets_;
};

// Constant-power stereo pan gains for a source at src_x heard from
// listener_x; pan = clamp((src - listener) / stage_width, -1, 1),
// gains (sqrt((1-pan)/2), sqrt((1+pan)/2)).
void pan_gains(double src_x, double listener_x, double stage_width, double& gain_l,
               double& gain_r);

// Per-listener mixer. Events start voices; each render() call advances every
// voice by one 800-sample frame and sums them with pan gains, clipped to
// [-1, 1]. Two observing players need two mixers fed the same events.
class Mixer {
 public:
  explicit Mixer(const SoundDesign* design, double stage_width);

  void reset();
  dsp::AudioFrame render(const std::vector<SoundEvent>& events, double listener_x,
                         int64_t frame_index);

 private:
  struct Voice {
    const SoundAsset* asset;
    size_t pos;
    double src_x;
  };
  static constexpr size_t kMaxVoices = 32;

  const SoundDesign* design_;
  double stage_width_;
  std::vector<Voice> voices_;
};

}  // namespace echofight::arena
