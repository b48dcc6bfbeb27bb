#include "echofight/sound.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "echofight/errors.hpp"
#include "echofight/rng.hpp"

namespace echofight::arena {

namespace {
constexpr double kPi = 3.14159265358979323846;

const char* kEventNames[kNumEventTypes] = {
    "action-throw",    "action-attack-ground", "action-skill-ground", "action-movement",
    "action-guard",    "action-attack-air",    "action-skill-air",    "hit",
    "guard",           "projectile-launch",    "projectile-travel",   "round-start",
    "heavy-damage",
};
}  // namespace

const char* event_type_name(EventType t) { return kEventNames[static_cast<size_t>(t)]; }

EventType event_type_from(const std::string& name) {
  for (int i = 0; i < kNumEventTypes; ++i)
    if (name == kEventNames[i]) return static_cast<EventType>(i);
  throw ConfigError("unknown sound event type '" + name + "'");
}

SoundAsset synthesize(const SynthSpec& spec, uint64_t noise_seed) {
  const int n = std::min(spec.ms, 1000) * dsp::kSampleRate / 1000;
  SoundAsset a;
  a.samples.resize(static_cast<size_t>(n));
  Rng rng(noise_seed);
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / n;
    const double env = spec.amp * (1.0 - s);  // linear decay
    double v = 0.0;
    switch (spec.wave) {
      case SynthSpec::Wave::sine:
        v = std::sin(2.0 * kPi * spec.freq * i / dsp::kSampleRate);
        break;
      case SynthSpec::Wave::noise:
        v = rng.uniform(-1.0, 1.0);
        break;
      case SynthSpec::Wave::sweep: {
        // linear chirp from freq to freq2
        const double f0 = spec.freq, f1 = spec.freq2;
        const double t = static_cast<double>(i) / dsp::kSampleRate;
        const double dur = static_cast<double>(n) / dsp::kSampleRate;
        v = std::sin(2.0 * kPi * (f0 * t + 0.5 * (f1 - f0) / dur * t * t));
        break;
      }
    }
    a.samples[static_cast<size_t>(i)] = env * v;
  }
  return a;
}

SoundAsset load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("wav: cannot open " + path);
  char riff[4], wave[4];
  uint32_t riff_size = 0;
  f.read(riff, 4);
  f.read(reinterpret_cast<char*>(&riff_size), 4);
  f.read(wave, 4);
  if (!f || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    throw ConfigError("wav: " + path + " is not a RIFF/WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  std::vector<int16_t> pcm;
  bool got_fmt = false, got_data = false;
  while (f && !(got_fmt && got_data)) {
    char id[4];
    uint32_t size = 0;
    f.read(id, 4);
    f.read(reinterpret_cast<char*>(&size), 4);
    if (!f) break;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      std::vector<char> buf(size);
      f.read(buf.data(), size);
      if (size < 16) throw ConfigError("wav: short fmt chunk in " + path);
      std::memcpy(&format, buf.data() + 0, 2);
      std::memcpy(&channels, buf.data() + 2, 2);
      std::memcpy(&rate, buf.data() + 4, 4);
      std::memcpy(&bits, buf.data() + 14, 2);
      got_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      pcm.resize(size / 2);
      f.read(reinterpret_cast<char*>(pcm.data()), size / 2 * 2);
      got_data = true;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (!got_fmt || !got_data) throw ConfigError("wav: missing fmt/data chunk in " + path);
  if (format != 1 || bits != 16)
    throw ConfigError("wav: " + path + " must be 16-bit PCM");
  if (channels != 1) throw ConfigError("wav: " + path + " must be mono");
  if (rate != dsp::kSampleRate)
    throw ConfigError("wav: " + path + " must be 48 kHz, got " + std::to_string(rate));
  if (pcm.size() > static_cast<size_t>(dsp::kSampleRate))
    throw ConfigError("wav: " + path + " exceeds one second");

  SoundAsset a;
  a.samples.resize(pcm.size());
  for (size_t i = 0; i < pcm.size(); ++i) a.samples[i] = pcm[i] / 32768.0;
  return a;
}

namespace {
SoundDesign::CueDef synth_cue(SynthSpec::Wave w, double f, double f2, double amp, int ms) {
  SoundDesign::CueDef c;
  c.kind = SoundDesign::CueKind::synth;
  c.synth = SynthSpec{w, f, f2, amp, ms};
  return c;
}
}  // namespace

SoundDesign SoundDesign::informative() {
  SoundDesign d;
  d.name_ = "informative";
  using W = SynthSpec::Wave;
  auto set = [&](EventType t, CueDef c) { d.defs_[static_cast<size_t>(t)] = c; };
  set(EventType::action_throw, synth_cue(W::sine, 450, 0, 0.45, 80));
  set(EventType::action_attack_ground, synth_cue(W::sine, 700, 0, 0.45, 70));
  set(EventType::action_skill_ground, synth_cue(W::sweep, 900, 1600, 0.5, 120));
  set(EventType::action_movement, synth_cue(W::sine, 280, 0, 0.4, 50));
  set(EventType::action_guard, synth_cue(W::sine, 550, 0, 0.4, 60));
  set(EventType::action_attack_air, synth_cue(W::sine, 1000, 0, 0.45, 70));
  set(EventType::action_skill_air, synth_cue(W::sweep, 1100, 1900, 0.5, 120));
  set(EventType::hit, synth_cue(W::noise, 0, 0, 0.55, 90));
  set(EventType::guard_block, synth_cue(W::sine, 350, 0, 0.45, 60));
  set(EventType::projectile_launch, synth_cue(W::sweep, 2000, 3000, 0.55, 150));
  set(EventType::projectile_travel, synth_cue(W::sine, 1400, 0, 0.4, 35));
  set(EventType::round_start, synth_cue(W::sweep, 400, 800, 0.5, 200));
  set(EventType::heavy_damage, synth_cue(W::sine, 130, 0, 0.6, 250));
  d.realize();
  return d;
}

SoundDesign SoundDesign::sparse() {
  SoundDesign d = informative();
  d.name_ = "sparse";
  // No cues when a skill starts or a projectile is fired.
  d.defs_[static_cast<size_t>(EventType::projectile_launch)] = CueDef{};
  d.defs_[static_cast<size_t>(EventType::action_skill_ground)] = CueDef{};
  d.defs_[static_cast<size_t>(EventType::action_skill_air)] = CueDef{};
  d.realize();
  return d;
}

SoundDesign SoundDesign::by_name(const std::string& name) {
  if (name == "informative") return informative();
  if (name == "sparse") return sparse();
  return load(name);
}

void SoundDesign::realize() {
  for (int i = 0; i < kNumEventTypes; ++i) {
    const CueDef& c = defs_[static_cast<size_t>(i)];
    switch (c.kind) {
      case CueKind::silence:
        assets_[static_cast<size_t>(i)] = SoundAsset{};
        break;
      case CueKind::synth:
        // Fixed per-slot noise seed keeps noise cues bit-reproducible.
        assets_[static_cast<size_t>(i)] = synthesize(c.synth, 0x5eed0000u + static_cast<uint64_t>(i));
        break;
      case CueKind::wav:
        assets_[static_cast<size_t>(i)] = load_wav(c.wav_path);
        break;
    }
  }
}

void SoundDesign::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw ConfigError("sound design: cannot write " + path);
  f << "sounddesign-v1\n";
  f << "name " << name_ << "\n";
  for (int i = 0; i < kNumEventTypes; ++i) {
    const CueDef& c = defs_[static_cast<size_t>(i)];
    f << "cue " << kEventNames[i] << " ";
    switch (c.kind) {
      case CueKind::silence:
        f << "silence";
        break;
      case CueKind::synth: {
        const char* w = c.synth.wave == SynthSpec::Wave::sine
                            ? "sine"
                            : c.synth.wave == SynthSpec::Wave::noise ? "noise" : "sweep";
        f << "synth " << w << " " << c.synth.freq << " " << c.synth.freq2 << " " << c.synth.amp
          << " " << c.synth.ms;
        break;
      }
      case CueKind::wav:
        f << "wav " << c.wav_path;
        break;
    }
    f << "\n";
  }
}

SoundDesign SoundDesign::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("sound design: cannot open " + path);
  std::string header;
  std::getline(f, header);
  if (header != "sounddesign-v1")
    throw ConfigError("sound design: bad header '" + header + "' in " + path);

  SoundDesign d;
  std::array<bool, kNumEventTypes> seen{};
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "name") {
      ss >> d.name_;
      continue;
    }
    if (tag != "cue") throw ConfigError("sound design: malformed line '" + line + "'");
    std::string ev, kind;
    ss >> ev >> kind;
    const EventType t = event_type_from(ev);
    CueDef c;
    if (kind == "silence") {
      c.kind = CueKind::silence;
    } else if (kind == "synth") {
      c.kind = CueKind::synth;
      std::string wave;
      ss >> wave >> c.synth.freq >> c.synth.freq2 >> c.synth.amp >> c.synth.ms;
      if (!ss) throw ConfigError("sound design: malformed synth cue '" + line + "'");
      if (wave == "sine")
        c.synth.wave = SynthSpec::Wave::sine;
      else if (wave == "noise")
        c.synth.wave = SynthSpec::Wave::noise;
      else if (wave == "sweep")
        c.synth.wave = SynthSpec::Wave::sweep;
      else
        throw ConfigError("sound design: unknown waveform '" + wave + "'");
    } else if (kind == "wav") {
      c.kind = CueKind::wav;
      ss >> c.wav_path;
    } else {
      throw ConfigError("sound design: unknown cue kind '" + kind + "'");
    }
    d.defs_[static_cast<size_t>(t)] = c;
    seen[static_cast<size_t>(t)] = true;
  }
  for (int i = 0; i < kNumEventTypes; ++i)
    if (!seen[static_cast<size_t>(i)])
      throw ConfigError(std::string("sound design: missing entry for event '") + kEventNames[i] +
                        "' in " + path);
  if (d.name_.empty()) d.name_ = path;
  d.realize();
  return d;
}

void pan_gains(double src_x, double listener_x, double stage_width, double& gain_l,
               double& gain_r) {
  double pan = (src_x - listener_x) / stage_width;
  pan = std::min(1.0, std::max(-1.0, pan));
  gain_l = std::sqrt((1.0 - pan) * 0.5);
  gain_r = std::sqrt((1.0 + pan) * 0.5);
}

Mixer::Mixer(const SoundDesign* design, double stage_width)
    : design_(design), stage_width_(stage_width) {}

void Mixer::reset() { voices_.clear(); }

dsp::AudioFrame Mixer::render(const std::vector<SoundEvent>& events, double listener_x,
                              int64_t frame_index) {
  // Voice order fixes the float summation grouping; sort by (type, x) so the
  // mix is identical no matter which player emitted which event.
  std::vector<SoundEvent> ordered = events;
  std::stable_sort(ordered.begin(), ordered.end(), [](const SoundEvent& a, const SoundEvent& b) {
    if (a.type != b.type) return a.type < b.type;
    return a.x < b.x;
  });
  for (const SoundEvent& e : ordered) {
    const SoundAsset& a = design_->cue(e.type);
    if (a.silent()) continue;  // explicit silence entry, event still exists
    if (voices_.size() >= kMaxVoices) continue;
    voices_.push_back(Voice{&a, 0, e.x});
  }

  dsp::AudioFrame out = dsp::AudioFrame::silence(frame_index);
  for (Voice& v : voices_) {
    double gl, gr;
    pan_gains(v.src_x, listener_x, stage_width_, gl, gr);
    const size_t n = std::min<size_t>(dsp::kSamplesPerFrame, v.asset->samples.size() - v.pos);
    for (size_t i = 0; i < n; ++i) {
      const double s = v.asset->samples[v.pos + i];
      out.left[i] += gl * s;
      out.right[i] += gr * s;
    }
    v.pos += n;
  }
  voices_.erase(std::remove_if(voices_.begin(), voices_.end(),
                               [](const Voice& v) { return v.pos >= v.asset->samples.size(); }),
                voices_.end());

  for (auto* ch : {&out.left, &out.right})
    for (double& s : *ch) s = std::min(1.0, std::max(-1.0, s));
  return out;
}

}  // namespace echofight::arena
