#pragma once

#include <array>
#include <string>
#include <vector>

#include "echofight/dsp.hpp"
#include "echofight/layers.hpp"
#include "echofight/nn.hpp"

namespace echofight::encoders {

enum class EncoderKind { onedcnn, fftfcn, melspec };

const char* encoder_kind_name(EncoderKind k);
EncoderKind encoder_kind_from(const std::string& name);  // throws ConfigError

// Feature tensor produced by one encoder pass: 32x5 (onedcnn), 256 (fftfcn)
// or 32x40x1 (melspec).
struct AudioFeature {
  EncoderKind kind = EncoderKind::onedcnn;
  nn::Tensor tensor;
  int flattened_len = 0;
};

// Rolling window of the last 4 game frames (66.7 ms). The 25 ms STFT window
// does not fit in a single 16.7 ms frame, so the mel encoder reads this
// buffer instead. reset() pre-fills it with silence at round start.
class AudioRingBuffer {
 public:
  static constexpr int kCapacity = 4;

  void reset();
  void push(const dsp::AudioFrame& frame);
  bool initialized() const { return initialized_; }
  // Concatenated samples of one channel (0 = left, 1 = right), oldest frame
  // first; kCapacity * 800 samples.
  std::vector<double> channel(int ch) const;

 private:
  std::array<dsp::AudioFrame, kCapacity> frames_;
  int head_ = 0;
  bool initialized_ = false;
};

struct Conv2dSpec {
  int channels = 0;
  int kernel_h = 1, kernel_w = 1;
  int stride_h = 1, stride_w = 1;
  int pad_h = 0, pad_w = 0;
};

// Layer hyperparameters are config-overridable; these defaults are the
// normative ones that reproduce the 32x5 / 256 / 32x40x1 feature shapes.
struct EncoderConfig {
  EncoderKind kind = EncoderKind::melspec;

  // onedcnn: stride-8 downsample then two 1D convolutions
  int cnn_downsample = 8;
  int cnn1_channels = 16, cnn1_kernel = 16, cnn1_stride = 4, cnn1_pad = 0;
  int cnn2_channels = 32, cnn2_kernel = 6, cnn2_stride = 4, cnn2_pad = 0;

  // fftfcn: 1024-point FFT, keep 512 log magnitudes, downsample by 4,
  // concatenate channels, two fully connected layers
  int fft_padded = 1024;
  int fft_keep = 512;
  int fft_downsample = 4;
  int fcn1_width = 256, fcn2_width = 256;

  // melspec: 80 mel bands over 4 frames, two 2D convolutions
  int mel_bands = 80;
  int mel_window = 1200;  // 25 ms at 48 kHz
  int mel_hop = 480;      // 10 ms
  int mel_fft = 2048;     // window zero-padded to the next power of two
  Conv2dSpec mel_conv1{16, 3, 3, 2, 2, 1, 1};
  Conv2dSpec mel_conv2{32, 3, 3, 1, 3, 1, 0};
};

// One audio encoder: a fixed dsp preprocessing stage feeding a small stack of
// learnable layers. Pure given weights; one instance per agent.
class Encoder {
 public:
  explicit Encoder(const EncoderConfig& cfg = EncoderConfig{});

  void init(Rng& rng);

  EncoderKind kind() const { return cfg_.kind; }
  const EncoderConfig& config() const { return cfg_; }
  const dsp::MelFilterBank& bank() const { return bank_; }
  nn::Shape input_shape() const { return input_shape_; }      // per sample
  nn::Shape feature_shape() const { return feature_shape_; }  // per sample
  int flattened_len() const { return flattened_len_; }

  // dsp stage (no learnable parameters)
  nn::Tensor preprocess(const dsp::AudioFrame& frame) const;   // onedcnn / fftfcn
  nn::Tensor preprocess(const AudioRingBuffer& buffer) const;  // melspec

  // learnable stage: [B, input_shape...] -> [B, flattened_len]
  nn::Var apply(nn::Graph& g, nn::Var input);

  // full pass at batch 1
  AudioFeature encode(const dsp::AudioFrame& frame);
  AudioFeature encode(const AudioRingBuffer& buffer);

  nn::ParamStore named_params();

 private:
  EncoderConfig cfg_;
  std::vector<nn::LayerSpec> layers_;
  dsp::MelFilterBank bank_;
  nn::Shape input_shape_;
  nn::Shape feature_shape_;
  int flattened_len_ = 0;
};

// Operation-style wrappers; each checks the encoder kind.
AudioFeature encode_1dcnn(const dsp::AudioFrame& frame, Encoder& weights);
AudioFeature encode_fft(const dsp::AudioFrame& frame, Encoder& weights);
AudioFeature encode_mel(const AudioRingBuffer& buffer, const dsp::MelFilterBank& bank,
                        Encoder& weights);

}  // namespace echofight::encoders
