#include "echofight/encoders.hpp"

#include <algorithm>

#include "echofight/errors.hpp"

namespace echofight::encoders {

using nn::Graph;
using nn::LayerSpec;
using nn::Shape;
using nn::Tensor;
using nn::Var;

const char* encoder_kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::onedcnn: return "onedcnn";
    case EncoderKind::fftfcn: return "fftfcn";
    case EncoderKind::melspec: return "melspec";
  }
  return "?";
}

EncoderKind encoder_kind_from(const std::string& name) {
  if (name == "onedcnn") return EncoderKind::onedcnn;
  if (name == "fftfcn") return EncoderKind::fftfcn;
  if (name == "melspec") return EncoderKind::melspec;
  throw ConfigError("unknown encoder kind '" + name + "' (onedcnn|fftfcn|melspec)");
}

void AudioRingBuffer::reset() {
  for (int i = 0; i < kCapacity; ++i) frames_[static_cast<size_t>(i)] = dsp::AudioFrame::silence();
  head_ = 0;
  initialized_ = true;
}

void AudioRingBuffer::push(const dsp::AudioFrame& frame) {
  if (!initialized_) throw StateError("AudioRingBuffer: push before reset");
  frames_[static_cast<size_t>(head_)] = frame;
  head_ = (head_ + 1) % kCapacity;
}

std::vector<double> AudioRingBuffer::channel(int ch) const {
  if (!initialized_) throw StateError("AudioRingBuffer: read before reset");
  std::vector<double> out;
  out.reserve(static_cast<size_t>(kCapacity) * dsp::kSamplesPerFrame);
  for (int i = 0; i < kCapacity; ++i) {
    const auto& f = frames_[static_cast<size_t>((head_ + i) % kCapacity)];
    const auto& src = ch == 0 ? f.left : f.right;
    out.insert(out.end(), src.begin(), src.end());
  }
  return out;
}

namespace {
void require_frame(const dsp::AudioFrame& frame) {
  if (!frame.valid())
    throw std::invalid_argument("encoder: frame must hold 800 samples per channel in [-1,1]");
}
}  // namespace

Encoder::Encoder(const EncoderConfig& cfg) : cfg_(cfg) {
  switch (cfg_.kind) {
    case EncoderKind::onedcnn: {
      const int len1 = dsp::kSamplesPerFrame / cfg_.cnn_downsample;
      input_shape_ = {2, len1};
      auto c1 = LayerSpec::make_conv1d(2, len1, cfg_.cnn1_channels, cfg_.cnn1_kernel,
                                       cfg_.cnn1_stride, cfg_.cnn1_pad);
      const int len2 = c1.out_shape[1];
      auto c2 = LayerSpec::make_conv1d(cfg_.cnn1_channels, len2, cfg_.cnn2_channels,
                                       cfg_.cnn2_kernel, cfg_.cnn2_stride, cfg_.cnn2_pad);
      feature_shape_ = c2.out_shape;
      layers_.push_back(std::move(c1));
      layers_.push_back(std::move(c2));
      break;
    }
    case EncoderKind::fftfcn: {
      const int per_ch = cfg_.fft_keep / cfg_.fft_downsample +
                         (cfg_.fft_keep % cfg_.fft_downsample ? 1 : 0);
      const int in = 2 * per_ch;
      input_shape_ = {in};
      layers_.push_back(LayerSpec::make_linear(in, cfg_.fcn1_width));
      layers_.push_back(LayerSpec::make_linear(cfg_.fcn1_width, cfg_.fcn2_width));
      feature_shape_ = {cfg_.fcn2_width};
      break;
    }
    case EncoderKind::melspec: {
      bank_ = dsp::build_mel_filterbank(cfg_.mel_bands, cfg_.mel_fft, dsp::kSampleRate);
      const int cols = (AudioRingBuffer::kCapacity * dsp::kSamplesPerFrame - cfg_.mel_window) /
                           cfg_.mel_hop + 1;
      input_shape_ = {2, cfg_.mel_bands, cols};
      const auto& s1 = cfg_.mel_conv1;
      auto c1 = LayerSpec::make_conv2d(2, cfg_.mel_bands, cols, s1.channels, s1.kernel_h,
                                       s1.kernel_w, s1.stride_h, s1.stride_w, s1.pad_h, s1.pad_w);
      const auto& s2 = cfg_.mel_conv2;
      auto c2 = LayerSpec::make_conv2d(s1.channels, c1.out_shape[1], c1.out_shape[2], s2.channels,
                                       s2.kernel_h, s2.kernel_w, s2.stride_h, s2.stride_w,
                                       s2.pad_h, s2.pad_w);
      feature_shape_ = c2.out_shape;
      layers_.push_back(std::move(c1));
      layers_.push_back(std::move(c2));
      break;
    }
  }
  flattened_len_ = static_cast<int>(nn::numel_of(feature_shape_));
}

void Encoder::init(Rng& rng) {
  for (auto& l : layers_) l.init(rng);
}

Tensor Encoder::preprocess(const dsp::AudioFrame& frame) const {
  require_frame(frame);
  switch (cfg_.kind) {
    case EncoderKind::onedcnn: {
      const auto l = dsp::downsample(frame.left, cfg_.cnn_downsample);
      const auto r = dsp::downsample(frame.right, cfg_.cnn_downsample);
      std::vector<double> data;
      data.reserve(l.size() + r.size());
      data.insert(data.end(), l.begin(), l.end());
      data.insert(data.end(), r.begin(), r.end());
      return Tensor::from(input_shape_, std::move(data));
    }
    case EncoderKind::fftfcn: {
      std::vector<double> data;
      for (const auto* ch : {&frame.left, &frame.right}) {
        const auto spec = dsp::fft(*ch, cfg_.fft_padded);
        const auto lm = dsp::log_magnitude(spec, cfg_.fft_keep);
        const auto ds = dsp::downsample(lm, cfg_.fft_downsample);
        data.insert(data.end(), ds.begin(), ds.end());
      }
      return Tensor::from(input_shape_, std::move(data));
    }
    case EncoderKind::melspec:
      throw std::invalid_argument("melspec encoder reads the ring buffer, not a single frame");
  }
  throw StateError("preprocess: unknown encoder kind");
}

Tensor Encoder::preprocess(const AudioRingBuffer& buffer) const {
  if (cfg_.kind != EncoderKind::melspec)
    throw std::invalid_argument(std::string(encoder_kind_name(cfg_.kind)) +
                                " encoder reads single frames, not the ring buffer");
  if (!buffer.initialized()) throw StateError("melspec encoder: ring buffer not initialized");
  std::vector<double> data;
  data.reserve(static_cast<size_t>(nn::numel_of(input_shape_)));
  for (int ch = 0; ch < 2; ++ch) {
    const auto spec = dsp::stft_mel(buffer.channel(ch), bank_, cfg_.mel_window, cfg_.mel_hop);
    data.insert(data.end(), spec.values.begin(), spec.values.end());
  }
  return Tensor::from(input_shape_, std::move(data));
}

Var Encoder::apply(Graph& g, Var input) {
  switch (cfg_.kind) {
    case EncoderKind::onedcnn:
    case EncoderKind::melspec: {
      Var h = layers_[0].apply(g, input).first;
      h = g.relu(h);
      h = layers_[1].apply(g, h).first;
      h = g.relu(h);
      return g.reshape(h, {g.shape(h)[0], flattened_len_});
    }
    case EncoderKind::fftfcn: {
      Var h = layers_[0].apply(g, input).first;
      h = g.relu(h);
      h = layers_[1].apply(g, h).first;
      return h;
    }
  }
  throw StateError("apply: unknown encoder kind");
}

namespace {
AudioFeature run_single(Encoder& enc, Graph& g, const Tensor& input) {
  Shape batched = input.shape;
  batched.insert(batched.begin(), 1);
  Var x = g.reshape(g.constant(input), batched);
  Var flat = enc.apply(g, x);
  AudioFeature f;
  f.kind = enc.kind();
  f.tensor = nn::Tensor::from(enc.feature_shape(), g.val(flat));
  f.flattened_len = enc.flattened_len();
  return f;
}
}  // namespace

AudioFeature Encoder::encode(const dsp::AudioFrame& frame) {
  Graph g;
  return run_single(*this, g, preprocess(frame));
}

AudioFeature Encoder::encode(const AudioRingBuffer& buffer) {
  Graph g;
  return run_single(*this, g, preprocess(buffer));
}

nn::ParamStore Encoder::named_params() {
  nn::ParamStore store;
  const char* names[] = {"encoder.l1", "encoder.l2"};
  for (size_t i = 0; i < layers_.size(); ++i)
    for (auto& e : layers_[i].named_params(names[i])) store.push_back(e);
  return store;
}

AudioFeature encode_1dcnn(const dsp::AudioFrame& frame, Encoder& weights) {
  if (weights.kind() != EncoderKind::onedcnn)
    throw std::invalid_argument("encode_1dcnn: encoder kind mismatch");
  return weights.encode(frame);
}

AudioFeature encode_fft(const dsp::AudioFrame& frame, Encoder& weights) {
  if (weights.kind() != EncoderKind::fftfcn)
    throw std::invalid_argument("encode_fft: encoder kind mismatch");
  return weights.encode(frame);
}

AudioFeature encode_mel(const AudioRingBuffer& buffer, const dsp::MelFilterBank& bank,
                        Encoder& weights) {
  if (weights.kind() != EncoderKind::melspec)
    throw std::invalid_argument("encode_mel: encoder kind mismatch");
  if (bank.n_mels != weights.bank().n_mels || bank.n_fft != weights.bank().n_fft)
    throw std::invalid_argument("encode_mel: filter bank does not match the encoder");
  return weights.encode(buffer);
}

}  // namespace echofight::encoders
