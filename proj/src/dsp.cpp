#include "echofight/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace echofight::dsp {

namespace {
constexpr double kPi = 3.14159265358979323846;

int log2_of_pow2(int n) {
  int k = 0;
  while ((1 << k) < n) ++k;
  return k;
}

// In-place iterative radix-2 Cooley-Tukey.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const int n = static_cast<int>(a.size());
  const int logn = log2_of_pow2(n);
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int s = 1; s <= logn; ++s) {
    const int m = 1 << s;
    const double ang = (inverse ? 2.0 : -2.0) * kPi / m;
    const std::complex<double> wm(std::cos(ang), std::sin(ang));
    for (int k = 0; k < n; k += m) {
      std::complex<double> w(1.0, 0.0);
      for (int j = 0; j < m / 2; ++j) {
        const std::complex<double> t = w * a[k + j + m / 2];
        const std::complex<double> u = a[k + j];
        a[k + j] = u + t;
        a[k + j + m / 2] = u - t;
        w *= wm;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}
}  // namespace

AudioFrame AudioFrame::silence(int64_t frame_index) {
  AudioFrame f;
  f.left.assign(kSamplesPerFrame, 0.0);
  f.right.assign(kSamplesPerFrame, 0.0);
  f.frame_index = frame_index;
  return f;
}

bool AudioFrame::valid() const {
  if (left.size() != kSamplesPerFrame || right.size() != kSamplesPerFrame) return false;
  auto in_range = [](const std::vector<double>& ch) {
    return std::all_of(ch.begin(), ch.end(),
                       [](double s) { return s >= -1.0 && s <= 1.0; });
  };
  return in_range(left) && in_range(right);
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

ComplexSpectrum fft(const std::vector<double>& signal, int padded_len) {
  if (!is_power_of_two(padded_len))
    throw std::invalid_argument("fft: padded_len " + std::to_string(padded_len) +
                                " is not a power of two");
  if (padded_len < static_cast<int>(signal.size()))
    throw std::invalid_argument("fft: padded_len " + std::to_string(padded_len) +
                                " shorter than signal length " + std::to_string(signal.size()));
  ComplexSpectrum out;
  out.bins.assign(padded_len, {0.0, 0.0});
  for (size_t i = 0; i < signal.size(); ++i) out.bins[i] = {signal[i], 0.0};
  fft_inplace(out.bins, false);
  return out;
}

std::vector<double> ifft(const ComplexSpectrum& spectrum) {
  if (!is_power_of_two(static_cast<int>(spectrum.bins.size())))
    throw std::invalid_argument("ifft: spectrum length is not a power of two");
  auto a = spectrum.bins;
  fft_inplace(a, true);
  std::vector<double> out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i].real();
  return out;
}

std::vector<double> log_magnitude(const ComplexSpectrum& spectrum, int keep) {
  const int half = static_cast<int>(spectrum.bins.size()) / 2;
  if (keep < 0 || keep > half)
    throw std::invalid_argument("log_magnitude: keep " + std::to_string(keep) +
                                " out of range [0, " + std::to_string(half) + "]");
  std::vector<double> out(keep);
  for (int k = 0; k < keep; ++k) out[k] = std::log(std::abs(spectrum.bins[k]) + kLogFloor);
  return out;
}

std::vector<double> downsample(const std::vector<double>& signal, int factor) {
  if (factor < 1) throw std::invalid_argument("downsample: factor must be >= 1");
  std::vector<double> out;
  out.reserve((signal.size() + factor - 1) / factor);
  for (size_t i = 0; i < signal.size(); i += factor) out.push_back(signal[i]);
  return out;
}

double hz_to_mel(double f) {
  if (f < 0.0) throw std::invalid_argument("hz_to_mel: negative frequency");
  return 2595.0 * std::log10(1.0 + f / 700.0);
}

double mel_to_hz(double m) {
  if (m < 0.0) throw std::invalid_argument("mel_to_hz: negative mel value");
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

MelFilterBank build_mel_filterbank(int n_mels, int n_fft, double sample_rate) {
  if (n_mels < 1) throw std::invalid_argument("build_mel_filterbank: n_mels must be >= 1");
  if (n_fft < 2 || n_fft % 2 != 0)
    throw std::invalid_argument("build_mel_filterbank: n_fft must be even and >= 2");
  if (sample_rate <= 0.0)
    throw std::invalid_argument("build_mel_filterbank: sample_rate must be positive");
  const int n_bins = n_fft / 2 + 1;
  if (n_mels + 2 > n_bins)
    throw std::invalid_argument("build_mel_filterbank: " + std::to_string(n_mels) +
                                " filters collapse over " + std::to_string(n_bins) + " bins");

  MelFilterBank bank;
  bank.n_mels = n_mels;
  bank.n_fft = n_fft;
  bank.sample_rate = sample_rate;
  bank.weights.assign(static_cast<size_t>(n_mels) * n_bins, 0.0);
  bank.center_hz.resize(n_mels);
  bank.row_begin.assign(n_mels, n_bins);
  bank.row_end.assign(n_mels, 0);

  // n_mels + 2 points equally spaced on the mel axis; triangle m spans
  // (hz[m], hz[m+2]) with apex hz[m+1]. Weights are sampled at the exact bin
  // frequencies rather than snapped to integer bins, so narrow low-frequency
  // filters keep distinct apexes.
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> hz(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    hz[i] = mel_to_hz(mel_max * static_cast<double>(i) / (n_mels + 1));

  const double bin_hz = sample_rate / n_fft;
  for (int m = 0; m < n_mels; ++m) {
    const double lo = hz[m], mid = hz[m + 1], hi = hz[m + 2];
    bank.center_hz[m] = mid;
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f < hi) w = (f <= mid) ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      if (w > 0.0) {
        bank.weights[static_cast<size_t>(m) * n_bins + k] = w;
        bank.row_begin[m] = std::min(bank.row_begin[m], k);
        bank.row_end[m] = k + 1;
      }
    }
    if (bank.row_begin[m] >= bank.row_end[m]) {
      bank.row_begin[m] = 0;
      bank.row_end[m] = 0;
    }
  }
  return bank;
}

MelSpectrogram stft_mel(const std::vector<double>& signal, const MelFilterBank& bank,
                        int window_samples, int hop_samples) {
  if (window_samples < 1 || hop_samples < 1)
    throw std::invalid_argument("stft_mel: window and hop must be >= 1");
  if (static_cast<int>(signal.size()) < window_samples)
    throw std::invalid_argument("stft_mel: signal length " + std::to_string(signal.size()) +
                                " shorter than window " + std::to_string(window_samples));
  if (!is_power_of_two(bank.n_fft) || bank.n_fft < window_samples)
    throw std::invalid_argument("stft_mel: bank n_fft must be a power of two >= window");

  const int n = static_cast<int>(signal.size());
  const int n_cols = (n - window_samples) / hop_samples + 1;
  const int n_bins = bank.n_bins();

  // Periodic Hann window.
  std::vector<double> hann(window_samples);
  for (int i = 0; i < window_samples; ++i)
    hann[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / window_samples));

  MelSpectrogram spec;
  spec.n_mels = bank.n_mels;
  spec.n_cols = n_cols;
  spec.hop_samples = hop_samples;
  spec.window_samples = window_samples;
  spec.values.assign(static_cast<size_t>(bank.n_mels) * n_cols, 0.0);

  std::vector<std::complex<double>> buf(bank.n_fft);
  std::vector<double> power(n_bins);
  for (int t = 0; t < n_cols; ++t) {
    const int off = t * hop_samples;
    std::fill(buf.begin(), buf.end(), std::complex<double>{0.0, 0.0});
    for (int i = 0; i < window_samples; ++i) buf[i] = {signal[off + i] * hann[i], 0.0};
    fft_inplace(buf, false);
    for (int k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
    for (int m = 0; m < bank.n_mels; ++m) {
      double acc = 0.0;
      const double* row = &bank.weights[static_cast<size_t>(m) * n_bins];
      for (int k = bank.row_begin[m]; k < bank.row_end[m]; ++k) acc += row[k] * power[k];
      spec.values[static_cast<size_t>(m) * n_cols + t] = std::log(acc + kLogFloor);
    }
  }
  return spec;
}

void write_golden(const std::string& path, const std::vector<double>& v) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_golden: cannot open " + path);
  f << "dsp-golden-v1 " << v.size() << "\n";
  static_assert(sizeof(double) == 8);
  f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

std::vector<double> read_golden(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_golden: cannot open " + path);
  std::string tag;
  size_t len = 0;
  f >> tag >> len;
  if (tag != "dsp-golden-v1") throw std::runtime_error("read_golden: bad header in " + path);
  f.get();  // newline
  std::vector<double> v(len);
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(len * 8));
  if (!f) throw std::runtime_error("read_golden: truncated file " + path);
  return v;
}

}  // namespace echofight::dsp
