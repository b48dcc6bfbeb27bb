#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace echofight::dsp {

constexpr int kSampleRate = 48000;     // Hz
constexpr int kSamplesPerFrame = 800;  // one 60 fps game frame per channel
constexpr double kLogFloor = 1e-6;     // added before ln() to avoid ln(0)

// One game frame of stereo normalized samples, the agent's raw observation.
struct AudioFrame {
  std::vector<double> left;
  std::vector<double> right;
  int64_t frame_index = 0;

  static AudioFrame silence(int64_t frame_index = 0);
  bool valid() const;  // both channels 800 samples, all within [-1, 1]
};

struct ComplexSpectrum {
  std::vector<std::complex<double>> bins;  // length is a power of two
};

struct MelFilterBank {
  int n_mels = 0;
  int n_fft = 0;
  double sample_rate = 0.0;
  // Row-major n_mels x (n_fft/2 + 1), nonnegative triangular rows.
  std::vector<double> weights;
  // Peak (triangle apex) frequency of each filter, strictly increasing.
  std::vector<double> center_hz;
  // Per row: [first, last) bin indices of the nonzero support, for sparse
  // application of the bank to a power spectrum.
  std::vector<int> row_begin;
  std::vector<int> row_end;

  int n_bins() const { return n_fft / 2 + 1; }
  double weight(int mel, int bin) const { return weights[static_cast<size_t>(mel) * n_bins() + bin]; }
};

struct MelSpectrogram {
  int n_mels = 0;
  int n_cols = 0;
  std::vector<double> values;  // row-major n_mels x n_cols, log-mel energies
  int hop_samples = 0;
  int window_samples = 0;

  double at(int mel, int col) const { return values[static_cast<size_t>(mel) * n_cols + col]; }
};

bool is_power_of_two(int n);

// DFT of the zero-padded signal. padded_len must be a power of two >= signal
// length. Power-of-two radix-2 only; arbitrary lengths are out of scope.
ComplexSpectrum fft(const std::vector<double>& signal, int padded_len);

// Inverse transform; returns the real part (inputs here are spectra of real
// signals, the imaginary residual is checked by tests).
std::vector<double> ifft(const ComplexSpectrum& spectrum);

// ln(|bin_k| + 1e-6) for k = 0..keep-1. keep must not exceed half the
// spectrum length.
std::vector<double> log_magnitude(const ComplexSpectrum& spectrum, int keep);

// output[i] = input[i * factor]; length ceil(len / factor).
std::vector<double> downsample(const std::vector<double>& signal, int factor);

// HTK mel scale: m = 2595 * log10(1 + f / 700).
double hz_to_mel(double f);
double mel_to_hz(double m);

// Triangular filters with apexes equally spaced on the mel axis between 0 and
// sample_rate / 2, sampled at the n_fft/2 + 1 one-sided bin frequencies.
MelFilterBank build_mel_filterbank(int n_mels, int n_fft, double sample_rate);

// Hann-windowed STFT mapped through the bank:
//   column t = ln(bank * |FFT(hann(signal[t*hop .. t*hop+window]))|^2 + 1e-6)
// Each window is zero-padded to bank.n_fft, which must be a power of two
// >= window_samples.
MelSpectrogram stft_mel(const std::vector<double>& signal, const MelFilterBank& bank,
                        int window_samples, int hop_samples);

// Golden test vector files: one-line header "dsp-golden-v1 <len>" followed by
// <len> little-endian 64-bit floats.
void write_golden(const std::string& path, const std::vector<double>& v);
std::vector<double> read_golden(const std::string& path);

}  // namespace echofight::dsp
