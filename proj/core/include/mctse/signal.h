// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mctse/tensor.h"

namespace mctse {

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double energy() const;
  // [N] tensor view of the samples (copy, no gradient).
  Tensor to_tensor() const;
  static AudioClip from_tensor(const Tensor& t, int sample_rate = 16000);
};

// Periodic Hann analysis/synthesis window, reflect padding of win_len/2 on
// both sides, onesided spectrum with fft_size/2 + 1 bins.
struct StftConfig {
  std::size_t fft_size = 512;
  std::size_t win_len = 400;
  std::size_t hop = 100;

  std::size_t bins() const { return fft_size / 2 + 1; }
  std::size_t pad() const { return win_len / 2; }
  std::size_t frames(std::size_t num_samples) const;
  // Throws ConfigError unless hop <= win_len <= fft_size and all positive.
  void validate() const;
  bool operator==(const StftConfig&) const = default;
};

// Real and imaginary parts, each [T x F].
struct ComplexSpec {
  Tensor real;
  Tensor imag;
  StftConfig config;

  std::size_t frames() const { return real.dim(0); }
  std::size_t bins() const { return real.dim(1); }
};

std::vector<double> periodic_hann(std::size_t length);

// Differentiable with respect to `wave` ([N]).
ComplexSpec stft(const Tensor& wave, const StftConfig& cfg);
ComplexSpec stft(const AudioClip& clip, const StftConfig& cfg);

// Weighted overlap-add with squared-window normalization; the result is
// trimmed or zero-padded to `out_len`. Differentiable with respect to the
// spectrum. Throws ConfigError if the normalizer drops below 1e-10 at any
// covered sample.
Tensor istft(const ComplexSpec& spec, std::size_t out_len);
AudioClip istft_clip(const ComplexSpec& spec, std::size_t out_len, int sample_rate = 16000);

struct MixResult {
  AudioClip mixture;
  AudioClip scaled_interferer;
  double gain = 1.0;
};

// Scales `interferer` so that 10*log10(|target|^2 / |g*interferer|^2) equals
// `snr_db`, then adds it to `target`.
MixResult mix_at_snr(const AudioClip& target, const AudioClip& interferer, double snr_db);

inline constexpr double kSnrClampDb = 120.0;

// 10*log10(|s|^2 / max(|s - est|^2, 1e-12 |s|^2)), clamped to +-120 dB.
double snr(const AudioClip& reference, const AudioClip& estimate);
double snr_improvement(const AudioClip& mixture, const AudioClip& estimate,
                       const AudioClip& reference);

enum class WavFormat { kPcm16, kFloat32 };

// Mono 16-bit PCM or 32-bit float. PCM16 is normalized to [-1, 1).
AudioClip read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioClip& clip,
               WavFormat format = WavFormat::kFloat32);

}  // namespace mctse
