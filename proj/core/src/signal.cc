// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mctse/signal.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <tuple>

#include "mctse/errors.h"
#include "mctse/ops.h"

namespace mctse {

using detail::grad_buffer;
using detail::make_result;

double AudioClip::energy() const {
  double e = 0.0;
  for (double v : samples) e += v * v;
  return e;
}

Tensor AudioClip::to_tensor() const {
  if (samples.empty()) throw InputError("empty audio clip");
  return Tensor::vector(samples);
}

AudioClip AudioClip::from_tensor(const Tensor& t, int sample_rate) {
  auto v = t.values();
  return {{v.begin(), v.end()}, sample_rate};
}

std::size_t StftConfig::frames(std::size_t num_samples) const {
  return 1 + (num_samples + 2 * pad() - win_len) / hop;
}

void StftConfig::validate() const {
  if (fft_size == 0 || win_len == 0 || hop == 0) throw ConfigError("stft sizes must be positive");
  if (!(hop <= win_len && win_len <= fft_size)) {
    throw ConfigError("stft config needs hop <= win_len <= fft_size, got hop=" +
                      std::to_string(hop) + " win_len=" + std::to_string(win_len) +
                      " fft_size=" + std::to_string(fft_size));
  }
}

std::vector<double> periodic_hann(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                static_cast<double>(length));
  }
  return w;
}

namespace {

// Windowed DFT matrices. Analysis: [win x F]; synthesis: [F x win].
struct Bases {
  Tensor analysis_cos, analysis_sin, synthesis_cos, synthesis_sin;
  std::vector<double> window;
};

const Bases& bases_for(const StftConfig& cfg) {
  static std::mutex mu;
  static std::map<std::tuple<std::size_t, std::size_t>, std::unique_ptr<Bases>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(cfg.fft_size, cfg.win_len);
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;

  const std::size_t n_fft = cfg.fft_size, win = cfg.win_len, f = cfg.bins();
  auto b = std::make_unique<Bases>();
  b->window = periodic_hann(win);
  std::vector<double> ac(win * f), as(win * f), sc(f * win), ss(f * win);
  for (std::size_t n = 0; n < win; ++n) {
    for (std::size_t k = 0; k < f; ++k) {
      // Reduce k*n mod n_fft to keep the angle small and exact.
      const double ang = 2.0 * std::numbers::pi * static_cast<double>((k * n) % n_fft) /
                         static_cast<double>(n_fft);
      const double c = std::cos(ang), s = std::sin(ang);
      const double wn = b->window[n];
      ac[n * f + k] = wn * c;
      as[n * f + k] = -wn * s;
      const bool edge = (k == 0) || (2 * k == n_fft);
      const double weight = (edge ? 1.0 : 2.0) / static_cast<double>(n_fft);
      sc[k * win + n] = weight * c * wn;
      ss[k * win + n] = -weight * s * wn;
    }
  }
  b->analysis_cos = Tensor({win, f}, std::move(ac));
  b->analysis_sin = Tensor({win, f}, std::move(as));
  b->synthesis_cos = Tensor({f, win}, std::move(sc));
  b->synthesis_sin = Tensor({f, win}, std::move(ss));
  auto& ref = *b;
  cache.emplace(key, std::move(b));
  return ref;
}

// frames[t][n] = wave[reflect(t*hop + n - pad)]
Tensor frame_signal(const Tensor& wave, const StftConfig& cfg) {
  const std::size_t len = wave.numel();
  const long pad = static_cast<long>(cfg.pad());
  const std::size_t t_frames = cfg.frames(len), win = cfg.win_len;
  std::vector<std::size_t> src(t_frames * win);
  for (std::size_t t = 0; t < t_frames; ++t) {
    for (std::size_t n = 0; n < win; ++n) {
      long i = static_cast<long>(t * cfg.hop + n) - pad;
      const long last = static_cast<long>(len) - 1;
      if (i < 0) i = -i;
      if (i > last) i = 2 * last - i;
      src[t * win + n] = static_cast<std::size_t>(i);
    }
  }
  auto xv = wave.values();
  std::vector<double> y(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) y[i] = xv[src[i]];
  return make_result({t_frames, win}, std::move(y), {wave},
                     [wave, src = std::move(src)](std::span<const double> g) {
                       auto buf = grad_buffer(wave);
                       for (std::size_t i = 0; i < g.size(); ++i) buf[src[i]] += g[i];
                     });
}

}  // namespace

ComplexSpec stft(const Tensor& wave, const StftConfig& cfg) {
  cfg.validate();
  if (wave.rank() != 1) throw DimensionError("stft expects a 1-D waveform, got " + to_string(wave.shape()));
  if (wave.numel() < cfg.win_len) {
    throw InputError("clip of " + std::to_string(wave.numel()) +
                     " samples is shorter than the analysis window (" +
                     std::to_string(cfg.win_len) + ")");
  }
  const Bases& b = bases_for(cfg);
  Tensor frames = frame_signal(wave, cfg);
  return {matmul(frames, b.analysis_cos), matmul(frames, b.analysis_sin), cfg};
}

ComplexSpec stft(const AudioClip& clip, const StftConfig& cfg) {
  return stft(clip.to_tensor(), cfg);
}

Tensor istft(const ComplexSpec& spec, std::size_t out_len) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (spec.real.rank() != 2 || spec.real.shape() != spec.imag.shape() ||
      spec.real.dim(1) != cfg.bins()) {
    throw DimensionError("istft: spectrum " + to_string(spec.real.shape()) + "/" +
                         to_string(spec.imag.shape()) + " inconsistent with " +
                         std::to_string(cfg.bins()) + " bins");
  }
  if (out_len == 0) throw ContractError("istft: out_len must be positive");
  const Bases& b = bases_for(cfg);
  Tensor frames = add(matmul(spec.real, b.synthesis_cos), matmul(spec.imag, b.synthesis_sin));

  const std::size_t t_frames = spec.frames(), win = cfg.win_len, hop = cfg.hop;
  const std::size_t pad = cfg.pad();
  const std::size_t padded_len = (t_frames - 1) * hop + win;
  std::vector<double> norm(padded_len, 0.0);
  for (std::size_t t = 0; t < t_frames; ++t)
    for (std::size_t n = 0; n < win; ++n) norm[t * hop + n] += b.window[n] * b.window[n];
  const std::size_t covered = padded_len > pad ? std::min(out_len, padded_len - pad) : 0;
  for (std::size_t j = 0; j < covered; ++j) {
    if (norm[j + pad] < 1e-10) {
      throw ConfigError("istft: window normalizer vanishes at sample " + std::to_string(j) +
                        " (win_len=" + std::to_string(win) + ", hop=" + std::to_string(hop) + ")");
    }
  }
  auto fv = frames.values();
  std::vector<double> y(out_len, 0.0);
  for (std::size_t t = 0; t < t_frames; ++t) {
    for (std::size_t n = 0; n < win; ++n) {
      const std::size_t i = t * hop + n;
      if (i < pad || i - pad >= covered) continue;
      y[i - pad] += fv[t * win + n];
    }
  }
  for (std::size_t j = 0; j < covered; ++j) y[j] /= norm[j + pad];
  return make_result({out_len}, std::move(y), {frames},
                     [frames, norm = std::move(norm), t_frames, win, hop, pad,
                      covered](std::span<const double> g) {
                       auto buf = grad_buffer(frames);
                       for (std::size_t t = 0; t < t_frames; ++t) {
                         for (std::size_t n = 0; n < win; ++n) {
                           const std::size_t i = t * hop + n;
                           if (i < pad || i - pad >= covered) continue;
                           buf[t * win + n] += g[i - pad] / norm[i];
                         }
                       }
                     });
}

AudioClip istft_clip(const ComplexSpec& spec, std::size_t out_len, int sample_rate) {
  return AudioClip::from_tensor(istft(spec, out_len), sample_rate);
}

MixResult mix_at_snr(const AudioClip& target, const AudioClip& interferer, double snr_db) {
  if (target.size() != interferer.size()) {
    throw InputError("mix_at_snr: length mismatch " + std::to_string(target.size()) + " vs " +
                     std::to_string(interferer.size()));
  }
  if (target.sample_rate != interferer.sample_rate) throw InputError("mix_at_snr: sample rate mismatch");
  if (!std::isfinite(snr_db)) throw InputError("mix_at_snr: snr must be finite");
  const double es = target.energy(), en = interferer.energy();
  if (!(es > 0.0) || !(en > 0.0)) throw InputError("mix_at_snr: zero-energy input");
  const double g = std::sqrt(es / (en * std::pow(10.0, snr_db / 10.0)));
  MixResult r;
  r.gain = g;
  r.scaled_interferer = interferer;
  for (auto& v : r.scaled_interferer.samples) v *= g;
  r.mixture = target;
  for (std::size_t i = 0; i < r.mixture.size(); ++i) r.mixture.samples[i] += r.scaled_interferer.samples[i];
  return r;
}

double snr(const AudioClip& reference, const AudioClip& estimate) {
  if (reference.size() != estimate.size()) {
    throw InputError("snr: length mismatch " + std::to_string(reference.size()) + " vs " +
                     std::to_string(estimate.size()));
  }
  const double es = reference.energy();
  if (!(es > 0.0)) throw InputError("snr: zero-energy reference");
  double err = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference.samples[i] - estimate.samples[i];
    err += d * d;
  }
  const double db = 10.0 * std::log10(es / std::max(err, 1e-12 * es));
  return std::clamp(db, -kSnrClampDb, kSnrClampDb);
}

double snr_improvement(const AudioClip& mixture, const AudioClip& estimate,
                       const AudioClip& reference) {
  if (mixture.size() != estimate.size()) throw InputError("snr_improvement: length mismatch");
  return snr(reference, estimate) - snr(reference, mixture);
}

}  // namespace mctse
