// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mctse/data_sim.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "mctse/errors.h"
#include "mctse/random.h"

namespace mctse {

namespace {

constexpr double kBandFloorHz = 150.0;
constexpr double kBandCeilHz = 7000.0;
constexpr double kBandGuard = 1.06;
constexpr std::size_t kNoiseComponents = 48;
constexpr double kVideoJitter = 0.3;

constexpr std::uint64_t kTargetSalt = 1, kInterfererSalt = 2, kTextSalt = 3, kVideoSalt = 4;
constexpr std::uint64_t kTemplateSalt = 0x76696465;

const char* const kNouns[kMaxClasses] = {"whistle", "siren", "hum",   "rain",  "engine", "bell",
                                         "buzz",    "chime", "drum",  "wind",  "bird",   "horn",
                                         "motor",   "alarm", "flute", "static"};

const char* const kAdjectives[] = {"loud",   "soft",  "steady", "sharp",  "distant",
                                   "clear",  "faint", "bright", "muffled", "gentle",
                                   "harsh",  "low",   "high",   "repeating", "continuous",
                                   "rising"};

const char* const kOtherWords[] = {"a",     "the",     "of",         "with",      "and",   "is",
                                   "sound", "noise",   "heard",      "in",        "background",
                                   "foreground", "there", "from",    "far",       "away",  "near",
                                   "by",    "someone", "hears",      "recording", "clip",  "some",
                                   "short", "long",    "quiet",      "strong",    "weak",  "falling",
                                   "humming", "nearby", "outside"};

// Slots: "A" adjective, "N" class noun.
const std::vector<std::vector<std::string>> kTemplates = {
    {"a", "A", "N", "sound"},
    {"the", "N", "sound"},
    {"A", "N", "in", "the", "background"},
    {"a", "A", "N", "is", "heard"},
    {"there", "is", "a", "A", "N", "sound", "in", "the", "foreground"},
    {"a", "A", "and", "A", "N", "sound", "from", "far", "away"},
    {"someone", "hears", "the", "N"},
};

// Sum of unit sinusoids via phasor rotation.
void add_tone(std::vector<double>& out, double freq, double amp, double phase, int rate) {
  const double w = 2.0 * std::numbers::pi * freq / rate;
  const double c = std::cos(w), s = std::sin(w);
  double x = std::cos(phase), y = std::sin(phase);
  for (auto& v : out) {
    v += amp * y;
    const double nx = x * c - y * s;
    y = x * s + y * c;
    x = nx;
  }
}

void band_noise(std::vector<double>& out, double lo, double hi, Rng& rng, int rate) {
  for (std::size_t k = 0; k < kNoiseComponents; ++k) {
    const double f = uniform(rng, lo, hi);
    add_tone(out, f, uniform(rng, 0.5, 1.0), uniform(rng, 0.0, 2.0 * std::numbers::pi), rate);
  }
}

double log_interp(double lo, double hi, double frac) { return lo * std::pow(hi / lo, frac); }

}  // namespace

std::string_view synth_kind_name(SynthKind k) {
  switch (k) {
    case SynthKind::kToneComplex: return "tone-complex";
    case SynthKind::kChirp: return "chirp";
    case SynthKind::kNoiseBand: return "noise-band";
    case SynthKind::kAmNoise: return "am-noise";
  }
  return "?";
}

std::vector<SoundClass> make_catalog(std::size_t num_classes) {
  if (num_classes < kMinClasses || num_classes > kMaxClasses) {
    throw InputError("number of classes must be in [" + std::to_string(kMinClasses) + ", " +
                     std::to_string(kMaxClasses) + "], got " + std::to_string(num_classes));
  }
  std::vector<SoundClass> out;
  for (std::size_t i = 0; i < num_classes; ++i) {
    SoundClass c;
    c.id = i;
    c.name = kNouns[i];
    c.kind = static_cast<SynthKind>(i % 4);
    const double e0 = log_interp(kBandFloorHz, kBandCeilHz, double(i) / num_classes);
    const double e1 = log_interp(kBandFloorHz, kBandCeilHz, double(i + 1) / num_classes);
    c.band_lo = e0 * kBandGuard;
    c.band_hi = e1 / kBandGuard;
    switch (c.kind) {
      case SynthKind::kToneComplex:
        for (double frac : {0.2, 0.5, 0.8}) c.partials.push_back(log_interp(c.band_lo, c.band_hi, frac));
        break;
      case SynthKind::kChirp:
        c.f0 = log_interp(c.band_lo, c.band_hi, 0.1);
        c.f1 = log_interp(c.band_lo, c.band_hi, 0.9);
        break;
      case SynthKind::kNoiseBand: break;
      case SynthKind::kAmNoise: c.am_rate = 3.0 + static_cast<double>(i % 3); break;
    }
    out.push_back(std::move(c));
  }
  return out;
}

AudioClip gen_source(const SoundClass& cls, std::uint64_t seed, double seconds, int sample_rate) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  if (n == 0 || sample_rate <= 0) throw InputError("gen_source: empty clip requested");
  Rng rng(mix_seed(seed, cls.id));
  std::vector<double> x(n, 0.0);
  const double two_pi = 2.0 * std::numbers::pi;
  switch (cls.kind) {
    case SynthKind::kToneComplex:
      for (double f : cls.partials) add_tone(x, f, uniform(rng, 0.5, 1.0), uniform(rng, 0.0, two_pi), sample_rate);
      break;
    case SynthKind::kChirp: {
      const bool up = uniform01(rng) < 0.5;
      const double fa = up ? cls.f0 : cls.f1, fb = up ? cls.f1 : cls.f0;
      double phase = uniform(rng, 0.0, two_pi);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::sin(phase);
        const double f = fa + (fb - fa) * static_cast<double>(i) / n;
        phase += two_pi * f / sample_rate;
      }
      break;
    }
    case SynthKind::kNoiseBand: band_noise(x, cls.band_lo, cls.band_hi, rng, sample_rate); break;
    case SynthKind::kAmNoise: {
      band_noise(x, cls.band_lo, cls.band_hi, rng, sample_rate);
      const double phi = uniform(rng, 0.0, two_pi);
      for (std::size_t i = 0; i < n; ++i)
        x[i] *= 0.55 + 0.45 * std::sin(two_pi * cls.am_rate * i / sample_rate + phi);
      break;
    }
  }
  // Slow random envelope so clips of one class differ in loudness over time.
  const double env_rate = uniform(rng, 0.25, 1.0), env_phase = uniform(rng, 0.0, two_pi);
  for (std::size_t i = 0; i < n; ++i)
    x[i] *= 0.7 + 0.3 * std::sin(two_pi * env_rate * i / sample_rate + env_phase);
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::fabs(v));
  for (auto& v : x) v *= kSourcePeak / peak;
  return {std::move(x), sample_rate};
}

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v(std::begin(kNouns), std::end(kNouns));
    v.insert(v.end(), std::begin(kAdjectives), std::end(kAdjectives));
    v.insert(v.end(), std::begin(kOtherWords), std::end(kOtherWords));
    return v;
  }();
  return vocab;
}

std::size_t vocab_index(const std::string& word) {
  const auto& v = vocabulary();
  auto it = std::find(v.begin(), v.end(), word);
  if (it == v.end()) throw InputError("word '" + word + "' is not in the vocabulary");
  return static_cast<std::size_t>(it - v.begin());
}

std::vector<std::size_t> text_clue(std::size_t class_id, std::uint64_t seed) {
  if (class_id >= kMaxClasses) throw InputError("class id " + std::to_string(class_id) + " out of range");
  Rng rng(mix_seed(seed, kTextSalt));
  const auto& tmpl = kTemplates[uniform_index(rng, kTemplates.size())];
  std::vector<std::size_t> out;
  for (const auto& slot : tmpl) {
    if (slot == "N") out.push_back(class_id);
    else if (slot == "A") out.push_back(vocab_index(kAdjectives[uniform_index(rng, std::size(kAdjectives))]));
    else out.push_back(vocab_index(slot));
  }
  return out;
}

std::string decode_tokens(const std::vector<std::size_t>& tokens) {
  const auto& v = vocabulary();
  std::string s;
  for (std::size_t id : tokens) {
    if (!s.empty()) s += ' ';
    s += id < v.size() ? v[id] : "<" + std::to_string(id) + ">";
  }
  return s;
}

std::optional<std::size_t> class_from_tokens(const std::vector<std::size_t>& tokens) {
  std::optional<std::size_t> found;
  for (std::size_t id : tokens) {
    if (id >= kMaxClasses) continue;
    if (found && *found != id) return std::nullopt;
    found = id;
  }
  return found;
}

std::vector<std::size_t> parse_tokens(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = text.find(':', start);
    const std::string part = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (part.empty()) throw InputError("empty token in text clue '" + text + "'");
    if (std::all_of(part.begin(), part.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
      if (part.size() > 9) throw InputError("token id '" + part + "' out of range");
      out.push_back(std::stoul(part));
    } else {
      out.push_back(vocab_index(part));
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

Tensor video_template(std::size_t class_id) {
  Rng rng(mix_seed(kTemplateSalt, class_id));
  std::vector<double> v(kVideoFrames * kVideoDim);
  // Smooth in time: each feature is a slow sinusoid with a class-specific
  // frequency and phase.
  for (std::size_t j = 0; j < kVideoDim; ++j) {
    const double amp = uniform(rng, 0.5, 1.5), freq = uniform(rng, 0.02, 0.15);
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi), offset = gaussian(rng);
    for (std::size_t t = 0; t < kVideoFrames; ++t)
      v[t * kVideoDim + j] = offset + amp * std::sin(2.0 * std::numbers::pi * freq * t + phase);
  }
  return Tensor({kVideoFrames, kVideoDim}, std::move(v));
}

Tensor video_clue(std::size_t class_id, std::uint64_t video_seed) {
  Tensor base = video_template(class_id);
  Rng rng(video_seed);
  std::vector<double> v(base.values().begin(), base.values().end());
  for (auto& x : v) x += kVideoJitter * gaussian(rng);
  return Tensor(base.shape(), std::move(v));
}

std::uint64_t video_seed_for(std::uint64_t seed) { return mix_seed(seed, kVideoSalt); }

MixtureExample make_example(const std::vector<SoundClass>& catalog, std::size_t target_class,
                            std::size_t interferer_class, double snr_db, std::uint64_t seed) {
  if (target_class >= catalog.size() || interferer_class >= catalog.size()) {
    throw InputError("class id out of range for a catalog of " + std::to_string(catalog.size()));
  }
  if (target_class == interferer_class) {
    throw InputError("target and interferer share class " + std::to_string(target_class));
  }
  MixtureExample ex;
  ex.target = gen_source(catalog[target_class], mix_seed(seed, kTargetSalt));
  const AudioClip interferer = gen_source(catalog[interferer_class], mix_seed(seed, kInterfererSalt));
  MixResult mix = mix_at_snr(ex.target, interferer, snr_db);
  ex.mixture = std::move(mix.mixture);
  ex.scaled_interferer = std::move(mix.scaled_interferer);
  ex.target_class = target_class;
  ex.interferer_class = interferer_class;
  ex.snr_db = snr_db;
  ex.seed = seed;
  ex.video_seed = video_seed_for(seed);
  ex.clues.tag = one_hot(target_class, catalog.size());
  ex.clues.text = text_clue(target_class, seed);
  ex.clues.video = video_clue(target_class, ex.video_seed);
  return ex;
}

std::vector<std::size_t> corrupt_text(const std::vector<std::size_t>& tokens, std::uint64_t seed,
                                      std::size_t vocab_size) {
  const std::size_t n = tokens.size();
  if (n < 3) throw InputError("corrupt_text needs at least 3 tokens, got " + std::to_string(n));
  const std::size_t v = vocab_size == 0 ? vocabulary().size() : vocab_size;
  if (v < 2) throw ContractError("corrupt_text needs a vocabulary of at least 2 words");
  Rng rng(seed);
  std::vector<std::size_t> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = i;
  std::vector<std::size_t> out = tokens;
  for (std::size_t k = 0; k < n / 3; ++k) {
    std::swap(pos[k], pos[k + uniform_index(rng, n - k)]);
    const std::size_t orig = tokens[pos[k]];
    std::size_t r = uniform_index(rng, v - 1);
    if (orig < v && r >= orig) ++r;
    out[pos[k]] = r;
  }
  return out;
}

Tensor corrupt_video(const Tensor& frames, std::uint64_t seed, double noise_db) {
  double energy = 0.0;
  for (double x : frames.values()) energy += x * x;
  if (!(energy > 0.0)) throw InputError("corrupt_video: zero-energy frames");
  if (!std::isfinite(noise_db)) throw InputError("corrupt_video: noise level must be finite");
  Rng rng(seed);
  std::vector<double> noise(frames.numel());
  double ne = 0.0;
  for (auto& x : noise) {
    x = gaussian(rng);
    ne += x * x;
  }
  const double g = std::sqrt(energy / (std::pow(10.0, noise_db / 10.0) * ne));
  std::vector<double> out(frames.values().begin(), frames.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += g * noise[i];
  return Tensor(frames.shape(), std::move(out));
}

}  // namespace mctse
