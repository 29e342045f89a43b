// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Synthetic sound classes, two-source mixtures with tag / text / video
// clues, clue corruption, and the JSON-lines manifest format.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mctse/clue_net.h"
#include "mctse/signal.h"

namespace mctse {

enum class SynthKind { kToneComplex, kChirp, kNoiseBand, kAmNoise };

std::string_view synth_kind_name(SynthKind k);

struct SoundClass {
  std::size_t id = 0;
  std::string name;
  SynthKind kind = SynthKind::kToneComplex;
  double band_lo = 0.0;  // Hz; every component stays inside [band_lo, band_hi]
  double band_hi = 0.0;
  std::vector<double> partials;  // tone complex: component frequencies (Hz)
  double f0 = 0.0, f1 = 0.0;     // chirp sweep
  double am_rate = 0.0;          // amplitude-modulated noise (Hz)
};

inline constexpr std::size_t kMinClasses = 2;
inline constexpr std::size_t kMaxClasses = 16;
inline constexpr double kSourcePeak = 0.5;
inline constexpr double kClipSeconds = 2.0;
inline constexpr std::size_t kVideoFrames = 30;  // 2 s at 15 FPS
inline constexpr std::size_t kVideoDim = 32;

// Classes on disjoint log-spaced bands; kinds cycle through SynthKind.
std::vector<SoundClass> make_catalog(std::size_t num_classes);

// Deterministic in (class, seed), peak-normalized to kSourcePeak.
AudioClip gen_source(const SoundClass& cls, std::uint64_t seed, double seconds = kClipSeconds,
                     int sample_rate = 16000);

// Fixed word list; class nouns double as class names.
const std::vector<std::string>& vocabulary();
std::size_t vocab_index(const std::string& word);  // throws InputError if absent
std::vector<std::size_t> text_clue(std::size_t class_id, std::uint64_t seed);
std::string decode_tokens(const std::vector<std::size_t>& tokens);
// Class whose noun occurs in `tokens`, if exactly one does.
std::optional<std::size_t> class_from_tokens(const std::vector<std::size_t>& tokens);
// Tokens from "3:17:4" ids or "a:loud:siren" words.
std::vector<std::size_t> parse_tokens(const std::string& text);

// [kVideoFrames x kVideoDim] class pattern and a jittered instance.
Tensor video_template(std::size_t class_id);
Tensor video_clue(std::size_t class_id, std::uint64_t video_seed);

struct MixtureExample {
  AudioClip mixture;
  AudioClip target;
  AudioClip scaled_interferer;
  std::size_t target_class = 0;
  std::size_t interferer_class = 0;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t video_seed = 0;
  ClueSet clues;
};

std::uint64_t video_seed_for(std::uint64_t seed);

MixtureExample make_example(const std::vector<SoundClass>& catalog, std::size_t target_class,
                            std::size_t interferer_class, double snr_db, std::uint64_t seed);

// Replaces exactly floor(n/3) distinct positions with different ids.
std::vector<std::size_t> corrupt_text(const std::vector<std::size_t>& tokens, std::uint64_t seed,
                                      std::size_t vocab_size = 0);
// Adds white Gaussian noise at `noise_db` relative to the clip energy.
Tensor corrupt_video(const Tensor& frames, std::uint64_t seed, double noise_db = -2.5);

enum class Split { kTrain, kValid, kTestSeen, kTestUnseen };
std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct ManifestRecord {
  std::string id;
  Split split = Split::kTrain;
  std::size_t target_class = 0;
  std::size_t interferer_class = 0;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> clue_text_tokens;
  std::uint64_t video_seed = 0;
  std::optional<std::string> mix_wav;
  std::optional<std::string> target_wav;
  // Unrecognized fields as serialized JSON values, written back verbatim.
  std::map<std::string, std::string> extra;

  bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
  std::size_t num_classes = 0;
  std::vector<ManifestRecord> records;

  std::vector<const ManifestRecord*> split(Split s) const;
  const ManifestRecord& find(const std::string& id) const;  // throws InputError
};

// Writes the JSON-lines file plus catalog.json in the same directory.
void write_manifest(const std::string& path, const Manifest& manifest);
// Throws ParseError (with line number) on malformed lines and
// ValidationError when test-unseen targets overlap training classes.
Manifest read_manifest(const std::string& path);
void validate_manifest(const Manifest& manifest);

// Regenerates the example a record describes (audio, tag, text, video).
MixtureExample realize(const ManifestRecord& record, const std::vector<SoundClass>& catalog);

struct SimulateOptions {
  std::size_t num_classes = 4;
  std::size_t unseen_classes = 2;
  std::size_t train = 100, valid = 20, test = 20;
  std::uint64_t seed = 0;
};

Manifest simulate(const SimulateOptions& opts);

}  // namespace mctse
