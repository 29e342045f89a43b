// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Clue encoders, clue concatenation, attention fusion against the mixture
// embedding, and upsampling to the spectrogram frame rate.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mctse/nn.h"
#include "mctse/signal.h"
#include "mctse/tensor.h"

namespace mctse {

// Values double as the modality byte of embedding files. Text < video < tag
// is also the concatenation order.
enum class Modality : std::uint8_t { kSound = 0, kText = 1, kVideo = 2, kTag = 3 };

std::string_view modality_name(Modality m);
// Accepts "sound", "text", "video", "tag". Throws InputError otherwise.
Modality parse_modality(std::string_view name);

std::vector<double> one_hot(std::size_t index, std::size_t size);

struct ClueSet {
  std::optional<std::vector<double>> tag;        // one-hot [C]
  std::optional<std::vector<std::size_t>> text;  // token ids
  std::optional<Tensor> text_features;           // precomputed [T_t x D_traw]
  std::optional<Tensor> video;                   // [T_v x D_vraw]

  bool has(Modality m) const;
  bool empty() const { return !has(Modality::kTag) && !has(Modality::kText) && !has(Modality::kVideo); }
  // Copy keeping only the listed modalities.
  ClueSet only(const std::vector<Modality>& keep) const;
};

struct EmbeddingSeq {
  Tensor data;  // [L x D]
  Modality modality = Modality::kSound;

  std::size_t length() const { return data.dim(0); }
};

struct Segment {
  Modality modality;
  std::size_t begin = 0;
  std::size_t length = 0;
};
using SegmentMap = std::vector<Segment>;

struct ClueNetConfig {
  std::size_t dim = 544;
  std::size_t num_classes = 4;
  std::size_t vocab_size = 64;
  std::size_t text_raw_dim = 32;
  std::size_t video_raw_dim = 32;
  std::size_t sound_channels = 4;
  std::size_t downsample = 4;  // even; first stub layer halves time
  std::size_t heads = 4;

  void validate() const;
  bool operator==(const ClueNetConfig&) const = default;
};

// layer_norm -> linear -> relu
struct ProjectionNet {
  Tensor ln_gain;
  Tensor ln_bias;
  Linear fc;

  static ProjectionNet create(std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

struct ClueNetParams {
  ClueNetConfig config;
  std::size_t freq_bins = 0;
  // Sound stub: two strided convs over [1 x F x T] log-magnitude.
  Tensor sound_conv1, sound_bias1, sound_conv2, sound_bias2;
  ProjectionNet sound_proj;
  Tensor text_table;  // [vocab x D_traw]
  ProjectionNet text_proj;
  ProjectionNet video_proj;
  Linear tag;  // [C x D]
  MhaParams attention;

  static ClueNetParams create(const ClueNetConfig& cfg, std::size_t freq_bins, Rng& rng);
  void collect(const std::string& prefix, NamedTensors& out) const;
  // Parameters used only by one modality's encoder.
  std::vector<Tensor> modality_params(Modality m) const;
  std::size_t sound_raw_dim() const;
};

// Number of frames after the sound stub: ceil(T / downsample).
std::size_t sound_frames(std::size_t frames, std::size_t downsample);

EmbeddingSeq encode_sound(const ComplexSpec& mixture, const ClueNetParams& p);
EmbeddingSeq encode_text(const std::vector<std::size_t>& tokens, const ClueNetParams& p);
EmbeddingSeq encode_text_features(const Tensor& features, const ClueNetParams& p);
EmbeddingSeq encode_video(const Tensor& frames, const ClueNetParams& p);
EmbeddingSeq encode_tag(const std::vector<double>& onehot, const ClueNetParams& p);

struct ConcatClues {
  Tensor data;  // U: [sum of lengths x D]
  SegmentMap segments;
};

// Concatenates along length in text, video, tag order regardless of input
// order. Throws ContractError when `parts` is empty.
ConcatClues concat_clues(std::vector<EmbeddingSeq> parts);

struct FusedClue {
  Tensor fused;    // [T_a x D]
  Tensor weights;  // [heads x T_a x L], detached
};

FusedClue fuse_clues(const Tensor& sound, const ConcatClues& clues, const MhaParams& p,
                     const std::vector<bool>& key_mask = {});

// Nearest-neighbour repetition by `factor`, then trimmed or padded with the
// last row to exactly `frames` rows.
Tensor upsample_clue(const Tensor& fused, std::size_t factor, std::size_t frames);

struct ClueOutput {
  Tensor clue;  // [T x D]
  Tensor sound;
  ConcatClues concat;
  Tensor weights;  // [heads x T_a x L]
};

// encode_* -> concat -> fuse -> upsample for the modalities present.
ClueOutput clue_pipeline(const ComplexSpec& mixture, const ClueSet& clues, const ClueNetParams& p);

// "MCEMB1" | modality u8 | L u32 | D u32 | f32[L*D], all little-endian.
struct EmbeddingFile {
  Modality modality = Modality::kSound;
  Tensor data;  // [L x D]
};

void write_embedding_file(const std::string& path, Modality modality, const Tensor& data);
EmbeddingFile read_embedding_file(const std::string& path);

}  // namespace mctse
