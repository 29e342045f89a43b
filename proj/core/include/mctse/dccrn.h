// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Complex encoder / clue-conditioned complex LSTM / complex decoder with
// U-Net skips, operating on the STFT of a mixture and estimating the target
// complex spectrum directly.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mctse/clue_net.h"
#include "mctse/nn.h"
#include "mctse/signal.h"

namespace mctse {

struct DccrnConfig {
  std::vector<std::size_t> channels{8, 16, 32, 32};
  std::size_t kernel_freq = 5;
  std::size_t kernel_time = 2;
  std::size_t lstm_hidden = 64;
  std::size_t lstm_layers = 2;
  std::size_t num_classes = 4;
  StftConfig stft;
  // dim and num_classes are derived from the fields above.
  ClueNetConfig clue;

  // Frequency bins after each encoder layer (first entry: stft bins).
  std::vector<std::size_t> freq_bins() const;
  // LSTM input width D = last channels x last frequency bins.
  std::size_t dim() const;
  ClueNetConfig clue_config() const;
  // Throws ConfigError when the layer stack cannot be mirrored.
  void validate() const;
  bool operator==(const DccrnConfig&) const = default;
};

struct ComplexConvLayer {
  ComplexFeature kernel;
  ComplexFeature bias;
  Tensor slope_real;  // [1]; undefined on the last decoder layer
  Tensor slope_imag;

  void collect(const std::string& prefix, NamedTensors& out) const;
};

enum class CluePath { kTagTiling, kMultiClue };

struct DccrnModel {
  DccrnConfig config;
  int stage = 1;
  std::vector<ComplexConvLayer> encoder;
  EnhanceParams enhance;
  std::vector<ComplexConvLayer> decoder;  // decoder[i] mirrors encoder[i]
  Linear tag;                             // stage-1 clue: [C x D], tiled over time
  std::optional<ClueNetParams> clue_net;  // present from stage 2 on

  static DccrnModel create(const DccrnConfig& cfg, Rng& rng);
  // Adds a freshly initialized clue network and marks the model stage 2.
  void add_clue_net(Rng& rng);
  NamedTensors parameters() const;
  // Parameters on the default path; a stage-2 model leaves the tiled tag
  // clue untouched.
  NamedTensors trainable_parameters() const;
  // Deep copy; the result shares no storage with this model.
  DccrnModel clone() const;
  CluePath default_path() const { return clue_net ? CluePath::kMultiClue : CluePath::kTagTiling; }
};

struct Encoded {
  ComplexFeature features;             // [T x D]
  std::vector<ComplexFeature> skips;   // per layer, [C_i x F_i x T]
};

Encoded encode(const ComplexSpec& spec, const DccrnModel& model);
ComplexFeature enhance(const ComplexFeature& y, const Tensor& clue, const DccrnModel& model);
ComplexSpec decode(const ComplexFeature& f_out, const std::vector<ComplexFeature>& skips,
                   const DccrnModel& model);

// Stage-1 clue: tag linear map tiled to `frames` rows.
Tensor tiled_tag_clue(const std::vector<double>& onehot, std::size_t frames, const DccrnModel& model);

struct ForwardResult {
  ComplexSpec spec;     // estimated target spectrum
  Tensor wave;          // [out_len]
  std::optional<ClueOutput> clue;  // set on the multi-clue path
};

ForwardResult forward(const DccrnModel& model, const ComplexSpec& mixture, std::size_t out_len,
                      const ClueSet& clues, CluePath path);

struct ExtractResult {
  AudioClip estimate;
  std::optional<ClueOutput> clue;
};

ExtractResult extract(const AudioClip& mixture, const ClueSet& clues, const DccrnModel& model);
ExtractResult extract(const AudioClip& mixture, const ClueSet& clues, const DccrnModel& model,
                      CluePath path);

// "MCTSE1" | version u32 | config JSON (u32 length + UTF-8) | records of
// {name_len u32, name, rank u32, dims u32[rank], f32 data}.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const DccrnModel& model);
DccrnModel load_checkpoint(const std::string& path);

}  // namespace mctse
