// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Extraction loss, Adam, the two-stage training loop, evaluation over clue
// subsets and attention dumps.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mctse/data_sim.h"
#include "mctse/dccrn.h"

namespace mctse {

struct LossConfig {
  double lambda = 5.0;
  double snr_clamp_db = kSnrClampDb;

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

struct LossTerms {
  Tensor total;      // scalar
  double snr = 0.0;  // clamped negative SNR term (dB)
  double l1 = 0.0;   // mean absolute complex-part error
};

// total = -SNR(s, s_hat) + lambda * mean(|S_r - S^_r| + |S_i - S^_i|), with the
// SNR term clamped to [-clamp, clamp]. `target` and `estimate` are [N].
LossTerms extraction_loss(const Tensor& target, const Tensor& estimate, const ComplexSpec& target_spec,
                          const ComplexSpec& estimate_spec, const LossConfig& cfg);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m;  // per parameter, lazily sized
  std::vector<std::vector<double>> v;
};

// One bias-corrected update from each parameter's accumulated gradient.
// Parameters without a gradient are left untouched.
void adam_step(const std::vector<Tensor>& params, AdamState& state, double lr);

// Rescales all gradients so their joint L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

using ClueSubset = std::vector<Modality>;

struct SubsetWeight {
  ClueSubset subset;
  double weight = 0.0;
};

// "tag", "text+video", ...; order-insensitive, canonicalized to tag, text, video.
ClueSubset parse_subset(const std::string& text);
std::string subset_name(const ClueSubset& subset);
std::vector<ClueSubset> all_subsets();

struct TrainConfig {
  int stage = 1;
  double lr0 = 0.5e-4;
  double decay = 0.97;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  double grad_clip = 0.0;  // 0 disables
  bool fp32_gemm = true;
  // Stage-2 clue exposure: all three 0.4, each pair 0.1, each single 0.1.
  std::vector<SubsetWeight> subsets = default_subset_weights();

  static std::vector<SubsetWeight> default_subset_weights();
  double lr(std::size_t epoch) const;
  void validate() const;
  bool operator==(const TrainConfig&) const;
};

// Everything a training config file may set.
struct RunConfig {
  TrainConfig train;
  DccrnConfig model;
  LossConfig loss;
};

// UTF-8 JSON with optional "train", "model" and "loss" objects; missing
// fields keep their defaults, unknown fields are a ConfigError.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_json(const RunConfig& cfg);

struct TrainingSample {
  AudioClip mixture;
  AudioClip target;
  ClueSet clues;
};

TrainingSample load_sample(const ManifestRecord& record, const std::vector<SoundClass>& catalog);

struct StepStats {
  double loss = 0.0;
  double snr = 0.0;
  double grad_norm = 0.0;
};

// Owns the optimizer state for one model.
class Trainer {
 public:
  Trainer(DccrnModel& model, TrainConfig cfg, LossConfig loss);

  // Accumulates gradients over `batch` (with the clue subset chosen for each
  // sample), then applies one Adam step at `lr`.
  StepStats step(const std::vector<TrainingSample>& batch, const std::vector<ClueSubset>& subsets, double lr);
  // Mean loss without gradient tracking.
  double evaluate_loss(const std::vector<TrainingSample>& samples, const ClueSubset& subset) const;
  const AdamState& adam() const { return adam_; }

 private:
  DccrnModel& model_;
  TrainConfig cfg_;
  LossConfig loss_;
  AdamState adam_;
  std::vector<Tensor> params_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  DccrnModel best;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_valid_loss = 0.0;
};

// Stage 1 trains the tag-tiling path. Stage 2 adds a fresh clue network to
// a stage-1 model (or continues a stage-2 one) and samples a clue subset per
// example. Returns the checkpoint with the lowest validation loss.
TrainResult train(const Manifest& manifest, DccrnModel model, const TrainConfig& cfg, const LossConfig& loss,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

struct Corruption {
  bool text = false;
  bool video = false;
  std::uint64_t seed = 0;
  double video_noise_db = -2.5;
};

struct EvalRow {
  std::string id;
  std::string subset;
  double snri = 0.0;
};

struct SubsetSummary {
  std::string subset;
  double mean_snri = 0.0;
  std::size_t count = 0;
};

struct EvalReport {
  Split split = Split::kTestSeen;
  std::string corruption;  // "none", "text", "video" or "both"
  std::vector<SubsetSummary> summary;
  std::vector<EvalRow> rows;
};

using Extractor = std::function<AudioClip(const AudioClip& mixture, const ClueSet& clues)>;

EvalReport evaluate(const Manifest& manifest, Split split, const Extractor& extractor,
                    const std::vector<ClueSubset>& subsets, const std::optional<Corruption>& corruption = std::nullopt);
EvalReport evaluate(const Manifest& manifest, Split split, const DccrnModel& model,
                    const std::vector<ClueSubset>& subsets, const std::optional<Corruption>& corruption = std::nullopt);

// Summary rows followed by per-example rows.
void write_report_csv(const std::string& path, const EvalReport& report);

struct AttentionMap {
  Tensor matrix;  // [T_a x L], averaged over heads
  SegmentMap segments;
};

AttentionMap attention_map(const AudioClip& mixture, const ClueSet& clues, const DccrnModel& model);
void write_attention_csv(const std::string& path, const AttentionMap& map);

}  // namespace mctse
