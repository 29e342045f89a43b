// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mctse/train.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "mctse/errors.h"
#include "mctse/ops.h"
#include "mctse/random.h"

namespace mctse {

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("loss lambda must be finite and >= 0");
  if (!(snr_clamp_db > 0.0) || !std::isfinite(snr_clamp_db)) throw ConfigError("snr clamp must be positive");
}

LossTerms extraction_loss(const Tensor& target, const Tensor& estimate, const ComplexSpec& target_spec,
                          const ComplexSpec& estimate_spec, const LossConfig& cfg) {
  if (target.shape() != estimate.shape()) {
    throw DimensionError("loss: target " + to_string(target.shape()) + " vs estimate " +
                         to_string(estimate.shape()));
  }
  if (target_spec.real.shape() != estimate_spec.real.shape() ||
      target_spec.imag.shape() != estimate_spec.imag.shape()) {
    throw DimensionError("loss: spectra " + to_string(target_spec.real.shape()) + " vs " +
                         to_string(estimate_spec.real.shape()));
  }
  double es = 0.0;
  for (double v : target.values()) es += v * v;
  if (!(es > 0.0)) throw InputError("loss: zero-energy target");

  const double floor = std::pow(10.0, -cfg.snr_clamp_db / 10.0) * es;
  const Tensor err = sum(square(sub(target, estimate)));
  Tensor snr_term = sub(scale(log10(clamp_min(err, floor)), 10.0), Tensor::scalar(10.0 * std::log10(es)));
  if (snr_term.item() > cfg.snr_clamp_db) snr_term = Tensor::scalar(cfg.snr_clamp_db);

  const double n = static_cast<double>(target_spec.real.numel());
  const Tensor l1 = scale(add(sum(abs(sub(target_spec.real, estimate_spec.real))),
                              sum(abs(sub(target_spec.imag, estimate_spec.imag)))),
                          1.0 / n);
  LossTerms out;
  out.snr = snr_term.item();
  out.l1 = l1.item();
  out.total = add(snr_term, scale(l1, cfg.lambda));
  return out;
}

void adam_step(const std::vector<Tensor>& params, AdamState& s, double lr) {
  if (s.m.empty()) {
    s.m.resize(params.size());
    s.v.resize(params.size());
  }
  if (s.m.size() != params.size()) {
    throw DimensionError("adam: state tracks " + std::to_string(s.m.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    if (!p.has_grad()) continue;
    auto& m = s.m[i];
    auto& v = s.v[i];
    if (m.empty()) {
      m.assign(p.numel(), 0.0);
      v.assign(p.numel(), 0.0);
    }
    if (m.size() != p.numel()) {
      throw DimensionError("adam: moment size " + std::to_string(m.size()) + " does not match parameter " +
                           to_string(p.shape()));
    }
    auto g = p.grad();
    auto x = p.mutable_values();
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * g[k];
      v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * g[k] * g[k];
      x[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + s.eps);
    }
  }
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.has_grad())
      for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (auto p : params)
      if (p.has_grad())
        for (auto& g : p.mutable_grad()) g *= f;
  }
  return norm;
}

namespace {

int subset_rank(Modality m) {
  switch (m) {
    case Modality::kTag: return 0;
    case Modality::kText: return 1;
    case Modality::kVideo: return 2;
    case Modality::kSound: return 3;
  }
  return 3;
}

ClueSubset canonical(ClueSubset s) {
  std::sort(s.begin(), s.end(), [](Modality a, Modality b) { return subset_rank(a) < subset_rank(b); });
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

ClueSubset parse_subset(const std::string& text) {
  ClueSubset out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = text.find('+', start);
    const Modality m = parse_modality(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (m == Modality::kSound) throw InputError("'sound' is not a clue modality");
    out.push_back(m);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return canonical(out);
}

std::string subset_name(const ClueSubset& subset) {
  std::string s;
  for (Modality m : canonical(subset)) {
    if (!s.empty()) s += '+';
    s += modality_name(m);
  }
  return s;
}

std::vector<ClueSubset> all_subsets() {
  using M = Modality;
  return {{M::kTag},           {M::kText},           {M::kVideo},          {M::kTag, M::kText},
          {M::kTag, M::kVideo}, {M::kText, M::kVideo}, {M::kTag, M::kText, M::kVideo}};
}

std::vector<SubsetWeight> TrainConfig::default_subset_weights() {
  std::vector<SubsetWeight> out;
  for (auto& s : all_subsets()) out.push_back({s, s.size() == 3 ? 0.4 : 0.1});
  return out;
}

double TrainConfig::lr(std::size_t epoch) const { return lr0 * std::pow(decay, static_cast<double>(epoch)); }

void TrainConfig::validate() const {
  if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2, got " + std::to_string(stage));
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("lr0 must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must be in (0, 1]");
  if (batch_size == 0 || max_epochs == 0) throw ConfigError("batch size and epoch count must be positive");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
  for (const auto& w : subsets) {
    if (w.subset.empty()) throw ConfigError("clue subsets must be non-empty");
    if (!(w.weight >= 0.0) || !std::isfinite(w.weight)) throw ConfigError("subset weights must be >= 0");
  }
  for (const auto& s : all_subsets()) {
    double mass = 0.0;
    for (const auto& w : subsets)
      if (canonical(w.subset) == s) mass += w.weight;
    if (!(mass > 0.0)) throw ConfigError("subset distribution gives no mass to '" + subset_name(s) + "'");
  }
}

bool TrainConfig::operator==(const TrainConfig& o) const {
  if (subsets.size() != o.subsets.size()) return false;
  for (std::size_t i = 0; i < subsets.size(); ++i)
    if (canonical(subsets[i].subset) != canonical(o.subsets[i].subset) || subsets[i].weight != o.subsets[i].weight)
      return false;
  return stage == o.stage && lr0 == o.lr0 && decay == o.decay && batch_size == o.batch_size &&
         max_epochs == o.max_epochs && patience == o.patience && seed == o.seed && grad_clip == o.grad_clip &&
         fp32_gemm == o.fp32_gemm;
}

TrainingSample load_sample(const ManifestRecord& record, const std::vector<SoundClass>& catalog) {
  MixtureExample ex = realize(record, catalog);
  return {std::move(ex.mixture), std::move(ex.target), std::move(ex.clues)};
}

Trainer::Trainer(DccrnModel& model, TrainConfig cfg, LossConfig loss)
    : model_(model), cfg_(std::move(cfg)), loss_(loss) {
  cfg_.validate();
  loss_.validate();
  for (auto& [name, t] : model_.trainable_parameters()) params_.push_back(t);
}

namespace {

ClueSet clues_for(const TrainingSample& s, const DccrnModel& model, const ClueSubset& subset) {
  if (model.default_path() == CluePath::kTagTiling) return s.clues.only({Modality::kTag});
  return s.clues.only(subset);
}

}  // namespace

StepStats Trainer::step(const std::vector<TrainingSample>& batch, const std::vector<ClueSubset>& subsets,
                        double lr) {
  if (batch.empty()) throw ContractError("train step on an empty batch");
  if (subsets.size() != batch.size()) throw ContractError("one clue subset per sample is required");
  GemmPrecisionScope precision(cfg_.fp32_gemm ? GemmPrecision::kSingle : GemmPrecision::kDouble);
  for (auto& p : params_) p.zero_grad();
  StepStats stats;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainingSample& s = batch[i];
    const ClueSet clues = clues_for(s, model_, subsets[i]);
    Tape tape;
    TapeScope scope(tape);
    const ComplexSpec mix_spec = stft(s.mixture, model_.config.stft);
    const ComplexSpec target_spec = stft(s.target, model_.config.stft);
    ForwardResult fwd = forward(model_, mix_spec, s.mixture.size(), clues, model_.default_path());
    LossTerms terms = extraction_loss(s.target.to_tensor(), fwd.wave, target_spec, fwd.spec, loss_);
    tape.backward(scale(terms.total, inv));
    if (model_.clue_net) {
      for (Modality m : {Modality::kTag, Modality::kText, Modality::kVideo}) {
        if (clues.has(m)) continue;
        for (const auto& t : model_.clue_net->modality_params(m)) {
          if (tape.touches(t)) {
            throw ContractError("gradient reached the " + std::string(modality_name(m)) +
                                " encoder although that clue is absent");
          }
        }
      }
    }
    stats.loss += terms.total.item() * inv;
    stats.snr += -terms.snr * inv;
  }
  stats.grad_norm = clip_grad_norm(params_, cfg_.grad_clip);
  adam_step(params_, adam_, lr);
  return stats;
}

double Trainer::evaluate_loss(const std::vector<TrainingSample>& samples, const ClueSubset& subset) const {
  if (samples.empty()) return 0.0;
  GemmPrecisionScope precision(cfg_.fp32_gemm ? GemmPrecision::kSingle : GemmPrecision::kDouble);
  double total = 0.0;
  for (const auto& s : samples) {
    const ComplexSpec mix_spec = stft(s.mixture, model_.config.stft);
    ForwardResult fwd =
        forward(model_, mix_spec, s.mixture.size(), clues_for(s, model_, subset), model_.default_path());
    total += extraction_loss(s.target.to_tensor(), fwd.wave, stft(s.target, model_.config.stft), fwd.spec, loss_)
                 .total.item();
  }
  return total / static_cast<double>(samples.size());
}

namespace {

const ClueSubset& sample_subset(const std::vector<SubsetWeight>& weights, Rng& rng) {
  double total = 0.0;
  for (const auto& w : weights) total += w.weight;
  double u = uniform01(rng) * total;
  for (const auto& w : weights) {
    if (u < w.weight) return w.subset;
    u -= w.weight;
  }
  for (auto it = weights.rbegin(); it != weights.rend(); ++it)
    if (it->weight > 0.0) return it->subset;
  return weights.back().subset;
}

}  // namespace

TrainResult train(const Manifest& manifest, DccrnModel model, const TrainConfig& cfg, const LossConfig& loss,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  loss.validate();
  const auto train_records = manifest.split(Split::kTrain);
  if (train_records.empty()) throw InputError("manifest has no train examples");
  if (model.config.num_classes != manifest.num_classes) {
    throw ConfigError("model has " + std::to_string(model.config.num_classes) + " tag classes, manifest has " +
                      std::to_string(manifest.num_classes));
  }
  if (cfg.stage == 1 && model.clue_net) throw ContractError("stage-1 training on a stage-2 model");
  if (cfg.stage == 2 && !model.clue_net) {
    Rng rng(mix_seed(cfg.seed, 0x636c7565));
    model.add_clue_net(rng);
  }

  const auto catalog = make_catalog(manifest.num_classes);
  std::vector<TrainingSample> train_set, valid_set;
  for (const auto* r : train_records) train_set.push_back(load_sample(*r, catalog));
  for (const auto* r : manifest.split(Split::kValid)) valid_set.push_back(load_sample(*r, catalog));
  const ClueSubset valid_subset = cfg.stage == 1 ? ClueSubset{Modality::kTag}
                                                 : ClueSubset{Modality::kTag, Modality::kText, Modality::kVideo};

  Trainer trainer(model, cfg, loss);
  TrainResult result;
  result.best = model.clone();
  result.best_valid_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(mix_seed(cfg.seed, epoch + 1));
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    EpochLog log;
    log.epoch = epoch;
    log.lr = cfg.lr(epoch);
    std::size_t steps = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      std::vector<TrainingSample> batch;
      std::vector<ClueSubset> subsets;
      for (std::size_t i = b; i < std::min(order.size(), b + cfg.batch_size); ++i) {
        batch.push_back(train_set[order[i]]);
        subsets.push_back(sample_subset(cfg.subsets, rng));
      }
      log.train_loss += trainer.step(batch, subsets, log.lr).loss;
      ++steps;
    }
    log.train_loss /= static_cast<double>(steps);
    log.valid_loss = valid_set.empty() ? log.train_loss : trainer.evaluate_loss(valid_set, valid_subset);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.valid_loss < result.best_valid_loss) {
      result.best_valid_loss = log.valid_loss;
      result.best_epoch = epoch;
      result.best = model.clone();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace mctse
