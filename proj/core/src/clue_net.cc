// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mctse/clue_net.h"

#include <algorithm>
#include <cmath>

#include "mctse/errors.h"
#include "mctse/ops.h"

namespace mctse {

namespace {

constexpr std::size_t kStubKernelF = 5, kStubKernelT = 3, kStubStrideF = 4;

Conv2dGeometry stub_geometry(std::size_t time_stride) {
  return {{kStubStrideF, time_stride}, {2, 1}};
}

std::size_t stub_freq(std::size_t f) { return (f + 4 - kStubKernelF) / kStubStrideF + 1; }

}  // namespace

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kSound: return "sound";
    case Modality::kText: return "text";
    case Modality::kVideo: return "video";
    case Modality::kTag: return "tag";
  }
  return "?";
}

Modality parse_modality(std::string_view name) {
  for (Modality m : {Modality::kSound, Modality::kText, Modality::kVideo, Modality::kTag})
    if (modality_name(m) == name) return m;
  throw InputError("unknown modality '" + std::string(name) + "'");
}

std::vector<double> one_hot(std::size_t index, std::size_t size) {
  if (index >= size) {
    throw InputError("class " + std::to_string(index) + " out of range for " +
                     std::to_string(size) + " classes");
  }
  std::vector<double> v(size, 0.0);
  v[index] = 1.0;
  return v;
}

bool ClueSet::has(Modality m) const {
  switch (m) {
    case Modality::kTag: return tag.has_value();
    case Modality::kText: return text.has_value() || text_features.has_value();
    case Modality::kVideo: return video.has_value();
    case Modality::kSound: return false;
  }
  return false;
}

ClueSet ClueSet::only(const std::vector<Modality>& keep) const {
  auto kept = [&](Modality m) { return std::find(keep.begin(), keep.end(), m) != keep.end(); };
  ClueSet out;
  if (kept(Modality::kTag)) out.tag = tag;
  if (kept(Modality::kText)) {
    out.text = text;
    out.text_features = text_features;
  }
  if (kept(Modality::kVideo)) out.video = video;
  return out;
}

void ClueNetConfig::validate() const {
  if (dim == 0 || num_classes == 0 || vocab_size == 0 || text_raw_dim == 0 ||
      video_raw_dim == 0 || sound_channels == 0) {
    throw ConfigError("clue net sizes must be positive");
  }
  if (downsample < 2 || downsample % 2 != 0) {
    throw ConfigError("clue downsample factor must be even and >= 2, got " + std::to_string(downsample));
  }
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("clue dim " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

ProjectionNet ProjectionNet::create(std::size_t in, std::size_t out, Rng& rng) {
  return {Tensor::full({in}, 1.0, true), Tensor::zeros({in}, true), Linear::create(in, out, rng)};
}

Tensor ProjectionNet::operator()(const Tensor& x) const {
  return relu(fc(layer_norm(x, ln_gain, ln_bias)));
}

void ProjectionNet::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".ln_gain", ln_gain);
  out.emplace_back(prefix + ".ln_bias", ln_bias);
  fc.collect(prefix + ".fc", out);
}

ClueNetParams ClueNetParams::create(const ClueNetConfig& cfg, std::size_t freq_bins, Rng& rng) {
  cfg.validate();
  if (freq_bins == 0) throw ConfigError("clue net needs at least one frequency bin");
  ClueNetParams p;
  p.config = cfg;
  p.freq_bins = freq_bins;
  const std::size_t c = cfg.sound_channels;
  const std::size_t k = kStubKernelF * kStubKernelT;
  p.sound_conv1 = init_uniform({c, 1, kStubKernelF, kStubKernelT}, k, rng);
  p.sound_bias1 = Tensor::zeros({c}, true);
  p.sound_conv2 = init_uniform({c, c, kStubKernelF, kStubKernelT}, c * k, rng);
  p.sound_bias2 = Tensor::zeros({c}, true);
  p.sound_proj = ProjectionNet::create(p.sound_raw_dim(), cfg.dim, rng);
  std::vector<double> table(cfg.vocab_size * cfg.text_raw_dim);
  for (auto& v : table) v = gaussian(rng);
  p.text_table = Tensor({cfg.vocab_size, cfg.text_raw_dim}, std::move(table), true);
  p.text_proj = ProjectionNet::create(cfg.text_raw_dim, cfg.dim, rng);
  p.video_proj = ProjectionNet::create(cfg.video_raw_dim, cfg.dim, rng);
  p.tag = Linear::create(cfg.num_classes, cfg.dim, rng);
  p.attention = MhaParams::create(cfg.dim, cfg.heads, rng);
  return p;
}

void ClueNetParams::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".sound.conv1", sound_conv1);
  out.emplace_back(prefix + ".sound.bias1", sound_bias1);
  out.emplace_back(prefix + ".sound.conv2", sound_conv2);
  out.emplace_back(prefix + ".sound.bias2", sound_bias2);
  sound_proj.collect(prefix + ".sound.proj", out);
  out.emplace_back(prefix + ".text.table", text_table);
  text_proj.collect(prefix + ".text.proj", out);
  video_proj.collect(prefix + ".video.proj", out);
  tag.collect(prefix + ".tag", out);
  attention.collect(prefix + ".attention", out);
}

std::vector<Tensor> ClueNetParams::modality_params(Modality m) const {
  NamedTensors named;
  switch (m) {
    case Modality::kSound:
      named = {{"", sound_conv1}, {"", sound_bias1}, {"", sound_conv2}, {"", sound_bias2}};
      sound_proj.collect("", named);
      break;
    case Modality::kText:
      named = {{"", text_table}};
      text_proj.collect("", named);
      break;
    case Modality::kVideo: video_proj.collect("", named); break;
    case Modality::kTag: tag.collect("", named); break;
  }
  std::vector<Tensor> out;
  for (auto& [name, t] : named) out.push_back(t);
  return out;
}

std::size_t ClueNetParams::sound_raw_dim() const {
  return config.sound_channels * stub_freq(stub_freq(freq_bins));
}

std::size_t sound_frames(std::size_t frames, std::size_t downsample) {
  return (frames + downsample - 1) / downsample;
}

EmbeddingSeq encode_sound(const ComplexSpec& mixture, const ClueNetParams& p) {
  if (mixture.real.rank() != 2 || mixture.real.numel() == 0) throw InputError("encode_sound: empty spectrum");
  const std::size_t t = mixture.frames(), f = mixture.bins();
  if (f != p.freq_bins) {
    throw DimensionError("encode_sound: spectrum has " + std::to_string(f) + " bins, clue net expects " +
                         std::to_string(p.freq_bins));
  }
  if (t < p.config.downsample) {
    throw InputError("encode_sound: " + std::to_string(t) + " frames is fewer than the downsample factor " +
                     std::to_string(p.config.downsample));
  }
  // log(1 + |S|) as a [1 x F x T] image; the mixture is data, not a parameter.
  auto re = mixture.real.values(), im = mixture.imag.values();
  std::vector<double> mag(f * t);
  for (std::size_t ti = 0; ti < t; ++ti)
    for (std::size_t fi = 0; fi < f; ++fi) mag[fi * t + ti] = std::log1p(std::hypot(re[ti * f + fi], im[ti * f + fi]));
  Tensor x({1, f, t}, std::move(mag));
  Tensor h = relu(conv2d(x, p.sound_conv1, stub_geometry(2), p.sound_bias1));
  h = relu(conv2d(h, p.sound_conv2, stub_geometry(p.config.downsample / 2), p.sound_bias2));
  const std::size_t ta = h.dim(2);
  Tensor rows = reshape(permute(h, {2, 0, 1}), {ta, h.dim(0) * h.dim(1)});
  return {p.sound_proj(rows), Modality::kSound};
}

EmbeddingSeq encode_text(const std::vector<std::size_t>& tokens, const ClueNetParams& p) {
  if (tokens.empty()) throw InputError("text clue has no tokens");
  for (std::size_t id : tokens) {
    if (id >= p.config.vocab_size) {
      throw InputError("token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(p.config.vocab_size));
    }
  }
  return {p.text_proj(gather_rows(p.text_table, tokens)), Modality::kText};
}

EmbeddingSeq encode_text_features(const Tensor& features, const ClueNetParams& p) {
  if (features.rank() != 2 || features.dim(1) != p.config.text_raw_dim) {
    throw InputError("text features " + to_string(features.shape()) + " need width " +
                     std::to_string(p.config.text_raw_dim));
  }
  return {p.text_proj(features), Modality::kText};
}

EmbeddingSeq encode_video(const Tensor& frames, const ClueNetParams& p) {
  if (frames.rank() != 2 || frames.dim(1) != p.config.video_raw_dim) {
    throw InputError("video frames " + to_string(frames.shape()) + " need width " +
                     std::to_string(p.config.video_raw_dim));
  }
  return {p.video_proj(frames), Modality::kVideo};
}

EmbeddingSeq encode_tag(const std::vector<double>& onehot, const ClueNetParams& p) {
  std::size_t ones = 0;
  bool clean = onehot.size() == p.config.num_classes;
  for (double v : onehot) {
    if (v == 1.0) ++ones;
    else if (v != 0.0) clean = false;
  }
  if (!clean || ones != 1) {
    throw InputError("tag clue must be one-hot over " + std::to_string(p.config.num_classes) +
                     " classes");
  }
  return {p.tag(Tensor({1, onehot.size()}, onehot)), Modality::kTag};
}

ConcatClues concat_clues(std::vector<EmbeddingSeq> parts) {
  if (parts.empty()) throw ContractError("concat_clues: no clue modality present");
  std::stable_sort(parts.begin(), parts.end(),
                   [](const EmbeddingSeq& a, const EmbeddingSeq& b) { return a.modality < b.modality; });
  ConcatClues out;
  std::vector<Tensor> rows;
  std::size_t begin = 0;
  for (const auto& part : parts) {
    out.segments.push_back({part.modality, begin, part.length()});
    begin += part.length();
    rows.push_back(part.data);
  }
  out.data = rows.size() == 1 ? rows[0] : concat(rows, 0);
  return out;
}

FusedClue fuse_clues(const Tensor& sound, const ConcatClues& clues, const MhaParams& p,
                     const std::vector<bool>& key_mask) {
  auto att = multi_head_attention(sound, clues.data, clues.data, p, key_mask);
  return {att.out, att.weights};
}

Tensor upsample_clue(const Tensor& fused, std::size_t factor, std::size_t frames) {
  if (fused.rank() != 2 || factor == 0) throw ContractError("upsample_clue: expected [T_a x D] and factor > 0");
  const std::size_t ta = fused.dim(0);
  if (frames < ta) {
    throw ContractError("upsample_clue: target length " + std::to_string(frames) +
                        " shorter than clue length " + std::to_string(ta));
  }
  std::vector<std::size_t> idx(frames);
  for (std::size_t t = 0; t < frames; ++t) idx[t] = std::min(t / factor, ta - 1);
  return gather_rows(fused, idx);
}

ClueOutput clue_pipeline(const ComplexSpec& mixture, const ClueSet& clues, const ClueNetParams& p) {
  if (clues.empty()) throw InputError("clue set is empty");
  std::vector<EmbeddingSeq> parts;
  if (clues.text) parts.push_back(encode_text(*clues.text, p));
  else if (clues.text_features) parts.push_back(encode_text_features(*clues.text_features, p));
  if (clues.video) parts.push_back(encode_video(*clues.video, p));
  if (clues.tag) parts.push_back(encode_tag(*clues.tag, p));
  ClueOutput out;
  out.sound = encode_sound(mixture, p).data;
  out.concat = concat_clues(std::move(parts));
  FusedClue fused = fuse_clues(out.sound, out.concat, p.attention);
  out.weights = fused.weights;
  out.clue = upsample_clue(fused.fused, p.config.downsample, mixture.frames());
  return out;
}

}  // namespace mctse
