// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mctse/dccrn.h"

#include <algorithm>
#include <cmath>

#include "mctse/errors.h"
#include "mctse/ops.h"

namespace mctse {

namespace {

constexpr double kPreluInit = 0.25;

Conv2dGeometry encoder_geometry(const DccrnConfig& c) {
  return {{2, 1}, {(c.kernel_freq - 1) / 2, c.kernel_time - 1}};
}

Conv2dGeometry decoder_geometry(const DccrnConfig& c) {
  return {{2, 1}, {(c.kernel_freq - 1) / 2, 0}};
}

ComplexConvLayer make_layer(std::size_t rows, std::size_t cols, std::size_t bias_len, std::size_t fan_in,
                            const DccrnConfig& c, bool activation, Rng& rng) {
  ComplexConvLayer l;
  const Shape ks{rows, cols, c.kernel_freq, c.kernel_time};
  l.kernel = {init_uniform(ks, fan_in, rng), init_uniform(ks, fan_in, rng)};
  l.bias = {Tensor::zeros({bias_len}, true), Tensor::zeros({bias_len}, true)};
  if (activation) {
    l.slope_real = Tensor::full({1}, kPreluInit, true);
    l.slope_imag = Tensor::full({1}, kPreluInit, true);
  }
  return l;
}

ComplexFeature activate(const ComplexFeature& x, const ComplexConvLayer& l) {
  if (!l.slope_real.defined()) return x;
  return {prelu(x.real, l.slope_real), prelu(x.imag, l.slope_imag)};
}

ComplexFeature slice_time(const ComplexFeature& x, std::size_t frames) {
  return {slice(x.real, 2, 0, frames), slice(x.imag, 2, 0, frames)};
}

}  // namespace

std::vector<std::size_t> DccrnConfig::freq_bins() const {
  std::vector<std::size_t> f{stft.bins()};
  const std::size_t pad = (kernel_freq - 1) / 2;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const std::size_t in = f.back();
    if (in + 2 * pad < kernel_freq) break;
    f.push_back((in + 2 * pad - kernel_freq) / 2 + 1);
  }
  return f;
}

std::size_t DccrnConfig::dim() const { return channels.back() * freq_bins().back(); }

ClueNetConfig DccrnConfig::clue_config() const {
  ClueNetConfig c = clue;
  c.dim = dim();
  c.num_classes = num_classes;
  return c;
}

void DccrnConfig::validate() const {
  stft.validate();
  if (channels.empty()) throw ConfigError("encoder needs at least one layer");
  for (std::size_t c : channels)
    if (c == 0) throw ConfigError("encoder channel counts must be positive");
  if (kernel_freq % 2 == 0 || kernel_time == 0) {
    throw ConfigError("kernel must have odd frequency size and positive time size");
  }
  if (lstm_hidden == 0 || lstm_layers == 0 || num_classes == 0) {
    throw ConfigError("lstm sizes and class count must be positive");
  }
  const auto f = freq_bins();
  if (f.size() != channels.size() + 1) {
    throw ConfigError("frequency axis collapses below 1 bin after " + std::to_string(f.size() - 1) +
                      " encoder layers (" + std::to_string(stft.bins()) + " input bins)");
  }
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    if (2 * f[i + 1] - 1 != f[i]) {
      throw ConfigError("encoder layer " + std::to_string(i) + " maps " + std::to_string(f[i]) + " bins to " +
                        std::to_string(f[i + 1]) + ", which the decoder cannot mirror");
    }
  }
  clue_config().validate();
}

void ComplexConvLayer::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".kernel_real", kernel.real);
  out.emplace_back(prefix + ".kernel_imag", kernel.imag);
  out.emplace_back(prefix + ".bias_real", bias.real);
  out.emplace_back(prefix + ".bias_imag", bias.imag);
  if (slope_real.defined()) {
    out.emplace_back(prefix + ".prelu_real", slope_real);
    out.emplace_back(prefix + ".prelu_imag", slope_imag);
  }
}

DccrnModel DccrnModel::create(const DccrnConfig& cfg, Rng& rng) {
  cfg.validate();
  DccrnModel m;
  m.config = cfg;
  const std::size_t layers = cfg.channels.size(), k = cfg.kernel_freq * cfg.kernel_time;
  for (std::size_t i = 0; i < layers; ++i) {
    const std::size_t in = i == 0 ? 1 : cfg.channels[i - 1];
    m.encoder.push_back(make_layer(cfg.channels[i], in, cfg.channels[i], in * k, cfg, true, rng));
  }
  m.enhance = EnhanceParams::create(cfg.dim(), cfg.lstm_hidden, cfg.lstm_layers, rng);
  for (std::size_t i = 0; i < layers; ++i) {
    const std::size_t in = 2 * cfg.channels[i], out = i == 0 ? 1 : cfg.channels[i - 1];
    m.decoder.push_back(make_layer(in, out, out, in * k, cfg, i != 0, rng));
  }
  m.tag = Linear::create(cfg.num_classes, cfg.dim(), rng);
  return m;
}

void DccrnModel::add_clue_net(Rng& rng) {
  clue_net = ClueNetParams::create(config.clue_config(), config.stft.bins(), rng);
  stage = 2;
}

NamedTensors DccrnModel::parameters() const {
  NamedTensors out;
  for (std::size_t i = 0; i < encoder.size(); ++i) encoder[i].collect("encoder." + std::to_string(i), out);
  enhance.collect("enhance", out);
  for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i].collect("decoder." + std::to_string(i), out);
  tag.collect("tag", out);
  if (clue_net) clue_net->collect("clue", out);
  return out;
}

NamedTensors DccrnModel::trainable_parameters() const {
  NamedTensors out;
  for (auto& [name, t] : parameters()) {
    if (clue_net && name.starts_with("tag.")) continue;
    out.emplace_back(name, t);
  }
  return out;
}

DccrnModel DccrnModel::clone() const {
  Rng rng(0);
  DccrnModel out = create(config, rng);
  if (clue_net) out.add_clue_net(rng);
  out.stage = stage;
  const NamedTensors src = parameters();
  NamedTensors dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto from = src[i].second.values();
    std::copy(from.begin(), from.end(), dst[i].second.mutable_values().begin());
  }
  return out;
}

Encoded encode(const ComplexSpec& spec, const DccrnModel& model) {
  const DccrnConfig& c = model.config;
  if (!(spec.config == c.stft) || spec.real.rank() != 2 || spec.bins() != c.stft.bins()) {
    throw DimensionError("encode: spectrum " + to_string(spec.real.shape()) +
                         " does not match the model's stft configuration");
  }
  const std::size_t t = spec.frames(), f = spec.bins();
  ComplexFeature x{reshape(transpose(spec.real), {1, f, t}), reshape(transpose(spec.imag), {1, f, t})};
  Encoded out;
  for (const auto& layer : model.encoder) {
    x = activate(slice_time(complex_conv2d(x, layer.kernel, encoder_geometry(c), layer.bias), t), layer);
    out.skips.push_back(x);
  }
  const std::size_t d = x.shape()[0] * x.shape()[1];
  out.features = {reshape(permute(x.real, {2, 0, 1}), {t, d}), reshape(permute(x.imag, {2, 0, 1}), {t, d})};
  return out;
}

ComplexFeature enhance(const ComplexFeature& y, const Tensor& clue, const DccrnModel& model) {
  return complex_lstm_enhance(y, clue, model.enhance);
}

ComplexSpec decode(const ComplexFeature& f_out, const std::vector<ComplexFeature>& skips,
                   const DccrnModel& model) {
  const DccrnConfig& c = model.config;
  if (skips.size() != model.decoder.size()) {
    throw ContractError("decode: " + std::to_string(skips.size()) + " skip connections for " +
                        std::to_string(model.decoder.size()) + " decoder layers");
  }
  const Shape& deepest = skips.back().shape();
  const std::size_t t = f_out.shape()[0];
  if (f_out.real.rank() != 2 || f_out.shape()[1] != deepest[0] * deepest[1] || deepest[2] != t) {
    throw DimensionError("decode: features " + to_string(f_out.shape()) + " do not match skip " +
                         to_string(deepest));
  }
  const Shape cft{t, deepest[0], deepest[1]};
  ComplexFeature x{permute(reshape(f_out.real, cft), {1, 2, 0}), permute(reshape(f_out.imag, cft), {1, 2, 0})};
  for (std::size_t i = model.decoder.size(); i-- > 0;) {
    const auto& layer = model.decoder[i];
    if (x.shape() != skips[i].shape()) {
      throw DimensionError("decode: layer " + std::to_string(i) + " input " + to_string(x.shape()) +
                           " does not match skip " + to_string(skips[i].shape()));
    }
    ComplexFeature joined{concat({x.real, skips[i].real}, 0), concat({x.imag, skips[i].imag}, 0)};
    x = activate(slice_time(complex_conv2d_transpose(joined, layer.kernel, decoder_geometry(c), layer.bias), t),
                 layer);
  }
  const std::size_t f = x.shape()[1];
  return {transpose(reshape(x.real, {f, t})), transpose(reshape(x.imag, {f, t})), c.stft};
}

Tensor tiled_tag_clue(const std::vector<double>& onehot, std::size_t frames, const DccrnModel& model) {
  const std::size_t classes = model.config.num_classes;
  std::size_t ones = 0;
  bool clean = onehot.size() == classes;
  for (double v : onehot) {
    if (v == 1.0) ++ones;
    else if (v != 0.0) clean = false;
  }
  if (!clean || ones != 1) throw InputError("tag clue must be one-hot over " + std::to_string(classes) + " classes");
  return tile(model.tag(Tensor({1, classes}, onehot)), frames);
}

ForwardResult forward(const DccrnModel& model, const ComplexSpec& mixture, std::size_t out_len,
                      const ClueSet& clues, CluePath path) {
  Encoded enc = encode(mixture, model);
  const std::size_t t = mixture.frames();
  ForwardResult out;
  Tensor clue;
  if (path == CluePath::kTagTiling) {
    if (!clues.tag) throw InputError("the tag-tiling clue path needs a tag clue");
    clue = tiled_tag_clue(*clues.tag, t, model);
  } else {
    if (!model.clue_net) throw ContractError("multi-clue path needs a stage-2 model with a clue network");
    out.clue = clue_pipeline(mixture, clues, *model.clue_net);
    clue = out.clue->clue;
  }
  out.spec = decode(enhance(enc.features, clue, model), enc.skips, model);
  out.wave = istft(out.spec, out_len);
  return out;
}

ExtractResult extract(const AudioClip& mixture, const ClueSet& clues, const DccrnModel& model) {
  return extract(mixture, clues, model, model.default_path());
}

ExtractResult extract(const AudioClip& mixture, const ClueSet& clues, const DccrnModel& model,
                      CluePath path) {
  if (clues.empty()) throw InputError("extract: clue set is empty");
  ForwardResult r = forward(model, stft(mixture, model.config.stft), mixture.size(), clues, path);
  return {AudioClip::from_tensor(r.wave, mixture.sample_rate), std::move(r.clue)};
}

}  // namespace mctse
