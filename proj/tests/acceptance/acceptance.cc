// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Acceptance gate: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradcheck.h"
#include "mctse/data_sim.h"
#include "mctse/dccrn.h"
#include "mctse/errors.h"
#include "mctse/train.h"

using namespace mctse;
namespace fs = std::filesystem;

#ifndef MCTSE_CLI_PATH
#error "MCTSE_CLI_PATH must name the mctse executable"
#endif

namespace {

// Tolerances and budgets.
constexpr std::size_t kSeeds = 10;
constexpr double kSmoothTol = 1e-6;
constexpr double kBlockTol = 1e-4;
constexpr double kGradBudgetS = 300.0;
constexpr std::size_t kStftClips = 100;
constexpr double kStftMinSnrDb = 60.0;
constexpr double kStftBudgetS = 30.0;
constexpr double kAttnRowTol = 1e-6;
constexpr double kAttnRelTol = 1e-6;
constexpr std::size_t kMixPairs = 1000;
constexpr double kMixTolDb = 1e-9;
constexpr double kOverfitTargetDb = 5.0;
constexpr std::size_t kOverfitMaxSteps = 2000;
constexpr std::size_t kOverfitEvalEvery = 10;
constexpr double kOverfitLr = 1e-3;
constexpr double kOverfitBudgetS = 600.0;
constexpr double kToyOrderSlackDb = 0.5;
constexpr double kToyBudgetS = 7200.0;
constexpr double kAttnCsvRowTol = 1e-5;

// Toy task schedule.
constexpr const char* kToyStage1 = R"({"train": {"lr0": 1e-3, "max_epochs": 6, "batch_size": 8}})";
constexpr const char* kToyStage2 = R"({"train": {"lr0": 5e-4, "max_epochs": 6, "batch_size": 8}})";

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Env {
  fs::path work;
  std::string cli = MCTSE_CLI_PATH;
  bool keep = false;

  std::string at(const std::string& name) const { return (work / name).string(); }

  int run(const std::string& args, const std::string& tag) const {
    const std::string cmd = cli + " " + args + " >" + at(tag + ".out") + " 2>" + at(tag + ".err");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

// ---------------------------------------------------------------- 1: autodiff

using testing::probe_sum;
using testing::random_tensor;

struct GradProblem {
  std::function<Tensor()> loss;
  std::vector<Tensor> inputs;
};

struct GradCase {
  std::string name;
  bool smooth;
  std::function<GradProblem(Rng&)> build;
};

Tensor rt(Shape s, Rng& rng) { return random_tensor(std::move(s), rng); }

// Entries bounded away from the kink at zero.
Tensor away_from_zero(Shape s, Rng& rng) {
  Tensor t = random_tensor(std::move(s), rng, true, 0.1, 1.0);
  for (double& v : t.mutable_values())
    if (uniform01(rng) < 0.5) v = -v;
  return t;
}

GradProblem unary(Tensor x, std::function<Tensor(const Tensor&)> f) {
  return {[x, f] { return probe_sum(f(x)); }, {x}};
}

ComplexFeature random_complex(Shape s, Rng& rng) { return {rt(s, rng), rt(s, rng)}; }

Tensor complex_probe(const ComplexFeature& y) { return add(probe_sum(y.real, 1), probe_sum(y.imag, 2)); }

std::vector<Tensor> tensors_of(const NamedTensors& named) {
  std::vector<Tensor> out;
  for (const auto& [n, t] : named) out.push_back(t);
  return out;
}

DccrnConfig mini_config() {
  DccrnConfig c;
  c.stft = {8, 8, 4};
  c.channels = {2, 2};
  c.lstm_hidden = 3;
  c.lstm_layers = 1;
  c.num_classes = 3;
  c.clue.vocab_size = 10;
  c.clue.text_raw_dim = 4;
  c.clue.video_raw_dim = 5;
  c.clue.sound_channels = 4;
  c.clue.downsample = 2;
  c.clue.heads = 2;
  return c;
}

void perturb_offsets(DccrnModel& m, Rng& rng) {
  for (auto& [name, t] : m.parameters()) {
    if (name.find("bias") == std::string::npos && name.find("prelu") == std::string::npos &&
        name.find("ln_") == std::string::npos)
      continue;
    for (double& v : t.mutable_values()) v += uniform(rng, -0.3, 0.3);
  }
}

AudioClip noise_clip(std::size_t n, Rng& rng, double amp = 0.5) {
  AudioClip c;
  c.samples.resize(n);
  for (double& v : c.samples) v = uniform(rng, -amp, amp);
  return c;
}

GradProblem full_model_problem(Rng& rng, bool multi) {
  auto m = std::make_shared<DccrnModel>(DccrnModel::create(mini_config(), rng));
  if (multi) m->add_clue_net(rng);
  perturb_offsets(*m, rng);
  const AudioClip mix = noise_clip(20, rng), target = noise_clip(20, rng);
  ClueSet clues;
  clues.tag = one_hot(1, 3);
  clues.text = std::vector<std::size_t>{uniform_index(rng, 10), uniform_index(rng, 10), uniform_index(rng, 10)};
  clues.video = random_tensor({4, 5}, rng, false);
  const CluePath path = multi ? CluePath::kMultiClue : CluePath::kTagTiling;
  auto loss = [m, mix, target, clues, path] {
    const ForwardResult r = forward(*m, stft(mix, m->config.stft), mix.size(), clues, path);
    const Tensor t = target.to_tensor();
    return extraction_loss(t, r.wave, stft(t, m->config.stft), r.spec, LossConfig{}).total;
  };
  return {loss, tensors_of(multi ? m->trainable_parameters() : m->parameters())};
}

std::vector<GradCase> grad_cases() {
  std::vector<GradCase> c;
  auto smooth_unary = [&](std::string name, std::function<Tensor(const Tensor&)> f) {
    c.push_back({name, true, [f](Rng& r) { return unary(rt({3, 4}, r), f); }});
  };
  smooth_unary("neg", [](const Tensor& x) { return neg(x); });
  smooth_unary("scale", [](const Tensor& x) { return scale(x, 1.7); });
  smooth_unary("sigmoid", [](const Tensor& x) { return sigmoid(x); });
  smooth_unary("tanh", [](const Tensor& x) { return tanh(x); });
  smooth_unary("square", [](const Tensor& x) { return square(x); });
  smooth_unary("sum", [](const Tensor& x) { return sum(x); });
  smooth_unary("sum_axis0", [](const Tensor& x) { return sum(x, 0); });
  smooth_unary("sum_axis1", [](const Tensor& x) { return sum(x, 1); });
  smooth_unary("mean", [](const Tensor& x) { return mean(x); });
  smooth_unary("slice", [](const Tensor& x) { return slice(x, 1, 1, 3); });
  smooth_unary("reshape", [](const Tensor& x) { return reshape(x, {2, 6}); });
  smooth_unary("transpose", [](const Tensor& x) { return transpose(x); });
  smooth_unary("gather_rows", [](const Tensor& x) { return gather_rows(x, {2, 0, 2, 1}); });
  smooth_unary("softmax_axis0", [](const Tensor& x) { return softmax(x, 0); });
  smooth_unary("softmax_axis1", [](const Tensor& x) { return softmax(x, 1); });
  smooth_unary("masked_softmax", [](const Tensor& x) { return masked_softmax(x, {true, false, true, true}); });
  c.push_back({"log10", true, [](Rng& r) {
                 return unary(random_tensor({3, 4}, r, true, 0.5, 2.0), [](const Tensor& x) { return log10(x); });
               }});
  c.push_back({"permute", true, [](Rng& r) {
                 return unary(rt({2, 3, 4}, r), [](const Tensor& x) { return permute(x, {2, 0, 1}); });
               }});
  c.push_back({"tile", true,
               [](Rng& r) { return unary(rt({4}, r), [](const Tensor& x) { return tile(x, 3); }); }});
  auto binary = [&](std::string name, Shape a, Shape b, std::function<Tensor(const Tensor&, const Tensor&)> f) {
    c.push_back({name, true, [a, b, f](Rng& r) {
                   Tensor x = rt(a, r), y = rt(b, r);
                   return GradProblem{[x, y, f] { return probe_sum(f(x, y)); }, {x, y}};
                 }});
  };
  binary("add", {3, 4}, {3, 4}, [](const Tensor& x, const Tensor& y) { return add(x, y); });
  binary("sub", {3, 4}, {3, 4}, [](const Tensor& x, const Tensor& y) { return sub(x, y); });
  binary("mul", {3, 4}, {3, 4}, [](const Tensor& x, const Tensor& y) { return mul(x, y); });
  binary("matmul", {3, 4}, {4, 2}, [](const Tensor& x, const Tensor& y) { return matmul(x, y); });
  binary("concat_axis0", {2, 3}, {4, 3}, [](const Tensor& x, const Tensor& y) { return concat({x, y}, 0); });
  binary("concat_axis1", {3, 2}, {3, 4}, [](const Tensor& x, const Tensor& y) { return concat({x, y}, 1); });
  binary("bias_add_rows", {3, 4}, {4}, [](const Tensor& x, const Tensor& y) { return bias_add(x, y, 1); });
  binary("bias_add_channels", {2, 3, 4}, {2},
         [](const Tensor& x, const Tensor& y) { return bias_add(x, y, 0); });
  c.push_back({"layer_norm", true, [](Rng& r) {
                 Tensor x = rt({4, 6}, r), g = rt({6}, r), b = rt({6}, r);
                 return GradProblem{[=] { return probe_sum(layer_norm(x, g, b)); }, {x, g, b}};
               }});
  c.push_back({"conv2d", true, [](Rng& r) {
                 Tensor x = rt({2, 5, 6}, r), k = rt({3, 2, 3, 2}, r), b = rt({3}, r);
                 const Conv2dGeometry g{{2, 1}, {1, 1}};
                 return GradProblem{[=] { return probe_sum(conv2d(x, k, g, b)); }, {x, k, b}};
               }});
  c.push_back({"conv2d_transpose", true, [](Rng& r) {
                 Tensor x = rt({2, 4, 5}, r), k = rt({2, 3, 3, 2}, r), b = rt({3}, r);
                 const Conv2dGeometry g{{2, 1}, {1, 0}};
                 return GradProblem{[=] { return probe_sum(conv2d_transpose(x, k, g, b)); }, {x, k, b}};
               }});
  c.push_back({"stft", true, [](Rng& r) {
                 Tensor w = rt({48}, r);
                 const StftConfig cfg{16, 12, 4};
                 return GradProblem{[=] {
                                      const ComplexSpec s = stft(w, cfg);
                                      return add(probe_sum(s.real, 1), probe_sum(s.imag, 2));
                                    },
                                    {w}};
               }});
  c.push_back({"istft", true, [](Rng& r) {
                 const StftConfig cfg{16, 12, 4};
                 const std::size_t frames = cfg.frames(48);
                 ComplexSpec s{rt({frames, cfg.bins()}, r), rt({frames, cfg.bins()}, r), cfg};
                 return GradProblem{[=] { return probe_sum(istft(s, 48)); }, {s.real, s.imag}};
               }});

  auto kinked = [&](std::string name, std::function<Tensor(const Tensor&)> f) {
    c.push_back({name, false, [f](Rng& r) { return unary(away_from_zero({3, 4}, r), f); }});
  };
  kinked("relu", [](const Tensor& x) { return relu(x); });
  kinked("abs", [](const Tensor& x) { return abs(x); });
  kinked("clamp_min", [](const Tensor& x) { return clamp_min(x, 0.0); });
  c.push_back({"prelu", false, [](Rng& r) {
                 Tensor x = away_from_zero({3, 4}, r), s = rt({1}, r);
                 return GradProblem{[=] { return probe_sum(prelu(x, s)); }, {x, s}};
               }});

  c.push_back({"complex_conv2d", false, [](Rng& r) {
                 ComplexFeature x = random_complex({2, 5, 3}, r), k = random_complex({2, 2, 3, 2}, r),
                                b = random_complex({2}, r);
                 const Conv2dGeometry g{{2, 1}, {1, 1}};
                 return GradProblem{[=] { return complex_probe(complex_conv2d(x, k, g, b)); },
                                    {x.real, x.imag, k.real, k.imag, b.real, b.imag}};
               }});
  c.push_back({"complex_conv2d_transpose", false, [](Rng& r) {
                 ComplexFeature x = random_complex({2, 5, 3}, r), k = random_complex({2, 2, 3, 2}, r),
                                b = random_complex({2}, r);
                 const Conv2dGeometry g{{2, 1}, {1, 1}};
                 return GradProblem{[=] { return complex_probe(complex_conv2d_transpose(x, k, g, b)); },
                                    {x.real, x.imag, k.real, k.imag, b.real, b.imag}};
               }});
  c.push_back({"lstm", false, [](Rng& r) {
                 auto p = std::make_shared<LstmParams>(LstmParams::create(3, 2, 2, true, r));
                 for (auto& cell : p->cells) cell.bias = rt({8}, r);
                 Tensor x = rt({5, 3}, r);
                 NamedTensors named;
                 p->collect("lstm", named);
                 auto inputs = tensors_of(named);
                 inputs.push_back(x);
                 return GradProblem{[p, x] { return probe_sum(lstm_forward(x, *p)); }, inputs};
               }});
  c.push_back({"complex_lstm_enhance", false, [](Rng& r) {
                 auto p = std::make_shared<EnhanceParams>(EnhanceParams::create(4, 2, 2, r));
                 p->proj_real.bias = rt({4}, r);
                 p->proj_imag.bias = rt({4}, r);
                 ComplexFeature y = random_complex({3, 4}, r);
                 Tensor clue = rt({3, 4}, r);
                 NamedTensors named;
                 p->collect("enhance", named);
                 auto inputs = tensors_of(named);
                 inputs.insert(inputs.end(), {y.real, y.imag, clue});
                 return GradProblem{[p, y, clue] { return complex_probe(complex_lstm_enhance(y, clue, *p)); },
                                    inputs};
               }});
  c.push_back({"multi_head_attention", false, [](Rng& r) {
                 auto m = std::make_shared<MhaParams>(MhaParams::create(4, 2, r));
                 for (auto* l : {&m->query, &m->value, &m->output}) l->bias = rt({4}, r);
                 Tensor q = rt({2, 4}, r), k = rt({3, 4}, r), v = rt({3, 4}, r);
                 NamedTensors named;
                 m->collect("mha", named);
                 auto inputs = tensors_of(named);
                 inputs.insert(inputs.end(), {q, k, v});
                 return GradProblem{
                     [m, q, k, v] { return probe_sum(multi_head_attention(q, k, v, *m, {true, false, true}).out); },
                     inputs};
               }});
  c.push_back({"extraction_loss", false, [](Rng& r) {
                 const StftConfig cfg{8, 8, 4};
                 Tensor t = random_tensor({40}, r, false), est = rt({40}, r);
                 const ComplexSpec ts = stft(t, cfg);
                 return GradProblem{
                     [=] { return extraction_loss(t, est, ts, stft(est, cfg), LossConfig{}).total; }, {est}};
               }});
  c.push_back({"full_model_tag", false, [](Rng& r) { return full_model_problem(r, false); }});
  c.push_back({"full_model_multi_clue", false, [](Rng& r) { return full_model_problem(r, true); }});
  return c;
}

Outcome criterion_autodiff(const Env&) {
  GemmPrecisionScope precision(GemmPrecision::kDouble);
  const auto start = Clock::now();
  double worst_smooth = 0.0, worst_block = 0.0;
  std::string worst_smooth_name, worst_block_name, failures;
  const auto cases = grad_cases();
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const GradCase& gc = cases[ci];
    for (std::size_t s = 0; s < kSeeds; ++s) {
      Rng rng(mix_seed(1000 + ci, s));
      const GradProblem p = gc.build(rng);
      const double err = testing::gradcheck(p.loss, p.inputs).max_rel_error;
      const double tol = gc.smooth ? kSmoothTol : kBlockTol;
      double& worst = gc.smooth ? worst_smooth : worst_block;
      if (!(err <= worst)) {
        worst = err;
        (gc.smooth ? worst_smooth_name : worst_block_name) = gc.name;
      }
      if (!(err <= tol)) failures += " " + gc.name + "#" + std::to_string(s);
    }
  }
  const double secs = seconds_since(start);
  const bool pass = failures.empty() && secs < kGradBudgetS;
  std::string d = std::to_string(cases.size()) + " ops/blocks x " + std::to_string(kSeeds) + " seeds; smooth max " +
                  fmt("%.2e", worst_smooth) + " (" + worst_smooth_name + ", limit " + fmt("%.0e", kSmoothTol) +
                  "), blocks max " + fmt("%.2e", worst_block) + " (" + worst_block_name + ", limit " +
                  fmt("%.0e", kBlockTol) + "); " + fmt("%.1f", secs) + " s (limit " + fmt("%.0f", kGradBudgetS) +
                  " s)";
  if (!failures.empty()) d += "; failed:" + failures;
  return {pass, d};
}

// ---------------------------------------------------------------- 2: STFT

double snr_db(const std::vector<double>& ref, std::span<const double> est) {
  double s = 0.0, e = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    s += ref[i] * ref[i];
    e += (ref[i] - est[i]) * (ref[i] - est[i]);
  }
  return 10.0 * std::log10(s / e);
}

Outcome criterion_stft(const Env&) {
  GemmPrecisionScope precision(GemmPrecision::kDouble);
  const auto start = Clock::now();
  const StftConfig cfg{512, 400, 100};
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kStftClips; ++i) {
    Rng rng(mix_seed(2000, i));
    const AudioClip clip = noise_clip(32000, rng, uniform(rng, 0.01, 1.0));
    const Tensor back = istft(stft(clip, cfg), clip.size());
    worst = std::min(worst, snr_db(clip.samples, back.values()));
  }
  const double secs = seconds_since(start);
  return {worst >= kStftMinSnrDb && secs < kStftBudgetS,
          std::to_string(kStftClips) + " clips at 512/400/100; worst reconstruction SNR " + fmt("%.1f", worst) +
              " dB (limit " + fmt("%.0f", kStftMinSnrDb) + "); " + fmt("%.1f", secs) + " s (limit " +
              fmt("%.0f", kStftBudgetS) + " s)"};
}

// ---------------------------------------------------------------- 3: enhancement algebra

Outcome criterion_enhance_algebra(const Env&) {
  const SequenceMap identity = [](const Tensor& t) { return t; };
  double worst_ulps = 0.0;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    Rng rng(mix_seed(3000, s));
    const Shape shape{7, 9};
    const ComplexFeature y{random_tensor(shape, rng, false, -10.0, 10.0), random_tensor(shape, rng, false, -10.0, 10.0)};
    const Tensor c = random_tensor(shape, rng, false, -10.0, 10.0);
    const ComplexFeature out = complex_lstm_enhance(y, c, identity, identity);
    for (std::size_t i = 0; i < c.numel(); ++i) {
      const double a = y.real.values()[i], b = y.imag.values()[i], cc = c.values()[i];
      // Each side is at most three roundings away from the exact value.
      const double scale = std::numeric_limits<double>::epsilon() * (std::fabs(a) + std::fabs(b) + 2.0 * std::fabs(cc));
      worst_ulps = std::max(worst_ulps, std::fabs(out.real.values()[i] - (a - b)) / scale);
      worst_ulps = std::max(worst_ulps, std::fabs(out.imag.values()[i] - (a + b + 2.0 * cc)) / scale);
    }
  }
  return {worst_ulps <= 4.0, "identity stubs over " + std::to_string(kSeeds) +
                                 " random [7 x 9] inputs; max deviation " + fmt("%.2f", worst_ulps) +
                                 " eps-scaled units (limit 4)"};
}

// ---------------------------------------------------------------- 4: attention

double rel_diff(const Tensor& a, const Tensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    num += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
    den += b.values()[i] * b.values()[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

Outcome criterion_attention(const Env&) {
  GemmPrecisionScope precision(GemmPrecision::kDouble);
  double row_err = 0.0, perm_err = 0.0, missing_err = 0.0;
  bool single_exact = true;
  ClueNetConfig cfg;
  cfg.dim = 16;
  cfg.num_classes = 3;
  cfg.vocab_size = 10;
  cfg.text_raw_dim = 4;
  cfg.video_raw_dim = 5;
  cfg.heads = 4;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    Rng rng(mix_seed(4000, s));
    const ClueNetParams p = ClueNetParams::create(cfg, 9, rng);
    const Tensor sound = random_tensor({6, 16}, rng, false);
    const EmbeddingSeq text = encode_text({1, 4, 7, 2}, p);
    const EmbeddingSeq video = encode_video(random_tensor({5, 5}, rng, false), p);
    const EmbeddingSeq tag = encode_tag(one_hot(s % 3, 3), p);

    const ConcatClues all = concat_clues({text, video, tag});
    const FusedClue full = fuse_clues(sound, all, p.attention);
    const std::size_t l = all.data.dim(0);
    for (std::size_t i = 0; i < full.weights.numel(); i += l) {
      double row = 0.0;
      for (std::size_t j = 0; j < l; ++j) row += full.weights.values()[i + j];
      row_err = std::max(row_err, std::fabs(row - 1.0));
    }

    std::vector<std::size_t> perm(l);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = l; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
    const Tensor kv = gather_rows(all.data, perm);
    const AttentionOutput shuffled = multi_head_attention(sound, kv, kv, p.attention);
    perm_err = std::max(perm_err, rel_diff(shuffled.out, full.fused));

    std::vector<bool> mask(l, true);
    for (const Segment& seg : all.segments)
      if (seg.modality == Modality::kVideo)
        for (std::size_t j = 0; j < seg.length; ++j) mask[seg.begin + j] = false;
    const FusedClue masked = fuse_clues(sound, all, p.attention, mask);
    const FusedClue missing = fuse_clues(sound, concat_clues({text, tag}), p.attention);
    missing_err = std::max(missing_err, rel_diff(missing.fused, masked.fused));

    const FusedClue single = fuse_clues(sound, concat_clues({tag}), p.attention);
    for (double w : single.weights.values()) single_exact = single_exact && w == 1.0;
  }
  const bool pass = row_err <= kAttnRowTol && perm_err <= kAttnRelTol && missing_err <= kAttnRelTol && single_exact;
  return {pass, "row-sum err " + fmt("%.1e", row_err) + ", permutation rel err " + fmt("%.1e", perm_err) +
                    ", missing-vs-masked rel err " + fmt("%.1e", missing_err) + " (limits " + fmt("%.0e", kAttnRowTol) +
                    "); single-key weights " + (single_exact ? "exactly 1" : "NOT exactly 1")};
}

// ---------------------------------------------------------------- 5: mixing

Outcome criterion_mixing(const Env&) {
  const auto catalog = make_catalog(kMaxClasses);
  double worst = 0.0;
  bool sums_exact = true;
  for (std::size_t i = 0; i < kMixPairs; ++i) {
    Rng rng(mix_seed(5000, i));
    const std::size_t a = uniform_index(rng, catalog.size());
    const std::size_t b = (a + 1 + uniform_index(rng, catalog.size() - 1)) % catalog.size();
    const AudioClip target = gen_source(catalog[a], rng(), 0.5);
    AudioClip interferer = gen_source(catalog[b], rng(), 0.5);
    const double gain = std::pow(10.0, uniform(rng, -3.0, 1.0));
    for (double& v : interferer.samples) v *= gain;
    for (double snr : {-2.0, 0.0, 2.0}) {
      const MixResult m = mix_at_snr(target, interferer, snr);
      double et = 0.0, ei = 0.0;
      for (std::size_t k = 0; k < target.size(); ++k) {
        et += target.samples[k] * target.samples[k];
        ei += m.scaled_interferer.samples[k] * m.scaled_interferer.samples[k];
        sums_exact = sums_exact && m.mixture.samples[k] == target.samples[k] + m.scaled_interferer.samples[k];
      }
      worst = std::max(worst, std::fabs(10.0 * std::log10(et / ei) - snr));
    }
  }
  return {worst <= kMixTolDb && sums_exact, std::to_string(kMixPairs) + " pairs x SNR {-2, 0, 2} dB; max error " +
                                                fmt("%.2e", worst) + " dB (limit " + fmt("%.0e", kMixTolDb) +
                                                "); mixture == target + scaled interferer " +
                                                (sums_exact ? "exactly" : "NOT exactly")};
}

// ---------------------------------------------------------------- 6: overfit

Outcome criterion_overfit(const Env&) {
  const auto start = Clock::now();
  const DccrnConfig cfg;  // channels {8, 16, 32, 32}
  Rng rng(6000);
  DccrnModel model = DccrnModel::create(cfg, rng);
  const MixtureExample ex = make_example(make_catalog(cfg.num_classes), 0, 1, 0.0, 7);
  const TrainingSample sample{ex.mixture, ex.target, ex.clues};
  TrainConfig tc;
  tc.lr0 = kOverfitLr;
  tc.batch_size = 1;
  Trainer trainer(model, tc, LossConfig{});
  const ClueSet tag = ex.clues.only({Modality::kTag});
  double best = -std::numeric_limits<double>::infinity();
  std::size_t steps = 0;
  while (steps < kOverfitMaxSteps && best < kOverfitTargetDb && seconds_since(start) < kOverfitBudgetS) {
    for (std::size_t i = 0; i < kOverfitEvalEvery; ++i, ++steps) trainer.step({sample}, {{Modality::kTag}}, kOverfitLr);
    GemmPrecisionScope precision(GemmPrecision::kSingle);
    best = std::max(best, snr_improvement(ex.mixture, extract(ex.mixture, tag, model).estimate, ex.target));
  }
  const double secs = seconds_since(start);
  return {best >= kOverfitTargetDb && steps <= kOverfitMaxSteps && secs < kOverfitBudgetS,
          "default model, tag clue, one example: SNRi " + fmt("%.2f", best) + " dB after " + std::to_string(steps) +
              " Adam steps (target " + fmt("%.0f", kOverfitTargetDb) + " dB within " +
              std::to_string(kOverfitMaxSteps) + "); " + fmt("%.1f", secs) + " s (limit " +
              fmt("%.0f", kOverfitBudgetS) + " s)"};
}

// ---------------------------------------------------------------- 7 and 8: toy task

// subset -> mean SNRi from the summary rows of a report CSV.
std::map<std::string, double> read_summary(const std::string& path) {
  std::map<std::string, double> out;
  std::istringstream in(slurp(path));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() == 7 && f[0] == "summary") out[f[3]] = std::stod(f[6]);
  }
  return out;
}

struct ToyRun {
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  std::map<std::string, double> clean, text_corrupt, video_corrupt;
};

const ToyRun& toy_run(const Env& env) {
  static ToyRun run;
  static bool done = false;
  if (done) return run;
  done = true;
  const auto start = Clock::now();
  const std::string data = env.at("toy"), manifest = env.at("toy/manifest.jsonl");
  write_text(env.at("toy_s1.json"), kToyStage1);
  write_text(env.at("toy_s2.json"), kToyStage2);
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"simulate", "simulate --classes 4 --train 400 --valid 40 --test 40 --unseen-classes 0 --seed 1 --out " + data},
      {"train_s1", "train --stage 1 --manifest " + manifest + " --config " + env.at("toy_s1.json") + " --out " +
                       env.at("toy_s1.ckpt") + " --log " + env.at("toy_s1.csv")},
      {"train_s2", "train --stage 2 --manifest " + manifest + " --config " + env.at("toy_s2.json") + " --init " +
                       env.at("toy_s1.ckpt") + " --out " + env.at("toy_s2.ckpt") + " --log " + env.at("toy_s2.csv")},
      {"eval_clean", "evaluate --ckpt " + env.at("toy_s2.ckpt") + " --manifest " + manifest +
                         " --subsets all --report " + env.at("toy_clean.csv")},
      {"eval_text", "evaluate --ckpt " + env.at("toy_s2.ckpt") + " --manifest " + manifest +
                        " --subsets all --corrupt text --seed 3 --report " + env.at("toy_text.csv")},
      {"eval_video", "evaluate --ckpt " + env.at("toy_s2.ckpt") + " --manifest " + manifest +
                         " --subsets all --corrupt video --seed 3 --report " + env.at("toy_video.csv")},
  };
  for (const auto& [tag, args] : steps) {
    std::cerr << "[toy] " << tag << "\n";
    const int rc = env.run(args, "toy_" + tag);
    if (rc != 0) {
      run.error = tag + " exited with " + std::to_string(rc) + ": " + slurp(env.at("toy_" + tag + ".err"));
      run.seconds = seconds_since(start);
      return run;
    }
  }
  run.seconds = seconds_since(start);
  run.clean = read_summary(env.at("toy_clean.csv"));
  run.text_corrupt = read_summary(env.at("toy_text.csv"));
  run.video_corrupt = read_summary(env.at("toy_video.csv"));
  run.ok = true;
  return run;
}

Outcome criterion_toy(const Env& env) {
  const ToyRun& run = toy_run(env);
  if (!run.ok) return {false, run.error};
  const double all = run.clean.at("tag+text+video"), tag = run.clean.at("tag");
  const bool pass = all > 0.0 && all >= tag - kToyOrderSlackDb && run.seconds <= kToyBudgetS;
  return {pass, "C=4, 400/40/40: all-clues mean SNRi " + fmt("%.2f", all) + " dB (need > 0), tag-only " +
                    fmt("%.2f", tag) + " dB (need all >= tag - " + fmt("%.1f", kToyOrderSlackDb) + "); " +
                    fmt("%.0f", run.seconds) + " s (limit " + fmt("%.0f", kToyBudgetS) + " s)"};
}

Outcome criterion_robustness(const Env& env) {
  const ToyRun& run = toy_run(env);
  if (!run.ok) return {false, run.error};
  bool finite = true;
  for (const auto* m : {&run.clean, &run.text_corrupt, &run.video_corrupt}) {
    finite = finite && m->size() == all_subsets().size();
    for (const auto& [k, v] : *m) finite = finite && std::isfinite(v);
  }
  const double text = run.clean.at("text"), text_c = run.text_corrupt.at("text");
  const double video = run.clean.at("video"), video_c = run.video_corrupt.at("video");
  const bool pass = finite && text_c <= text && video_c <= video;
  return {pass, "text-only " + fmt("%.2f", text) + " -> " + fmt("%.2f", text_c) + " dB corrupted; video-only " +
                    fmt("%.2f", video) + " -> " + fmt("%.2f", video_c) + " dB at -2.5 dB noise; all 7 subsets " +
                    (finite ? "finite" : "NOT finite") + " in clean and corrupted runs"};
}

// ---------------------------------------------------------------- 9: reproducibility

Outcome criterion_reproducibility(const Env& env) {
  const std::string cfg = R"({"train": {"max_epochs": 1, "batch_size": 2, "lr0": 1e-3, "seed": 5}})";
  write_text(env.at("repro.json"), cfg);
  std::vector<std::string> bytes[2];
  for (int r = 0; r < 2; ++r) {
    const std::string dir = env.at("repro" + std::to_string(r));
    const std::string tag = "repro" + std::to_string(r);
    const std::string manifest = dir + "/manifest.jsonl";
    if (env.run("simulate --classes 3 --train 4 --valid 2 --test 2 --unseen-classes 1 --seed 9 --out " + dir,
                tag + "_sim") != 0 ||
        env.run("train --stage 1 --manifest " + manifest + " --config " + env.at("repro.json") + " --out " + dir +
                    "/s1.ckpt",
                tag + "_s1") != 0 ||
        env.run("train --stage 2 --manifest " + manifest + " --config " + env.at("repro.json") + " --init " + dir +
                    "/s1.ckpt --out " + dir + "/s2.ckpt",
                tag + "_s2") != 0) {
      return {false, "run " + std::to_string(r) + " failed: " + slurp(env.at(tag + "_s1.err")) +
                         slurp(env.at(tag + "_s2.err"))};
    }
    for (const char* f : {"/manifest.jsonl", "/catalog.json", "/s1.ckpt", "/s2.ckpt"}) bytes[r].push_back(slurp(dir + f));
  }
  const char* names[] = {"manifest", "catalog", "stage-1 checkpoint", "stage-2 checkpoint"};
  std::string diff;
  for (std::size_t i = 0; i < bytes[0].size(); ++i)
    if (bytes[0][i] != bytes[1][i] || bytes[0][i].empty()) diff += std::string(" ") + names[i];
  return {diff.empty(), diff.empty() ? "manifest, catalog and stage-1/stage-2 checkpoints bit-identical across two runs"
                                     : "differs:" + diff};
}

// ---------------------------------------------------------------- 10: attention dump

Outcome criterion_attention_dump(const Env& env) {
  // Reuse the reproducibility run's stage-2 checkpoint and manifest.
  const std::string dir = env.at("repro0");
  if (!fs::exists(dir + "/s2.ckpt")) {
    const Outcome o = criterion_reproducibility(env);
    if (!fs::exists(dir + "/s2.ckpt")) return {false, "no stage-2 checkpoint: " + o.detail};
  }
  const Manifest m = read_manifest(dir + "/manifest.jsonl");
  const ManifestRecord& rec = m.records.front();
  const std::string out = env.at("attention.csv");
  if (env.run("attention --ckpt " + dir + "/s2.ckpt --manifest " + dir + "/manifest.jsonl --example " + rec.id +
                  " --out " + out,
              "attention") != 0)
    return {false, "attention failed: " + slurp(env.at("attention.err"))};

  std::istringstream in(slurp(out));
  std::string header, line;
  std::getline(in, header);
  std::vector<std::string> cols;
  std::stringstream hs(header);
  for (std::string c; std::getline(hs, c, ',');) cols.push_back(c);
  const std::size_t t_t = rec.clue_text_tokens.size(), t_v = kVideoFrames;
  std::size_t n_text = 0, n_video = 0, n_tag = 0;
  for (const auto& c : cols) {
    n_text += c.rfind("text:", 0) == 0;
    n_video += c.rfind("video:", 0) == 0;
    n_tag += c.rfind("tag:", 0) == 0;
  }
  const bool labels = n_text == t_t && n_video == t_v && n_tag == 1;
  double worst = 0.0;
  std::size_t rows = 0;
  bool widths = true;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    double total = 0.0;
    std::size_t n = 0;
    for (std::string c; std::getline(ls, c, ','); ++n) total += std::stod(c);
    widths = widths && n == cols.size();
    worst = std::max(worst, std::fabs(total - 1.0));
    ++rows;
  }
  const bool pass = cols.size() == t_t + t_v + 1 && labels && widths && rows > 0 && worst <= kAttnCsvRowTol;
  return {pass, std::to_string(cols.size()) + " columns for T_t=" + std::to_string(t_t) + ", T_v=" +
                    std::to_string(t_v) + " (+1 tag), labels " + (labels ? "ok" : "wrong") + "; " +
                    std::to_string(rows) + " rows, max |row sum - 1| " + fmt("%.1e", worst) + " (limit " +
                    fmt("%.0e", kAttnCsvRowTol) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string workdir;
  Env env;
  app.add_option("--only", only, "Run only these criteria (1-10)")->delimiter(',');
  app.add_option("--workdir", workdir, "Scratch directory (default: a fresh temp dir)");
  app.add_flag("--keep", env.keep, "Keep the scratch directory");
  CLI11_PARSE(app, argc, argv);

  env.work = workdir.empty() ? fs::temp_directory_path() / ("mctse_acceptance_" + std::to_string(::getpid()))
                             : fs::path(workdir);
  fs::create_directories(env.work);

  const std::vector<std::pair<std::string, std::function<Outcome(const Env&)>>> criteria = {
      {"autodiff gradients", criterion_autodiff},
      {"stft round trip", criterion_stft},
      {"enhancement algebra", criterion_enhance_algebra},
      {"attention invariants", criterion_attention},
      {"mixing exactness", criterion_mixing},
      {"single-example overfit", criterion_overfit},
      {"toy generalization", criterion_toy},
      {"robustness ordering", criterion_robustness},
      {"reproducibility", criterion_reproducibility},
      {"attention dump", criterion_attention_dump},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second(env);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << id << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << " - "
              << o.detail << std::endl;
  }
  if (!env.keep && workdir.empty()) fs::remove_all(env.work);
  return failed == 0 ? 0 : 1;
}
