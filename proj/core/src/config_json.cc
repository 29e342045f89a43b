// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "config_json.h"

#include <algorithm>
#include <fstream>
#include <type_traits>
#include <set>
#include <sstream>

#include "mctse/errors.h"

namespace mctse::detail {

using nlohmann::json;

namespace {

class Fields {
 public:
  Fields(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j.is_object()) throw ConfigError("config section '" + section_ + "' must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    bool ok = true;
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      ok = v.is_number_unsigned();
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_unsigned(); });
    } else if constexpr (std::is_same_v<T, int>) {
      ok = v.is_number_integer();
    } else if constexpr (std::is_same_v<T, double>) {
      ok = v.is_number();
    }
    if (!ok) throw ConfigError("config field '" + section_ + "." + key + "' has the wrong type");
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config field '" + section_ + "." + key + "' has the wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config field '" + section_ + "." + k + "'");
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const DccrnConfig& c) {
  return {{"channels", c.channels},
          {"kernel_freq", c.kernel_freq},
          {"kernel_time", c.kernel_time},
          {"lstm_hidden", c.lstm_hidden},
          {"lstm_layers", c.lstm_layers},
          {"num_classes", c.num_classes},
          {"stft", {{"fft_size", c.stft.fft_size}, {"win_len", c.stft.win_len}, {"hop", c.stft.hop}}},
          {"clue",
           {{"vocab_size", c.clue.vocab_size},
            {"text_raw_dim", c.clue.text_raw_dim},
            {"video_raw_dim", c.clue.video_raw_dim},
            {"sound_channels", c.clue.sound_channels},
            {"downsample", c.clue.downsample},
            {"heads", c.clue.heads}}}};
}

DccrnConfig dccrn_config_from_json(const json& j) {
  DccrnConfig c;
  Fields f(j, "model");
  f.get("channels", c.channels);
  f.get("kernel_freq", c.kernel_freq);
  f.get("kernel_time", c.kernel_time);
  f.get("lstm_hidden", c.lstm_hidden);
  f.get("lstm_layers", c.lstm_layers);
  f.get("num_classes", c.num_classes);
  if (const json* s = f.sub("stft")) {
    Fields fs(*s, "model.stft");
    fs.get("fft_size", c.stft.fft_size);
    fs.get("win_len", c.stft.win_len);
    fs.get("hop", c.stft.hop);
    fs.finish();
  }
  if (const json* s = f.sub("clue")) {
    Fields fc(*s, "model.clue");
    fc.get("vocab_size", c.clue.vocab_size);
    fc.get("text_raw_dim", c.clue.text_raw_dim);
    fc.get("video_raw_dim", c.clue.video_raw_dim);
    fc.get("sound_channels", c.clue.sound_channels);
    fc.get("downsample", c.clue.downsample);
    fc.get("heads", c.clue.heads);
    fc.finish();
  }
  f.finish();
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  json subsets = json::array();
  for (const auto& s : c.subsets) subsets.push_back({{"subset", subset_name(s.subset)}, {"weight", s.weight}});
  return {{"stage", c.stage},           {"lr0", c.lr0},
          {"decay", c.decay},           {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs}, {"patience", c.patience},
          {"seed", c.seed},             {"grad_clip", c.grad_clip},
          {"fp32_gemm", c.fp32_gemm},   {"subsets", subsets}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  Fields f(j, "train");
  f.get("stage", c.stage);
  f.get("lr0", c.lr0);
  f.get("decay", c.decay);
  f.get("batch_size", c.batch_size);
  f.get("max_epochs", c.max_epochs);
  f.get("patience", c.patience);
  f.get("seed", c.seed);
  f.get("grad_clip", c.grad_clip);
  f.get("fp32_gemm", c.fp32_gemm);
  if (const json* s = f.sub("subsets")) {
    if (!s->is_array()) throw ConfigError("config field 'train.subsets' must be an array");
    c.subsets.clear();
    for (const auto& e : *s) {
      Fields fe(e, "train.subsets[]");
      std::string name;
      SubsetWeight w;
      fe.get("subset", name);
      fe.get("weight", w.weight);
      fe.finish();
      try {
        w.subset = parse_subset(name);
      } catch (const InputError& err) {
        throw ConfigError(err.what());
      }
      c.subsets.push_back(std::move(w));
    }
  }
  f.finish();
  c.validate();
  return c;
}

json to_json(const LossConfig& c) { return {{"lambda", c.lambda}, {"snr_clamp_db", c.snr_clamp_db}}; }

LossConfig loss_config_from_json(const json& j) {
  LossConfig c;
  Fields f(j, "loss");
  f.get("lambda", c.lambda);
  f.get("snr_clamp_db", c.snr_clamp_db);
  f.finish();
  c.validate();
  return c;
}

}  // namespace mctse::detail

namespace mctse {

RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "train") c.train = detail::train_config_from_json(v);
    else if (k == "model") c.model = detail::dccrn_config_from_json(v);
    else if (k == "loss") c.loss = detail::loss_config_from_json(v);
    else throw ConfigError("unknown config section '" + k + "'");
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_json(const RunConfig& c) {
  nlohmann::json j{{"train", detail::to_json(c.train)},
                   {"model", detail::to_json(c.model)},
                   {"loss", detail::to_json(c.loss)}};
  return j.dump(2);
}

}  // namespace mctse
