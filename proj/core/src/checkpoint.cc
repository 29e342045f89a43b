// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "binary_io.h"
#include "config_json.h"
#include "mctse/dccrn.h"

namespace mctse {

namespace {
constexpr char kMagic[6] = {'M', 'C', 'T', 'S', 'E', '1'};
}

void save_checkpoint(const std::string& path, const DccrnModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof kMagic);
  detail::put_u32(out, kCheckpointVersion);
  const std::string cfg = nlohmann::json{{"stage", model.stage}, {"model", detail::to_json(model.config)}}.dump();
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  for (const auto& [name, t] : model.parameters()) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) detail::put_f32(out, static_cast<float>(v));
  }
  if (!out) throw InputError("write failed for " + path);
}

DccrnModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path);
  detail::Reader r(in, path);
  if (r.str(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) r.fail("not an MCTSE1 checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t cfg_len = r.u32();
  if (cfg_len > (1u << 24)) r.fail("implausible config length");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(r.str(cfg_len));
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("config block is not valid JSON: ") + e.what());
  }
  if (!cfg.is_object() || !cfg.contains("stage") || !cfg.contains("model")) r.fail("config block lacks stage/model");
  const int stage = cfg["stage"].is_number_integer() ? cfg["stage"].get<int>() : 0;
  if (stage != 1 && stage != 2) r.fail("stage marker must be 1 or 2");

  Rng rng(0);
  DccrnModel model = DccrnModel::create(detail::dccrn_config_from_json(cfg["model"]), rng);
  if (stage == 2) model.add_clue_net(rng);
  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : model.parameters()) by_name.emplace(name, t);
  std::set<std::string> loaded;
  while (!r.at_end()) {
    const std::uint32_t name_len = r.u32();
    if (name_len == 0 || name_len > 4096) r.fail("bad tensor name length");
    const std::string name = r.str(name_len);
    auto it = by_name.find(name);
    if (it == by_name.end()) r.fail("unexpected tensor '" + name + "'");
    if (!loaded.insert(name).second) r.fail("duplicate tensor '" + name + "'");
    const std::uint32_t rank = r.u32();
    Shape shape;
    for (std::uint32_t i = 0; i < std::min<std::uint32_t>(rank, 8); ++i) shape.push_back(r.u32());
    if (shape != it->second.shape()) {
      r.fail("tensor '" + name + "' has shape " + to_string(shape) + ", config implies " +
             to_string(it->second.shape()));
    }
    auto dst = it->second.mutable_values();
    for (auto& v : dst) {
      v = r.f32();
      if (!std::isfinite(v)) r.fail("non-finite value in '" + name + "'");
    }
  }
  for (const auto& [name, t] : by_name)
    if (!loaded.count(name)) r.fail("missing tensor '" + name + "'");
  return model;
}

}  // namespace mctse
