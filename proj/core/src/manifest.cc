// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "mctse/data_sim.h"
#include "mctse/errors.h"
#include "mctse/random.h"

namespace mctse {

using nlohmann::json;

namespace {

const std::set<std::string> kKnownFields = {"id",   "split",            "target_class", "interferer_class",
                                            "snr_db", "seed",           "clue_text_tokens",
                                            "video_seed", "mix_wav", "target_wav"};

std::filesystem::path catalog_path(const std::string& manifest_path) {
  return std::filesystem::path(manifest_path).parent_path() / "catalog.json";
}

json record_to_json(const ManifestRecord& r) {
  json j;
  j["id"] = r.id;
  j["split"] = split_name(r.split);
  j["target_class"] = r.target_class;
  j["interferer_class"] = r.interferer_class;
  j["snr_db"] = r.snr_db;
  j["seed"] = r.seed;
  j["clue_text_tokens"] = r.clue_text_tokens;
  j["video_seed"] = r.video_seed;
  if (r.mix_wav) j["mix_wav"] = *r.mix_wav;
  if (r.target_wav) j["target_wav"] = *r.target_wav;
  for (const auto& [k, v] : r.extra) j[k] = json::parse(v);
  return j;
}

ManifestRecord record_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
  ManifestRecord r;
  r.id = j.at("id").get<std::string>();
  r.split = parse_split(j.at("split").get<std::string>());
  r.target_class = j.at("target_class").get<std::size_t>();
  r.interferer_class = j.at("interferer_class").get<std::size_t>();
  r.snr_db = j.at("snr_db").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.clue_text_tokens = j.at("clue_text_tokens").get<std::vector<std::size_t>>();
  r.video_seed = j.at("video_seed").get<std::uint64_t>();
  if (j.contains("mix_wav")) r.mix_wav = j["mix_wav"].get<std::string>();
  if (j.contains("target_wav")) r.target_wav = j["target_wav"].get<std::string>();
  for (const auto& [k, v] : j.items())
    if (!kKnownFields.count(k)) r.extra[k] = v.dump();
  return r;
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTestSeen: return "test-seen";
    case Split::kTestUnseen: return "test-unseen";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kValid, Split::kTestSeen, Split::kTestUnseen})
    if (split_name(s) == name) return s;
  throw InputError("unknown split '" + std::string(name) + "'");
}

std::vector<const ManifestRecord*> Manifest::split(Split s) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(&r);
  return out;
}

const ManifestRecord& Manifest::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return r;
  throw InputError("no example with id '" + id + "' in manifest");
}

void validate_manifest(const Manifest& m) {
  std::set<std::size_t> train_classes, unseen_targets;
  std::set<std::string> ids;
  for (const auto& r : m.records) {
    if (!ids.insert(r.id).second) throw ValidationError("duplicate example id '" + r.id + "'");
    if (m.num_classes > 0 && (r.target_class >= m.num_classes || r.interferer_class >= m.num_classes)) {
      throw ValidationError("example '" + r.id + "' uses a class outside the catalog of " +
                            std::to_string(m.num_classes));
    }
    if (r.target_class == r.interferer_class) {
      throw ValidationError("example '" + r.id + "' mixes class " + std::to_string(r.target_class) + " with itself");
    }
    if (r.split == Split::kTrain) {
      train_classes.insert(r.target_class);
      train_classes.insert(r.interferer_class);
    }
    if (r.split == Split::kTestUnseen) unseen_targets.insert(r.target_class);
  }
  for (std::size_t c : unseen_targets) {
    if (train_classes.count(c)) {
      throw ValidationError("class " + std::to_string(c) + " is a test-unseen target but occurs in the train split");
    }
  }
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write manifest " + path);
  for (const auto& r : manifest.records) out << record_to_json(r).dump() << '\n';
  if (!out) throw InputError("write failed for " + path);

  json cat;
  cat["num_classes"] = manifest.num_classes;
  cat["vocabulary"] = vocabulary();
  json classes = json::array();
  if (manifest.num_classes >= kMinClasses) {
    for (const auto& c : make_catalog(manifest.num_classes)) {
      json jc{{"id", c.id}, {"name", c.name}, {"kind", synth_kind_name(c.kind)},
              {"band_hz", {c.band_lo, c.band_hi}}};
      if (!c.partials.empty()) jc["partials_hz"] = c.partials;
      if (c.kind == SynthKind::kChirp) jc["sweep_hz"] = {c.f0, c.f1};
      if (c.kind == SynthKind::kAmNoise) jc["am_rate_hz"] = c.am_rate;
      classes.push_back(jc);
    }
  }
  cat["classes"] = classes;
  std::ofstream cout_(catalog_path(path), std::ios::binary);
  if (!cout_) throw InputError("cannot write catalog next to " + path);
  cout_ << cat.dump(2) << '\n';
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open manifest " + path);
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.records.push_back(record_from_json(json::parse(line)));
    } catch (const InputError& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": malformed record (" + e.what() + ")");
    }
  }
  const auto cat = catalog_path(path);
  if (std::filesystem::exists(cat)) {
    std::ifstream cin_(cat, std::ios::binary);
    try {
      m.num_classes = json::parse(cin_).at("num_classes").get<std::size_t>();
    } catch (const std::exception& e) {
      throw ParseError(cat.string() + ": malformed catalog (" + e.what() + ")");
    }
  } else {
    for (const auto& r : m.records) m.num_classes = std::max({m.num_classes, r.target_class + 1, r.interferer_class + 1});
  }
  validate_manifest(m);
  return m;
}

MixtureExample realize(const ManifestRecord& record, const std::vector<SoundClass>& catalog) {
  MixtureExample ex = make_example(catalog, record.target_class, record.interferer_class, record.snr_db, record.seed);
  ex.clues.text = record.clue_text_tokens;
  if (record.video_seed != ex.video_seed) {
    ex.video_seed = record.video_seed;
    ex.clues.video = video_clue(record.target_class, record.video_seed);
  }
  return ex;
}

Manifest simulate(const SimulateOptions& o) {
  make_catalog(o.num_classes);
  if (o.unseen_classes + 2 > o.num_classes) {
    throw InputError("need at least 2 seen classes: " + std::to_string(o.num_classes) + " classes with " +
                     std::to_string(o.unseen_classes) + " unseen");
  }
  const std::size_t seen = o.num_classes - o.unseen_classes;
  Manifest m;
  m.num_classes = o.num_classes;
  auto emit = [&](Split split, std::size_t count, std::uint64_t salt) {
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng(mix_seed(o.seed, salt * 1000003 + i));
      ManifestRecord r;
      r.id = std::string(split_name(split)) + "-" + std::to_string(i);
      r.split = split;
      if (split == Split::kTestUnseen) {
        r.target_class = seen + uniform_index(rng, o.unseen_classes);
        r.interferer_class = uniform_index(rng, o.num_classes - 1);
        if (r.interferer_class >= r.target_class) ++r.interferer_class;
      } else {
        r.target_class = uniform_index(rng, seen);
        r.interferer_class = uniform_index(rng, seen - 1);
        if (r.interferer_class >= r.target_class) ++r.interferer_class;
      }
      r.snr_db = uniform(rng, -2.0, 2.0);
      r.seed = rng();
      r.clue_text_tokens = text_clue(r.target_class, r.seed);
      r.video_seed = video_seed_for(r.seed);
      m.records.push_back(std::move(r));
    }
  };
  emit(Split::kTrain, o.train, 1);
  emit(Split::kValid, o.valid, 2);
  emit(Split::kTestSeen, o.test, 3);
  if (o.unseen_classes > 0) emit(Split::kTestUnseen, o.test, 4);
  validate_manifest(m);
  return m;
}

}  // namespace mctse
