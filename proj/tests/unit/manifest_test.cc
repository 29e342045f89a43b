// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "mctse/data_sim.h"
#include "mctse/errors.h"

using namespace mctse;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mctse_manifest_test_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

bool same_values(const Tensor& a, const Tensor& b) {
  return std::ranges::equal(a.values(), b.values());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

std::string record_line(const std::string& id, const std::string& split, int target, int interferer) {
  return nlohmann::json{{"id", id},
                        {"split", split},
                        {"target_class", target},
                        {"interferer_class", interferer},
                        {"snr_db", 0.5},
                        {"seed", 3},
                        {"clue_text_tokens", {20, target, 25}},
                        {"video_seed", 9}}
      .dump();
}

}  // namespace

TEST_CASE("simulate is deterministic with the requested split sizes") {
  SimulateOptions o;
  o.num_classes = 6;
  o.unseen_classes = 2;
  o.train = 30;
  o.valid = 7;
  o.test = 5;
  o.seed = 12;
  const Manifest a = simulate(o), b = simulate(o);
  CHECK(a.records == b.records);
  CHECK(a.num_classes == 6);
  CHECK(a.split(Split::kTrain).size() == 30);
  CHECK(a.split(Split::kValid).size() == 7);
  CHECK(a.split(Split::kTestSeen).size() == 5);
  CHECK(a.split(Split::kTestUnseen).size() == 5);

  std::set<std::size_t> seen_targets;
  for (const auto& r : a.records) {
    CHECK(r.target_class != r.interferer_class);
    CHECK(r.snr_db >= -2.0);
    CHECK(r.snr_db <= 2.0);
    CHECK(class_from_tokens(r.clue_text_tokens) == r.target_class);
    CHECK(r.video_seed == video_seed_for(r.seed));
    if (r.split == Split::kTestUnseen) {
      CHECK(r.target_class >= 4);
    } else {
      CHECK(r.target_class < 4);
      CHECK(r.interferer_class < 4);
      seen_targets.insert(r.target_class);
    }
  }
  CHECK(seen_targets.size() == 4);

  o.seed = 13;
  CHECK(simulate(o).records != a.records);

  o.unseen_classes = 0;
  CHECK(simulate(o).split(Split::kTestUnseen).empty());
  o.unseen_classes = 5;
  CHECK_THROWS_AS(simulate(o), InputError);
}

TEST_CASE("manifest round trip keeps unknown fields") {
  TempDir dir;
  SimulateOptions o;
  o.train = 4;
  o.valid = 2;
  o.test = 2;
  Manifest m = simulate(o);
  m.records[0].extra["note"] = "\"hello\"";
  m.records[1].extra["weights"] = "[1,2.5,{\"a\":null}]";
  m.records[2].mix_wav = "audio/x_mix.wav";
  m.records[2].target_wav = "audio/x_target.wav";
  const std::string path = dir.file("manifest.jsonl");
  write_manifest(path, m);
  CHECK(fs::exists(dir.file("catalog.json")));
  const Manifest back = read_manifest(path);
  CHECK(back.num_classes == m.num_classes);
  CHECK(back.records == m.records);

  const nlohmann::json cat = nlohmann::json::parse(std::ifstream(dir.file("catalog.json")));
  CHECK(cat.at("classes").size() == m.num_classes);
  CHECK(cat.at("vocabulary").size() == vocabulary().size());

  write_manifest(dir.file("again.jsonl"), back);
  std::ifstream a(path), b(dir.file("again.jsonl"));
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST_CASE("empty manifest and blank lines") {
  TempDir dir;
  write_text(dir.file("empty.jsonl"), "");
  CHECK(read_manifest(dir.file("empty.jsonl")).records.empty());
  write_text(dir.file("blank.jsonl"), "\n" + record_line("a", "train", 0, 1) + "\n   \n");
  const Manifest m = read_manifest(dir.file("blank.jsonl"));
  CHECK(m.records.size() == 1);
  CHECK(m.num_classes == 2);
}

TEST_CASE("malformed lines name the file and line") {
  TempDir dir;
  const std::string path = dir.file("bad.jsonl");
  for (const std::string& bad : {std::string("{not json"), std::string("[1,2]"),
                                 std::string("{\"id\":\"x\",\"split\":\"train\"}"),
                                 record_line("b", "holdout", 0, 1)}) {
    write_text(path, record_line("a", "train", 0, 1) + "\n" + bad + "\n");
    try {
      read_manifest(path);
      FAIL("expected ParseError for " << bad);
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(path + ":2") != std::string::npos);
    }
  }
  CHECK_THROWS_AS(read_manifest(dir.file("missing.jsonl")), InputError);
}

TEST_CASE("validation rejects inconsistent manifests") {
  TempDir dir;
  const std::string path = dir.file("m.jsonl");
  write_text(path, record_line("a", "train", 0, 1) + "\n" + record_line("b", "test-unseen", 1, 2) + "\n");
  CHECK_THROWS_AS(read_manifest(path), ValidationError);
  write_text(path, record_line("a", "train", 0, 1) + "\n" + record_line("b", "test-unseen", 2, 0) + "\n");
  CHECK_NOTHROW(read_manifest(path));
  write_text(path, record_line("a", "train", 0, 1) + "\n" + record_line("a", "valid", 0, 1) + "\n");
  CHECK_THROWS_AS(read_manifest(path), ValidationError);
  write_text(path, record_line("a", "train", 1, 1) + "\n");
  CHECK_THROWS_AS(read_manifest(path), ValidationError);

  Manifest m;
  m.num_classes = 3;
  m.records.push_back(ManifestRecord{.id = "z", .target_class = 0, .interferer_class = 3});
  CHECK_THROWS_AS(validate_manifest(m), ValidationError);
}

TEST_CASE("realize regenerates the example and honours stored clues") {
  SimulateOptions o;
  o.train = 3;
  o.valid = 0;
  o.test = 0;
  o.unseen_classes = 0;
  const Manifest m = simulate(o);
  const auto cat = make_catalog(m.num_classes);
  for (const auto& r : m.records) {
    const MixtureExample a = realize(r, cat);
    const MixtureExample b = make_example(cat, r.target_class, r.interferer_class, r.snr_db, r.seed);
    CHECK(a.mixture.samples == b.mixture.samples);
    CHECK(a.target.samples == b.target.samples);
    CHECK(*a.clues.text == *b.clues.text);
    CHECK(same_values(*a.clues.video, *b.clues.video));
    CHECK(*a.clues.tag == *b.clues.tag);
  }
  ManifestRecord r = m.records[0];
  r.clue_text_tokens = {20, 21, r.target_class};
  r.video_seed = 424242;
  const MixtureExample c = realize(r, cat);
  CHECK(*c.clues.text == r.clue_text_tokens);
  CHECK(same_values(*c.clues.video, video_clue(r.target_class, 424242)));
  CHECK(c.video_seed == 424242);
}

TEST_CASE("split names") {
  for (Split s : {Split::kTrain, Split::kValid, Split::kTestSeen, Split::kTestUnseen})
    CHECK(parse_split(split_name(s)) == s);
  CHECK_THROWS_AS(parse_split("test"), InputError);
}
