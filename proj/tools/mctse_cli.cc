// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// mctse: simulate data, train, extract, evaluate and dump attention maps.
// Exit codes: 0 success, 2 input error, 3 contract or config error.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "mctse/data_sim.h"
#include "mctse/dccrn.h"
#include "mctse/errors.h"
#include "mctse/train.h"

namespace fs = std::filesystem;
using namespace mctse;

namespace {

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, sep)) parts.push_back(part);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t parse_class(const std::string& value, std::size_t num_classes) {
  std::size_t id = 0;
  if (!value.empty() && value.find_first_not_of("0123456789") == std::string::npos) {
    id = value.size() > 6 ? num_classes : std::stoul(value);
  } else {
    const auto catalog = make_catalog(num_classes);
    auto it = std::find_if(catalog.begin(), catalog.end(), [&](const SoundClass& c) { return c.name == value; });
    if (it == catalog.end()) throw InputError("unknown tag class '" + value + "'");
    id = it->id;
  }
  if (id >= num_classes) {
    throw InputError("tag class " + std::to_string(id) + " out of range for " + std::to_string(num_classes) +
                     " classes");
  }
  return id;
}

// "tag=ID[,text=TOKENS][,video=FILE]"
ClueSet parse_clues(const std::string& spec, std::size_t num_classes) {
  ClueSet clues;
  std::set<std::string> seen;
  for (const std::string& item : split_on(spec, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw InputError("malformed clue '" + item + "', expected key=value");
    }
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    if (!seen.insert(key).second) throw InputError("clue '" + key + "' given twice");
    if (key == "tag") {
      clues.tag = one_hot(parse_class(value, num_classes), num_classes);
    } else if (key == "text") {
      clues.text = parse_tokens(value);
    } else if (key == "video") {
      EmbeddingFile f = read_embedding_file(value);
      if (f.modality != Modality::kVideo) {
        throw InputError(value + " holds a " + std::string(modality_name(f.modality)) + " embedding, not video");
      }
      clues.video = f.data;
    } else {
      throw InputError("unknown clue '" + key + "' (expected tag, text or video)");
    }
  }
  if (clues.empty()) throw InputError("no clues given");
  return clues;
}

std::vector<ClueSubset> parse_subsets(const std::string& spec) {
  if (spec == "all") return all_subsets();
  std::vector<ClueSubset> out;
  for (const std::string& s : split_on(spec, ',')) out.push_back(parse_subset(s));
  if (out.empty()) throw InputError("no clue subsets given");
  return out;
}

struct SimulateArgs {
  SimulateOptions opts;
  std::string out;
  bool wav = false;
};

void run_simulate(const SimulateArgs& a) {
  Manifest m = simulate(a.opts);
  fs::create_directories(a.out);
  if (a.wav) {
    const auto catalog = make_catalog(m.num_classes);
    fs::create_directories(fs::path(a.out) / "audio");
    for (ManifestRecord& r : m.records) {
      const MixtureExample ex = realize(r, catalog);
      const std::string stem = "audio/" + r.id;
      write_wav((fs::path(a.out) / (stem + "_mix.wav")).string(), ex.mixture);
      write_wav((fs::path(a.out) / (stem + "_target.wav")).string(), ex.target);
      write_embedding_file((fs::path(a.out) / (stem + "_video.emb")).string(), Modality::kVideo, *ex.clues.video);
      r.mix_wav = stem + "_mix.wav";
      r.target_wav = stem + "_target.wav";
    }
  }
  const std::string path = (fs::path(a.out) / "manifest.jsonl").string();
  write_manifest(path, m);
  std::cout << "wrote " << m.records.size() << " examples to " << path << "\n";
}

struct TrainArgs {
  int stage = 1;
  std::string manifest, config, init, out, log;
};

void run_train(const TrainArgs& a) {
  const Manifest manifest = read_manifest(a.manifest);
  RunConfig run;
  nlohmann::json given = nlohmann::json::object();
  if (!a.config.empty()) {
    const std::string text = read_text(a.config);
    run = parse_run_config(text);
    given = nlohmann::json::parse(text);
  }
  run.train.stage = a.stage;
  if (a.stage == 2 && a.init.empty()) throw InputError("stage-2 training needs --init with a stage-1 checkpoint");

  const bool classes_given = given.contains("model") && given["model"].contains("num_classes");
  if (!classes_given) run.model.num_classes = manifest.num_classes;
  DccrnModel model;
  if (!a.init.empty()) {
    model = load_checkpoint(a.init);
    if (given.contains("model") && !(run.model == model.config)) {
      throw ConfigError("the config's model section differs from the --init checkpoint");
    }
  } else {
    Rng rng(mix_seed(run.train.seed, 0x6d6f64656c));
    model = DccrnModel::create(run.model, rng);
  }

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw InputError("cannot write " + a.log);
    log << "epoch,lr,train_loss,valid_loss,seconds\n";
  }
  const TrainResult result = train(manifest, std::move(model), run.train, run.loss, [&](const EpochLog& e) {
    std::fprintf(stderr, "epoch %zu lr %.4g train %.4f valid %.4f (%.1f s)\n", e.epoch, e.lr, e.train_loss,
                 e.valid_loss, e.seconds);
    if (log) log << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << e.valid_loss << ',' << e.seconds << '\n';
  });
  save_checkpoint(a.out, result.best);
  std::cout << "best epoch " << result.best_epoch << " valid loss " << result.best_valid_loss << ", saved "
            << a.out << "\n";
}

struct ExtractArgs {
  std::string ckpt, mix, clues, out;
};

void run_extract(const ExtractArgs& a) {
  const DccrnModel model = load_checkpoint(a.ckpt);
  const AudioClip mix = read_wav(a.mix);
  const ClueSet clues = parse_clues(a.clues, model.config.num_classes);
  GemmPrecisionScope precision(GemmPrecision::kSingle);
  write_wav(a.out, extract(mix, clues, model).estimate);
}

struct EvaluateArgs {
  std::string ckpt, manifest, subsets = "tag", split = "test-seen", corrupt, report;
  std::uint64_t seed = 0;
};

void run_evaluate(const EvaluateArgs& a) {
  const DccrnModel model = load_checkpoint(a.ckpt);
  const Manifest manifest = read_manifest(a.manifest);
  std::optional<Corruption> corruption;
  if (!a.corrupt.empty()) {
    corruption = Corruption{};
    corruption->seed = a.seed;
    corruption->text = a.corrupt == "text" || a.corrupt == "both";
    corruption->video = a.corrupt == "video" || a.corrupt == "both";
  }
  const EvalReport report = evaluate(manifest, parse_split(a.split), model, parse_subsets(a.subsets), corruption);
  for (const SubsetSummary& s : report.summary) {
    std::printf("%-16s n=%-4zu mean SNRi %.3f dB\n", s.subset.c_str(), s.count, s.mean_snri);
  }
  if (!a.report.empty()) write_report_csv(a.report, report);
}

struct AttentionArgs {
  std::string ckpt, manifest, example, out;
};

void run_attention(const AttentionArgs& a) {
  const DccrnModel model = load_checkpoint(a.ckpt);
  const Manifest manifest = read_manifest(a.manifest);
  const MixtureExample ex = realize(manifest.find(a.example), make_catalog(manifest.num_classes));
  write_attention_csv(a.out, attention_map(ex.mixture, ex.clues, model));
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Keep large activation buffers on the heap between steps instead of
  // returning them to the kernel.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, -1);
#endif
  CLI::App app{"Multi-clue target sound extraction"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic mixture manifest");
  simulate_cmd->add_option("--classes", sim.opts.num_classes, "Number of sound classes")->default_val(4);
  simulate_cmd->add_option("--train", sim.opts.train, "Training mixtures")->default_val(100);
  simulate_cmd->add_option("--valid", sim.opts.valid, "Validation mixtures")->default_val(20);
  simulate_cmd->add_option("--test", sim.opts.test, "Test mixtures per test split")->default_val(20);
  simulate_cmd->add_option("--unseen-classes", sim.opts.unseen_classes, "Classes held out of training")
      ->default_val(2);
  simulate_cmd->add_option("--seed", sim.opts.seed, "Random seed")->default_val(0);
  simulate_cmd->add_option("--out", sim.out, "Output directory")->required();
  simulate_cmd->add_flag("--wav", sim.wav, "Also write mixture/target WAVs and video embeddings");
  simulate_cmd->callback([&] { run_simulate(sim); });

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train stage 1 (tag) or stage 2 (multi-clue)");
  train_cmd->add_option("--stage", tr.stage, "Training stage")->required()->check(CLI::IsMember({1, 2}));
  train_cmd->add_option("--manifest", tr.manifest, "Manifest (JSON lines)")->required();
  train_cmd->add_option("--config", tr.config, "Run config (JSON)");
  train_cmd->add_option("--init", tr.init, "Initial checkpoint");
  train_cmd->add_option("--out", tr.out, "Output checkpoint")->required();
  train_cmd->add_option("--log", tr.log, "Per-epoch CSV log");
  train_cmd->callback([&] { run_train(tr); });

  ExtractArgs ex;
  auto* extract_cmd = app.add_subcommand("extract", "Extract the clued source from a mixture");
  extract_cmd->add_option("--ckpt", ex.ckpt, "Checkpoint")->required();
  extract_cmd->add_option("--mix", ex.mix, "Mixture WAV")->required();
  extract_cmd->add_option("--clues", ex.clues, "tag=ID[,text=TOKENS][,video=FILE]")->required();
  extract_cmd->add_option("--out", ex.out, "Output WAV")->required();
  extract_cmd->callback([&] { run_extract(ex); });

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Mean SNRi per clue subset");
  evaluate_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  evaluate_cmd->add_option("--manifest", ev.manifest, "Manifest (JSON lines)")->required();
  evaluate_cmd->add_option("--subsets", ev.subsets, "Comma-separated subsets such as tag,text+video, or all")
      ->default_val("tag");
  evaluate_cmd->add_option("--split", ev.split, "Manifest split")
      ->default_val("test-seen")
      ->check(CLI::IsMember({"train", "valid", "test-seen", "test-unseen"}));
  evaluate_cmd->add_option("--corrupt", ev.corrupt, "Corrupt clues")->check(CLI::IsMember({"text", "video", "both"}));
  evaluate_cmd->add_option("--seed", ev.seed, "Corruption seed")->default_val(0);
  evaluate_cmd->add_option("--report", ev.report, "CSV report");
  evaluate_cmd->callback([&] { run_evaluate(ev); });

  AttentionArgs at;
  auto* attention_cmd = app.add_subcommand("attention", "Dump the head-averaged clue attention map");
  attention_cmd->add_option("--ckpt", at.ckpt, "Stage-2 checkpoint")->required();
  attention_cmd->add_option("--manifest", at.manifest, "Manifest holding the example")->required();
  attention_cmd->add_option("--example", at.example, "Example id")->required();
  attention_cmd->add_option("--out", at.out, "Output CSV")->required();
  attention_cmd->callback([&] { run_attention(at); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
