// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstdio>
#include <fstream>
#include <iomanip>

#include "mctse/errors.h"
#include "mctse/random.h"
#include "mctse/train.h"

namespace mctse {

namespace {

std::string corruption_name(const std::optional<Corruption>& c) {
  if (!c || (!c->text && !c->video)) return "none";
  if (c->text && c->video) return "both";
  return c->text ? "text" : "video";
}

}  // namespace

EvalReport evaluate(const Manifest& manifest, Split split, const Extractor& extractor,
                    const std::vector<ClueSubset>& subsets, const std::optional<Corruption>& corruption) {
  if (subsets.empty()) throw InputError("evaluate: no clue subsets requested");
  for (const auto& s : subsets)
    if (s.empty()) throw InputError("evaluate: empty clue subset");
  const auto records = manifest.split(split);
  if (records.empty()) throw InputError("manifest has no '" + std::string(split_name(split)) + "' examples");
  const auto catalog = make_catalog(manifest.num_classes);

  EvalReport report;
  report.split = split;
  report.corruption = corruption_name(corruption);
  std::vector<double> sums(subsets.size(), 0.0);
  for (std::size_t i = 0; i < records.size(); ++i) {
    TrainingSample s = load_sample(*records[i], catalog);
    if (corruption && corruption->text && s.clues.text) {
      s.clues.text = corrupt_text(*s.clues.text, mix_seed(corruption->seed, 2 * i));
    }
    if (corruption && corruption->video && s.clues.video) {
      s.clues.video = corrupt_video(*s.clues.video, mix_seed(corruption->seed, 2 * i + 1), corruption->video_noise_db);
    }
    for (std::size_t k = 0; k < subsets.size(); ++k) {
      for (Modality m : subsets[k]) {
        if (!s.clues.has(m)) {
          throw InputError("subset '" + subset_name(subsets[k]) + "' needs a " + std::string(modality_name(m)) +
                           " clue that example '" + records[i]->id + "' lacks");
        }
      }
      const AudioClip estimate = extractor(s.mixture, s.clues.only(subsets[k]));
      const double snri = snr_improvement(s.mixture, estimate, s.target);
      report.rows.push_back({records[i]->id, subset_name(subsets[k]), snri});
      sums[k] += snri;
    }
  }
  for (std::size_t k = 0; k < subsets.size(); ++k)
    report.summary.push_back({subset_name(subsets[k]), sums[k] / static_cast<double>(records.size()), records.size()});
  return report;
}

EvalReport evaluate(const Manifest& manifest, Split split, const DccrnModel& model,
                    const std::vector<ClueSubset>& subsets, const std::optional<Corruption>& corruption) {
  if (!model.clue_net) {
    for (const auto& s : subsets) {
      if (s != ClueSubset{Modality::kTag}) {
        throw ContractError("a stage-1 model only supports the 'tag' subset, got '" + subset_name(s) + "'");
      }
    }
  }
  GemmPrecisionScope precision(GemmPrecision::kSingle);
  const Extractor run = [&model](const AudioClip& mix, const ClueSet& clues) {
    return extract(mix, clues, model).estimate;
  };
  return evaluate(manifest, split, run, subsets, corruption);
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write report " + path);
  out << "kind,split,corruption,subset,id,count,snri_db\n" << std::setprecision(9);
  const std::string prefix = std::string(split_name(report.split)) + "," + report.corruption + ",";
  for (const auto& s : report.summary) out << "summary," << prefix << s.subset << ",," << s.count << "," << s.mean_snri << "\n";
  for (const auto& r : report.rows) out << "example," << prefix << r.subset << "," << r.id << ",1," << r.snri << "\n";
  if (!out) throw InputError("write failed for " + path);
}

AttentionMap attention_map(const AudioClip& mixture, const ClueSet& clues, const DccrnModel& model) {
  if (!model.clue_net) throw ContractError("stage-1 checkpoint has no clue attention to dump");
  GemmPrecisionScope precision(GemmPrecision::kDouble);
  ExtractResult r = extract(mixture, clues, model, CluePath::kMultiClue);
  const Tensor& w = r.clue->weights;
  const std::size_t h = w.dim(0), ta = w.dim(1), l = w.dim(2);
  std::vector<double> avg(ta * l, 0.0);
  auto wv = w.values();
  for (std::size_t k = 0; k < h; ++k)
    for (std::size_t i = 0; i < ta * l; ++i) avg[i] += wv[k * ta * l + i] / static_cast<double>(h);
  return {Tensor({ta, l}, std::move(avg)), r.clue->concat.segments};
}

void write_attention_csv(const std::string& path, const AttentionMap& map) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write attention file " + path);
  bool first = true;
  for (const auto& seg : map.segments) {
    for (std::size_t j = 0; j < seg.length; ++j) {
      out << (first ? "" : ",") << modality_name(seg.modality) << ":" << j;
      first = false;
    }
  }
  out << "\n" << std::setprecision(9);
  const std::size_t rows = map.matrix.dim(0), cols = map.matrix.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out << (j ? "," : "") << map.matrix.at(i, j);
    out << "\n";
  }
  if (!out) throw InputError("write failed for " + path);
}

}  // namespace mctse
