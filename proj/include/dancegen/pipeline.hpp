#pragma once

// Glue between the corpus layout and the trainers: segmentation into unit
// corpora, paired sequences for the composition model, and labeled sequences
// for the metric classifier.

#include <algorithm>
#include <vector>

#include "dancegen/corpus.hpp"
#include "dancegen/dance_unit.hpp"
#include "dancegen/evaluation.hpp"
#include "dancegen/mmgan.hpp"

namespace dancegen {

/// All dance units obtainable from the corpus (items with too few beats for
/// a full unit are skipped).
inline std::vector<DanceUnit> units_from_corpus(const std::vector<LoadedCorpusItem>& items) {
  std::vector<DanceUnit> units;
  for (const auto& it : items) {
    if (int(it.beats.beats.size()) < kBeatsPerUnit + 1) continue;
    auto u = segment(it.dance, it.beats);
    units.insert(units.end(), u.begin(), u.end());
  }
  return units;
}

/// Paired (units, audio, label) sequences for MM-GAN training. Items yielding
/// fewer than n_min units are skipped; longer ones are truncated to n_max.
/// Audio features are cut to the span the kept units cover.
inline std::vector<PairedSequence> paired_from_corpus(
    const std::vector<LoadedCorpusItem>& items, int n_min = 3, int n_max = 5) {
  std::vector<PairedSequence> out;
  for (const auto& it : items) {
    if (int(it.beats.beats.size()) < kBeatsPerUnit + 1) continue;
    auto units = segment(it.dance, it.beats);
    if (int(units.size()) < n_min) continue;
    PairedSequence p;
    p.label = it.label;
    int n = std::min<int>(int(units.size()), n_max);
    p.units.assign(units.begin(), units.begin() + n);
    int last_beat = it.beats.beats[std::size_t(kBeatsPerUnit * n)];
    p.afeat.fps = it.afeat.fps;
    int span = std::min<int>(last_beat + 1, int(it.afeat.frames.size()));
    p.afeat.frames.assign(it.afeat.frames.begin(), it.afeat.frames.begin() + span);
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<LabeledSequence> labeled_from_corpus(
    const std::vector<LoadedCorpusItem>& items) {
  std::vector<LabeledSequence> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back({it.dance, it.label});
  return out;
}

}  // namespace dancegen
