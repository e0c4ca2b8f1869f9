#pragma once

// Stage glue shared by the command-line tool and the acceptance suite.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dshl/corpus.h"
#include "dshl/features.h"
#include "dshl/hashnet.h"
#include "dshl/pairs.h"

namespace dshl {

struct SongRecord {
  int song_id = -1;  // -1 when rejected
  std::string source;
  std::string title;
  int segments = 0;
  std::string reject_reason;
};

struct IngestResult {
  std::vector<QuantizedSong> songs;
  ChordVocab vocab;
  SegmentStore store;
  std::vector<SongRecord> manifest;
  StoreBuildReport report;
  int tunes_parsed = 0;
  int dropped_windows = 0;

  double out_of_vocab_rate() const;
};

/// parse -> filter -> transpose -> quantize -> segment -> vocab -> encode.
/// `files` holds (name, contents). Retained songs are numbered from 0 in
/// input order. Throws FewerThan12Chords.
IngestResult ingest(const std::vector<std::pair<std::string, std::string>>& files);

void write_manifest(std::ostream& out, const std::vector<SongRecord>& manifest);

struct PairConfig {
  double threshold = 0.5;
  std::int64_t neg_stat_samples = 200000;
  std::size_t val_pos = 750;
  std::size_t val_neg = 750;
};

struct MinedPairs {
  TransitionStats stats;
  std::vector<SegmentPair> positives;  // as extracted, with repeats
  PairSplit split;
};

/// Positive extraction, transition statistics, 1:1 negative sampling and the
/// validation split.
MinedPairs mine_pairs(const SegmentStore& store, const PairConfig& config, Rng& rng);

/// Training view of mined pairs; later epochs resample negatives below the
/// threshold, never reusing validation negatives.
HashTrainingData training_data(const MinedPairs& mined, const SegmentStore& store,
                               double threshold);

}  // namespace dshl
