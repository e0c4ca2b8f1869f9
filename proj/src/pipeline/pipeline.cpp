#include "dshl/pipeline.h"

#include <memory>
#include <ostream>

#include "dshl/errors.h"

namespace dshl {

double IngestResult::out_of_vocab_rate() const {
  return report.timesteps == 0 ? 0.0
                               : static_cast<double>(report.out_of_vocab_timesteps) /
                                     static_cast<double>(report.timesteps);
}

IngestResult ingest(const std::vector<std::pair<std::string, std::string>>& files) {
  IngestResult result;
  std::vector<RawSegment> raw;
  int next_id = 0;
  for (const auto& [name, text] : files) {
    const auto parsed = parse_abc(text);
    result.tunes_parsed += static_cast<int>(parsed.scores.size() + parsed.rejects.size());
    for (const auto& r : parsed.rejects) {
      result.manifest.push_back({-1, name, r.title, 0, r.reason});
    }
    for (const auto& score : parsed.scores) {
      SongRecord rec{-1, name, score.title, 0, filter_reason(score)};
      if (rec.reject_reason.empty()) {
        rec.song_id = next_id++;
        auto song = quantize(transpose_to_c(score), rec.song_id);
        auto seg = segment(song);
        rec.segments = static_cast<int>(seg.segments.size());
        result.dropped_windows += seg.dropped_contaminated;
        raw.insert(raw.end(), seg.segments.begin(), seg.segments.end());
        result.songs.push_back(std::move(song));
      }
      result.manifest.push_back(std::move(rec));
    }
  }
  result.vocab = build_chord_vocab(result.songs);
  result.store = build_segment_store(raw, result.vocab, &result.report);
  return result;
}

void write_manifest(std::ostream& out, const std::vector<SongRecord>& manifest) {
  out << "song_id\tsource\ttitle\tsegments\treject_reason\n";
  for (const auto& r : manifest) {
    out << r.song_id << '\t' << r.source << '\t' << r.title << '\t' << r.segments << '\t'
        << r.reject_reason << '\n';
  }
}

MinedPairs mine_pairs(const SegmentStore& store, const PairConfig& config, Rng& rng) {
  MinedPairs mined;
  mined.positives = extract_positive_pairs(store);
  if (mined.positives.empty()) throw InsufficientPairs("corpus has no consecutive segments");
  mined.stats = estimate_stats(mined.positives, store, rng, config.neg_stat_samples);
  const PairScorer scorer(mined.stats, boundary_states(store));
  const PairSet pos_set = make_pair_set(mined.positives);
  // One negative per distinct positive, as the split dedups positives.
  const auto distinct = pos_set.size();
  const auto negatives = sample_negatives(scorer, pos_set, config.threshold, distinct, rng);
  mined.split = split_validation(mined.positives, negatives, config.val_pos, config.val_neg, rng);
  return mined;
}

HashTrainingData training_data(const MinedPairs& mined, const SegmentStore& store,
                               double threshold) {
  HashTrainingData data;
  data.train_pos = mined.split.train_pos;
  data.train_neg = mined.split.train_neg;
  data.val_pos = mined.split.val_pos;
  data.val_neg = mined.split.val_neg;
  auto scorer = std::make_shared<const PairScorer>(mined.stats, boundary_states(store));
  auto pos_set = std::make_shared<const PairSet>(make_pair_set(mined.positives));
  auto val_neg = std::make_shared<const PairSet>(make_pair_set(mined.split.val_neg));
  data.resample = [scorer, pos_set, val_neg, threshold](std::size_t n, Rng& rng) {
    return sample_negatives(*scorer, *pos_set, threshold, n, rng, *val_neg);
  };
  return data;
}

}  // namespace dshl
