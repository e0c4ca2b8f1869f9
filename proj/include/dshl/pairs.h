#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <unordered_set>
#include <vector>

#include "dshl/features.h"
#include "dshl/rng.h"

namespace dshl {

struct SegmentPair {
  int i = 0;
  int j = 0;
  int label = 0;  // composability c_ij

  auto operator<=>(const SegmentPair&) const = default;
};

inline std::uint64_t pair_key(int i, int j) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
         static_cast<std::uint32_t>(j);
}

using PairSet = std::unordered_set<std::uint64_t>;

/// Chord state index: vocabulary class 0..11, or 12 for no chord.
inline constexpr int kNoChordState = kChordClasses;
inline constexpr int kChordStates = kChordClasses + 1;

/// Chord and melodic-pitch state at the first and last timestep of a segment.
struct BoundaryStates {
  int first_chord = kNoChordState;
  int last_chord = kNoChordState;
  int first_pitch = kRest;
  int last_pitch = kRest;
};

std::vector<BoundaryStates> boundary_states(const SegmentStore& store);

/// Conditional transition tables P(next | prev, +) and P(next | prev, -),
/// add-one smoothed, for chords and for melodic pitches.
struct TransitionStats {
  std::vector<int> pitch_alphabet;  // sorted; kRest included
  // [prev][next], rows sum to 1
  std::vector<std::vector<double>> chord_pos, chord_neg, pitch_pos, pitch_neg;

  int pitch_state(int pitch) const;  // -1 if not in the alphabet
};

/// One pair per pair of consecutive windows within a song occurrence.
std::vector<SegmentPair> extract_positive_pairs(const SegmentStore& store);

PairSet make_pair_set(const std::vector<SegmentPair>& pairs);

/// Estimates positive statistics from `positives` and negative statistics
/// from `neg_sample_size` uniformly drawn non-positive, non-self pairs.
TransitionStats estimate_stats(const std::vector<SegmentPair>& positives, const SegmentStore& store,
                               Rng& rng, std::int64_t neg_sample_size);

/// p+ / (p+ + p-), or 0.5 when both are zero.
double component_ratio(double p_pos, double p_neg);

/// Scores pairs by the average of the chord and pitch positive-probability
/// components.
class PairScorer {
 public:
  PairScorer(TransitionStats stats, std::vector<BoundaryStates> boundaries);

  double prob_positive(int i, int j) const;
  double chord_component(int i, int j) const;
  double pitch_component(int i, int j) const;
  const TransitionStats& stats() const { return stats_; }
  std::size_t size() const { return boundaries_.size(); }

 private:
  TransitionStats stats_;
  std::vector<BoundaryStates> boundaries_;
};

/// Draws n distinct pairs uniformly from the non-self, non-positive pairs
/// with prob_positive < threshold that are not in `exclude`. Throws
/// ExhaustedCandidates when the attempt budget runs out.
std::vector<SegmentPair> sample_negatives(const PairScorer& scorer, const PairSet& positives,
                                          double threshold, std::size_t n, Rng& rng,
                                          const PairSet& exclude = {});

struct PairSplit {
  std::vector<SegmentPair> train_pos, train_neg, val_pos, val_neg;
};

/// Deduplicates each label's pairs, then withholds n_val_pos / n_val_neg of
/// them for validation. Throws InsufficientPairs.
PairSplit split_validation(const std::vector<SegmentPair>& positives,
                           const std::vector<SegmentPair>& negatives, std::size_t n_val_pos,
                           std::size_t n_val_neg, Rng& rng);

void write_stats(std::ostream& out, const TransitionStats& stats);
TransitionStats read_stats(std::istream& in);
void write_pairs(std::ostream& out, const std::vector<SegmentPair>& pairs);
std::vector<SegmentPair> read_pairs(std::istream& in);

}  // namespace dshl
