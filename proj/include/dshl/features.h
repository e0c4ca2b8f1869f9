#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dshl/corpus.h"

namespace dshl {

inline constexpr int kFeatureDim = 29;
inline constexpr int kChordClasses = 12;
inline constexpr int kOctaves = 4;
inline constexpr int kPitchClasses = 12;

// Bit layout of a timestep vector.
inline constexpr int kArticulationBit = 0;
inline constexpr int kOctaveBit = 1;       // 1..4
inline constexpr int kPitchClassBit = 5;   // 5..16
inline constexpr int kChordBit = 17;       // 17..28
inline constexpr int kLowestEncodedPitch = 48;  // C3 anchors the octave window

using TimestepVector = std::bitset<kFeatureDim>;

struct ChordVocab {
  std::array<Chord, kChordClasses> entries{};
  std::array<std::int64_t, kChordClasses> counts{};

  /// Index of `chord`, or -1 when out of vocabulary.
  int index_of(const Chord& chord) const;
  bool operator==(const ChordVocab&) const = default;
};

struct SegmentTensor {
  int segment_id = 0;
  std::vector<int> song_ids;  // sorted, unique
  std::array<TimestepVector, kSegmentSteps> steps{};
};

/// Where a canonical segment occurs: window `position` of song `song_id`.
struct Occurrence {
  int song_id = 0;
  int position = 0;
  int segment_id = 0;

  bool operator==(const Occurrence&) const = default;
};

/// Deduplicated segment database plus the song/window provenance of every
/// occurrence.
struct SegmentStore {
  std::vector<SegmentTensor> segments;   // segments[i].segment_id == i
  std::vector<Occurrence> occurrences;   // ordered by (song_id, position)

  std::size_t size() const { return segments.size(); }
};

/// The 12 most frequent (root, quality) pairs by timestep count; ties break
/// by (root, quality). Throws FewerThan12Chords.
ChordVocab build_chord_vocab(const std::vector<QuantizedSong>& songs);

int octave_index(int pitch);
TimestepVector encode_state(const TimestepState& state, const ChordVocab& vocab);
SegmentTensor encode_segment(const RawSegment& raw, const ChordVocab& vocab);

/// Inverse of encode_state for a well-formed vector; throws InconsistentState
/// when exactly one of the octave / pitch-class groups is set.
TimestepState decode_state(const TimestepVector& v, const ChordVocab& vocab);
std::array<TimestepState, kSegmentSteps> decode_states(const SegmentTensor& tensor,
                                                       const ChordVocab& vocab);

struct DecodedEvents {
  std::vector<NoteEvent> notes;  // contiguous, rests included
  std::vector<ChordEvent> chords;
};

/// Melody and chord events of a timestep grid. A sustained first step (no
/// articulation) still starts a note since nothing precedes it.
DecodedEvents events_from_states(const std::vector<TimestepState>& states);
DecodedEvents decode_segment(const SegmentTensor& tensor, const ChordVocab& vocab);

struct StoreBuildReport {
  std::int64_t timesteps = 0;
  std::int64_t out_of_vocab_timesteps = 0;
  std::int64_t raw_segments = 0;
};

/// Encodes and deduplicates: bit-identical tensors share one id whose
/// song_ids is the union of sources. Ids follow first appearance.
SegmentStore build_segment_store(const std::vector<RawSegment>& raw, const ChordVocab& vocab,
                                 StoreBuildReport* report = nullptr);

/// Row-major bit packing of the 16x29 tensor, bit (t*29+f) at byte k/8, bit k%8.
std::array<std::uint8_t, 58> pack_steps(const std::array<TimestepVector, kSegmentSteps>& steps);
std::array<TimestepVector, kSegmentSteps> unpack_steps(const std::array<std::uint8_t, 58>& bytes);

void write_chord_vocab(std::ostream& out, const ChordVocab& vocab);
ChordVocab read_chord_vocab(std::istream& in);
void write_segment_store(std::ostream& out, const SegmentStore& store);
SegmentStore read_segment_store(std::istream& in);

}  // namespace dshl
