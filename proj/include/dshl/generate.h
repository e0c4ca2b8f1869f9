#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dshl/errors.h"
#include "dshl/features.h"
#include "dshl/index.h"
#include "dshl/rng.h"

namespace dshl {

enum class StartPolicy { kRandom, kSongStartPool, kExplicit };

struct GenerationConfig {
  int n_continuations = 8;
  QueryMode mode = QueryMode::kNearest;
  int max_segments_per_song = 2;
  std::uint64_t seed = 1;
  StartPolicy start = StartPolicy::kRandom;
  int start_id = -1;  // for StartPolicy::kExplicit
};

void validate(const GenerationConfig& config);

struct Piece {
  std::vector<int> segments;
  std::vector<int> distances;  // distances[t]: segment t -> t+1
  std::vector<int> songs;      // song each segment is charged to

  /// Segments charged to each song.
  std::map<int, int> usage() const;
};

/// No candidate survived the same-song budget. Carries the piece so far.
class DeadEnd : public Error {
 public:
  DeadEnd(const std::string& what, Piece partial) : Error(what), partial_(std::move(partial)) {}
  const Piece& partial() const { return partial_; }

 private:
  Piece partial_;
};

/// Throws EmptyPool.
int pick_start(const CodeIndex& index, const GenerationConfig& config, Rng& rng);

/// Appends one continuation; throws DeadEnd.
void extend(Piece& piece, const CodeIndex& index, const GenerationConfig& config, Rng& rng);

/// pick_start, then n_continuations extends.
Piece generate(const CodeIndex& index, const GenerationConfig& config, Rng& rng);

/// The piece's timesteps, segments laid end to end (16 steps each).
std::vector<TimestepState> piece_states(const Piece& piece, const SegmentStore& store,
                                        const ChordVocab& vocab);

/// 4/4, C major, L:1/16. One bar per segment; a sustained first note is
/// written as a one-sixteenth pickup tied into the first bar.
Score piece_score(const std::vector<TimestepState>& states, const std::string& title);
std::string render_abc_piece(const Piece& piece, const SegmentStore& store, const ChordVocab& vocab,
                             const std::string& title = "Generated piece");

/// Standard MIDI file, format 0, 480 ticks per quarter; melody on channel 1,
/// chords as block triads on channel 2.
std::string render_midi(const Piece& piece, const SegmentStore& store, const ChordVocab& vocab);
std::string render_midi(const std::vector<TimestepState>& states);

inline constexpr int kTicksPerQuarter = 480;

}  // namespace dshl
