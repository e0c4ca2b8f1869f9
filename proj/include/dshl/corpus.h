#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>

namespace dshl {

/// Musical time measured in beats (quarter notes).
using Beats = boost::rational<std::int64_t>;

inline constexpr int kRest = -1;
inline constexpr int kStepsPerBeat = 4;
inline constexpr int kSegmentBeats = 4;
inline constexpr int kSegmentSteps = kSegmentBeats * kStepsPerBeat;
inline constexpr int kSegmentHopSteps = 8;

enum class Mode { kMajor, kMinor, kModal };

enum class ChordQuality : std::uint8_t {
  kMajor,
  kMinor,
  kDominant7,
  kMajor7,
  kMinor7,
  kDiminished,
  kDiminished7,
  kHalfDiminished,
  kAugmented,
  kSus2,
  kSus4,
  kDominant7Sus4,
  kMajor6,
  kMinor6,
  kDominant9,
};

inline constexpr int kChordQualityCount = 15;

/// Short textual name ("maj", "min", "7", ...) used in files.
std::string_view quality_name(ChordQuality q);
std::optional<ChordQuality> quality_from_name(std::string_view name);

struct Chord {
  int root = 0;  // pitch class 0..11
  ChordQuality quality = ChordQuality::kMajor;

  auto operator<=>(const Chord&) const = default;
};

/// Parses a lead-sheet chord symbol such as "G", "D7", "F#m", "Bb/d".
/// Returns nullopt when the symbol is not a recognised chord.
std::optional<Chord> parse_chord_symbol(std::string_view symbol);
/// Renders a chord symbol that parse_chord_symbol maps back to the same chord.
std::string chord_symbol(const Chord& chord);

struct Key {
  int tonic = 0;  // pitch class
  Mode mode = Mode::kMajor;

  bool operator==(const Key&) const = default;
};

struct Meter {
  int numerator = 4;
  int denominator = 4;

  Beats bar_length() const { return Beats(numerator * 4, denominator); }
  bool operator==(const Meter&) const = default;
};

struct NoteEvent {
  Beats onset;
  Beats duration;
  int pitch = kRest;  // MIDI number, middle C = 60

  bool is_rest() const { return pitch == kRest; }
  bool operator==(const NoteEvent&) const = default;
};

struct ChordEvent {
  Beats onset;
  Beats duration;
  Chord chord;

  bool operator==(const ChordEvent&) const = default;
};

struct Score {
  int reference = 0;  // X: field
  std::string title;
  Key key;
  Meter meter;
  Beats unit_note_length{1, 8};  // fraction of a whole note
  Beats anacrusis{0};            // length of the pickup bar, 0 if none
  std::vector<NoteEvent> melody;  // contiguous, rests included
  std::vector<ChordEvent> chords;
  int warnings = 0;  // skipped unsupported tokens

  Beats length() const;
};

struct TuneReject {
  int reference = 0;
  std::string title;
  std::string reason;
};

struct AbcParseResult {
  std::vector<Score> scores;
  std::vector<TuneReject> rejects;
};

/// Parses a concatenation of ABC tunes. Tunes that fail with MalformedHeader
/// or UnparsableBody are skipped and listed in `rejects`.
AbcParseResult parse_abc(std::string_view text);

/// Parses exactly one tune; throws MalformedHeader or UnparsableBody.
Score parse_abc_tune(std::string_view text);

/// Writes a score as a single ABC tune that parse_abc reads back to an
/// event-identical score.
std::string render_abc(const Score& score);

std::vector<Score> filter_songs(const std::vector<Score>& scores);
/// Why a score fails the filter, or empty when it is retained.
std::string filter_reason(const Score& score);

/// Semitone shift that moves `tonic` to C: the smaller absolute shift,
/// -6 on a tie.
int shift_to_c(int tonic);
Score transpose_to_c(const Score& score);

struct TimestepState {
  bool articulated = false;
  int pitch = kRest;
  std::optional<Chord> chord;
  bool contaminated = false;

  bool operator==(const TimestepState&) const = default;
};

struct QuantizedSong {
  int song_id = 0;
  std::vector<TimestepState> grid;
  int beats_total = 0;
};

struct RawSegment {
  int song_id = 0;
  int start_beat = 0;
  int position = 0;  // window index within the song
  std::array<TimestepState, kSegmentSteps> states;
};

QuantizedSong quantize(const Score& score, int song_id = 0);

struct SegmentationResult {
  std::vector<RawSegment> segments;
  int dropped_contaminated = 0;
};

SegmentationResult segment(const QuantizedSong& song);

}  // namespace dshl
