#include "dshl/generate.h"

#include <algorithm>
#include <array>
#include <tuple>
#include <unordered_set>

namespace dshl {

void validate(const GenerationConfig& config) {
  if (config.n_continuations < 0) throw ConfigError("n_continuations must be >= 0");
  if (config.max_segments_per_song < 1) throw ConfigError("max_segments_per_song must be >= 1");
}

std::map<int, int> Piece::usage() const {
  std::map<int, int> u;
  for (int s : songs) ++u[s];
  return u;
}

namespace {

// Least-used source song that still has budget; ties go to the lowest id.
int charge_song(const IndexEntry& e, const std::map<int, int>& usage, int cap) {
  int best = -1, best_use = cap;
  for (int s : e.song_ids) {
    const auto it = usage.find(s);
    const int use = it == usage.end() ? 0 : it->second;
    if (use < best_use) {
      best = s;
      best_use = use;
    }
  }
  return best;
}

}  // namespace

int pick_start(const CodeIndex& index, const GenerationConfig& config, Rng& rng) {
  if (index.entries.empty()) throw EmptyPool("index is empty");
  switch (config.start) {
    case StartPolicy::kExplicit:
      if (config.start_id < 0 || static_cast<std::size_t>(config.start_id) >= index.size()) {
        throw EmptyPool("explicit start id " + std::to_string(config.start_id) + " not in index");
      }
      return config.start_id;
    case StartPolicy::kSongStartPool: {
      std::vector<int> pool;
      for (const auto& e : index.entries) {
        if (e.song_start) pool.push_back(e.segment_id);
      }
      if (pool.empty()) throw EmptyPool("no segment is flagged as a song start");
      return pool[rng.uniform_index(pool.size())];
    }
    case StartPolicy::kRandom:
      break;
  }
  return static_cast<int>(rng.uniform_index(index.size()));
}

void extend(Piece& piece, const CodeIndex& index, const GenerationConfig& config, Rng& rng) {
  if (piece.segments.empty()) throw EmptyPool("cannot extend an empty piece");
  const auto usage = piece.usage();
  std::unordered_set<int> saturated;
  for (const auto& [song, n] : usage) {
    if (n >= config.max_segments_per_song) saturated.insert(song);
  }
  const auto& last = index.entries.at(static_cast<std::size_t>(piece.segments.back()));
  std::vector<Tier> tiers;
  try {
    tiers = query(index, last.forward, config.mode, saturated, 1);
  } catch (const EmptyAfterExclusion&) {
    throw DeadEnd("every candidate's source songs are at the same-song cap", piece);
  }
  const auto& best = tiers.front();
  const int chosen = best.segment_ids[rng.uniform_index(best.segment_ids.size())];
  piece.segments.push_back(chosen);
  piece.distances.push_back(best.distance);
  piece.songs.push_back(
      charge_song(index.entries[static_cast<std::size_t>(chosen)], usage, config.max_segments_per_song));
}

Piece generate(const CodeIndex& index, const GenerationConfig& config, Rng& rng) {
  validate(config);
  Piece piece;
  const int start = pick_start(index, config, rng);
  piece.segments.push_back(start);
  piece.songs.push_back(charge_song(index.entries[static_cast<std::size_t>(start)], {},
                                    config.max_segments_per_song));
  for (int k = 0; k < config.n_continuations; ++k) extend(piece, index, config, rng);
  return piece;
}

std::vector<TimestepState> piece_states(const Piece& piece, const SegmentStore& store,
                                        const ChordVocab& vocab) {
  std::vector<TimestepState> states;
  for (int id : piece.segments) {
    const auto seg = decode_states(store.segments.at(static_cast<std::size_t>(id)), vocab);
    states.insert(states.end(), seg.begin(), seg.end());
  }
  return states;
}

Score piece_score(const std::vector<TimestepState>& states, const std::string& title) {
  Score score;
  score.reference = 1;
  score.title = title;
  score.key = Key{0, Mode::kMajor};
  score.meter = Meter{4, 4};
  score.unit_note_length = Beats(1, 16);

  std::vector<TimestepState> laid = states;
  if (!laid.empty() && laid.front().pitch != kRest && !laid.front().articulated) {
    // The note was struck before the piece began: give it a pickup.
    TimestepState pickup;
    pickup.articulated = true;
    pickup.pitch = laid.front().pitch;
    laid.insert(laid.begin(), pickup);
    score.anacrusis = Beats(1, kStepsPerBeat);
  }
  const auto ev = events_from_states(laid);
  score.melody = ev.notes;
  score.chords = ev.chords;
  return score;
}

std::string render_abc_piece(const Piece& piece, const SegmentStore& store, const ChordVocab& vocab,
                             const std::string& title) {
  return render_abc(piece_score(piece_states(piece, store, vocab), title));
}

// ---- MIDI -------------------------------------------------------------------

namespace {

std::array<int, 3> triad(const Chord& c) {
  switch (c.quality) {
    case ChordQuality::kMinor:
    case ChordQuality::kMinor7:
    case ChordQuality::kMinor6:
      return {0, 3, 7};
    case ChordQuality::kDiminished:
    case ChordQuality::kDiminished7:
    case ChordQuality::kHalfDiminished:
      return {0, 3, 6};
    case ChordQuality::kAugmented:
      return {0, 4, 8};
    case ChordQuality::kSus2:
      return {0, 2, 7};
    case ChordQuality::kSus4:
    case ChordQuality::kDominant7Sus4:
      return {0, 5, 7};
    default:
      return {0, 4, 7};
  }
}

struct MidiEvent {
  std::int64_t tick;
  int order;  // note-offs before note-ons at the same tick
  std::uint8_t status, data1, data2;
};

void put_varlen(std::string& out, std::uint32_t v) {
  std::uint8_t buf[5];
  int n = 0;
  buf[n++] = v & 0x7f;
  while ((v >>= 7) != 0) buf[n++] = static_cast<std::uint8_t>((v & 0x7f) | 0x80);
  while (n > 0) out.push_back(static_cast<char>(buf[--n]));
}

void put_be(std::string& out, std::uint32_t v, int bytes) {
  for (int k = bytes - 1; k >= 0; --k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

}  // namespace

std::string render_midi(const std::vector<TimestepState>& states) {
  const auto ev = events_from_states(states);
  const auto ticks = [](const Beats& b) {
    return b.numerator() * kTicksPerQuarter / b.denominator();
  };
  std::vector<MidiEvent> events;
  auto note = [&](const Beats& onset, const Beats& dur, int channel, int pitch, int velocity) {
    const auto key = static_cast<std::uint8_t>(std::clamp(pitch, 0, 127));
    events.push_back({ticks(onset), 1, static_cast<std::uint8_t>(0x90 | channel), key,
                      static_cast<std::uint8_t>(velocity)});
    events.push_back({ticks(onset + dur), 0, static_cast<std::uint8_t>(0x80 | channel), key, 0});
  };
  for (const auto& n : ev.notes) {
    if (!n.is_rest()) note(n.onset, n.duration, 0, n.pitch, 90);
  }
  for (const auto& c : ev.chords) {
    for (int iv : triad(c.chord)) note(c.onset, c.duration, 1, 48 + c.chord.root + iv, 60);
  }
  std::stable_sort(events.begin(), events.end(), [](const MidiEvent& a, const MidiEvent& b) {
    return std::tie(a.tick, a.order) < std::tie(b.tick, b.order);
  });

  std::string track;
  // tempo 120 bpm, 4/4
  track += std::string("\x00\xff\x51\x03\x07\xa1\x20", 7);
  track += std::string("\x00\xff\x58\x04\x04\x02\x18\x08", 8);
  track += std::string("\x00\xc0\x00\x00\xc1\x00", 6);  // piano on both channels
  std::int64_t now = 0;
  for (const auto& e : events) {
    put_varlen(track, static_cast<std::uint32_t>(e.tick - now));
    now = e.tick;
    track.push_back(static_cast<char>(e.status));
    track.push_back(static_cast<char>(e.data1));
    track.push_back(static_cast<char>(e.data2));
  }
  track += std::string("\x00\xff\x2f\x00", 4);

  std::string out = "MThd";
  put_be(out, 6, 4);
  put_be(out, 0, 2);  // format 0
  put_be(out, 1, 2);  // one track
  put_be(out, kTicksPerQuarter, 2);
  out += "MTrk";
  put_be(out, static_cast<std::uint32_t>(track.size()), 4);
  out += track;
  return out;
}

std::string render_midi(const Piece& piece, const SegmentStore& store, const ChordVocab& vocab) {
  return render_midi(piece_states(piece, store, vocab));
}

}  // namespace dshl
