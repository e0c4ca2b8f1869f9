#include <gtest/gtest.h>

#include <sstream>

#include "dshl/errors.h"
#include "dshl/features.h"
#include "dshl/rng.h"

using namespace dshl;

namespace {

// Chord c_k appears (20 - k) timesteps, so vocab order is c_0, c_1, ...
Chord chord_k(int k) { return Chord{k % 12, k < 12 ? ChordQuality::kMajor : ChordQuality::kMinor}; }

QuantizedSong ranked_song(int distinct) {
  QuantizedSong s;
  for (int k = 0; k < distinct; ++k) {
    for (int n = 0; n < 20 - k; ++n) {
      TimestepState st;
      st.chord = chord_k(k);
      s.grid.push_back(st);
    }
  }
  return s;
}

ChordVocab vocab() { return build_chord_vocab({ranked_song(14)}); }

TimestepState state(int pitch, bool art, std::optional<Chord> chord) {
  TimestepState st;
  st.pitch = pitch;
  st.articulated = art;
  st.chord = chord;
  return st;
}

RawSegment raw(int song, int position, int pitch_offset) {
  RawSegment r;
  r.song_id = song;
  r.position = position;
  r.start_beat = 2 * position;
  for (int t = 0; t < kSegmentSteps; ++t) {
    r.states[static_cast<std::size_t>(t)] = state(60 + (t / 4 + pitch_offset) % 12, t % 4 == 0, chord_k(0));
  }
  return r;
}

}  // namespace

TEST(Vocab, FrequencyOrderAndTies) {
  const ChordVocab v = vocab();
  for (int k = 0; k < 12; ++k) {
    EXPECT_EQ(v.entries[static_cast<std::size_t>(k)], chord_k(k));
    EXPECT_EQ(v.counts[static_cast<std::size_t>(k)], 20 - k);
  }
  EXPECT_EQ(v.index_of(chord_k(12)), -1);

  // Equal counts break by (root, quality).
  QuantizedSong tie;
  for (int k = 11; k >= 0; --k) {
    for (int n = 0; n < 3; ++n) tie.grid.push_back(state(kRest, false, Chord{k, ChordQuality::kMinor}));
    for (int n = 0; n < 3; ++n) tie.grid.push_back(state(kRest, false, Chord{k, ChordQuality::kMajor}));
  }
  const ChordVocab t = build_chord_vocab({tie});
  EXPECT_EQ(t.entries[0], (Chord{0, ChordQuality::kMajor}));
  EXPECT_EQ(t.entries[1], (Chord{0, ChordQuality::kMinor}));
  EXPECT_EQ(t.entries[11], (Chord{5, ChordQuality::kMinor}));
}

TEST(Vocab, FewerThan12Chords) {
  EXPECT_THROW(build_chord_vocab({ranked_song(11)}), FewerThan12Chords);
  EXPECT_THROW(build_chord_vocab({}), FewerThan12Chords);
}

TEST(Encode, ArticulatedMiddleCOverVocabZero) {
  const auto v = encode_state(state(60, true, chord_k(0)), vocab());
  EXPECT_EQ(v.count(), 4u);
  EXPECT_TRUE(v.test(0));
  EXPECT_TRUE(v.test(2));   // octave 1: (60 - 48) / 12
  EXPECT_TRUE(v.test(5));   // pitch class C
  EXPECT_TRUE(v.test(17));  // chord index 0
}

TEST(Encode, RestWithoutChordIsZero) {
  EXPECT_TRUE(encode_state(state(kRest, false, std::nullopt), vocab()).none());
  // Out-of-vocabulary chords encode as no chord.
  EXPECT_TRUE(encode_state(state(kRest, false, chord_k(13)), vocab()).none());
  // A rest carries no articulation even if the flag was set upstream.
  EXPECT_TRUE(encode_state(state(kRest, true, std::nullopt), vocab()).none());
}

TEST(Encode, OctaveWindowClamps) {
  EXPECT_EQ(octave_index(30), 0);
  EXPECT_EQ(octave_index(47), 0);
  EXPECT_EQ(octave_index(48), 0);
  EXPECT_EQ(octave_index(59), 0);
  EXPECT_EQ(octave_index(60), 1);
  EXPECT_EQ(octave_index(84), 3);
  EXPECT_EQ(octave_index(100), 3);
}

TEST(Encode, OneHotGroupsAreExclusive) {
  const ChordVocab v = vocab();
  for (int p = 36; p < 100; ++p) {
    for (bool art : {false, true}) {
      const auto bits = encode_state(state(p, art, chord_k(p % 12)), v);
      int oct = 0, pc = 0, ch = 0;
      for (int i = 0; i < 4; ++i) oct += bits.test(static_cast<std::size_t>(kOctaveBit + i));
      for (int i = 0; i < 12; ++i) pc += bits.test(static_cast<std::size_t>(kPitchClassBit + i));
      for (int i = 0; i < 12; ++i) ch += bits.test(static_cast<std::size_t>(kChordBit + i));
      EXPECT_EQ(oct, 1);
      EXPECT_EQ(pc, 1);
      EXPECT_EQ(ch, 1);
      EXPECT_EQ(bits.test(0), art);
    }
  }
}

TEST(Decode, InverseOnEncodedRange) {
  const ChordVocab v = vocab();
  for (int p = 48; p < 96; ++p) {
    for (int c = -1; c < 12; ++c) {
      const std::optional<Chord> chord = c < 0 ? std::nullopt : std::optional(chord_k(c));
      const auto st = state(p, p % 3 == 0, chord);
      EXPECT_EQ(decode_state(encode_state(st, v), v), st);
    }
  }
  EXPECT_EQ(decode_state(TimestepVector{}, v), TimestepState{});
}

TEST(Decode, InconsistentState) {
  TimestepVector only_octave;
  only_octave.set(kOctaveBit + 1);
  EXPECT_THROW(decode_state(only_octave, vocab()), InconsistentState);
  TimestepVector only_pc;
  only_pc.set(kPitchClassBit + 3);
  EXPECT_THROW(decode_state(only_pc, vocab()), InconsistentState);
}

TEST(Decode, EventsFromStates) {
  std::vector<TimestepState> g{state(60, false, chord_k(0)), state(60, false, chord_k(0)),
                               state(60, true, chord_k(1)), state(kRest, false, chord_k(1)),
                               state(kRest, false, std::nullopt), state(62, true, std::nullopt)};
  const auto ev = events_from_states(g);
  ASSERT_EQ(ev.notes.size(), 4u);
  EXPECT_EQ(ev.notes[0], (NoteEvent{Beats(0), Beats(1, 2), 60}));  // sustained start still a note
  EXPECT_EQ(ev.notes[1], (NoteEvent{Beats(1, 2), Beats(1, 4), 60}));
  EXPECT_EQ(ev.notes[2], (NoteEvent{Beats(3, 4), Beats(1, 2), kRest}));
  EXPECT_EQ(ev.notes[3].pitch, 62);
  ASSERT_EQ(ev.chords.size(), 2u);
  EXPECT_EQ(ev.chords[1], (ChordEvent{Beats(1, 2), Beats(1, 2), chord_k(1)}));
}

TEST(Pack, RoundTripRandomTensors) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::array<TimestepVector, kSegmentSteps> steps;
    for (auto& s : steps) s = TimestepVector(rng.next() & ((1ULL << kFeatureDim) - 1));
    EXPECT_EQ(unpack_steps(pack_steps(steps)), steps);
  }
}

TEST(Pack, BitPlacement) {
  std::array<TimestepVector, kSegmentSteps> steps{};
  steps[1].set(3);  // flat bit 32 -> byte 4, bit 0
  steps[15].set(28);  // flat bit 463 -> byte 57, bit 7
  const auto bytes = pack_steps(steps);
  EXPECT_EQ(bytes[4], 1u);
  EXPECT_EQ(bytes[57], 0x80u);
  int total = 0;
  for (auto b : bytes) total += __builtin_popcount(b);
  EXPECT_EQ(total, 2);
}

TEST(Store, DedupUnionsSongsInFirstAppearanceOrder) {
  const ChordVocab v = vocab();
  const std::vector<RawSegment> segs{raw(0, 0, 0), raw(0, 1, 1), raw(1, 0, 1), raw(2, 3, 0), raw(2, 4, 5)};
  StoreBuildReport rep;
  const SegmentStore store = build_segment_store(segs, v, &rep);
  ASSERT_EQ(store.size(), 3u);
  EXPECT_EQ(store.segments[0].song_ids, (std::vector<int>{0, 2}));
  EXPECT_EQ(store.segments[1].song_ids, (std::vector<int>{0, 1}));
  EXPECT_EQ(store.segments[2].song_ids, (std::vector<int>{2}));
  for (std::size_t i = 0; i < store.size(); ++i) EXPECT_EQ(store.segments[i].segment_id, static_cast<int>(i));
  EXPECT_EQ(rep.raw_segments, 5);
  EXPECT_EQ(rep.timesteps, 5 * kSegmentSteps);
  EXPECT_EQ(rep.out_of_vocab_timesteps, 0);
  ASSERT_EQ(store.occurrences.size(), 5u);
  EXPECT_EQ(store.occurrences[2], (Occurrence{1, 0, 1}));
  EXPECT_EQ(store.occurrences[4], (Occurrence{2, 4, 2}));
  // Dedup is exact: every raw segment is recoverable from its canonical id.
  for (const auto& o : store.occurrences) {
    for (const auto& r : segs) {
      if (r.song_id == o.song_id && r.position == o.position) {
        EXPECT_EQ(encode_segment(r, v).steps, store.segments[static_cast<std::size_t>(o.segment_id)].steps);
      }
    }
  }
}

TEST(Store, CountsOutOfVocabTimesteps) {
  RawSegment r = raw(0, 0, 0);
  for (int t = 0; t < 5; ++t) r.states[static_cast<std::size_t>(t)].chord = chord_k(13);
  StoreBuildReport rep;
  build_segment_store({r}, vocab(), &rep);
  EXPECT_EQ(rep.out_of_vocab_timesteps, 5);
}

TEST(Store, FileRoundTrip) {
  const ChordVocab v = vocab();
  const SegmentStore store = build_segment_store({raw(0, 0, 0), raw(0, 1, 1), raw(1, 0, 1), raw(2, 3, 0)}, v);
  std::stringstream buf;
  write_segment_store(buf, store);
  const SegmentStore back = read_segment_store(buf);
  ASSERT_EQ(back.size(), store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    EXPECT_EQ(back.segments[i].steps, store.segments[i].steps);
    EXPECT_EQ(back.segments[i].song_ids, store.segments[i].song_ids);
  }
  EXPECT_EQ(back.occurrences, store.occurrences);

  std::stringstream vbuf;
  write_chord_vocab(vbuf, v);
  EXPECT_EQ(read_chord_vocab(vbuf), v);
}

TEST(Store, CorruptFileIsRejected) {
  std::stringstream bad("DSHLSEG9 not a store");
  EXPECT_THROW(read_segment_store(bad), FormatError);
  const SegmentStore store = build_segment_store({raw(0, 0, 0)}, vocab());
  std::stringstream buf;
  write_segment_store(buf, store);
  std::string s = buf.str();
  s.resize(s.size() - 3);
  std::stringstream cut(s);
  EXPECT_THROW(read_segment_store(cut), FormatError);
}
