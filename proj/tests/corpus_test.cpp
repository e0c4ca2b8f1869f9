#include <gtest/gtest.h>

#include "dshl/corpus.h"
#include "dshl/errors.h"
#include "synthetic_corpus.h"

using namespace dshl;

namespace {

Score tune(const std::string& body, const std::string& meter = "4/4", const std::string& unit = "1/8",
           const std::string& key = "C") {
  return parse_abc_tune("X:1\nT:t\nM:" + meter + "\nL:" + unit + "\nK:" + key + "\n" + body + "\n");
}

std::vector<int> pitches(const Score& s) {
  std::vector<int> p;
  for (const auto& n : s.melody) p.push_back(n.pitch);
  return p;
}

}  // namespace

TEST(AbcParse, TwoBarSpecTune) {
  // Hand trace: quarter notes C D E F G A B c, one chord per bar.
  const Score s = tune("\"C\" CDEF|\"G\" GABc|", "4/4", "1/4");
  ASSERT_EQ(s.melody.size(), 8u);
  EXPECT_EQ(pitches(s), (std::vector<int>{60, 62, 64, 65, 67, 69, 71, 72}));
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(s.melody[k].onset, Beats(static_cast<std::int64_t>(k)));
    EXPECT_EQ(s.melody[k].duration, Beats(1));
  }
  ASSERT_EQ(s.chords.size(), 2u);
  EXPECT_EQ(s.chords[0].chord, (Chord{0, ChordQuality::kMajor}));
  EXPECT_EQ(s.chords[0].duration, Beats(4));
  EXPECT_EQ(s.chords[1].chord, (Chord{7, ChordQuality::kMajor}));
  EXPECT_EQ(s.chords[1].onset, Beats(4));
  EXPECT_EQ(s.key, (Key{0, Mode::kMajor}));
  EXPECT_EQ(s.meter, (Meter{4, 4}));
}

TEST(AbcParse, EmptyInput) {
  const auto r = parse_abc("");
  EXPECT_TRUE(r.scores.empty());
  EXPECT_TRUE(r.rejects.empty());
}

TEST(AbcParse, MinorKeyPassesThrough) {
  const Score s = tune("ABcd|", "4/4", "1/8", "Am");
  EXPECT_EQ(s.key.mode, Mode::kMinor);
  EXPECT_EQ(s.key.tonic, 9);
}

TEST(AbcParse, MissingHeadersAreRejected) {
  EXPECT_THROW(parse_abc_tune("X:1\nT:t\nM:4/4\nCDEF|\n"), MalformedHeader);
  EXPECT_THROW(parse_abc_tune("X:1\nT:t\nK:C\nCDEF|\n"), MalformedHeader);
  const auto r = parse_abc("X:1\nT:bad\nM:4/4\nCDEF|\n\nX:2\nT:good\nM:4/4\nK:C\nCDEF|\n");
  ASSERT_EQ(r.scores.size(), 1u);
  ASSERT_EQ(r.rejects.size(), 1u);
  EXPECT_EQ(r.rejects[0].title, "bad");
  EXPECT_EQ(r.scores[0].title, "good");
}

TEST(AbcParse, OctavesAndAccidentals) {
  const Score s = tune("C, C c c' ^F _B =B z|", "4/4", "1/8");
  EXPECT_EQ(pitches(s), (std::vector<int>{48, 60, 72, 84, 66, 70, 71, kRest}));
}

TEST(AbcParse, AccidentalsLastToTheBarLine) {
  const Score s = tune("^F F f F|F2 z6|");
  // ^F carries to later F's of the same octave in the bar; f is untouched.
  EXPECT_EQ(s.melody[0].pitch, 66);
  EXPECT_EQ(s.melody[1].pitch, 66);
  EXPECT_EQ(s.melody[2].pitch, 77);
  EXPECT_EQ(s.melody[3].pitch, 66);
  EXPECT_EQ(s.melody[4].pitch, 65);  // new bar
}

TEST(AbcParse, KeySignatureApplies) {
  const Score g = tune("F G B c|", "4/4", "1/4", "G");
  EXPECT_EQ(pitches(g), (std::vector<int>{66, 67, 71, 72}));
  const Score bb = tune("B E F c|", "4/4", "1/4", "Bb");
  EXPECT_EQ(pitches(bb), (std::vector<int>{70, 63, 65, 72}));
  const Score nat = tune("=F F G A|", "4/4", "1/4", "G");
  EXPECT_EQ(pitches(nat), (std::vector<int>{65, 65, 67, 69}));
}

TEST(AbcParse, LengthsBrokenRhythmAndTies) {
  const Score s = tune("C2 D/2E/2 F>G A<B c-|c4 z4|");
  std::vector<Beats> d;
  for (const auto& n : s.melody) d.push_back(n.duration);
  // eighth unit: C2 = 1 beat; D/2 = 1/4; > makes 3/4 + 1/4; < makes 1/4 + 3/4;
  // tied c merges into 1/2 + 2 beats.
  EXPECT_EQ(d, (std::vector<Beats>{Beats(1), Beats(1, 4), Beats(1, 4), Beats(3, 4), Beats(1, 4),
                                   Beats(1, 4), Beats(3, 4), Beats(5, 2), Beats(2)}));
  EXPECT_EQ(s.melody.back().pitch, kRest);
}

TEST(AbcParse, TripletsTakeTwoThirds) {
  const Score s = tune("(3CDE F2 G4|");
  ASSERT_GE(s.melody.size(), 3u);
  EXPECT_EQ(s.melody[0].duration, Beats(1, 3));
  EXPECT_EQ(s.melody[1].onset, Beats(1, 3));
  EXPECT_EQ(s.melody[3].onset, Beats(1));
}

TEST(AbcParse, GraceNotesAndDecorationsAreSkippedWithWarnings) {
  const Score s = tune("{g}C ~D !trill!E F G4|");
  EXPECT_EQ(pitches(s), (std::vector<int>{60, 62, 64, 65, 67}));
  EXPECT_GE(s.warnings, 3);
}

TEST(AbcParse, RepeatsAreUnrolled) {
  const Score s = tune("|:C8|D8:|E8|", "4/4", "1/8");
  EXPECT_EQ(pitches(s), (std::vector<int>{60, 62, 60, 62, 64}));
}

TEST(AbcParse, FirstAndSecondEndings) {
  const Score s = tune("|:C8|1D8:|2E8|F8|]", "4/4", "1/8");
  EXPECT_EQ(pitches(s), (std::vector<int>{60, 62, 60, 64, 65}));
}

TEST(AbcParse, PickupBarSetsAnacrusis) {
  const Score s = tune("G2|c8|d8|]");
  EXPECT_EQ(s.anacrusis, Beats(1));
  EXPECT_EQ(s.melody[1].onset, Beats(1));
}

TEST(AbcParse, CommonAndCutTime) {
  EXPECT_EQ(tune("C8|", "C").meter, (Meter{4, 4}));
  EXPECT_EQ(tune("C8|", "C|").meter, (Meter{2, 2}));
}

TEST(AbcParse, NoChordSymbolEndsTheChord) {
  const Score s = tune("\"G\"C4 \"N.C.\"D4|\"C\"E8|");
  ASSERT_EQ(s.chords.size(), 2u);
  EXPECT_EQ(s.chords[0].duration, Beats(2));
  EXPECT_EQ(s.chords[1].onset, Beats(4));
}

TEST(ChordSymbols, ParseCommonShapes) {
  EXPECT_EQ(parse_chord_symbol("G7"), (Chord{7, ChordQuality::kDominant7}));
  EXPECT_EQ(parse_chord_symbol("F#m"), (Chord{6, ChordQuality::kMinor}));
  EXPECT_EQ(parse_chord_symbol("Bb/d"), (Chord{10, ChordQuality::kMajor}));
  EXPECT_EQ(parse_chord_symbol("Edim"), (Chord{4, ChordQuality::kDiminished}));
  EXPECT_FALSE(parse_chord_symbol("fine").has_value());
  for (int root = 0; root < 12; ++root) {
    for (int q = 0; q < kChordQualityCount; ++q) {
      const Chord c{root, static_cast<ChordQuality>(q)};
      EXPECT_EQ(parse_chord_symbol(chord_symbol(c)), c) << chord_symbol(c);
    }
  }
}

TEST(Filter, KeepsMajorTwoFourAndFourFour) {
  const Score a = tune("C8|"), b = tune("C6|", "3/4", "1/8", "G"), c = tune("A8|", "4/4", "1/8", "Am");
  const auto kept = filter_songs({a, b, c});
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].meter, a.meter);
  EXPECT_TRUE(filter_songs({}).empty());
  EXPECT_EQ(filter_reason(tune("C4|", "2/4")), "");
  EXPECT_EQ(filter_reason(tune("C8|", "C|")), "meter 2/2");
  EXPECT_EQ(filter_reason(tune("C8|", "4/4", "1/8", "Ddor")), "key not major");
}

TEST(Transpose, SmallestShiftTiesDown) {
  EXPECT_EQ(shift_to_c(0), 0);
  EXPECT_EQ(shift_to_c(7), 5);    // G: +5 rather than -7
  EXPECT_EQ(shift_to_c(2), -2);   // D
  EXPECT_EQ(shift_to_c(6), -6);   // F#: tie goes down
  EXPECT_EQ(shift_to_c(5), -5);   // F
  EXPECT_EQ(shift_to_c(10), 2);   // Bb
}

TEST(Transpose, ShiftsPitchesAndRoots) {
  const Score g = tune("\"G\"G4 \"D7\"A4|", "4/4", "1/8", "G");
  const Score c = transpose_to_c(g);
  EXPECT_EQ(c.melody[0].pitch, 72);
  EXPECT_EQ(c.chords[0].chord.root, 0);
  EXPECT_EQ(c.chords[1].chord.root, 7);
  EXPECT_EQ(c.key, (Key{0, Mode::kMajor}));
  const Score twice = transpose_to_c(c);
  EXPECT_EQ(twice.melody, c.melody);
  EXPECT_EQ(twice.chords, c.chords);
  const Score id = tune("CDEF|");
  EXPECT_EQ(transpose_to_c(id).melody, id.melody);
}

TEST(Quantize, QuarterNoteArticulatesOnce) {
  const auto q = quantize(tune("C2 z6|"));
  ASSERT_EQ(q.grid.size(), 16u);
  EXPECT_EQ(q.beats_total, 4);
  for (int s = 0; s < 4; ++s) {
    EXPECT_EQ(q.grid[s].pitch, 60);
    EXPECT_EQ(q.grid[s].articulated, s == 0);
  }
  for (int s = 4; s < 16; ++s) {
    EXPECT_EQ(q.grid[s].pitch, kRest);
    EXPECT_FALSE(q.grid[s].articulated);
  }
}

TEST(Quantize, TripletInBeatTwoContaminatesThatBeat) {
  const auto q = quantize(tune("C2 D2 (3EFG A2|"));
  for (int s = 0; s < 16; ++s) EXPECT_EQ(q.grid[s].contaminated, s >= 8 && s < 12) << s;
}

TEST(Quantize, PickupIsPaddedToAFullBar) {
  const auto q = quantize(tune("G2|c8|"));
  ASSERT_EQ(q.grid.size(), 32u);
  for (int s = 0; s < 12; ++s) EXPECT_EQ(q.grid[s].pitch, kRest);
  EXPECT_TRUE(q.grid[12].articulated);
  EXPECT_EQ(q.grid[12].pitch, 67);
  EXPECT_TRUE(q.grid[16].articulated);
}

TEST(Quantize, ChordsFillTheirSpan) {
  const auto q = quantize(tune("\"F\"C4 \"G7\"D4|"));
  EXPECT_EQ(q.grid[0].chord, (Chord{5, ChordQuality::kMajor}));
  EXPECT_EQ(q.grid[7].chord, (Chord{5, ChordQuality::kMajor}));
  EXPECT_EQ(q.grid[8].chord, (Chord{7, ChordQuality::kDominant7}));
}

TEST(Segment, WindowArithmetic) {
  const auto eight = segment(quantize(tune("C8|D8|")));
  ASSERT_EQ(eight.segments.size(), 3u);
  EXPECT_EQ(eight.segments[0].start_beat, 0);
  EXPECT_EQ(eight.segments[1].start_beat, 2);
  EXPECT_EQ(eight.segments[2].start_beat, 4);
  const auto three = segment(quantize(tune("C6|", "3/4")));
  EXPECT_TRUE(three.segments.empty());
}

TEST(Segment, ContaminatedWindowsAreDroppedButCounted) {
  const auto r = segment(quantize(tune("C8|(3CDE C6|D8|")));
  // windows at beats 0,2,4,6,8 -> those covering beat 4 (the triplet) drop
  EXPECT_EQ(r.dropped_contaminated, 2);
  ASSERT_EQ(r.segments.size(), 3u);
  EXPECT_EQ(r.segments[0].position, 0);
  EXPECT_EQ(r.segments[1].position, 3);  // positions count dropped windows
}

// ---- properties over the synthetic corpus ------------------------------------

class SyntheticCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dshl::testing::SyntheticOptions opt;
    opt.tunes = 60;
    parsed_ = new AbcParseResult(parse_abc(dshl::testing::synthetic_corpus(opt)));
  }
  static void TearDownTestSuite() { delete parsed_; }
  static AbcParseResult* parsed_;
};
AbcParseResult* SyntheticCorpus::parsed_ = nullptr;

TEST_F(SyntheticCorpus, AllTunesParse) {
  EXPECT_EQ(parsed_->scores.size(), 60u);
  EXPECT_TRUE(parsed_->rejects.empty());
}

TEST_F(SyntheticCorpus, RenderParseRoundTrip) {
  for (const auto& s : parsed_->scores) {
    const Score back = parse_abc_tune(render_abc(s));
    EXPECT_EQ(back.melody, s.melody) << s.title;
    EXPECT_EQ(back.chords, s.chords) << s.title;
    EXPECT_EQ(back.meter, s.meter);
    EXPECT_EQ(back.anacrusis, s.anacrusis);
  }
}

TEST_F(SyntheticCorpus, QuantizePreservesOnGridOnsets) {
  for (const auto& s : filter_songs(parsed_->scores)) {
    const Score c = transpose_to_c(s);
    const auto q = quantize(c);
    const Beats pad = c.anacrusis > 0 ? c.meter.bar_length() - c.anacrusis : Beats(0);
    int onsets = 0;
    for (const auto& n : c.melody) {
      const Beats at = (n.onset + pad) * kStepsPerBeat;
      if (!n.is_rest() && at.denominator() == 1) ++onsets;
    }
    int bits = 0;
    for (const auto& st : q.grid) bits += st.articulated;
    EXPECT_EQ(bits, onsets) << s.title;
    EXPECT_EQ(q.grid.size(), static_cast<std::size_t>(4 * q.beats_total));
  }
}

TEST_F(SyntheticCorpus, SegmentsOverlapByHalf) {
  for (const auto& s : filter_songs(parsed_->scores)) {
    const auto r = segment(quantize(transpose_to_c(s)));
    for (std::size_t k = 0; k < r.segments.size(); ++k) {
      const auto& a = r.segments[k];
      EXPECT_EQ((a.start_beat * kStepsPerBeat) % kSegmentHopSteps, 0);
      if (k + 1 < r.segments.size() && r.segments[k + 1].position == a.position + 1) {
        const auto& b = r.segments[k + 1];
        for (int t = 0; t < 8; ++t) EXPECT_EQ(a.states[8 + t], b.states[t]);
      }
    }
  }
}

TEST_F(SyntheticCorpus, TransposeIsIdempotent) {
  for (const auto& s : filter_songs(parsed_->scores)) {
    const Score once = transpose_to_c(s);
    const Score twice = transpose_to_c(once);
    EXPECT_EQ(once.melody, twice.melody);
    EXPECT_EQ(once.chords, twice.chords);
  }
}
