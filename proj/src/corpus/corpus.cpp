#include <algorithm>
#include <string>

#include "dshl/corpus.h"

namespace dshl {
namespace {

std::int64_t floor_steps(const Beats& t) {
  const Beats s = t * kStepsPerBeat;
  std::int64_t q = s.numerator() / s.denominator();
  if (s.numerator() < 0 && q * s.denominator() != s.numerator()) --q;
  return q;
}

std::int64_t ceil_steps(const Beats& t) {
  const Beats s = t * kStepsPerBeat;
  std::int64_t q = floor_steps(t);
  if (q * s.denominator() != s.numerator()) ++q;
  return q;
}

bool on_grid(const Beats& t) { return (t * kStepsPerBeat).denominator() == 1; }

}  // namespace

std::string filter_reason(const Score& score) {
  if (score.key.mode != Mode::kMajor) return "key not major";
  const Meter m = score.meter;
  if (!((m.numerator == 4 && m.denominator == 4) || (m.numerator == 2 && m.denominator == 4))) {
    return "meter " + std::to_string(m.numerator) + "/" + std::to_string(m.denominator);
  }
  return {};
}

std::vector<Score> filter_songs(const std::vector<Score>& scores) {
  std::vector<Score> kept;
  std::copy_if(scores.begin(), scores.end(), std::back_inserter(kept),
               [](const Score& s) { return filter_reason(s).empty(); });
  return kept;
}

int shift_to_c(int tonic) {
  const int up = ((-tonic) % 12 + 12) % 12;  // 0..11
  if (up < 6) return up;
  return up - 12;  // 6 maps to -6: ties go down
}

Score transpose_to_c(const Score& score) {
  Score out = score;
  const int shift = shift_to_c(score.key.tonic);
  for (auto& n : out.melody) {
    if (!n.is_rest()) n.pitch += shift;
  }
  for (auto& c : out.chords) c.chord.root = ((c.chord.root + shift) % 12 + 12) % 12;
  out.key.tonic = 0;
  return out;
}

QuantizedSong quantize(const Score& score, int song_id) {
  QuantizedSong song;
  song.song_id = song_id;
  const Beats bar = score.meter.bar_length();
  // Pad a pickup out to a full bar so windows align with the first downbeat.
  const Beats pad = score.anacrusis > 0 ? bar - score.anacrusis : Beats(0);
  const Beats total = pad + score.length();
  song.beats_total = static_cast<int>(ceil_steps(total / kStepsPerBeat));
  song.grid.assign(static_cast<std::size_t>(song.beats_total) * kStepsPerBeat, TimestepState{});
  const auto steps = static_cast<std::int64_t>(song.grid.size());

  auto mark = [&](std::int64_t from, std::int64_t to) {
    for (std::int64_t s = std::max<std::int64_t>(from, 0); s < std::min(to, steps); ++s) {
      song.grid[static_cast<std::size_t>(s)].contaminated = true;
    }
  };

  for (const auto& n : score.melody) {
    const Beats on = pad + n.onset;
    const Beats end = on + n.duration;
    const std::int64_t first = ceil_steps(on);
    const std::int64_t last = ceil_steps(end);  // exclusive
    for (std::int64_t s = first; s < std::min(last, steps); ++s) {
      auto& st = song.grid[static_cast<std::size_t>(s)];
      st.pitch = n.pitch;
      st.articulated = !n.is_rest() && s == first && on_grid(on);
    }
    if (!on_grid(on) || !on_grid(end)) mark(floor_steps(on), ceil_steps(end));
  }
  for (const auto& c : score.chords) {
    const Beats on = pad + c.onset;
    const Beats end = on + c.duration;
    for (std::int64_t s = ceil_steps(on); s < std::min(ceil_steps(end), steps); ++s) {
      song.grid[static_cast<std::size_t>(s)].chord = c.chord;
    }
    if (!on_grid(on)) mark(floor_steps(on), floor_steps(on) + 1);
  }
  return song;
}

SegmentationResult segment(const QuantizedSong& song) {
  SegmentationResult result;
  const std::size_t n = song.grid.size();
  for (std::size_t start = 0, position = 0; start + kSegmentSteps <= n;
       start += kSegmentHopSteps, ++position) {
    const auto first = song.grid.begin() + static_cast<std::ptrdiff_t>(start);
    const auto last = first + kSegmentSteps;
    if (std::any_of(first, last, [](const TimestepState& s) { return s.contaminated; })) {
      ++result.dropped_contaminated;
      continue;
    }
    RawSegment seg;
    seg.song_id = song.song_id;
    seg.start_beat = static_cast<int>(start / kStepsPerBeat);
    seg.position = static_cast<int>(position);
    std::copy(first, last, seg.states.begin());
    result.segments.push_back(seg);
  }
  return result;
}

}  // namespace dshl
