#include "dshl/features.h"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>

#include "dshl/binary_io.h"
#include "dshl/errors.h"

namespace dshl {
namespace {

constexpr std::string_view kStoreMagic = "DSHLSEG1";
constexpr std::uint32_t kStoreVersion = 1;

}  // namespace

int ChordVocab::index_of(const Chord& chord) const {
  for (int i = 0; i < kChordClasses; ++i) {
    if (entries[static_cast<std::size_t>(i)] == chord) return i;
  }
  return -1;
}

ChordVocab build_chord_vocab(const std::vector<QuantizedSong>& songs) {
  std::map<Chord, std::int64_t> counts;
  for (const auto& song : songs) {
    for (const auto& st : song.grid) {
      if (st.chord) ++counts[*st.chord];
    }
  }
  if (counts.size() < kChordClasses) {
    throw FewerThan12Chords("corpus has only " + std::to_string(counts.size()) +
                            " distinct chords");
  }
  std::vector<std::pair<Chord, std::int64_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is already in (root, quality) order; stable_sort keeps
  // it as the tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  ChordVocab vocab;
  for (int i = 0; i < kChordClasses; ++i) {
    vocab.entries[static_cast<std::size_t>(i)] = ranked[static_cast<std::size_t>(i)].first;
    vocab.counts[static_cast<std::size_t>(i)] = ranked[static_cast<std::size_t>(i)].second;
  }
  return vocab;
}

int octave_index(int pitch) {
  const int shifted = pitch - kLowestEncodedPitch;
  const int octave = shifted >= 0 ? shifted / 12 : -((-shifted + 11) / 12);
  return std::clamp(octave, 0, kOctaves - 1);
}

TimestepVector encode_state(const TimestepState& state, const ChordVocab& vocab) {
  TimestepVector v;
  if (state.pitch != kRest) {
    v.set(kArticulationBit, state.articulated);
    v.set(static_cast<std::size_t>(kOctaveBit + octave_index(state.pitch)));
    v.set(static_cast<std::size_t>(kPitchClassBit + state.pitch % 12));
  }
  if (state.chord) {
    const int idx = vocab.index_of(*state.chord);
    if (idx >= 0) v.set(static_cast<std::size_t>(kChordBit + idx));
  }
  return v;
}

SegmentTensor encode_segment(const RawSegment& raw, const ChordVocab& vocab) {
  SegmentTensor t;
  t.song_ids = {raw.song_id};
  for (int s = 0; s < kSegmentSteps; ++s) {
    t.steps[static_cast<std::size_t>(s)] = encode_state(raw.states[static_cast<std::size_t>(s)], vocab);
  }
  return t;
}

TimestepState decode_state(const TimestepVector& v, const ChordVocab& vocab) {
  int octave = -1;
  int pc = -1;
  int chord = -1;
  for (int i = 0; i < kOctaves; ++i) {
    if (v.test(static_cast<std::size_t>(kOctaveBit + i))) octave = i;
  }
  for (int i = 0; i < kPitchClasses; ++i) {
    if (v.test(static_cast<std::size_t>(kPitchClassBit + i))) pc = i;
  }
  for (int i = 0; i < kChordClasses; ++i) {
    if (v.test(static_cast<std::size_t>(kChordBit + i))) chord = i;
  }
  if ((octave < 0) != (pc < 0)) {
    throw InconsistentState(octave < 0 ? "pitch class set without octave"
                                       : "octave set without pitch class");
  }
  TimestepState st;
  if (octave >= 0) {
    st.pitch = kLowestEncodedPitch + 12 * octave + pc;
    st.articulated = v.test(kArticulationBit);
  }
  if (chord >= 0) st.chord = vocab.entries[static_cast<std::size_t>(chord)];
  return st;
}

std::array<TimestepState, kSegmentSteps> decode_states(const SegmentTensor& tensor,
                                                       const ChordVocab& vocab) {
  std::array<TimestepState, kSegmentSteps> out;
  for (int s = 0; s < kSegmentSteps; ++s) {
    out[static_cast<std::size_t>(s)] = decode_state(tensor.steps[static_cast<std::size_t>(s)], vocab);
  }
  return out;
}

DecodedEvents events_from_states(const std::vector<TimestepState>& states) {
  DecodedEvents ev;
  const Beats step(1, kStepsPerBeat);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& st = states[i];
    const Beats t = step * static_cast<std::int64_t>(i);
    const bool continues = !ev.notes.empty() && ev.notes.back().pitch == st.pitch &&
                           (st.pitch == kRest || !st.articulated);
    if (continues) {
      ev.notes.back().duration += step;
    } else {
      ev.notes.push_back(NoteEvent{t, step, st.pitch});
    }

    const bool chord_continues = i > 0 && states[i - 1].chord == st.chord;
    if (st.chord) {
      if (chord_continues) {
        ev.chords.back().duration += step;
      } else {
        ev.chords.push_back(ChordEvent{t, step, *st.chord});
      }
    }
  }
  return ev;
}

DecodedEvents decode_segment(const SegmentTensor& tensor, const ChordVocab& vocab) {
  const auto states = decode_states(tensor, vocab);
  return events_from_states(std::vector<TimestepState>(states.begin(), states.end()));
}

SegmentStore build_segment_store(const std::vector<RawSegment>& raw, const ChordVocab& vocab,
                                 StoreBuildReport* report) {
  SegmentStore store;
  std::map<std::array<std::uint8_t, 58>, int> by_content;
  StoreBuildReport local;
  for (const auto& seg : raw) {
    ++local.raw_segments;
    for (const auto& st : seg.states) {
      ++local.timesteps;
      if (st.chord && vocab.index_of(*st.chord) < 0) ++local.out_of_vocab_timesteps;
    }
    SegmentTensor tensor = encode_segment(seg, vocab);
    const auto key = pack_steps(tensor.steps);
    auto [it, inserted] = by_content.try_emplace(key, static_cast<int>(store.segments.size()));
    if (inserted) {
      tensor.segment_id = it->second;
      store.segments.push_back(std::move(tensor));
    } else {
      auto& ids = store.segments[static_cast<std::size_t>(it->second)].song_ids;
      if (!std::binary_search(ids.begin(), ids.end(), seg.song_id)) {
        ids.insert(std::upper_bound(ids.begin(), ids.end(), seg.song_id), seg.song_id);
      }
    }
    store.occurrences.push_back(Occurrence{seg.song_id, seg.position, it->second});
  }
  std::sort(store.occurrences.begin(), store.occurrences.end(), [](const auto& a, const auto& b) {
    return std::tie(a.song_id, a.position) < std::tie(b.song_id, b.position);
  });
  if (report != nullptr) *report = local;
  return store;
}

std::array<std::uint8_t, 58> pack_steps(const std::array<TimestepVector, kSegmentSteps>& steps) {
  std::array<std::uint8_t, 58> bytes{};
  for (int t = 0; t < kSegmentSteps; ++t) {
    for (int f = 0; f < kFeatureDim; ++f) {
      if (steps[static_cast<std::size_t>(t)].test(static_cast<std::size_t>(f))) {
        const int k = t * kFeatureDim + f;
        bytes[static_cast<std::size_t>(k / 8)] |= static_cast<std::uint8_t>(1u << (k % 8));
      }
    }
  }
  return bytes;
}

std::array<TimestepVector, kSegmentSteps> unpack_steps(const std::array<std::uint8_t, 58>& bytes) {
  std::array<TimestepVector, kSegmentSteps> steps{};
  for (int k = 0; k < kSegmentSteps * kFeatureDim; ++k) {
    if (bytes[static_cast<std::size_t>(k / 8)] & (1u << (k % 8))) {
      steps[static_cast<std::size_t>(k / kFeatureDim)].set(static_cast<std::size_t>(k % kFeatureDim));
    }
  }
  return steps;
}

void write_chord_vocab(std::ostream& out, const ChordVocab& vocab) {
  for (int i = 0; i < kChordClasses; ++i) {
    const auto& c = vocab.entries[static_cast<std::size_t>(i)];
    out << c.root << "," << quality_name(c.quality) << "," << vocab.counts[static_cast<std::size_t>(i)]
        << "\n";
  }
}

ChordVocab read_chord_vocab(std::istream& in) {
  ChordVocab vocab;
  std::string line;
  int i = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (i >= kChordClasses) throw FormatError("chord vocabulary has more than 12 entries");
    std::stringstream ss(line);
    std::string root, quality, count;
    if (!std::getline(ss, root, ',') || !std::getline(ss, quality, ',') || !std::getline(ss, count)) {
      throw FormatError("bad chord vocabulary line: " + line);
    }
    const auto q = quality_from_name(quality);
    if (!q) throw FormatError("unknown chord quality: " + quality);
    try {
      vocab.entries[static_cast<std::size_t>(i)] = Chord{std::stoi(root), *q};
      vocab.counts[static_cast<std::size_t>(i)] = std::stoll(count);
    } catch (const std::exception&) {
      throw FormatError("bad chord vocabulary line: " + line);
    }
    ++i;
  }
  if (i != kChordClasses) throw FormatError("chord vocabulary must have 12 entries");
  return vocab;
}

void write_segment_store(std::ostream& out, const SegmentStore& store) {
  io::write_magic(out, kStoreMagic);
  io::write_le<std::uint32_t>(out, kStoreVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.segments.size()));
  for (const auto& seg : store.segments) {
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(seg.segment_id));
    const auto bytes = pack_steps(seg.steps);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(seg.song_ids.size()));
    for (int id : seg.song_ids) io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(id));
  }
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.occurrences.size()));
  for (const auto& o : store.occurrences) {
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(o.song_id));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(o.position));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(o.segment_id));
  }
}

SegmentStore read_segment_store(std::istream& in) {
  io::expect_magic(in, kStoreMagic);
  if (io::read_le<std::uint32_t>(in) != kStoreVersion) throw FormatError("unsupported segment store version");
  SegmentStore store;
  const auto count = io::read_le<std::uint32_t>(in);
  store.segments.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& seg = store.segments[i];
    seg.segment_id = static_cast<int>(io::read_le<std::uint32_t>(in));
    if (seg.segment_id != static_cast<int>(i)) throw FormatError("segment ids must be dense");
    std::array<std::uint8_t, 58> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw FormatError("truncated segment store");
    seg.steps = unpack_steps(bytes);
    const auto n = io::read_le<std::uint32_t>(in);
    seg.song_ids.resize(n);
    for (auto& id : seg.song_ids) id = static_cast<int>(io::read_le<std::uint32_t>(in));
  }
  const auto occ = io::read_le<std::uint32_t>(in);
  store.occurrences.resize(occ);
  for (auto& o : store.occurrences) {
    o.song_id = static_cast<int>(io::read_le<std::uint32_t>(in));
    o.position = static_cast<int>(io::read_le<std::uint32_t>(in));
    o.segment_id = static_cast<int>(io::read_le<std::uint32_t>(in));
    if (o.segment_id < 0 || o.segment_id >= static_cast<int>(count)) {
      throw FormatError("occurrence references unknown segment");
    }
  }
  return store;
}

}  // namespace dshl
