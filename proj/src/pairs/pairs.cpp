#include "dshl/pairs.h"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "dshl/errors.h"

namespace dshl {
namespace {

int chord_state(const TimestepVector& v) {
  for (int c = 0; c < kChordClasses; ++c) {
    if (v.test(static_cast<std::size_t>(kChordBit + c))) return c;
  }
  return kNoChordState;
}

int pitch_value(const TimestepVector& v) {
  int octave = -1;
  int pc = -1;
  for (int i = 0; i < kOctaves; ++i) {
    if (v.test(static_cast<std::size_t>(kOctaveBit + i))) octave = i;
  }
  for (int i = 0; i < kPitchClasses; ++i) {
    if (v.test(static_cast<std::size_t>(kPitchClassBit + i))) pc = i;
  }
  if (octave < 0 || pc < 0) return kRest;
  return kLowestEncodedPitch + 12 * octave + pc;
}

using Table = std::vector<std::vector<double>>;

Table smoothed(const std::vector<std::vector<std::int64_t>>& counts) {
  const std::size_t n = counts.size();
  Table t(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    std::int64_t row = 0;
    for (auto c : counts[a]) row += c;
    const double denom = static_cast<double>(row) + static_cast<double>(n);
    for (std::size_t b = 0; b < n; ++b) {
      t[a][b] = (static_cast<double>(counts[a][b]) + 1.0) / denom;
    }
  }
  return t;
}

std::string chord_state_name(int s) { return s == kNoChordState ? "NONE" : std::to_string(s); }
std::string pitch_state_name(int p) { return p == kRest ? "REST" : std::to_string(p); }

int parse_chord_state(const std::string& s) { return s == "NONE" ? kNoChordState : std::stoi(s); }
int parse_pitch_state(const std::string& s) { return s == "REST" ? kRest : std::stoi(s); }

std::vector<SegmentPair> unique_pairs(std::vector<SegmentPair> pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

}  // namespace

std::vector<BoundaryStates> boundary_states(const SegmentStore& store) {
  std::vector<BoundaryStates> out;
  out.reserve(store.size());
  for (const auto& seg : store.segments) {
    BoundaryStates b;
    b.first_chord = chord_state(seg.steps.front());
    b.last_chord = chord_state(seg.steps.back());
    b.first_pitch = pitch_value(seg.steps.front());
    b.last_pitch = pitch_value(seg.steps.back());
    out.push_back(b);
  }
  return out;
}

int TransitionStats::pitch_state(int pitch) const {
  const auto it = std::lower_bound(pitch_alphabet.begin(), pitch_alphabet.end(), pitch);
  if (it == pitch_alphabet.end() || *it != pitch) return -1;
  return static_cast<int>(it - pitch_alphabet.begin());
}

std::vector<SegmentPair> extract_positive_pairs(const SegmentStore& store) {
  std::vector<SegmentPair> pairs;
  const auto& occ = store.occurrences;
  for (std::size_t k = 1; k < occ.size(); ++k) {
    if (occ[k].song_id == occ[k - 1].song_id && occ[k].position == occ[k - 1].position + 1) {
      pairs.push_back(SegmentPair{occ[k - 1].segment_id, occ[k].segment_id, 1});
    }
  }
  return pairs;
}

PairSet make_pair_set(const std::vector<SegmentPair>& pairs) {
  PairSet set;
  set.reserve(pairs.size() * 2);
  for (const auto& p : pairs) set.insert(pair_key(p.i, p.j));
  return set;
}

TransitionStats estimate_stats(const std::vector<SegmentPair>& positives, const SegmentStore& store,
                               Rng& rng, std::int64_t neg_sample_size) {
  const auto bounds = boundary_states(store);
  TransitionStats stats;
  stats.pitch_alphabet.push_back(kRest);
  for (const auto& b : bounds) {
    stats.pitch_alphabet.push_back(b.first_pitch);
    stats.pitch_alphabet.push_back(b.last_pitch);
  }
  std::sort(stats.pitch_alphabet.begin(), stats.pitch_alphabet.end());
  stats.pitch_alphabet.erase(std::unique(stats.pitch_alphabet.begin(), stats.pitch_alphabet.end()),
                             stats.pitch_alphabet.end());

  const std::size_t np = stats.pitch_alphabet.size();
  using Counts = std::vector<std::vector<std::int64_t>>;
  Counts chord_pos(kChordStates, std::vector<std::int64_t>(kChordStates, 0));
  Counts chord_neg = chord_pos;
  Counts pitch_pos(np, std::vector<std::int64_t>(np, 0));
  Counts pitch_neg = pitch_pos;

  auto count = [&](int i, int j, Counts& chords, Counts& pitches) {
    const auto& a = bounds[static_cast<std::size_t>(i)];
    const auto& b = bounds[static_cast<std::size_t>(j)];
    ++chords[static_cast<std::size_t>(a.last_chord)][static_cast<std::size_t>(b.first_chord)];
    ++pitches[static_cast<std::size_t>(stats.pitch_state(a.last_pitch))]
             [static_cast<std::size_t>(stats.pitch_state(b.first_pitch))];
  };

  for (const auto& p : positives) count(p.i, p.j, chord_pos, pitch_pos);

  const auto positive_set = make_pair_set(positives);
  const std::uint64_t n = store.size();
  if (n >= 2) {
    // Bounded so that a corpus with (almost) every pair positive terminates.
    const std::int64_t budget = std::max<std::int64_t>(neg_sample_size * 20, 1000);
    std::int64_t drawn = 0;
    for (std::int64_t attempt = 0; attempt < budget && drawn < neg_sample_size; ++attempt) {
      const int i = static_cast<int>(rng.uniform_index(n));
      const int j = static_cast<int>(rng.uniform_index(n));
      if (i == j || positive_set.contains(pair_key(i, j))) continue;
      count(i, j, chord_neg, pitch_neg);
      ++drawn;
    }
  }

  stats.chord_pos = smoothed(chord_pos);
  stats.chord_neg = smoothed(chord_neg);
  stats.pitch_pos = smoothed(pitch_pos);
  stats.pitch_neg = smoothed(pitch_neg);
  return stats;
}

double component_ratio(double p_pos, double p_neg) {
  const double denom = p_pos + p_neg;
  if (denom <= 0.0) return 0.5;
  return p_pos / denom;
}

PairScorer::PairScorer(TransitionStats stats, std::vector<BoundaryStates> boundaries)
    : stats_(std::move(stats)), boundaries_(std::move(boundaries)) {}

double PairScorer::chord_component(int i, int j) const {
  const auto u_i = static_cast<std::size_t>(boundaries_[static_cast<std::size_t>(i)].last_chord);
  const auto u_j = static_cast<std::size_t>(boundaries_[static_cast<std::size_t>(j)].first_chord);
  return component_ratio(stats_.chord_pos[u_i][u_j], stats_.chord_neg[u_i][u_j]);
}

double PairScorer::pitch_component(int i, int j) const {
  const int v_i = stats_.pitch_state(boundaries_[static_cast<std::size_t>(i)].last_pitch);
  const int v_j = stats_.pitch_state(boundaries_[static_cast<std::size_t>(j)].first_pitch);
  if (v_i < 0 || v_j < 0) return 0.5;
  const auto a = static_cast<std::size_t>(v_i);
  const auto b = static_cast<std::size_t>(v_j);
  return component_ratio(stats_.pitch_pos[a][b], stats_.pitch_neg[a][b]);
}

double PairScorer::prob_positive(int i, int j) const {
  return (chord_component(i, j) + pitch_component(i, j)) / 2.0;
}

std::vector<SegmentPair> sample_negatives(const PairScorer& scorer, const PairSet& positives,
                                          double threshold, std::size_t n, Rng& rng,
                                          const PairSet& exclude) {
  std::vector<SegmentPair> out;
  if (n == 0 || threshold <= 0.0) return out;  // prob_positive is never < 0
  const std::uint64_t size = scorer.size();
  if (size < 2) throw ExhaustedCandidates("need at least two segments to form negatives");

  PairSet chosen;
  chosen.reserve(n * 2);
  const std::uint64_t budget = std::max<std::uint64_t>(1'000'000, 200 * static_cast<std::uint64_t>(n));
  for (std::uint64_t attempt = 0; attempt < budget; ++attempt) {
    const int i = static_cast<int>(rng.uniform_index(size));
    const int j = static_cast<int>(rng.uniform_index(size));
    if (i == j) continue;
    const auto key = pair_key(i, j);
    if (positives.contains(key) || exclude.contains(key) || chosen.contains(key)) continue;
    if (scorer.prob_positive(i, j) >= threshold) continue;
    chosen.insert(key);
    out.push_back(SegmentPair{i, j, 0});
    if (out.size() == n) return out;
  }
  throw ExhaustedCandidates("found only " + std::to_string(out.size()) + " of " +
                            std::to_string(n) + " negatives within the attempt budget");
}

PairSplit split_validation(const std::vector<SegmentPair>& positives,
                           const std::vector<SegmentPair>& negatives, std::size_t n_val_pos,
                           std::size_t n_val_neg, Rng& rng) {
  auto pos = unique_pairs(positives);
  auto neg = unique_pairs(negatives);
  if (pos.size() < n_val_pos) {
    throw InsufficientPairs("requested " + std::to_string(n_val_pos) + " validation positives from " +
                            std::to_string(pos.size()));
  }
  if (neg.size() < n_val_neg) {
    throw InsufficientPairs("requested " + std::to_string(n_val_neg) + " validation negatives from " +
                            std::to_string(neg.size()));
  }
  rng.shuffle(std::span<SegmentPair>(pos));
  rng.shuffle(std::span<SegmentPair>(neg));
  PairSplit split;
  split.val_pos.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_val_pos));
  split.train_pos.assign(pos.begin() + static_cast<std::ptrdiff_t>(n_val_pos), pos.end());
  split.val_neg.assign(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(n_val_neg));
  split.train_neg.assign(neg.begin() + static_cast<std::ptrdiff_t>(n_val_neg), neg.end());
  return split;
}

void write_stats(std::ostream& out, const TransitionStats& stats) {
  out.precision(17);
  out << "kind,i_state,j_state,p_pos,p_neg\n";
  for (int a = 0; a < kChordStates; ++a) {
    for (int b = 0; b < kChordStates; ++b) {
      out << "chord," << chord_state_name(a) << "," << chord_state_name(b) << ","
          << stats.chord_pos[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] << ","
          << stats.chord_neg[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] << "\n";
    }
  }
  const std::size_t np = stats.pitch_alphabet.size();
  for (std::size_t a = 0; a < np; ++a) {
    for (std::size_t b = 0; b < np; ++b) {
      out << "pitch," << pitch_state_name(stats.pitch_alphabet[a]) << ","
          << pitch_state_name(stats.pitch_alphabet[b]) << "," << stats.pitch_pos[a][b] << ","
          << stats.pitch_neg[a][b] << "\n";
    }
  }
}

TransitionStats read_stats(std::istream& in) {
  struct Row {
    std::string kind;
    int a, b;
    double pos, neg;
  };
  std::vector<Row> rows;
  std::string line;
  std::getline(in, line);  // header
  TransitionStats stats;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string kind, a, b, pos, neg;
    if (!std::getline(ss, kind, ',') || !std::getline(ss, a, ',') || !std::getline(ss, b, ',') ||
        !std::getline(ss, pos, ',') || !std::getline(ss, neg)) {
      throw FormatError("bad stats line: " + line);
    }
    try {
      if (kind == "chord") {
        rows.push_back({kind, parse_chord_state(a), parse_chord_state(b), std::stod(pos), std::stod(neg)});
      } else if (kind == "pitch") {
        const int pa = parse_pitch_state(a);
        rows.push_back({kind, pa, parse_pitch_state(b), std::stod(pos), std::stod(neg)});
        if (std::find(stats.pitch_alphabet.begin(), stats.pitch_alphabet.end(), pa) ==
            stats.pitch_alphabet.end()) {
          stats.pitch_alphabet.push_back(pa);
        }
      } else {
        throw FormatError("unknown stats kind: " + kind);
      }
    } catch (const std::invalid_argument&) {
      throw FormatError("bad stats line: " + line);
    }
  }
  std::sort(stats.pitch_alphabet.begin(), stats.pitch_alphabet.end());
  const std::size_t np = stats.pitch_alphabet.size();
  stats.chord_pos.assign(kChordStates, std::vector<double>(kChordStates, 0.0));
  stats.chord_neg = stats.chord_pos;
  stats.pitch_pos.assign(np, std::vector<double>(np, 0.0));
  stats.pitch_neg = stats.pitch_pos;
  for (const auto& r : rows) {
    if (r.kind == "chord") {
      if (r.a < 0 || r.a >= kChordStates || r.b < 0 || r.b >= kChordStates) {
        throw FormatError("chord state out of range");
      }
      stats.chord_pos[static_cast<std::size_t>(r.a)][static_cast<std::size_t>(r.b)] = r.pos;
      stats.chord_neg[static_cast<std::size_t>(r.a)][static_cast<std::size_t>(r.b)] = r.neg;
    } else {
      const int a = stats.pitch_state(r.a);
      const int b = stats.pitch_state(r.b);
      if (b < 0) throw FormatError("pitch state missing from alphabet");
      stats.pitch_pos[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = r.pos;
      stats.pitch_neg[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = r.neg;
    }
  }
  return stats;
}

void write_pairs(std::ostream& out, const std::vector<SegmentPair>& pairs) {
  for (const auto& p : pairs) out << p.i << "," << p.j << "," << p.label << "\n";
}

std::vector<SegmentPair> read_pairs(std::istream& in) {
  std::vector<SegmentPair> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    SegmentPair p;
    char c1 = 0, c2 = 0;
    std::stringstream ss(line);
    if (!(ss >> p.i >> c1 >> p.j >> c2 >> p.label) || c1 != ',' || c2 != ',') {
      throw FormatError("bad pair line: " + line);
    }
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace dshl
