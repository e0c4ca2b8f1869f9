#include "dshl/index.h"

#include <algorithm>
#include <bit>
#include <istream>
#include <map>
#include <ostream>

#include "dshl/binary_io.h"
#include "dshl/errors.h"

namespace dshl {
namespace {

constexpr std::string_view kIndexMagic = "DSHLIDX1";
constexpr std::uint32_t kIndexVersion = 1;

int digits_per_word(int arity) { return 64 / bits_per_digit(arity); }

std::size_t word_count(int code_length, int arity) {
  const int per = digits_per_word(arity);
  return static_cast<std::size_t>((code_length + per - 1) / per);
}

// Lowest bit of every digit slot in a word.
std::uint64_t low_bits_mask(int bits) {
  std::uint64_t m = 0;
  for (int s = 0; s + bits <= 64; s += bits) m |= std::uint64_t{1} << s;
  return m;
}

}  // namespace

int bits_per_digit(int arity) {
  if (arity < 2) throw ShapeMismatch("arity must be >= 2");
  return std::bit_width(static_cast<unsigned>(arity - 1));
}

PackedCode PackedCode::pack(const DiscreteCode& digits, int arity) {
  PackedCode p;
  p.code_length = static_cast<int>(digits.size());
  p.arity = arity;
  const int bits = bits_per_digit(arity);
  const int per = digits_per_word(arity);
  p.words.assign(word_count(p.code_length, arity), 0);
  for (int l = 0; l < p.code_length; ++l) {
    const int d = digits[static_cast<std::size_t>(l)];
    if (d < 0 || d >= arity) throw ShapeMismatch("digit out of range");
    p.words[static_cast<std::size_t>(l / per)] |= static_cast<std::uint64_t>(d) << ((l % per) * bits);
  }
  return p;
}

DiscreteCode PackedCode::unpack() const {
  const int bits = bits_per_digit(arity);
  const int per = digits_per_word(arity);
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  DiscreteCode d(static_cast<std::size_t>(code_length));
  for (int l = 0; l < code_length; ++l) {
    d[static_cast<std::size_t>(l)] =
        static_cast<int>((words[static_cast<std::size_t>(l / per)] >> ((l % per) * bits)) & mask);
  }
  return d;
}

int hamming(const PackedCode& a, const PackedCode& b) {
  if (a.code_length != b.code_length || a.arity != b.arity || a.words.size() != b.words.size()) {
    throw ShapeMismatch("hamming: codes have different L or K");
  }
  const int bits = bits_per_digit(a.arity);
  const std::uint64_t low = low_bits_mask(bits);
  int total = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w) {
    const std::uint64_t x = a.words[w] ^ b.words[w];
    std::uint64_t folded = x;
    for (int s = 1; s < bits; ++s) folded |= x >> s;
    total += std::popcount(folded & low);
  }
  return total;
}

CodeIndex build_index(const SegmentStore& store, const HashNet& net, std::uint64_t checksum) {
  CodeIndex index;
  index.code_length = net.code_length;
  index.arity = net.arity;
  index.checksum = checksum;

  std::map<int, std::pair<int, int>> first_window;  // song -> (position, segment)
  for (const auto& occ : store.occurrences) {
    auto [it, inserted] = first_window.try_emplace(occ.song_id, occ.position, occ.segment_id);
    if (!inserted && occ.position < it->second.first) it->second = {occ.position, occ.segment_id};
  }

  index.entries.resize(store.size());
  constexpr std::size_t kChunk = 512;
  for (std::size_t s = 0; s < store.size(); s += kChunk) {
    std::vector<int> ids;
    for (std::size_t k = s; k < std::min(store.size(), s + kChunk); ++k) ids.push_back(static_cast<int>(k));
    const auto fwd = discretize_columns(continuous_codes(net, Direction::kForward, store, ids),
                                        net.code_length, net.arity);
    const auto bwd = discretize_columns(continuous_codes(net, Direction::kRetrograde, store, ids),
                                        net.code_length, net.arity);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      auto& e = index.entries[static_cast<std::size_t>(ids[k])];
      e.segment_id = ids[k];
      e.forward = PackedCode::pack(fwd[k], net.arity);
      e.backward = PackedCode::pack(bwd[k], net.arity);
      e.song_ids = store.segments[static_cast<std::size_t>(ids[k])].song_ids;
    }
  }
  for (const auto& [song, first] : first_window) {
    index.entries[static_cast<std::size_t>(first.second)].song_start = true;
  }
  return index;
}

std::vector<Tier> query(const CodeIndex& index, const PackedCode& q, QueryMode mode,
                        const std::unordered_set<int>& exclude, std::size_t budget) {
  if (q.code_length != index.code_length || q.arity != index.arity) {
    throw ShapeMismatch("query code shape differs from the index");
  }
  // Counting sort by distance keeps ids ascending inside each tier.
  std::vector<std::vector<int>> by_distance(static_cast<std::size_t>(index.code_length) + 1);
  for (const auto& e : index.entries) {
    if (!exclude.empty() &&
        std::all_of(e.song_ids.begin(), e.song_ids.end(), [&](int s) { return exclude.contains(s); })) {
      continue;
    }
    by_distance[static_cast<std::size_t>(hamming(q, e.backward))].push_back(e.segment_id);
  }
  if (mode == QueryMode::kFarthest) std::reverse(by_distance.begin(), by_distance.end());

  std::vector<Tier> tiers;
  std::size_t collected = 0;
  for (std::size_t k = 0; k < by_distance.size(); ++k) {
    if (by_distance[k].empty()) continue;
    const int d = mode == QueryMode::kNearest ? static_cast<int>(k)
                                              : index.code_length - static_cast<int>(k);
    collected += by_distance[k].size();
    tiers.push_back({d, std::move(by_distance[k])});
    if (budget != 0 && collected >= budget) break;
  }
  if (tiers.empty()) throw EmptyAfterExclusion("no index entries survive the exclusion set");
  return tiers;
}

void write_index(std::ostream& out, const CodeIndex& index) {
  const auto words = word_count(index.code_length, index.arity);
  io::write_magic(out, kIndexMagic);
  io::write_le<std::uint32_t>(out, kIndexVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.code_length));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.arity));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.entries.size()));
  io::write_le<std::uint64_t>(out, index.checksum);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(words));
  for (const auto& e : index.entries) {
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.segment_id));
    io::write_le<std::uint32_t>(out, e.song_start ? 1u : 0u);
    for (auto w : e.forward.words) io::write_le<std::uint64_t>(out, w);
    for (auto w : e.backward.words) io::write_le<std::uint64_t>(out, w);
  }
  for (const auto& e : index.entries) {
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.song_ids.size()));
    for (int s : e.song_ids) io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  }
}

CodeIndex read_index(std::istream& in) {
  io::expect_magic(in, kIndexMagic);
  if (io::read_le<std::uint32_t>(in) != kIndexVersion) throw FormatError("unsupported index version");
  CodeIndex index;
  index.code_length = static_cast<int>(io::read_le<std::uint32_t>(in));
  index.arity = static_cast<int>(io::read_le<std::uint32_t>(in));
  const auto count = io::read_le<std::uint32_t>(in);
  index.checksum = io::read_le<std::uint64_t>(in);
  const auto words = io::read_le<std::uint32_t>(in);
  if (index.code_length < 1 || index.arity < 2 || words != word_count(index.code_length, index.arity)) {
    throw FormatError("index header has an invalid code shape");
  }
  index.entries.resize(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    auto& e = index.entries[k];
    e.segment_id = static_cast<int>(io::read_le<std::uint32_t>(in));
    if (e.segment_id != static_cast<int>(k)) throw FormatError("index records out of order");
    e.song_start = (io::read_le<std::uint32_t>(in) & 1u) != 0;
    for (PackedCode* c : {&e.forward, &e.backward}) {
      c->code_length = index.code_length;
      c->arity = index.arity;
      c->words.resize(words);
      for (auto& w : c->words) w = io::read_le<std::uint64_t>(in);
    }
  }
  for (auto& e : index.entries) {
    const auto n = io::read_le<std::uint32_t>(in);
    for (std::uint32_t k = 0; k < n; ++k) e.song_ids.push_back(static_cast<int>(io::read_le<std::uint32_t>(in)));
  }
  return index;
}

}  // namespace dshl
