#pragma once

#include <cstdint>
#include <iosfwd>
#include <unordered_set>
#include <vector>

#include "dshl/features.h"
#include "dshl/hashnet.h"

namespace dshl {

/// ceil(log2 K) bits per digit; digits never straddle a 64-bit word.
int bits_per_digit(int arity);

struct PackedCode {
  int code_length = 0;  // L
  int arity = 0;        // K
  std::vector<std::uint64_t> words;

  static PackedCode pack(const DiscreteCode& digits, int arity);
  DiscreteCode unpack() const;
  bool operator==(const PackedCode&) const = default;
};

/// Number of differing digit positions. Throws ShapeMismatch.
int hamming(const PackedCode& a, const PackedCode& b);

struct IndexEntry {
  int segment_id = 0;
  PackedCode forward, backward;
  std::vector<int> song_ids;
  bool song_start = false;
};

struct CodeIndex {
  int code_length = 0;
  int arity = 0;
  std::uint64_t checksum = 0;       // of the producing checkpoint
  std::vector<IndexEntry> entries;  // entries[k].segment_id == k

  std::size_t size() const { return entries.size(); }
};

/// Codes every store segment with both directions. A segment is a song start
/// when it is the earliest retained window of one of its source songs.
CodeIndex build_index(const SegmentStore& store, const HashNet& net, std::uint64_t checksum);

enum class QueryMode { kNearest, kFarthest };

struct Tier {
  int distance = 0;
  std::vector<int> segment_ids;  // ascending
};

/// Candidates grouped by Hamming distance between `q` and their backward
/// code, best tier first. Entries all of whose songs are in `exclude` are
/// dropped. Whole tiers are added until at least `budget` candidates are
/// collected (0 = no limit). Throws EmptyAfterExclusion, ShapeMismatch.
std::vector<Tier> query(const CodeIndex& index, const PackedCode& q, QueryMode mode,
                        const std::unordered_set<int>& exclude = {}, std::size_t budget = 0);

void write_index(std::ostream& out, const CodeIndex& index);
CodeIndex read_index(std::istream& in);

}  // namespace dshl
