#include <array>
#include <cctype>
#include <string>

#include "dshl/corpus.h"

namespace dshl {
namespace {

struct SuffixEntry {
  std::string_view suffix;
  ChordQuality quality;
};

constexpr std::array<SuffixEntry, 30> kSuffixes = {{
    {"", ChordQuality::kMajor},
    {"maj", ChordQuality::kMajor},
    {"M", ChordQuality::kMajor},
    {"m", ChordQuality::kMinor},
    {"min", ChordQuality::kMinor},
    {"mi", ChordQuality::kMinor},
    {"-", ChordQuality::kMinor},
    {"7", ChordQuality::kDominant7},
    {"dom7", ChordQuality::kDominant7},
    {"maj7", ChordQuality::kMajor7},
    {"M7", ChordQuality::kMajor7},
    {"ma7", ChordQuality::kMajor7},
    {"m7", ChordQuality::kMinor7},
    {"min7", ChordQuality::kMinor7},
    {"-7", ChordQuality::kMinor7},
    {"dim", ChordQuality::kDiminished},
    {"o", ChordQuality::kDiminished},
    {"dim7", ChordQuality::kDiminished7},
    {"o7", ChordQuality::kDiminished7},
    {"m7b5", ChordQuality::kHalfDiminished},
    {"m7-5", ChordQuality::kHalfDiminished},
    {"aug", ChordQuality::kAugmented},
    {"+", ChordQuality::kAugmented},
    {"sus2", ChordQuality::kSus2},
    {"sus4", ChordQuality::kSus4},
    {"sus", ChordQuality::kSus4},
    {"7sus4", ChordQuality::kDominant7Sus4},
    {"7sus", ChordQuality::kDominant7Sus4},
    {"6", ChordQuality::kMajor6},
    {"m6", ChordQuality::kMinor6},
}};

constexpr std::array<std::string_view, kChordQualityCount> kQualityNames = {
    "maj", "min", "7", "maj7", "m7", "dim", "dim7", "m7b5",
    "aug", "sus2", "sus4", "7sus4", "6", "m6", "9"};

// Suffix written by chord_symbol, per quality.
constexpr std::array<std::string_view, kChordQualityCount> kSymbolSuffix = {
    "", "m", "7", "maj7", "m7", "dim", "dim7", "m7b5",
    "aug", "sus2", "sus4", "7sus4", "6", "m6", "9"};

constexpr std::array<std::string_view, 12> kRootNames = {
    "C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"};

}  // namespace

std::string_view quality_name(ChordQuality q) {
  return kQualityNames[static_cast<std::size_t>(q)];
}

std::optional<ChordQuality> quality_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kQualityNames.size(); ++i) {
    if (kQualityNames[i] == name) return static_cast<ChordQuality>(i);
  }
  return std::nullopt;
}

std::optional<Chord> parse_chord_symbol(std::string_view symbol) {
  while (!symbol.empty() && symbol.front() == ' ') symbol.remove_prefix(1);
  while (!symbol.empty() && symbol.back() == ' ') symbol.remove_suffix(1);
  if (symbol.size() >= 2 && symbol.front() == '(' && symbol.back() == ')') {
    symbol = symbol.substr(1, symbol.size() - 2);
  }
  if (symbol.empty()) return std::nullopt;

  static constexpr std::string_view kLetters = "CDEFGAB";
  static constexpr std::array<int, 7> kLetterPc = {0, 2, 4, 5, 7, 9, 11};
  const auto letter = kLetters.find(symbol.front());
  if (letter == std::string_view::npos) return std::nullopt;
  int root = kLetterPc[letter];
  std::size_t i = 1;
  while (i < symbol.size() && (symbol[i] == '#' || symbol[i] == 'b')) {
    root += symbol[i] == '#' ? 1 : -1;
    ++i;
  }
  std::string_view suffix = symbol.substr(i);
  // Slash bass notes are dropped: only (root, quality) is modelled.
  if (const auto slash = suffix.find('/'); slash != std::string_view::npos) {
    suffix = suffix.substr(0, slash);
  }
  if (suffix == "9") return Chord{(root % 12 + 12) % 12, ChordQuality::kDominant9};
  for (const auto& entry : kSuffixes) {
    if (entry.suffix == suffix) return Chord{(root % 12 + 12) % 12, entry.quality};
  }
  return std::nullopt;
}

std::string chord_symbol(const Chord& chord) {
  std::string out(kRootNames[static_cast<std::size_t>(((chord.root % 12) + 12) % 12)]);
  out += kSymbolSuffix[static_cast<std::size_t>(chord.quality)];
  return out;
}

}  // namespace dshl
