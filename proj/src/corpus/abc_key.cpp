#include "abc_key.h"

#include <algorithm>
#include <cctype>

namespace dshl::abc {
namespace {

// Position on the circle of fifths for each natural letter, C = 0.
constexpr std::array<int, 7> kLetterFifths = {0, 2, 4, -1, 1, 3, 5};
// Order in which sharps are added: F C G D A E B (letter indices).
constexpr std::array<int, 7> kSharpOrder = {3, 0, 4, 1, 5, 2, 6};
// Order in which flats are added: B E A D G C F.
constexpr std::array<int, 7> kFlatOrder = {6, 2, 5, 1, 4, 0, 3};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

int letter_index(char upper_letter) {
  const auto pos = kLetters.find(upper_letter);
  return pos == std::string_view::npos ? -1 : static_cast<int>(pos);
}

std::optional<KeySignature> parse_key_field(std::string_view value) {
  std::size_t i = 0;
  while (i < value.size() && std::isspace(static_cast<unsigned char>(value[i]))) ++i;
  if (i == value.size()) return std::nullopt;

  KeySignature sig;
  const std::string rest_all = lower(value.substr(i));
  if (rest_all.rfind("none", 0) == 0 || rest_all.rfind("hp", 0) == 0) {
    sig.key = Key{0, Mode::kModal};
    return sig;
  }

  const int letter = letter_index(static_cast<char>(std::toupper(value[i])));
  if (letter < 0) return std::nullopt;
  ++i;
  int accidental = 0;
  if (i < value.size() && (value[i] == '#' || value[i] == 'b')) {
    accidental = value[i] == '#' ? 1 : -1;
    ++i;
  }
  while (i < value.size() && value[i] == ' ') ++i;

  // Mode word: only the first three letters are significant.
  std::string mode_word;
  while (i < value.size() && std::isalpha(static_cast<unsigned char>(value[i]))) {
    mode_word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(value[i]))));
    ++i;
  }
  int mode_fifths = 0;
  Mode mode = Mode::kMajor;
  const std::string m3 = mode_word.substr(0, 3);
  if (mode_word.empty() || m3 == "maj" || m3 == "ion") {
    mode = Mode::kMajor;
  } else if (mode_word == "m" || m3 == "min" || m3 == "aeo") {
    mode = Mode::kMinor;
    mode_fifths = -3;
  } else if (m3 == "mix") {
    mode = Mode::kModal;
    mode_fifths = -1;
  } else if (m3 == "dor") {
    mode = Mode::kModal;
    mode_fifths = -2;
  } else if (m3 == "phr") {
    mode = Mode::kModal;
    mode_fifths = -4;
  } else if (m3 == "lyd") {
    mode = Mode::kModal;
    mode_fifths = 1;
  } else if (m3 == "loc") {
    mode = Mode::kModal;
    mode_fifths = -5;
  } else if (m3 == "cle" || m3 == "tra" || m3 == "mid" || m3 == "oct") {
    // clef=... and friends: no mode given.
    mode = Mode::kMajor;
  } else {
    return std::nullopt;
  }

  sig.key.tonic = ((kLetterPitchClass[letter] + accidental) % 12 + 12) % 12;
  sig.key.mode = mode;
  const int fifths = kLetterFifths[letter] + 7 * accidental + mode_fifths;
  if (fifths > 0) {
    for (int k = 0; k < std::min(fifths, 7); ++k) sig.alteration[kSharpOrder[k]] = 1;
  } else if (fifths < 0) {
    for (int k = 0; k < std::min(-fifths, 7); ++k) sig.alteration[kFlatOrder[k]] = -1;
  }
  return sig;
}

std::string key_field(const Key& key) {
  static constexpr std::array<const char*, 12> kMajorNames = {
      "C", "Db", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"};
  static constexpr std::array<const char*, 12> kMinorNames = {
      "C", "C#", "D", "Eb", "E", "F", "F#", "G", "G#", "A", "Bb", "B"};
  const int pc = ((key.tonic % 12) + 12) % 12;
  switch (key.mode) {
    case Mode::kMajor:
      return kMajorNames[pc];
    case Mode::kMinor:
      return std::string(kMinorNames[pc]) + "m";
    case Mode::kModal:
      return std::string(kMajorNames[pc]) + "mix";
  }
  return "C";
}

}  // namespace dshl::abc
