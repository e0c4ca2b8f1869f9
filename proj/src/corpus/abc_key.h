#pragma once

// Key-signature helpers shared by the ABC reader and writer.

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "dshl/corpus.h"

namespace dshl::abc {

// Letters are indexed C=0, D=1, ... B=6.
inline constexpr std::array<int, 7> kLetterPitchClass = {0, 2, 4, 5, 7, 9, 11};
inline constexpr std::string_view kLetters = "CDEFGAB";

int letter_index(char upper_letter);

struct KeySignature {
  Key key;
  std::array<int, 7> alteration{};  // per letter, in semitones
};

/// Parses the value of a K: field ("G", "Am", "D mix", "Bb major", ...).
std::optional<KeySignature> parse_key_field(std::string_view value);

/// Key field text for `key`, and the signature that text denotes.
std::string key_field(const Key& key);

}  // namespace dshl::abc
