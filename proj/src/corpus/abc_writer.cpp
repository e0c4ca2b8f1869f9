#include <map>
#include <set>
#include <sstream>
#include <string>

#include "abc_key.h"
#include "dshl/corpus.h"

namespace dshl {
namespace {

std::string rational_text(const Beats& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

std::string length_suffix(const Beats& mult) {
  std::string out;
  if (mult.numerator() != 1) out += std::to_string(mult.numerator());
  if (mult.denominator() != 1) out += "/" + std::to_string(mult.denominator());
  return out;
}

// Writes pitches with explicit accidentals wherever the key signature and
// the accidentals already in force would give a different pitch.
class PitchSpeller {
 public:
  explicit PitchSpeller(const abc::KeySignature& sig) : sig_(sig) {}

  void new_measure() { measure_.clear(); }

  std::string spell(int pitch) {
    const int pc = ((pitch % 12) + 12) % 12;
    int letter = 0;
    int alteration = 0;
    for (int li = 6; li >= 0; --li) {
      if (abc::kLetterPitchClass[li] <= pc) {
        letter = li;
        alteration = pc - abc::kLetterPitchClass[li];
        break;
      }
    }
    const int natural = pitch - alteration;
    int in_force = sig_.alteration[letter];
    if (auto it = measure_.find(natural); it != measure_.end()) in_force = it->second;

    std::string out;
    if (alteration != in_force) {
      out += alteration == 1 ? "^" : "=";
      measure_[natural] = alteration;
    }
    const int octave = natural / 12 - 1;  // MIDI 60 is octave 4
    const char name = abc::kLetters[letter];
    if (octave >= 5) {
      out += static_cast<char>(name - 'A' + 'a');
      out.append(static_cast<std::size_t>(octave - 5), '\'');
    } else {
      out += name;
      out.append(static_cast<std::size_t>(4 - octave), ',');
    }
    return out;
  }

 private:
  abc::KeySignature sig_;
  std::map<int, int> measure_;
};

}  // namespace

std::string render_abc(const Score& score) {
  std::ostringstream out;
  const std::string key_text = abc::key_field(score.key);
  const auto sig = *abc::parse_key_field(key_text);
  out << "X:" << score.reference << "\n";
  out << "T:" << score.title << "\n";
  out << "M:" << score.meter.numerator << "/" << score.meter.denominator << "\n";
  out << "L:" << rational_text(score.unit_note_length) << "\n";
  out << "K:" << key_text << "\n";

  const Beats end = score.length();
  const Beats bar = score.meter.bar_length();
  std::set<Beats> bar_lines;
  for (Beats t = score.anacrusis > 0 ? score.anacrusis : bar; t < end; t += bar) {
    bar_lines.insert(t);
  }

  // Chord symbol (or "N.C.") to write at each change point.
  std::map<Beats, std::string> changes;
  for (const auto& c : score.chords) {
    if (c.onset < end) changes[c.onset] = chord_symbol(c.chord);
  }
  for (const auto& c : score.chords) {
    const Beats stop = c.onset + c.duration;
    if (stop < end && !changes.contains(stop)) changes[stop] = "N.C.";
  }

  std::set<Beats> cuts = bar_lines;
  for (const auto& [t, _] : changes) cuts.insert(t);

  PitchSpeller speller(sig);
  const Beats unit_beats = score.unit_note_length * 4;
  int bars_on_line = 0;
  for (const auto& note : score.melody) {
    const Beats stop = note.onset + note.duration;
    Beats t = note.onset;
    while (t < stop) {
      auto next_cut = cuts.upper_bound(t);
      const Beats piece_end = (next_cut != cuts.end() && *next_cut < stop) ? *next_cut : stop;
      if (bar_lines.contains(t)) {
        out << "|";
        speller.new_measure();
        if (++bars_on_line == 4) {
          out << "\n";
          bars_on_line = 0;
        }
      }
      if (auto it = changes.find(t); it != changes.end()) out << '"' << it->second << '"';
      const std::string len = length_suffix((piece_end - t) / unit_beats);
      if (note.is_rest()) {
        out << "z" << len;
      } else {
        out << speller.spell(note.pitch) << len;
        if (piece_end < stop) out << "-";
      }
      t = piece_end;
    }
  }
  out << "|]\n";
  return out.str();
}

}  // namespace dshl
