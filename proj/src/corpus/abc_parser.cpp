#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "abc_key.h"
#include "dshl/corpus.h"
#include "dshl/errors.h"

namespace dshl {
namespace {

struct Element {
  enum class Kind { kNote, kRest, kChord };
  Kind kind = Kind::kRest;
  int pitch = kRest;
  Beats duration{0};
  std::optional<Chord> chord;  // kChord: nullopt means "no chord"
  bool tie = false;
};

struct Measure {
  std::vector<Element> elements;
  bool repeat_start = false;
  bool end_repeat = false;
  int ending = 0;

  bool has_time() const {
    return std::any_of(elements.begin(), elements.end(),
                       [](const Element& e) { return e.kind != Element::Kind::kChord; });
  }
  Beats duration() const {
    Beats total{0};
    for (const auto& e : elements) {
      if (e.kind != Element::Kind::kChord) total += e.duration;
    }
    return total;
  }
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_note_letter(char c) { return (c >= 'A' && c <= 'G') || (c >= 'a' && c <= 'g'); }

bool is_decoration_letter(char c) {
  return (c >= 'H' && c <= 'W') || c == 'Y' || c == 'u' || c == 'v';
}

std::optional<Meter> parse_meter(std::string_view value) {
  value = trim(value);
  if (value == "C") return Meter{4, 4};
  if (value == "C|") return Meter{2, 2};
  const auto slash = value.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  try {
    const std::string num(trim(value.substr(0, slash)));
    std::string den(trim(value.substr(slash + 1)));
    if (const auto sp = den.find(' '); sp != std::string::npos) den.resize(sp);
    std::size_t used = 0;
    const int n = std::stoi(num, &used);
    if (used != num.size()) return std::nullopt;
    const int d = std::stoi(den, &used);
    if (used != den.size()) return std::nullopt;
    if (n <= 0 || (d != 2 && d != 4 && d != 8)) return std::nullopt;
    return Meter{n, d};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<Beats> parse_unit_length(std::string_view value) {
  value = trim(value);
  const auto slash = value.find('/');
  try {
    if (slash == std::string_view::npos) {
      const int n = std::stoi(std::string(value));
      if (n <= 0) return std::nullopt;
      return Beats(n);
    }
    const int n = std::stoi(std::string(value.substr(0, slash)));
    const int d = std::stoi(std::string(value.substr(slash + 1)));
    if (n <= 0 || d <= 0) return std::nullopt;
    return Beats(n, d);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// Turns the music lines of one tune into a list of measures.
class BodyParser {
 public:
  BodyParser(abc::KeySignature key, Beats unit, Meter meter)
      : key_(key), unit_(unit), meter_(meter) {}

  int warnings() const { return warnings_; }

  void set_key(const abc::KeySignature& key) { key_ = key; }
  void set_unit(Beats unit) { unit_ = unit; }
  void set_meter(Meter meter) { meter_ = meter; }

  void feed_line(std::string_view line) {
    line_ = line;
    pos_ = 0;
    while (pos_ < line_.size()) step();
  }

  std::vector<Measure> finish() {
    if (current_.has_time() || !current_.elements.empty()) close_measure(false);
    return std::move(measures_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw UnparsableBody(what + " at column " + std::to_string(pos_ + 1) + " of '" +
                         std::string(line_) + "'");
  }

  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < line_.size() ? line_[pos_ + ahead] : '\0';
  }

  void step() {
    const char c = peek();
    if (c == ' ' || c == '\t' || c == '`' || c == '\\' || c == '\r' || c == 'y') {
      ++pos_;
    } else if (c == '%') {
      pos_ = line_.size();
    } else if (c == '"') {
      quoted();
    } else if (c == '!' || c == '+') {
      const auto end = line_.find(c, pos_ + 1);
      if (end == std::string_view::npos) fail("unterminated decoration");
      ++warnings_;
      pos_ = end + 1;
    } else if (c == '{') {
      const auto end = line_.find('}', pos_ + 1);
      if (end == std::string_view::npos) fail("unterminated grace notes");
      ++warnings_;
      pos_ = end + 1;
    } else if (c == '.' || c == '~' || is_decoration_letter(c)) {
      ++warnings_;
      ++pos_;
    } else if (c == '(') {
      ++pos_;
      if (std::isdigit(static_cast<unsigned char>(peek()))) tuplet();
    } else if (c == ')') {
      ++pos_;
    } else if (c == '-') {
      ++pos_;
      if (auto* last = last_timed(); last != nullptr && last->kind == Element::Kind::kNote) {
        last->tie = true;
      }
    } else if (c == '>' || c == '<') {
      broken_rhythm();
    } else if (c == '|' || c == ':' || (c == '[' && peek(1) == '|')) {
      bar();
    } else if (c == ']') {
      ++pos_;  // stray closing bracket, e.g. end of line after "|]"
    } else if (c == '[') {
      bracket();
    } else if (c == '^' || c == '_' || c == '=' || is_note_letter(c)) {
      auto [pitch, length] = note();
      add_timed(Element::Kind::kNote, pitch, length);
    } else if (c == 'z' || c == 'x') {
      ++pos_;
      add_timed(Element::Kind::kRest, kRest, length_multiplier());
    } else if (c == 'Z' || c == 'X') {
      ++pos_;
      const int bars = read_int().value_or(1);
      // Multi-measure rests span whole bars regardless of the unit length.
      add_timed(Element::Kind::kRest, kRest, meter_.bar_length() * bars / (unit_ * 4));
    } else {
      fail(std::string("unexpected character '") + c + "'");
    }
  }

  std::optional<int> read_int() {
    const std::size_t start = pos_;
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    if (pos_ == start) return std::nullopt;
    return std::stoi(std::string(line_.substr(start, pos_ - start)));
  }

  // Length suffix: [n][/[m]]..., relative to the unit note length.
  Beats length_multiplier() {
    Beats mult(read_int().value_or(1));
    while (peek() == '/') {
      ++pos_;
      if (auto d = read_int()) {
        if (*d == 0) fail("zero length divisor");
        mult /= *d;
      } else {
        mult /= 2;
      }
    }
    if (mult <= 0) fail("non-positive note length");
    return mult;
  }

  std::pair<int, Beats> note() {
    int accidental = 0;
    bool explicit_accidental = false;
    while (peek() == '^' || peek() == '_' || peek() == '=') {
      explicit_accidental = true;
      if (peek() == '^') ++accidental;
      if (peek() == '_') --accidental;
      if (peek() == '=') accidental = 0;
      ++pos_;
    }
    const char letter = peek();
    if (!is_note_letter(letter)) fail("accidental without note");
    ++pos_;
    const bool lower = letter >= 'a';
    const int li = abc::letter_index(static_cast<char>(std::toupper(letter)));
    int natural = 60 + abc::kLetterPitchClass[li] + (lower ? 12 : 0);
    while (peek() == '\'' || peek() == ',') {
      natural += peek() == '\'' ? 12 : -12;
      ++pos_;
    }
    int alteration = 0;
    if (explicit_accidental) {
      alteration = accidental;
      measure_accidentals_[natural] = accidental;
    } else if (auto it = measure_accidentals_.find(natural); it != measure_accidentals_.end()) {
      alteration = it->second;
    } else {
      alteration = key_.alteration[li];
    }
    const int pitch = natural + alteration;
    if (pitch < 0 || pitch > 127) fail("pitch out of MIDI range");
    return {pitch, length_multiplier()};
  }

  void quoted() {
    const auto end = line_.find('"', pos_ + 1);
    if (end == std::string_view::npos) fail("unterminated chord symbol");
    const std::string_view text = line_.substr(pos_ + 1, end - pos_ - 1);
    pos_ = end + 1;
    if (!text.empty() && std::string_view("^_<>@").find(text.front()) != std::string_view::npos) {
      ++warnings_;  // free-text annotation
      return;
    }
    const std::string_view t = trim(text);
    if (t == "N.C." || t == "NC" || t == "N.C" || t == "nc") {
      add_chord(std::nullopt);
      return;
    }
    if (auto chord = parse_chord_symbol(t)) {
      add_chord(chord);
    } else {
      ++warnings_;
    }
  }

  void tuplet() {
    const int p = *read_int();
    int q = 0;
    int r = p;
    if (peek() == ':') {
      ++pos_;
      if (auto v = read_int()) q = *v;
      if (peek() == ':') {
        ++pos_;
        if (auto v = read_int()) r = *v;
      }
    }
    if (q == 0) {
      switch (p) {
        case 2: q = 3; break;
        case 3: q = 2; break;
        case 4: q = 3; break;
        case 6: q = 2; break;
        case 8: q = 3; break;
        default: q = 2; break;
      }
    }
    if (p <= 0 || r <= 0) fail("bad tuplet");
    tuplet_ratio_ = Beats(q, p);
    tuplet_remaining_ = r;
  }

  void broken_rhythm() {
    const char dir = peek();
    int n = 0;
    while (peek() == dir) {
      ++n;
      ++pos_;
    }
    Element* last = last_timed();
    if (last == nullptr) fail("broken rhythm without preceding note");
    const Beats shorter(1, 1LL << n);
    const Beats longer = Beats(2) - shorter;
    last->duration *= dir == '>' ? longer : shorter;
    pending_broken_ = dir == '>' ? shorter : longer;
  }

  void bracket() {
    // "[1" variant ending, "[K:...]" inline field, or "[ceg]" note chord.
    if (std::isdigit(static_cast<unsigned char>(peek(1)))) {
      ++pos_;
      const int ending = *read_int();
      skip_ending_list();
      start_ending(ending);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(peek(1))) && peek(2) == ':') {
      const auto end = line_.find(']', pos_);
      if (end == std::string_view::npos) fail("unterminated inline field");
      inline_field(peek(1), line_.substr(pos_ + 3, end - pos_ - 3));
      pos_ = end + 1;
      return;
    }
    ++pos_;
    std::optional<std::pair<int, Beats>> first;
    int top = -1;
    while (peek() != ']') {
      const char c = peek();
      if (c == '\0') fail("unterminated note chord");
      if (c == '^' || c == '_' || c == '=' || is_note_letter(c)) {
        auto n = note();
        if (!first) first = n;
        top = std::max(top, n.first);
      } else if (c == '-' || c == ' ') {
        ++pos_;
      } else {
        fail("unsupported token in note chord");
      }
    }
    ++pos_;
    if (!first) fail("empty note chord");
    ++warnings_;  // polyphony reduced to the top note
    const Beats mult = first->second * length_multiplier();
    add_timed(Element::Kind::kNote, top, mult);
    if (peek() == '-') {
      ++pos_;
      last_timed()->tie = true;
    }
  }

  void inline_field(char name, std::string_view value) {
    if (name == 'K') {
      if (auto k = abc::parse_key_field(value)) key_ = *k;
    } else if (name == 'L') {
      if (auto u = parse_unit_length(value)) unit_ = *u;
    } else if (name == 'M') {
      if (auto m = parse_meter(value)) meter_ = *m;
    }
  }

  void skip_ending_list() {
    while (peek() == ',' || peek() == '-' || std::isdigit(static_cast<unsigned char>(peek()))) {
      ++pos_;
    }
  }

  void start_ending(int ending) {
    current_.ending = ending;
    in_first_ending_ = ending == 1;
  }

  void bar() {
    int leading_colons = 0;
    int trailing_colons = 0;
    bool seen_bar = false;
    bool double_bar = false;
    while (true) {
      const char c = peek();
      if (c == ':') {
        (seen_bar ? trailing_colons : leading_colons)++;
      } else if (c == '|' || c == ']') {
        if (seen_bar || c == ']') double_bar = true;
        seen_bar = true;
        trailing_colons = 0;
      } else if (c == '[' && peek(1) == '|') {
        double_bar = true;
      } else {
        break;
      }
      ++pos_;
    }
    if (!seen_bar && leading_colons >= 2) {
      // "::" is shorthand for ":|:"
      trailing_colons = leading_colons / 2;
      leading_colons -= trailing_colons;
    }
    close_measure(leading_colons > 0);
    current_.repeat_start = current_.repeat_start || trailing_colons > 0;
    if (trailing_colons > 0 || double_bar) in_first_ending_ = false;
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      const int ending = *read_int();
      skip_ending_list();
      start_ending(ending);
    } else if (in_first_ending_) {
      current_.ending = 1;
    }
  }

  void close_measure(bool end_repeat) {
    measure_accidentals_.clear();
    if (!current_.has_time()) {
      // Empty measure: hand its flags and any chord symbols to a neighbour.
      if (end_repeat && !measures_.empty()) measures_.back().end_repeat = true;
      auto carried = std::move(current_.elements);
      const bool repeat_start = current_.repeat_start;
      const int ending = current_.ending;
      current_ = Measure{};
      current_.elements = std::move(carried);
      current_.repeat_start = repeat_start;
      current_.ending = ending;
      if (end_repeat) in_first_ending_ = false;
      return;
    }
    current_.end_repeat = end_repeat;
    measures_.push_back(std::move(current_));
    current_ = Measure{};
    if (end_repeat) in_first_ending_ = false;
  }

  Element* last_timed() {
    for (auto it = current_.elements.rbegin(); it != current_.elements.rend(); ++it) {
      if (it->kind != Element::Kind::kChord) return &*it;
    }
    if (!measures_.empty()) {
      auto& prev = measures_.back().elements;
      for (auto it = prev.rbegin(); it != prev.rend(); ++it) {
        if (it->kind != Element::Kind::kChord) return &*it;
      }
    }
    return nullptr;
  }

  void add_timed(Element::Kind kind, int pitch, Beats multiplier) {
    Beats duration = multiplier * unit_ * 4;
    if (pending_broken_) {
      duration *= *pending_broken_;
      pending_broken_.reset();
    }
    if (tuplet_remaining_ > 0) {
      duration *= tuplet_ratio_;
      --tuplet_remaining_;
    }
    Element e;
    e.kind = kind;
    e.pitch = pitch;
    e.duration = duration;
    current_.elements.push_back(e);
  }

  void add_chord(std::optional<Chord> chord) {
    Element e;
    e.kind = Element::Kind::kChord;
    e.chord = chord;
    current_.elements.push_back(e);
  }

  abc::KeySignature key_;
  Beats unit_;
  Meter meter_;
  std::string_view line_;
  std::size_t pos_ = 0;
  int warnings_ = 0;
  std::map<int, int> measure_accidentals_;
  std::optional<Beats> pending_broken_;
  Beats tuplet_ratio_{1};
  int tuplet_remaining_ = 0;
  bool in_first_ending_ = false;
  Measure current_;
  std::vector<Measure> measures_;
};

// Plays repeats out: a repeated section appears twice, first endings are
// skipped on the second pass.
std::vector<const Measure*> unroll(const std::vector<Measure>& measures) {
  std::vector<const Measure*> out;
  const int n = static_cast<int>(measures.size());
  int pass = 1;
  int section_start = 0;
  int jump_from = -1;
  int i = 0;
  while (i < n) {
    const Measure& m = measures[static_cast<std::size_t>(i)];
    if (pass == 2 && i > jump_from) {
      pass = 1;
      section_start = i;
    }
    if (m.repeat_start && pass == 1) section_start = i;
    if (pass == 2 && m.ending == 1) {
      ++i;
      continue;
    }
    out.push_back(&m);
    if (m.end_repeat) {
      if (pass == 1) {
        pass = 2;
        jump_from = i;
        i = section_start;
        continue;
      }
      pass = 1;
      section_start = i + 1;
    }
    ++i;
  }
  return out;
}

void linearize(const std::vector<const Measure*>& measures, Score& score) {
  Beats t{0};
  bool tie_pending = false;
  std::optional<ChordEvent> open_chord;
  auto close_chord = [&](Beats at) {
    if (open_chord && at > open_chord->onset) {
      open_chord->duration = at - open_chord->onset;
      score.chords.push_back(*open_chord);
    }
    open_chord.reset();
  };

  for (const Measure* m : measures) {
    for (const Element& e : m->elements) {
      if (e.kind == Element::Kind::kChord) {
        close_chord(t);
        if (e.chord) open_chord = ChordEvent{t, Beats(0), *e.chord};
        continue;
      }
      const bool is_note = e.kind == Element::Kind::kNote;
      auto& mel = score.melody;
      if (!mel.empty() && ((is_note && tie_pending && mel.back().pitch == e.pitch) ||
                           (!is_note && mel.back().is_rest()))) {
        mel.back().duration += e.duration;
      } else {
        mel.push_back(NoteEvent{t, e.duration, is_note ? e.pitch : kRest});
      }
      tie_pending = is_note && e.tie;
      t += e.duration;
    }
  }
  close_chord(t);
}

Score parse_tune_lines(const std::vector<std::string_view>& lines) {
  Score score;
  std::optional<abc::KeySignature> key;
  std::optional<Meter> meter;
  std::optional<Beats> unit;
  std::size_t body_start = lines.size();

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (line.size() < 2 || line[1] != ':' || !std::isalpha(static_cast<unsigned char>(line[0]))) {
      if (trim(line).empty() || line.front() == '%') continue;
      throw MalformedHeader("music before K: field");
    }
    const std::string_view value = trim(line.substr(2));
    switch (line[0]) {
      case 'X':
        try {
          score.reference = std::stoi(std::string(value));
        } catch (const std::exception&) {
          score.reference = 0;
        }
        break;
      case 'T':
        if (score.title.empty()) score.title = std::string(value);
        break;
      case 'M':
        meter = parse_meter(value);
        if (!meter) throw MalformedHeader("unsupported meter '" + std::string(value) + "'");
        break;
      case 'L':
        unit = parse_unit_length(value);
        if (!unit) throw MalformedHeader("bad unit note length '" + std::string(value) + "'");
        break;
      case 'K':
        key = abc::parse_key_field(value);
        if (!key) throw MalformedHeader("unsupported key '" + std::string(value) + "'");
        body_start = i + 1;
        break;
      default:
        break;
    }
    if (body_start != lines.size()) break;
  }
  if (!key) throw MalformedHeader("missing K: field");
  if (!meter) throw MalformedHeader("missing M: field");
  if (!unit) {
    const Beats ratio(meter->numerator, meter->denominator);
    unit = ratio < Beats(3, 4) ? Beats(1, 16) : Beats(1, 8);
  }

  score.key = key->key;
  score.meter = *meter;
  score.unit_note_length = *unit;

  BodyParser body(*key, *unit, *meter);
  for (std::size_t i = body_start; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (line.size() >= 2 && line[1] == ':' && std::isalpha(static_cast<unsigned char>(line[0])) &&
        (line.size() == 2 || (line[2] != '|' && line[2] != ':'))) {
      const std::string_view value = trim(line.substr(2));
      if (line[0] == 'K') {
        if (auto k = abc::parse_key_field(value)) body.set_key(*k);
      } else if (line[0] == 'L') {
        if (auto u = parse_unit_length(value)) body.set_unit(*u);
      } else if (line[0] == 'M') {
        if (auto m = parse_meter(value)) body.set_meter(*m);
      }
      continue;
    }
    body.feed_line(line);
  }
  const auto measures = body.finish();
  const auto played = unroll(measures);
  linearize(played, score);
  score.warnings = body.warnings();

  if (!played.empty()) {
    const Beats first = played.front()->duration();
    if (first > 0 && first < score.meter.bar_length()) score.anacrusis = first;
  }
  return score;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

bool starts_tune(std::string_view line) { return line.size() >= 2 && line[0] == 'X' && line[1] == ':'; }

}  // namespace

Beats Score::length() const {
  Beats total{0};
  for (const auto& n : melody) total += n.duration;
  return total;
}

Score parse_abc_tune(std::string_view text) {
  auto lines = split_lines(text);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return parse_tune_lines(lines);
}

AbcParseResult parse_abc(std::string_view text) {
  AbcParseResult result;
  const auto lines = split_lines(text);
  std::size_t i = 0;
  while (i < lines.size()) {
    if (!starts_tune(lines[i])) {
      ++i;
      continue;
    }
    // A tune runs to the next blank line or the next X: field.
    std::vector<std::string_view> tune{lines[i]};
    std::size_t j = i + 1;
    while (j < lines.size() && !trim(lines[j]).empty() && !starts_tune(lines[j])) {
      tune.push_back(lines[j]);
      ++j;
    }
    try {
      result.scores.push_back(parse_tune_lines(tune));
    } catch (const Error& e) {
      TuneReject reject;
      for (auto l : tune) {
        if (l.size() > 2 && l[0] == 'X' && l[1] == ':') {
          try {
            reject.reference = std::stoi(std::string(trim(l.substr(2))));
          } catch (const std::exception&) {
          }
        }
        if (l.size() > 2 && l[0] == 'T' && l[1] == ':' && reject.title.empty()) {
          reject.title = std::string(trim(l.substr(2)));
        }
      }
      const bool header = dynamic_cast<const MalformedHeader*>(&e) != nullptr;
      reject.reason = std::string(header ? "MalformedHeader: " : "UnparsableBody: ") + e.what();
      result.rejects.push_back(std::move(reject));
    }
    i = j;
  }
  return result;
}

}  // namespace dshl
