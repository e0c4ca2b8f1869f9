#include "dshl/config.h"

#include <charconv>
#include <istream>
#include <ostream>

#include "dshl/errors.h"

namespace dshl {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"corpus", "", "ABC files or directories, comma separated"},
      {"workspace", "workspace", "workspace directory"},
      {"seed", "1", "master seed"},
      {"hidden", "128", "LSTM hidden size H"},
      {"pretrain_epochs", "30", "prediction pretraining epochs"},
      {"batch", "64", "pretraining batch / positives per hash batch"},
      {"learning_rate", "0.001", "Adam step size"},
      {"clip_norm", "5", "global gradient-norm clip, 0 disables"},
      {"code_length", "8", "digits per code (L)"},
      {"arity", "4", "values per digit (K)"},
      {"alpha", "0.1", "bit-balance weight"},
      {"epochs", "100", "hash-learning epochs"},
      {"threshold", "0.5", "negatives need prob_positive below this"},
      {"neg_stat_samples", "200000", "random pairs for the negative statistics"},
      {"val_pos", "750", "validation positives"},
      {"val_neg", "750", "validation negatives"},
      {"n_continuations", "8", "segments appended after the start"},
      {"mode", "nearest", "nearest | farthest"},
      {"max_segments_per_song", "2", "same-song cap"},
      {"start", "random", "random | song_start_pool | <segment id>"},
      {"generations", "1", "pieces per generate call"},
      {"midi", "false", "also write MIDI files"},
  };
  return keys;
}

ConfigMap default_config() {
  ConfigMap m;
  for (const auto& k : config_keys()) m[k.name] = k.default_value;
  return m;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T number(const ConfigMap& m, const std::string& key) {
  const std::string& s = m.at(key);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("config key " + key + ": cannot parse '" + s + "'");
  }
  return v;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

ConfigMap parse_config(std::istream& in, ConfigMap base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!base.contains(key)) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key " + key);
    base[key] = trim(line.substr(eq + 1));
  }
  return base;
}

void write_config(std::ostream& out, const ConfigMap& config) {
  for (const auto& k : config_keys()) {
    const auto it = config.find(k.name);
    out << k.name << " = " << (it == config.end() ? k.default_value : it->second) << "\n";
  }
}

PipelineConfig resolve(const ConfigMap& m) {
  PipelineConfig c;
  for (const auto& k : config_keys()) require(m.contains(k.name), "missing config key " + k.name);

  std::string corpus = m.at("corpus");
  for (std::size_t start = 0; start <= corpus.size();) {
    auto comma = corpus.find(',', start);
    if (comma == std::string::npos) comma = corpus.size();
    const std::string item = trim(corpus.substr(start, comma - start));
    if (!item.empty()) c.corpus.push_back(item);
    start = comma + 1;
  }
  c.workspace = m.at("workspace");
  require(!c.workspace.empty(), "workspace must not be empty");
  c.seed = number<std::uint64_t>(m, "seed");

  c.hidden = number<int>(m, "hidden");
  require(c.hidden >= 1 && c.hidden <= 4096, "hidden must be in [1, 4096]");
  c.pretrain_epochs = number<int>(m, "pretrain_epochs");
  require(c.pretrain_epochs >= 0, "pretrain_epochs must be >= 0");
  c.batch = number<int>(m, "batch");
  require(c.batch >= 1, "batch must be >= 1");
  c.adam.learning_rate = number<double>(m, "learning_rate");
  require(c.adam.learning_rate > 0.0, "learning_rate must be > 0");
  c.adam.clip_norm = number<double>(m, "clip_norm");
  require(c.adam.clip_norm >= 0.0, "clip_norm must be >= 0");

  c.train.code_length = number<int>(m, "code_length");
  c.train.arity = number<int>(m, "arity");
  c.train.alpha = number<double>(m, "alpha");
  c.train.epochs = number<int>(m, "epochs");
  c.train.batch_positives = c.batch;
  c.train.adam = c.adam;
  c.train.seed = c.seed;
  validate(c.train);
  require(c.train.arity <= 64, "arity must be <= 64");

  c.pairs.threshold = number<double>(m, "threshold");
  require(c.pairs.threshold > 0.0 && c.pairs.threshold <= 1.0, "threshold must be in (0, 1]");
  c.pairs.neg_stat_samples = number<std::int64_t>(m, "neg_stat_samples");
  require(c.pairs.neg_stat_samples >= 1, "neg_stat_samples must be >= 1");
  c.pairs.val_pos = number<std::size_t>(m, "val_pos");
  c.pairs.val_neg = number<std::size_t>(m, "val_neg");

  c.generation.n_continuations = number<int>(m, "n_continuations");
  const std::string& mode = m.at("mode");
  require(mode == "nearest" || mode == "farthest", "mode must be nearest or farthest");
  c.generation.mode = mode == "nearest" ? QueryMode::kNearest : QueryMode::kFarthest;
  c.generation.max_segments_per_song = number<int>(m, "max_segments_per_song");
  const std::string& start = m.at("start");
  if (start == "random") {
    c.generation.start = StartPolicy::kRandom;
  } else if (start == "song_start_pool") {
    c.generation.start = StartPolicy::kSongStartPool;
  } else {
    c.generation.start = StartPolicy::kExplicit;
    c.generation.start_id = number<int>(m, "start");
    require(c.generation.start_id >= 0, "start id must be >= 0");
  }
  c.generation.seed = c.seed;
  validate(c.generation);
  c.generations = number<int>(m, "generations");
  require(c.generations >= 1, "generations must be >= 1");
  const std::string& midi = m.at("midi");
  require(midi == "true" || midi == "false", "midi must be true or false");
  c.midi = midi == "true";
  return c;
}

}  // namespace dshl
