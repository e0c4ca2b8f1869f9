// dshl: command-line driver for the segment-hashing pipeline.
//
//   dshl ingest   --corpus tunes/ --workspace ws
//   dshl pretrain --workspace ws
//   dshl train    --workspace ws
//   dshl index    --workspace ws
//   dshl generate --workspace ws --mode farthest
//   dshl eval     --workspace ws
//
// Exit codes: 0 success, 1 invalid configuration, 2 runtime or data error.

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "dshl/config.h"
#include "dshl/generate.h"
#include "dshl/index.h"
#include "dshl/pipeline.h"
#include "dshl/report.h"

namespace fs = std::filesystem;
using namespace dshl;

namespace {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string() + " (run the earlier stage first?)");
  return in;
}

// Writes through a temporary so a crash never leaves a half-written artifact.
template <typename Fn>
void write_atomic(const fs::path& p, Fn&& fn) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    fn(out);
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

class WorkspaceLock {
 public:
  explicit WorkspaceLock(const fs::path& root) : path_(root / ".lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw Error("workspace is locked by another process (" + path_.string() +
                  "); remove it if no dshl process is running");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) { /* informational only */ }
  }
  ~WorkspaceLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

struct Workspace {
  fs::path root;

  fs::path store() const { return root / "ingest" / "store.bin"; }
  fs::path vocab() const { return root / "ingest" / "vocab.csv"; }
  fs::path manifest() const { return root / "ingest" / "manifest.tsv"; }
  fs::path pretrained() const { return root / "checkpoints" / "pretrain.ckpt"; }
  fs::path hashed() const { return root / "checkpoints" / "hash.ckpt"; }
  fs::path metrics() const { return root / "checkpoints" / "metrics.txt"; }
  fs::path index() const { return root / "index" / "codes.idx"; }
  fs::path pairs(const std::string& name) const { return root / "pairs" / name; }

  SegmentStore load_store() const {
    auto in = open_in(store());
    return read_segment_store(in);
  }
  ChordVocab load_vocab() const {
    auto in = open_in(vocab());
    return read_chord_vocab(in);
  }
  Checkpoint load_checkpoint(const fs::path& p) const {
    auto in = open_in(p);
    return Checkpoint::read(in);
  }
};

fs::path make_run_dir(const Workspace& ws, const std::string& command, const ConfigMap& config) {
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", std::gmtime(&now));
  fs::path dir = ws.root / "runs" / (std::string(stamp) + "_" + command);
  for (int k = 1; fs::exists(dir); ++k) {
    dir = ws.root / "runs" / (std::string(stamp) + "_" + command + "-" + std::to_string(k));
  }
  fs::create_directories(dir);
  write_atomic(dir / "config.txt", [&](std::ostream& out) { write_config(out, config); });
  return dir;
}

// ---- commands ---------------------------------------------------------------

std::vector<fs::path> corpus_files(const PipelineConfig& cfg) {
  if (cfg.corpus.empty()) throw ValidationError("no corpus given (set corpus = ... or --corpus)");
  std::vector<fs::path> files;
  for (const auto& item : cfg.corpus) {
    const fs::path p(item);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".abc") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw ValidationError("corpus path does not exist: " + item);
    }
  }
  if (files.empty()) throw ValidationError("no .abc files found in the corpus paths");
  return files;
}

int cmd_ingest(const Workspace& ws, const PipelineConfig& cfg, const fs::path& run) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, std::string>> texts;
  for (const auto& f : corpus_files(cfg)) texts.emplace_back(f.filename().string(), read_file(f));
  const IngestResult r = ingest(texts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_atomic(ws.store(), [&](std::ostream& o) { write_segment_store(o, r.store); });
  write_atomic(ws.vocab(), [&](std::ostream& o) { write_chord_vocab(o, r.vocab); });
  write_atomic(ws.manifest(), [&](std::ostream& o) { write_manifest(o, r.manifest); });

  std::ostringstream rep;
  rep << "tunes parsed:          " << r.tunes_parsed << "\n"
      << "songs retained:        " << r.songs.size() << "\n"
      << "segments:              " << r.report.raw_segments << "\n"
      << "distinct segments:     " << r.store.size() << "\n"
      << "dropped windows:       " << r.dropped_windows << "\n"
      << "out-of-vocab chords:   " << r.out_of_vocab_rate() * 100.0 << "% of timesteps\n"
      << "seconds:               " << secs << "\n";
  std::cout << rep.str();
  write_atomic(run / "ingest_report.txt", [&](std::ostream& o) { o << rep.str(); });
  if (r.store.size() == 0) {
    std::cerr << "error: no segments survived ingestion\n";
    return 2;
  }
  return 0;
}

int cmd_pretrain(const Workspace& ws, const PipelineConfig& cfg, const fs::path& run) {
  const SegmentStore store = ws.load_store();
  Rng rng(cfg.seed);
  PretrainModel model = PretrainModel::init(cfg.hidden, rng);
  PretrainConfig pc;
  pc.epochs = cfg.pretrain_epochs;
  pc.batch_size = cfg.batch;
  pc.adam = cfg.adam;
  std::ostringstream log;
  log << "# epoch forward_loss backward_loss\n";
  for (const auto& e : pretrain(model, store, pc, rng)) {
    log << e.epoch << " " << e.forward_loss << " " << e.backward_loss << "\n";
    std::cout << "epoch " << e.epoch << "  forward " << e.forward_loss << "  backward "
              << e.backward_loss << std::endl;
  }
  const Checkpoint ckpt = to_checkpoint(model);
  write_atomic(ws.pretrained(), [&](std::ostream& o) { ckpt.write(o); });
  write_atomic(ws.root / "checkpoints" / "pretrain_loss.txt", [&](std::ostream& o) { o << log.str(); });
  write_atomic(run / "pretrain_loss.txt", [&](std::ostream& o) { o << log.str(); });
  std::printf("checkpoint %s  checksum %016llx\n", ws.pretrained().c_str(),
              static_cast<unsigned long long>(ckpt.checksum()));
  return 0;
}

int cmd_train(const Workspace& ws, const PipelineConfig& cfg, const fs::path& run) {
  const SegmentStore store = ws.load_store();
  const PretrainModel pre = pretrain_model_from(ws.load_checkpoint(ws.pretrained()));
  Rng rng(cfg.seed);
  const MinedPairs mined = mine_pairs(store, cfg.pairs, rng);
  write_atomic(ws.pairs("stats.csv"), [&](std::ostream& o) { write_stats(o, mined.stats); });
  write_atomic(ws.pairs("train_pos.csv"), [&](std::ostream& o) { write_pairs(o, mined.split.train_pos); });
  write_atomic(ws.pairs("train_neg.csv"), [&](std::ostream& o) { write_pairs(o, mined.split.train_neg); });
  write_atomic(ws.pairs("val_pos.csv"), [&](std::ostream& o) { write_pairs(o, mined.split.val_pos); });
  write_atomic(ws.pairs("val_neg.csv"), [&](std::ostream& o) { write_pairs(o, mined.split.val_neg); });
  std::cout << "pairs: " << mined.split.train_pos.size() << " train positives, "
            << mined.split.val_pos.size() << " / " << mined.split.val_neg.size()
            << " validation positives / negatives\n";

  const HashTrainingData data = training_data(mined, store, cfg.pairs.threshold);
  HashNet net = HashNet::from_pretrained(pre, cfg.train.code_length, cfg.train.arity, rng);
  const auto rows = train_hash(net, store, data, cfg.train, [](const EpochMetrics& m) {
    std::printf("epoch %3d  loss %.5f  ham+ %.3f  ham- %.3f  val+ %.3f  val- %.3f\n", m.epoch,
                m.train_loss, m.ham_pos_train, m.ham_neg_train, m.ham_pos_val, m.ham_neg_val);
    std::fflush(stdout);
  });
  const Checkpoint ckpt = to_checkpoint(net);
  write_atomic(ws.hashed(), [&](std::ostream& o) { ckpt.write(o); });
  write_atomic(ws.metrics(), [&](std::ostream& o) { write_metrics(o, rows); });
  write_atomic(run / "metrics.txt", [&](std::ostream& o) { write_metrics(o, rows); });
  std::printf("checkpoint %s  checksum %016llx\n", ws.hashed().c_str(),
              static_cast<unsigned long long>(ckpt.checksum()));
  return 0;
}

CodeIndex build_and_write_index(const Workspace& ws) {
  const SegmentStore store = ws.load_store();
  const Checkpoint ckpt = ws.load_checkpoint(ws.hashed());
  const CodeIndex index = build_index(store, hash_net_from(ckpt), ckpt.checksum());
  write_atomic(ws.index(), [&](std::ostream& o) { write_index(o, index); });
  return index;
}

int cmd_index(const Workspace& ws, const PipelineConfig&, const fs::path&) {
  const CodeIndex index = build_and_write_index(ws);
  const auto starts = std::count_if(index.entries.begin(), index.entries.end(),
                                    [](const IndexEntry& e) { return e.song_start; });
  std::printf("index %s: %zu entries, %ld song starts, L=%d K=%d\n", ws.index().c_str(), index.size(),
              static_cast<long>(starts), index.code_length, index.arity);
  return 0;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? " " : "") + std::to_string(v[k]);
  return s;
}

int cmd_generate(const Workspace& ws, const PipelineConfig& cfg, const fs::path& run) {
  CodeIndex index;
  if (fs::exists(ws.index())) {
    auto in = open_in(ws.index());
    index = read_index(in);
  } else {
    std::cout << "no index yet, building it\n";
    index = build_and_write_index(ws);
  }
  const SegmentStore store = ws.load_store();
  const ChordVocab vocab = ws.load_vocab();
  if (store.size() != index.size()) throw FormatError("index and segment store disagree in size");

  Rng master(cfg.seed);
  std::ofstream stats(run / "pieces.tsv");
  stats << "piece\tstatus\tsegments\tdistances\tsongs\tmean_distance\tdistinct_songs\n";
  double sum_mean = 0.0, sum_songs = 0.0;
  int finished = 0, dead_ends = 0;
  for (int g = 0; g < cfg.generations; ++g) {
    Rng rng = master.fork();
    Piece piece;
    std::string status = "ok";
    try {
      piece = generate(index, cfg.generation, rng);
    } catch (const DeadEnd& e) {
      piece = e.partial();
      status = "dead_end";
      ++dead_ends;
      std::cerr << "piece " << g << ": dead end after " << piece.segments.size()
                << " segments: " << e.what() << "\n";
    }
    const double mean =
        piece.distances.empty()
            ? 0.0
            : std::accumulate(piece.distances.begin(), piece.distances.end(), 0.0) /
                  static_cast<double>(piece.distances.size());
    const auto distinct = std::set<int>(piece.songs.begin(), piece.songs.end()).size();
    char name[32];
    std::snprintf(name, sizeof name, "piece_%03d", g);
    write_atomic(run / (std::string(name) + ".abc"),
                 [&](std::ostream& o) { o << render_abc_piece(piece, store, vocab, name); });
    if (cfg.midi) {
      write_atomic(run / (std::string(name) + ".mid"),
                   [&](std::ostream& o) { o << render_midi(piece, store, vocab); });
    }
    stats << g << '\t' << status << '\t' << join(piece.segments) << '\t' << join(piece.distances) << '\t'
          << join(piece.songs) << '\t' << mean << '\t' << distinct << '\n';
    if (cfg.generations <= 10) {
      std::printf("%s: segments [%s] distances [%s] mean %.3f distinct songs %zu\n", name,
                  join(piece.segments).c_str(), join(piece.distances).c_str(), mean, distinct);
    }
    if (status == "ok") {
      ++finished;
      sum_mean += mean;
      sum_songs += static_cast<double>(distinct);
    }
  }
  std::printf("%d pieces (%d dead ends) in %s\n", cfg.generations, dead_ends, run.c_str());
  if (finished > 0) {
    std::printf("mean transition distance %.4f, mean distinct source songs %.3f\n",
                sum_mean / finished, sum_songs / finished);
  }
  return finished == 0 ? 2 : 0;
}

int cmd_eval(const Workspace& ws, const fs::path& metrics_path, const fs::path& run) {
  const fs::path p = metrics_path.empty() ? ws.metrics() : metrics_path;
  if (!fs::exists(p)) throw MissingMetrics("metrics file not found: " + p.string());
  std::ifstream in(p);
  const auto rows = read_metrics(in);
  if (rows.empty()) throw MissingMetrics("metrics file has no rows: " + p.string());
  write_atomic(run / "curves.csv", [&](std::ostream& o) { write_curves_csv(o, rows); });
  write_atomic(run / "curves.svg", [&](std::ostream& o) { o << curves_svg(rows); });
  const auto s = summarize(rows);
  std::printf("%zu epochs\n", rows.size());
  std::printf("positive-train distance, first 10 epochs %.3f -> last 10 %.3f (drop %.3f)\n",
              s.pos_train_first10, s.pos_train_last10, s.pos_train_first10 - s.pos_train_last10);
  std::printf("final gap negative - positive: train %.3f, validation %.3f\n", s.final_train_gap,
              s.final_val_gap);
  std::printf("wrote %s and %s\n", (run / "curves.csv").c_str(), (run / "curves.svg").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segment hashing for music generation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "key = value configuration file");
  std::map<std::string, std::string> overrides;
  for (const auto& key : config_keys()) {
    app.add_option("--" + key.name, overrides[key.name], key.help + " (default " +
                                                              (key.default_value.empty() ? "none" : key.default_value) + ")");
  }
  std::string metrics_path;
  const std::vector<std::string> names{"ingest", "pretrain", "train", "index", "generate", "eval"};
  std::map<std::string, CLI::App*> subs;
  subs["ingest"] = app.add_subcommand("ingest", "parse, filter and segment the corpus");
  subs["pretrain"] = app.add_subcommand("pretrain", "train the next-step predictors");
  subs["train"] = app.add_subcommand("train", "mine pairs and learn the hash functions");
  subs["index"] = app.add_subcommand("index", "code every segment");
  subs["generate"] = app.add_subcommand("generate", "compose pieces by retrieval");
  subs["eval"] = app.add_subcommand("eval", "Hamming curves as CSV and SVG");
  subs["eval"]->add_option("--metrics", metrics_path, "metrics file (default: workspace checkpoint)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string command;
  for (const auto& n : names) {
    if (subs[n]->parsed()) command = n;
  }

  ConfigMap config;
  PipelineConfig cfg;
  try {
    config = default_config();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ValidationError("cannot read config file " + config_path);
      config = parse_config(in, config);
    }
    for (const auto& key : config_keys()) {
      if (app.count("--" + key.name) > 0) config[key.name] = overrides[key.name];
    }
    cfg = resolve(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    const Workspace ws{fs::path(cfg.workspace)};
    if (command != "ingest" && !fs::is_directory(ws.root)) {
      throw ValidationError("workspace does not exist: " + ws.root.string());
    }
    if (command == "ingest") corpus_files(cfg);  // validate paths before taking the lock
    fs::create_directories(ws.root);
    const WorkspaceLock lock(ws.root);
    const fs::path run = make_run_dir(ws, command, config);
    if (command == "ingest") return cmd_ingest(ws, cfg, run);
    if (command == "pretrain") return cmd_pretrain(ws, cfg, run);
    if (command == "train") return cmd_train(ws, cfg, run);
    if (command == "index") return cmd_index(ws, cfg, run);
    if (command == "generate") return cmd_generate(ws, cfg, run);
    return cmd_eval(ws, metrics_path, run);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
