#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "dshl/config.h"
#include "dshl/errors.h"
#include "dshl/report.h"
#include "synthetic_corpus.h"

using namespace dshl;
namespace fs = std::filesystem;

TEST(Config, DefaultsResolve) {
  const PipelineConfig c = resolve(default_config());
  EXPECT_EQ(c.hidden, 128);
  EXPECT_EQ(c.train.code_length, 8);
  EXPECT_EQ(c.train.arity, 4);
  EXPECT_EQ(c.train.epochs, 100);
  EXPECT_DOUBLE_EQ(c.adam.learning_rate, 1e-3);
  EXPECT_DOUBLE_EQ(c.adam.clip_norm, 5.0);
  EXPECT_EQ(c.pairs.val_pos, 750u);
  EXPECT_EQ(c.generation.n_continuations, 8);
  EXPECT_EQ(c.generation.max_segments_per_song, 2);
  EXPECT_EQ(c.generation.mode, QueryMode::kNearest);
  EXPECT_TRUE(c.corpus.empty());
}

TEST(Config, ParseCommentsAndOverrides) {
  std::istringstream in(
      "# experiment\n"
      "corpus = a.abc, dir/  # two sources\n"
      "mode=farthest\n"
      "\n"
      "start = 17\n");
  const PipelineConfig c = resolve(parse_config(in));
  EXPECT_EQ(c.corpus, (std::vector<std::string>{"a.abc", "dir/"}));
  EXPECT_EQ(c.generation.mode, QueryMode::kFarthest);
  EXPECT_EQ(c.generation.start, StartPolicy::kExplicit);
  EXPECT_EQ(c.generation.start_id, 17);
}

TEST(Config, Rejections) {
  std::istringstream unknown("hiden = 4\n");
  EXPECT_THROW(parse_config(unknown), ConfigError);
  std::istringstream noeq("hidden 4\n");
  EXPECT_THROW(parse_config(noeq), ConfigError);
  auto bad = [](const std::string& key, const std::string& value) {
    ConfigMap m = default_config();
    m[key] = value;
    return m;
  };
  EXPECT_THROW(resolve(bad("arity", "1")), ConfigError);
  EXPECT_THROW(resolve(bad("code_length", "0")), ConfigError);
  EXPECT_THROW(resolve(bad("alpha", "-1")), ConfigError);
  EXPECT_THROW(resolve(bad("hidden", "12x")), ConfigError);
  EXPECT_THROW(resolve(bad("mode", "closest")), ConfigError);
  EXPECT_THROW(resolve(bad("max_segments_per_song", "0")), ConfigError);
  EXPECT_THROW(resolve(bad("threshold", "0")), ConfigError);
  EXPECT_THROW(resolve(bad("midi", "yes")), ConfigError);
}

TEST(Config, SnapshotRoundTrip) {
  ConfigMap m = default_config();
  m["seed"] = "99";
  m["corpus"] = "x.abc";
  std::stringstream buf;
  write_config(buf, m);
  EXPECT_EQ(parse_config(buf), m);
}

TEST(Report, CsvHasSixColumns) {
  std::ostringstream out;
  write_curves_csv(out, {{1, 0.5, 3, 5, 3.5, 5.5}, {2, 0.25, 2, 5.5, 3, 5.25}});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,train_loss,ham_pos_train,ham_neg_train,ham_pos_val,ham_neg_val");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
    ++rows;
  }
  EXPECT_EQ(rows, 2);
}

TEST(Report, SvgHasFiveSeries) {
  const std::string svg = curves_svg({{1, 0.5, 3, 5, 3.5, 5.5}, {2, 0.25, 2, 5.5, 3, 5.25}});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  const std::regex series("class=\"series\"");
  EXPECT_EQ(std::distance(std::sregex_iterator(svg.begin(), svg.end(), series), std::sregex_iterator()), 5);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Report, MissingMetrics) {
  EXPECT_THROW(curves_svg({}), MissingMetrics);
  EXPECT_THROW(summarize({}), MissingMetrics);
}

TEST(Report, SummaryWindows) {
  std::vector<EpochMetrics> rows;
  for (int e = 1; e <= 30; ++e) rows.push_back({e, 0.0, e <= 10 ? 4.0 : (e > 20 ? 1.0 : 2.0), 6.0, 2.0, 4.5});
  const CurveSummary s = summarize(rows);
  EXPECT_DOUBLE_EQ(s.pos_train_first10, 4.0);
  EXPECT_DOUBLE_EQ(s.pos_train_last10, 1.0);
  EXPECT_DOUBLE_EQ(s.final_train_gap, 5.0);
  EXPECT_DOUBLE_EQ(s.final_val_gap, 2.5);
}

// ---- the binary ----------------------------------------------------------------

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(DSHL_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, EndToEndOnATinyConfiguration) {
  const fs::path dir = fs::temp_directory_path() / ("dshl_cli_test_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  dshl::testing::SyntheticOptions opt;
  opt.tunes = 40;
  std::ofstream(dir / "tunes.abc") << dshl::testing::synthetic_corpus(opt);
  {
    std::ofstream cfg(dir / "tiny.cfg");
    cfg << "corpus = " << (dir / "tunes.abc").string() << "\n"
        << "workspace = " << (dir / "ws").string() << "\n"
        << "hidden = 8\npretrain_epochs = 1\nepochs = 2\nbatch = 16\n"
        << "neg_stat_samples = 2000\nval_pos = 40\nval_neg = 40\n"
        << "generations = 3\nmidi = true\n";
  }
  const std::string base = "--config " + (dir / "tiny.cfg").string();
  ASSERT_EQ(run(base + " ingest"), 0);
  EXPECT_TRUE(fs::exists(dir / "ws/ingest/store.bin"));
  EXPECT_TRUE(fs::exists(dir / "ws/ingest/manifest.tsv"));
  ASSERT_EQ(run(base + " pretrain"), 0);
  EXPECT_TRUE(fs::exists(dir / "ws/checkpoints/pretrain.ckpt"));
  ASSERT_EQ(run(base + " train"), 0);
  EXPECT_TRUE(fs::exists(dir / "ws/checkpoints/hash.ckpt"));
  std::ifstream metrics(dir / "ws/checkpoints/metrics.txt");
  EXPECT_EQ(read_metrics(metrics).size(), 2u);
  ASSERT_EQ(run(base + " generate --mode farthest"), 0);  // builds the index on demand
  EXPECT_TRUE(fs::exists(dir / "ws/index/codes.idx"));
  int abc = 0, mid = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "ws/runs")) {
    abc += e.path().extension() == ".abc";
    mid += e.path().extension() == ".mid";
  }
  EXPECT_EQ(abc, 3);
  EXPECT_EQ(mid, 3);
  ASSERT_EQ(run(base + " eval"), 0);
  int csv = 0, svg = 0, snapshots = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "ws/runs")) {
    csv += e.path().extension() == ".csv";
    svg += e.path().extension() == ".svg";
    snapshots += e.path().filename() == "config.txt";
  }
  EXPECT_EQ(csv, 1);
  EXPECT_EQ(svg, 1);
  EXPECT_EQ(snapshots, 5);
  EXPECT_FALSE(fs::exists(dir / "ws/.lock"));

  // Errors: bad config -> 1, runtime failure -> 2.
  EXPECT_EQ(run(base + " --arity 1 train"), 1);
  EXPECT_EQ(run(base + " --no_such_key 3 ingest"), 1);
  EXPECT_EQ(run(base + " eval --metrics " + (dir / "missing.txt").string()), 2);
  EXPECT_EQ(run("--workspace " + (dir / "nowhere").string() + " index"), 1);
  fs::remove_all(dir);
}
