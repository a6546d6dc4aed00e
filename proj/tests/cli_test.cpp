#include <gtest/gtest.h>

#include <sstream>

#include "json.hpp"
#include "polysketch/cli.hpp"
#include "polysketch/data.hpp"
#include "polysketch/eval.hpp"
#include "support.hpp"

using namespace polysketch;
using nlohmann::json;
using polysketch::fixtures::TempDir;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void expect_single_json_error(const Outcome& o, const std::string& kind) {
  ASSERT_FALSE(o.err.empty());
  EXPECT_EQ(std::ranges::count(o.err, '\n'), 1) << o.err;
  const auto parsed = json::parse(o.err);
  EXPECT_EQ(parsed.at("error"), kind);
  EXPECT_TRUE(parsed.contains("message"));
}

// A small labelled set with matching guess-rate metadata.
std::string make_set(const TempDir& dir, std::uint64_t seed = 1) {
  Rng rng(seed);
  const auto planted = fixtures::planted_classes(rng, 4, 30, 5.0, 20.0, 0.5);
  const auto path = (dir / "set").string();
  data::save_embedding_set(planted.set, path);
  std::vector<data::SampleMeta> metas;
  for (std::size_t i = 0; i < planted.set.size(); ++i)
    metas.push_back({"s" + std::to_string(i), planted.set.label(i), i % 10 == 0 ? 0.05 : 0.8});
  data::save_sample_metas(metas, path + "/meta_samples.csv");
  return path;
}

}  // namespace

TEST(Cli, VersionIsJson) {
  const auto o = run({"--version"});
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(json::parse(o.out).at("toolkit"), cli::kToolkitVersion);
}

TEST(Cli, UsageErrorsExitOne) {
  const auto o = run({"classify", "--k-neighbors", "nine"});
  EXPECT_EQ(o.code, 1);
  expect_single_json_error(o, "usage");
}

TEST(Cli, MissingInputExitsTwo) {
  TempDir dir("cli-missing");
  const auto o = run({"fit", (dir / "nowhere").string(), (dir / "model").string()});
  EXPECT_EQ(o.code, 2);
  expect_single_json_error(o, "io");
}

TEST(Cli, InvalidValuesExitOne) {
  TempDir dir("cli-invalid");
  const auto set = make_set(dir);
  const auto o = run({"fit", set, (dir / "model").string(), "--k-per-class", "1000"});
  EXPECT_EQ(o.code, 1);
  expect_single_json_error(o, "validation");
  const auto ambiguous = run({"histogram", set, (dir / "hist.txt").string()});
  EXPECT_EQ(ambiguous.code, 1);
  expect_single_json_error(ambiguous, "validation");
}

TEST(Cli, CleanRebalanceSplit) {
  TempDir dir("cli-prep");
  const auto set = make_set(dir);
  ASSERT_EQ(run({"clean", set, (dir / "clean").string(), "--threshold", "0.1"}).code, 0);
  const auto cleaned = data::load_embedding_set(dir / "clean");
  EXPECT_EQ(cleaned.size(), 120u - 12u);
  EXPECT_EQ(data::load_sample_metas(dir / "clean/meta_samples.csv").size(), cleaned.size());

  ASSERT_EQ(run({"rebalance", (dir / "clean").string(), (dir / "bal").string(), "--seed", "3"}).code, 0);
  for (auto c : data::load_embedding_set(dir / "bal").class_counts()) EXPECT_EQ(c, 27u);

  ASSERT_EQ(run({"split", (dir / "bal").string(), (dir / "split").string(), "--seed", "5"}).code, 0);
  std::size_t total = 0;
  for (const char* part : {"train", "val", "test"}) total += data::load_embedding_set(dir / "split" / part).size();
  EXPECT_EQ(total, 108u);
  EXPECT_TRUE(std::filesystem::exists(dir / "split/manifest.json"));
}

TEST(Cli, HistogramFormats) {
  TempDir dir("cli-hist");
  const auto set = make_set(dir);
  ASSERT_EQ(run({"histogram", set, (dir / "h.json").string(), "--bins", "3"}).code, 0);
  const auto report = json::parse(fixtures::read_file(dir / "h.json"));
  EXPECT_EQ(report.at("bins").size(), 3u);
  ASSERT_EQ(run({"histogram", set, (dir / "h.csv").string()}).code, 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "h.csv.manifest.json"));
}

TEST(Cli, EvaluateReportsEachCutoff) {
  TempDir dir("cli-eval");
  const auto set = make_set(dir);
  ASSERT_EQ(run({"fit", set, (dir / "model").string(), "--k-per-class", "3"}).code, 0);
  ASSERT_EQ(run({"classify", set, (dir / "model").string(), (dir / "preds.csv").string()}).code, 0);
  const auto o = run({"evaluate", (dir / "preds.csv").string(), set, (dir / "report.json").string(), "--top-n", "1,5,10"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto report = json::parse(fixtures::read_file(dir / "report.json"));
  EXPECT_EQ(report.at("top_n").size(), 3u);
  EXPECT_GE(report.at("top_n").at("1").get<double>(), 0.95);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.confusion.csv"));
}

TEST(Cli, SingleClassModelPredictsThatClass) {
  TempDir dir("cli-oneclass");
  Rng rng(2);
  const auto one = fixtures::random_set(rng, 20, 3, 1);
  data::save_embedding_set(one, dir / "one");
  ASSERT_EQ(run({"fit", (dir / "one").string(), (dir / "model").string(), "--k-per-class", "3"}).code, 0);
  ASSERT_EQ(run({"classify", (dir / "one").string(), (dir / "model").string(), (dir / "p.csv").string(),
                 "--k-neighbors", "1"})
                .code,
            0);
  const auto text = fixtures::read_file(dir / "p.csv");
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(line.substr(line.find(',') + 1, 4), "0,0,");
    ++rows;
  }
  EXPECT_EQ(rows, 20u);
}

TEST(Cli, SilhouetteExemplarsProjectSmooth) {
  TempDir dir("cli-misc");
  const auto set = make_set(dir);
  EXPECT_EQ(run({"silhouette", set, (dir / "sil.json").string()}).code, 0);
  EXPECT_GT(json::parse(fixtures::read_file(dir / "sil.json")).at("silhouette").get<double>(), 0.5);
  EXPECT_EQ(run({"silhouette", set, (dir / "sil.csv").string()}).code, 0);

  ASSERT_EQ(run({"fit", set, (dir / "model").string()}).code, 0);
  const auto ex = run({"exemplars", set, (dir / "model").string(), "--class", "1", "--top-m", "2"});
  EXPECT_EQ(ex.code, 0);
  EXPECT_EQ(ex.out.substr(0, ex.out.find('\n')), "class,centroid,rank,row,distance");
  EXPECT_EQ(run({"exemplars", set, (dir / "model").string(), "--class", "nope"}).code, 1);

  EXPECT_EQ(run({"project", set, (dir / "pca.csv").string()}).code, 0);
  EXPECT_EQ(run({"project", set, (dir / "tsne.csv").string(), "--method", "tsne", "--perplexity", "10", "--iters",
                 "50"})
                .code,
            0);

  const double series[] = {0.0, 1.0, 1.0};
  eval::write_series_csv(series, dir / "loss.csv");
  ASSERT_EQ(run({"smooth", (dir / "loss.csv").string(), (dir / "ema.csv").string(), "--alpha", "0.9"}).code, 0);
  const auto smoothed = eval::read_series_csv(dir / "ema.csv");
  EXPECT_NEAR(smoothed[1], 0.1, 1e-15);
}

TEST(Cli, GradcheckAndTrain) {
  TempDir dir("cli-train");
  const auto gc = run({"gradcheck", "--out", (dir / "gc.json").string()});
  EXPECT_EQ(gc.code, 0) << gc.err;
  EXPECT_TRUE(json::parse(fixtures::read_file(dir / "gc.json")).at("passed").get<bool>());

  Rng rng(3);
  tinynn::save_image_dataset(fixtures::coloured_shapes(rng, 4), dir / "images");
  const auto tr = run({"train", (dir / "images").string(), (dir / "ckpt").string(), "--epochs", "2", "--batch", "4",
                       "--base-filters", "2", "--val-frac", "0.25", "--lr", "1e-3"});
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_EQ(eval::read_series_csv(dir / "ckpt/val_loss.csv").size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt/params.f32"));
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt/train_loss_ema.csv"));
}

TEST(Cli, ReplayReproducesOutputsByteForByte) {
  TempDir dir("cli-replay");
  const auto set = make_set(dir);
  const auto model = (dir / "model").string();
  const auto preds = (dir / "preds.csv").string();
  const auto split = (dir / "split").string();
  ASSERT_EQ(run({"split", set, split, "--seed", "9"}).code, 0);
  ASSERT_EQ(run({"fit", split, model, "--seed", "4", "--restarts", "3"}).code, 0);
  ASSERT_EQ(run({"classify", split, model, preds}).code, 0);

  const std::vector<std::filesystem::path> outputs{dir / "split/train/embeddings.f32", dir / "split/test/labels.u32",
                                                   dir / "model/centroids.f32", dir / "model/model.json",
                                                   dir / "preds.csv"};
  std::vector<std::string> before;
  for (const auto& f : outputs) before.push_back(fixtures::read_file(f));

  std::filesystem::create_directories(dir / "saved");
  std::filesystem::copy_file(dir / "split/manifest.json", dir / "saved/split.json");
  std::filesystem::copy_file(dir / "model/manifest.json", dir / "saved/fit.json");
  std::filesystem::copy_file(dir / "preds.csv.manifest.json", dir / "saved/classify.json");
  std::filesystem::remove_all(dir / "split");
  std::filesystem::remove_all(dir / "model");
  std::filesystem::remove(dir / "preds.csv");

  for (const char* m : {"saved/split.json", "saved/fit.json", "saved/classify.json"})
    ASSERT_EQ(run({"replay", (dir / m).string()}).code, 0) << m;
  for (std::size_t i = 0; i < outputs.size(); ++i)
    EXPECT_EQ(fixtures::read_file(outputs[i]), before[i]) << outputs[i];

  const auto manifest = json::parse(fixtures::read_file(dir / "saved/fit.json"));
  for (const char* key : {"command", "argv", "parameters", "seed", "inputs", "outputs", "toolkit_version",
                          "format_version", "wall_clock_seconds"})
    EXPECT_TRUE(manifest.contains(key)) << key;
}
