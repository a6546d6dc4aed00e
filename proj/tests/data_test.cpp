#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "polysketch/data.hpp"
#include "polysketch/error.hpp"
#include "polysketch/io.hpp"
#include "support.hpp"

using namespace polysketch;
using polysketch::fixtures::TempDir;

namespace {

data::EmbeddingSet two_rows() {
  return {3, {1, 2, 3, 4, 5, 6}, {0, 1}, {"a", "b"}};
}

data::EmbeddingSet with_counts(const std::vector<std::size_t>& counts, std::size_t d = 2) {
  std::vector<float> values;
  std::vector<std::uint32_t> labels;
  std::vector<std::string> names;
  for (std::uint32_t c = 0; c < counts.size(); ++c) {
    names.push_back("c" + std::to_string(c));
    for (std::size_t i = 0; i < counts[c]; ++i) {
      labels.push_back(c);
      for (std::size_t k = 0; k < d; ++k) values.push_back(static_cast<float>(c * 1000 + i * 10 + k));
    }
  }
  return {d, std::move(values), std::move(labels), std::move(names)};
}

}  // namespace

TEST(EmbeddingSet, RejectsBrokenInvariants) {
  EXPECT_THROW(data::EmbeddingSet(3, {1, 2}, {0}, {"a"}), ValidationError);
  EXPECT_THROW(data::EmbeddingSet(1, {1}, {1}, {"a"}), ValidationError);
  EXPECT_THROW(data::EmbeddingSet(1, {std::numeric_limits<float>::quiet_NaN()}, {0}, {"a"}), ValidationError);
}

TEST(LoadEmbeddingSet, EchoesWrittenValues) {
  TempDir dir("load");
  const auto set = two_rows();
  data::save_embedding_set(set, dir.path());
  const auto loaded = data::load_embedding_set(dir.path());
  EXPECT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded.dim(), 3u);
  EXPECT_EQ(loaded.row(1)[2], 6.0f);
  EXPECT_EQ(loaded, set);
  EXPECT_EQ(fixtures::read_file(dir / "meta.json"), "{\"d\":3,\"label_names\":[\"a\",\"b\"],\"n\":2,\"version\":1}\n");
}

TEST(LoadEmbeddingSet, ErrorPaths) {
  TempDir dir("load-errors");
  EXPECT_THROW(data::load_embedding_set(dir.path()), IoError);

  data::save_embedding_set(with_counts({3, 2}), dir.path());
  const std::uint32_t four_labels[] = {0, 0, 1, 1};
  io::write_u32(dir / "labels.u32", four_labels);
  EXPECT_THROW(data::load_embedding_set(dir.path()), ValidationError);

  data::save_embedding_set(with_counts({3, 2}), dir.path());
  const std::uint32_t bad_label[] = {0, 0, 0, 1, 7};
  io::write_u32(dir / "labels.u32", bad_label);
  EXPECT_THROW(data::load_embedding_set(dir.path()), ValidationError);

  data::save_embedding_set(two_rows(), dir.path());
  const float with_inf[] = {1, 2, 3, 4, std::numeric_limits<float>::infinity(), 6};
  io::write_f32(dir / "embeddings.f32", with_inf);
  EXPECT_THROW(data::load_embedding_set(dir.path()), ValidationError);
}

TEST(LoadEmbeddingSet, RandomSetsRoundTripByteIdentically) {
  Rng rng(11);
  TempDir dir("roundtrip");
  for (int trial = 0; trial < 100; ++trial) {
    const auto set = fixtures::random_set(rng, 1 + rng.uniform_index(40), 1 + rng.uniform_index(12), 1 + rng.uniform_index(6));
    const auto a = dir / ("a" + std::to_string(trial));
    const auto b = dir / ("b" + std::to_string(trial));
    data::save_embedding_set(set, a);
    const auto loaded = data::load_embedding_set(a);
    ASSERT_EQ(loaded, set);
    data::save_embedding_set(loaded, b);
    for (const char* f : {"meta.json", "embeddings.f32", "labels.u32"})
      ASSERT_EQ(fixtures::read_file(a / f), fixtures::read_file(b / f));
  }
}

TEST(LoadEmbeddingCsv, AssignsLabelsInFirstAppearanceOrder) {
  TempDir dir("csv");
  std::ofstream(dir / "set.csv") << "label,f0,f1\nzed,1.5,2\n\"a,b\",3,4\nzed,5,6\n";
  const auto set = data::load_embedding_csv(dir / "set.csv");
  EXPECT_EQ(set.label_names(), (std::vector<std::string>{"zed", "a,b"}));
  EXPECT_EQ(set.labels()[2], 0u);
  EXPECT_EQ(set.row(0)[0], 1.5f);
  std::ofstream(dir / "bad.csv") << "label,f0\nx,oops\n";
  EXPECT_THROW(data::load_embedding_csv(dir / "bad.csv"), ValidationError);
}

TEST(SampleMetas, RoundTripWithQuoting) {
  TempDir dir("metas");
  const std::vector<data::SampleMeta> metas{{"plain", 0, 0.25}, {"has,comma", 1, 1.0}, {"has\"quote", 0, 0.1}};
  data::save_sample_metas(metas, dir / "m.csv");
  EXPECT_EQ(data::load_sample_metas(dir / "m.csv"), metas);
}

TEST(CleanByGuessRate, KeepsRowsAtOrAboveThreshold) {
  const auto set = with_counts({3});
  const std::vector<data::SampleMeta> metas{{"x", 0, 0.0}, {"y", 0, 0.5}, {"z", 0, 1.0}};
  const auto cleaned = data::clean_by_guess_rate(set, metas, 0.5);
  ASSERT_EQ(cleaned.size(), 2u);
  EXPECT_EQ(cleaned.row(0)[0], set.row(1)[0]);
  EXPECT_EQ(cleaned.row(1)[0], set.row(2)[0]);
  EXPECT_EQ(data::clean_by_guess_rate(set, metas, 0.0), set);
  EXPECT_THROW(data::clean_by_guess_rate(set, std::span(metas).first(2), 0.5), ValidationError);
}

TEST(CleanByGuessRate, MatchesBruteForceFilterAndIsIdempotent) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto set = fixtures::random_set(rng, 60, 3, 4);
    std::vector<data::SampleMeta> metas;
    for (std::size_t i = 0; i < set.size(); ++i) metas.push_back({std::to_string(i), set.label(i), rng.uniform01()});
    const double threshold = rng.uniform01();
    std::size_t expected = 0;
    for (const auto& m : metas) expected += m.guess_rate >= threshold ? 1 : 0;
    const auto cleaned = data::clean_by_guess_rate(set, metas, threshold);
    ASSERT_EQ(cleaned.size(), expected);

    // subsequence check
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < cleaned.size(); ++i) {
      while (cursor < set.size() && !std::equal(set.row(cursor).begin(), set.row(cursor).end(), cleaned.row(i).begin()))
        ++cursor;
      ASSERT_LT(cursor, set.size());
      ++cursor;
    }
    std::vector<data::SampleMeta> kept;
    for (auto r : data::rows_passing_guess_rate(metas, threshold)) kept.push_back(metas[r]);
    EXPECT_EQ(data::clean_by_guess_rate(cleaned, kept, threshold), cleaned);
  }
}

TEST(RebalanceClasses, UpSamplesMinorityClass) {
  const auto set = with_counts({2, 4});
  const auto out = data::rebalance_classes(set, 3);
  EXPECT_EQ(out.class_counts(), (std::vector<std::size_t>{4, 4}));
  for (std::size_t i = set.size(); i < out.size(); ++i) {
    EXPECT_EQ(out.label(i), 0u);
    const bool copies_a_row = out.row(i)[0] == set.row(0)[0] || out.row(i)[0] == set.row(1)[0];
    EXPECT_TRUE(copies_a_row);
  }
}

TEST(RebalanceClasses, BalancedSetIsUnchanged) {
  const auto set = with_counts({3, 3, 3});
  EXPECT_EQ(data::rebalance_classes(set, 1), set);
}

TEST(RebalanceClasses, EmptyClassIsAnError) {
  EXPECT_THROW(data::rebalance_classes(with_counts({2, 0}), 1), ValidationError);
}

TEST(RebalanceClasses, ClassSizesLikeTheCollectedDataset) {
  // Smallest class 384, largest 596, sizes spread so the mean is about 506.
  std::vector<std::size_t> counts;
  Rng rng(17);
  for (int c = 0; c < 170; ++c) counts.push_back(384 + rng.uniform_index(213));
  counts[3] = 384;
  counts[42] = 596;
  const auto set = with_counts(counts, 1);
  const auto out = data::rebalance_classes(set, 9);
  for (auto c : out.class_counts()) EXPECT_EQ(c, 596u);
  EXPECT_EQ(out.size(), 596u * 170u);
}

TEST(RebalanceClasses, RowsCopySameClassAndAreDeterministic) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto set = fixtures::random_set(rng, 50, 3, 5);
    const auto in_counts = set.class_counts();
    if (std::ranges::find(in_counts, 0u) != in_counts.end()) continue;
    const auto out = data::rebalance_classes(set, trial);
    const auto counts = out.class_counts();
    EXPECT_TRUE(std::ranges::all_of(counts, [&](auto c) { return c == counts[0]; }));
    for (std::size_t i = 0; i < out.size(); ++i) {
      bool found = false;
      for (auto r : set.rows_of_class(out.label(i)))
        found = found || std::equal(set.row(r).begin(), set.row(r).end(), out.row(i).begin());
      ASSERT_TRUE(found);
    }
    EXPECT_EQ(data::rebalance_classes(set, trial), out);
  }
}

TEST(Split, TenRowsGiveEightOneOne) {
  const auto parts = data::split(with_counts({10}), {0.8, 0.1, 0.1, 4});
  EXPECT_EQ(parts.train.size(), 8u);
  EXPECT_EQ(parts.val.size(), 1u);
  EXPECT_EQ(parts.test.size(), 1u);
}

TEST(Split, RejectsBadSpecsAndEmptyParts) {
  EXPECT_THROW(data::split(with_counts({10}), {0.8, 0.2, 0.0, 1}), ValidationError);
  EXPECT_THROW(data::split(with_counts({10}), {0.8, 0.1, 0.2, 1}), ValidationError);
  EXPECT_THROW(data::split(with_counts({3}), {0.8, 0.1, 0.1, 1}), ValidationError);
}

TEST(Split, IsAStratifiedDeterministicPartition) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 30 + rng.uniform_index(300);
    const std::size_t classes = 1 + rng.uniform_index(8);
    std::vector<std::uint32_t> labels(n);
    for (auto& l : labels) l = static_cast<std::uint32_t>(rng.uniform_index(classes));
    const double fractions[] = {0.8, 0.1, 0.1};
    const auto parts = data::stratified_partition(labels, fractions, trial);

    std::vector<int> seen(n, 0);
    for (const auto& part : parts)
      for (auto r : part) ++seen[r];
    ASSERT_TRUE(std::ranges::all_of(seen, [](int s) { return s == 1; }));

    for (std::size_t p = 0; p < 3; ++p)
      EXPECT_LE(std::abs(static_cast<double>(parts[p].size()) - static_cast<double>(n) * fractions[p]), 1.0 + 1e-9);

    std::vector<double> class_total(classes, 0), class_train(classes, 0);
    for (auto l : labels) ++class_total[l];
    for (auto r : parts[0]) ++class_train[labels[r]];
    for (std::size_t c = 0; c < classes; ++c)
      EXPECT_LE(std::abs(class_train[c] - 0.8 * class_total[c]), 1.0 + 1e-9) << "class " << c;

    EXPECT_EQ(data::stratified_partition(labels, fractions, trial), parts);
  }
}

TEST(ClassHistogram, CountsAndBins) {
  const data::EmbeddingSet set(1, {0, 0, 0}, {0, 0, 1}, {"a", "b"});
  const auto hist = data::class_histogram(set);
  EXPECT_EQ(hist.counts, (std::vector<std::size_t>{2, 1}));
  ASSERT_EQ(hist.bins.size(), 10u);
  EXPECT_EQ(hist.bins.front().classes, 1u);
  EXPECT_EQ(hist.bins.back().classes, 1u);

  const auto one = data::class_histogram(set, 1);
  ASSERT_EQ(one.bins.size(), 1u);
  EXPECT_EQ(one.bins[0].classes, 2u);
  EXPECT_THROW(data::class_histogram(set, 0), ValidationError);
}

TEST(ClassHistogram, MatchesTally) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto set = fixtures::random_set(rng, 200, 1, 12);
    std::vector<std::size_t> tally(12, 0);
    for (auto l : set.labels()) ++tally[l];
    const auto hist = data::class_histogram(set, 1 + rng.uniform_index(12));
    EXPECT_EQ(hist.counts, tally);
    std::size_t binned = 0;
    for (const auto& b : hist.bins) binned += b.classes;
    EXPECT_EQ(binned, 12u);
  }
}
