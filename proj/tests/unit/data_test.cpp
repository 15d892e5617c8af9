// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "earlydrop/data.hpp"
#include "earlydrop/error.hpp"
#include "earlydrop/text_io.hpp"
#include "test_support.hpp"

using namespace earlydrop;

namespace {

// Multiclass perceptron trained to convergence; returns train accuracy.
double linear_probe_accuracy(const Dataset &d) {
  const std::size_t n = d.size(), dim = d.input_dim(), c = d.n_classes;
  std::vector<double> w(c * (dim + 1), 0.0);
  auto score = [&](std::size_t i, std::size_t k) {
    double s = w[k * (dim + 1) + dim];
    for (std::size_t j = 0; j < dim; ++j) s += w[k * (dim + 1) + j] * d.inputs.at(i, j);
    return s;
  };
  auto predict = [&](std::size_t i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k)
      if (score(i, k) > score(i, best)) best = k;
    return best;
  };
  for (int epoch = 0; epoch < 200; ++epoch) {
    std::size_t mistakes = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t p = predict(i), y = d.labels[i];
      if (p == y) continue;
      ++mistakes;
      for (std::size_t j = 0; j < dim; ++j) {
        w[y * (dim + 1) + j] += d.inputs.at(i, j);
        w[p * (dim + 1) + j] -= d.inputs.at(i, j);
      }
      w[y * (dim + 1) + dim] += 1.0;
      w[p * (dim + 1) + dim] -= 1.0;
    }
    if (mistakes == 0) break;
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += predict(i) == d.labels[i];
  return static_cast<double>(hits) / static_cast<double>(n);
}

} // namespace

TEST(Generate, SeparatedClustersAreLinearlySeparable) {
  DatasetSpec s;
  s.kind = DatasetKind::gaussian_clusters;
  s.n_train = 600;
  s.n_test = 100;
  s.input_dim = 8;
  s.n_classes = 4;
  s.separation = 20.0;
  s.cluster_std = 1.0;
  s.seed = 3;
  EXPECT_EQ(linear_probe_accuracy(generate(s).train), 1.0);
}

TEST(Generate, DeterministicInSeed) {
  for (DatasetKind k : {DatasetKind::gaussian_clusters, DatasetKind::teacher_mlp}) {
    DatasetSpec s;
    s.kind = k;
    s.n_train = 300;
    s.n_test = 50;
    s.noise = 0.1;
    s.seed = 17;
    const DatasetPair a = generate(s), b = generate(s);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    s.seed = 18;
    EXPECT_NE(generate(s).train, a.train);
  }
}

TEST(Generate, LabelFlipFraction) {
  DatasetSpec s;
  s.kind = DatasetKind::teacher_mlp;
  s.n_train = 100000;
  s.n_test = 10;
  s.input_dim = 8;
  s.n_classes = 5;
  s.teacher_hidden = 16;
  s.noise = 0.1;
  s.seed = 5;
  const DatasetPair p = generate(s);
  const double frac = static_cast<double>(count_flipped_labels(s, p.train)) / 100000.0;
  EXPECT_NEAR(frac, 0.1, 0.01);
}

TEST(Generate, NoiseTouchesTrainOnly) {
  DatasetSpec s;
  s.kind = DatasetKind::teacher_mlp;
  s.n_train = 500;
  s.n_test = 500;
  s.seed = 8;
  const DatasetPair clean = generate(s);
  s.noise = 0.3;
  const DatasetPair noisy = generate(s);
  EXPECT_EQ(clean.test, noisy.test);
  EXPECT_EQ(clean.train.inputs, noisy.train.inputs);
  EXPECT_NE(clean.train.labels, noisy.train.labels);
}

TEST(Generate, TeacherUsesEveryClassAndFiniteInputs) {
  DatasetSpec s;
  s.kind = DatasetKind::teacher_mlp;
  s.n_train = 2000;
  s.n_classes = 10;
  s.input_dim = 16;
  const Dataset d = generate(s).train;
  std::vector<std::size_t> counts(10, 0);
  for (auto l : d.labels) ++counts[l];
  for (auto c : counts) EXPECT_GT(c, 0u);
  EXPECT_TRUE(d.inputs.all_finite());
}

TEST(Generate, DegenerateSpecsThrow) {
  DatasetSpec s;
  s.n_train = 3;
  s.n_classes = 4;
  EXPECT_THROW(generate(s), ValidationError);
  s.n_train = 100;
  s.n_classes = 1;
  EXPECT_THROW(generate(s), ValidationError);
  s.n_classes = 3;
  s.noise = -0.1;
  EXPECT_THROW(generate(s), ValidationError);
}

TEST(DatasetFile, RoundTripIsBitwise) {
  DatasetSpec s;
  s.kind = DatasetKind::teacher_mlp;
  s.n_train = 123;
  s.n_test = 7;
  s.noise = 0.2;
  const Dataset d = generate(s).train;
  const auto dir = earlydrop::testing::scratch_dir("dataset_roundtrip");
  save_dataset(d, (dir / "d.ddds").string());
  EXPECT_EQ(load_dataset((dir / "d.ddds").string()), d);
  EXPECT_EQ(encode_dataset(decode_dataset(encode_dataset(d))), encode_dataset(d));
}

TEST(DatasetFile, TruncatedFileNamesOffset) {
  DatasetSpec s;
  s.n_train = 20;
  s.n_test = 5;
  const std::string bytes = encode_dataset(generate(s).train);
  const std::string cut = bytes.substr(0, bytes.size() - 3);
  try {
    (void)decode_dataset(cut);
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_GT(e.offset(), 0u);
    EXPECT_LE(e.offset(), cut.size());
  }
}

TEST(DatasetFile, VersionMismatchRefused) {
  DatasetSpec s;
  s.n_train = 20;
  s.n_test = 5;
  std::string bytes = encode_dataset(generate(s).train);
  bytes[4] = 9;
  try {
    (void)decode_dataset(bytes);
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(DatasetFile, BadMagicAndLabelsRefused) {
  DatasetSpec s;
  s.n_train = 20;
  s.n_test = 5;
  std::string bytes = encode_dataset(generate(s).train);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_dataset(bad), ParseError);
  bad = bytes;
  bad[bad.size() - 4] = 100; // last label out of range
  EXPECT_THROW(decode_dataset(bad), ParseError);
}

TEST(Manifest, RecordsSpec) {
  DatasetSpec s;
  s.kind = DatasetKind::teacher_mlp;
  s.noise = 0.2;
  s.seed = 99;
  const KeyValues kv = KeyValues::parse(dataset_manifest(s));
  EXPECT_EQ(kv.get("data.kind"), "teacher_mlp");
  EXPECT_EQ(kv.get("data.noise"), "0.2");
  EXPECT_EQ(kv.get("data.seed"), "99");
  EXPECT_EQ(kv.get("data.teacher_depth"), "4");
}

TEST(Minibatches, WholeDatasetBatch) {
  const auto b = minibatch_indices(10, 10, 1, 0);
  ASSERT_EQ(b.size(), 1u);
  auto sorted = b[0];
  std::sort(sorted.begin(), sorted.end());
  for (std::uint32_t i = 0; i < 10; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Minibatches, ShortFinalBatchKept) {
  const auto b = minibatch_indices(10, 4, 1, 0);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size(), 4u);
  EXPECT_EQ(b[1].size(), 4u);
  EXPECT_EQ(b[2].size(), 2u);
}

TEST(Minibatches, PermutationKeyedBySeedAndEpoch) {
  EXPECT_EQ(epoch_permutation(100, 3, 4), epoch_permutation(100, 3, 4));
  EXPECT_NE(epoch_permutation(100, 3, 4), epoch_permutation(100, 3, 5));
  EXPECT_NE(epoch_permutation(100, 3, 4), epoch_permutation(100, 4, 4));
}

TEST(Minibatches, EveryExampleOncePerEpoch) {
  for (std::size_t n : {1, 7, 64, 1000})
    for (std::size_t bs : {1, 3, 64}) {
      if (bs > n) continue;
      std::vector<int> seen(n, 0);
      for (const auto &batch : minibatch_indices(n, bs, 11, 2))
        for (auto i : batch) ++seen[i];
      for (int c : seen) ASSERT_EQ(c, 1);
    }
}

TEST(Minibatches, InvalidBatchSizeThrows) {
  EXPECT_THROW(minibatch_indices(10, 0, 1, 0), ValidationError);
  EXPECT_THROW(minibatch_indices(10, 11, 1, 0), ValidationError);
}
