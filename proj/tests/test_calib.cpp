// Copyright 2026 The nuq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "nuq/calib.hpp"
#include "nuq/error.hpp"
#include "test_support.hpp"

namespace nuq {
namespace {

using testing::conv;
using testing::simple;

const FxFormat kMaster(12, 0);

void expect_monotone(const KMeansResult& r) {
  for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
    const double prev = r.objective_history[i - 1];
    ASSERT_LE(r.objective_history[i], prev + 1e-9 * std::max(1.0, prev)) << "iteration " << i;
  }
}

TEST(KMeansConfigTest, ForBitsAndValidate) {
  EXPECT_EQ(KMeansConfig::for_bits(5).clusters, 32);
  EXPECT_THROW(KMeansConfig::for_bits(0), ValidationError);
  KMeansConfig c;
  c.clusters = 3;
  EXPECT_THROW(c.validate(), ValidationError);
  c.clusters = 1;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(KMeans, TwoPointMasses) {
  const std::vector<std::uint32_t> s{0, 0, 0, 10, 10, 10};
  const auto r = kmeans_fit_detailed(s, KMeansConfig::for_bits(1), kMaster);
  EXPECT_EQ(r.codebook.entries(), (std::vector<std::uint32_t>{0, 10}));
  EXPECT_DOUBLE_EQ(r.objective_history.back(), 0.0);
  expect_monotone(r);
}

TEST(KMeans, RoundsCentroidsHalfUp) {
  const std::vector<std::uint32_t> s{1, 2, 3, 4};
  const auto r = kmeans_fit_detailed(s, KMeansConfig::for_bits(1), kMaster);
  ASSERT_EQ(r.centroids.size(), 2u);
  EXPECT_DOUBLE_EQ(r.centroids[0], 1.5);
  EXPECT_DOUBLE_EQ(r.centroids[1], 3.5);
  EXPECT_EQ(r.codebook.entries(), (std::vector<std::uint32_t>{2, 4}));
  // {1,2}|{3,4} is the best of the three contiguous splits.
  EXPECT_DOUBLE_EQ(r.objective_history.back(), 1.0);
}

TEST(KMeans, EmptySampleIsAnError) {
  EXPECT_THROW(kmeans_fit_detailed({}, KMeansConfig::for_bits(1), kMaster), ValidationError);
}

TEST(KMeans, FewerDistinctValuesThanClusters) {
  const std::vector<std::uint32_t> s{7, 7, 300};
  const auto r = kmeans_fit_detailed(s, KMeansConfig::for_bits(2), kMaster);
  EXPECT_DOUBLE_EQ(r.objective_history.back(), 0.0);
  const auto& e = r.codebook.entries();
  EXPECT_TRUE(std::is_sorted(e.begin(), e.end()));
  EXPECT_NE(std::find(e.begin(), e.end(), 7u), e.end());
  EXPECT_NE(std::find(e.begin(), e.end(), 300u), e.end());
}

TEST(KMeans, AllZeroSample) {
  const std::vector<std::uint32_t> s(50, 0);
  const auto r = kmeans_fit_detailed(s, KMeansConfig::for_bits(3), kMaster);
  EXPECT_EQ(r.codebook.entries(), std::vector<std::uint32_t>(8, 0));
}

TEST(KMeansLaw, ScaleEquivariantBeforeRounding) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<std::uint32_t> d(0, 900);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint32_t> s(300), s4(300);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = d(rng);
      s4[i] = 4 * s[i];
    }
    const auto cfg = KMeansConfig::for_bits(1 + trial % 4);
    const auto a = kmeans_fit_detailed(s, cfg, kMaster);
    const auto b = kmeans_fit_detailed(s4, cfg, kMaster);
    ASSERT_EQ(a.centroids.size(), b.centroids.size());
    for (std::size_t k = 0; k < a.centroids.size(); ++k) {
      EXPECT_NEAR(4 * a.centroids[k], b.centroids[k], 1e-9 * std::max(1.0, b.centroids[k]));
    }
  }
}

TEST(KMeansLaw, OrderInvariantAndMonotone) {
  std::mt19937 rng(9);
  std::gamma_distribution<double> g(1.5, 300.0);
  std::vector<std::uint32_t> s(2000);
  for (auto& v : s) v = static_cast<std::uint32_t>(std::min(g(rng), 4095.0));
  const auto a = kmeans_fit_detailed(s, KMeansConfig::for_bits(4), kMaster);
  std::shuffle(s.begin(), s.end(), rng);
  const auto b = kmeans_fit_detailed(s, KMeansConfig::for_bits(4), kMaster);
  EXPECT_EQ(a.codebook.entries(), b.codebook.entries());
  expect_monotone(a);
  EXPECT_LE(a.iterations, 100);
  EXPECT_NEAR(kmeans_objective(s, a.centroids), a.objective_history.back(),
              1e-9 * a.objective_history.back());
}

// Best split of the distinct values into min(k, d) contiguous runs, by
// enumerating every cut set.
double best_contiguous(const std::vector<std::uint32_t>& s, std::size_t k) {
  std::map<std::uint32_t, double> hist;
  for (auto v : s) hist[v] += 1.0;
  std::vector<double> vals, counts;
  for (const auto& [v, c] : hist) {
    vals.push_back(v);
    counts.push_back(c);
  }
  const std::size_t d = vals.size();
  auto sse = [&](std::size_t a, std::size_t b) {
    double n = 0, m = 0, j = 0;
    for (std::size_t i = a; i < b; ++i) n += counts[i], m += counts[i] * vals[i];
    m /= n;
    for (std::size_t i = a; i < b; ++i) j += counts[i] * (vals[i] - m) * (vals[i] - m);
    return j;
  };
  double best = 1e300;
  std::function<void(std::size_t, std::size_t, double)> go = [&](std::size_t at, std::size_t left,
                                                                 double acc) {
    if (left == 1) {
      best = std::min(best, acc + sse(at, d));
      return;
    }
    for (std::size_t end = at + 1; end + left - 1 <= d; ++end) go(end, left - 1, acc + sse(at, end));
  };
  go(0, std::min(k, d), 0.0);
  return best;
}

TEST(KMeansLaw, ReachesContiguousOptimumOnSmallSamples) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int bits = 1 + trial % 3;
    const int distinct = 1 + static_cast<int>(rng() % 12);
    std::vector<std::uint32_t> s;
    for (int i = 0; i < distinct; ++i) {
      const std::uint32_t v = rng() % (trial % 2 ? 4096 : 50);
      s.insert(s.end(), 1 + rng() % 20, v);
    }
    const auto cfg = KMeansConfig::for_bits(bits);
    const auto r = kmeans_fit_detailed(s, cfg, kMaster);
    expect_monotone(r);
    const double opt = best_contiguous(s, static_cast<std::size_t>(cfg.clusters));
    ASSERT_NEAR(kmeans_objective(s, r.centroids), opt, 1e-9 * std::max(1.0, opt))
        << "trial " << trial;
  }
}

TEST(KMeans, EvenlySpacedInitIsNeverBetter) {
  std::mt19937 rng(23);
  std::gamma_distribution<double> g(1.2, 250.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint32_t> s(500);
    for (auto& v : s) v = static_cast<std::uint32_t>(std::min(g(rng), 4095.0));
    auto cfg = KMeansConfig::for_bits(1 + trial % 5);
    const auto best = kmeans_fit_detailed(s, cfg, kMaster);
    cfg.init = KMeansInit::EvenlySpaced;
    const auto even = kmeans_fit_detailed(s, cfg, kMaster);
    expect_monotone(even);
    EXPECT_LE(best.objective_history.back(),
              even.objective_history.back() * (1 + 1e-12));
  }
}

TEST(KMeansObjective, SumOfSquaredDistances) {
  const std::vector<std::uint32_t> s{0, 4, 10};
  const std::vector<double> c{1.0, 9.0};
  EXPECT_DOUBLE_EQ(kmeans_objective(s, c), 1.0 + 9.0 + 1.0);
}

TEST(Saturate, Examples) {
  EXPECT_EQ(saturate({"l", {0, 5, 10}}, kMaster).values, (std::vector<std::uint32_t>{0, 5, 10}));
  EXPECT_EQ(saturate({"l", {4100, 9000}}, kMaster).values,
            (std::vector<std::uint32_t>{4095, 4095}));
}

TEST(Saturate, MovesTailMassToTopBin) {
  std::vector<std::uint32_t> v{1, 4095, 4096, 5000, 20, 70000};
  const auto before = Histogram::of(v);
  const auto after = Histogram::of(saturate({"l", v}, kMaster).values);
  EXPECT_EQ(before.total(), after.total());
  EXPECT_EQ(after.values.back(), 4095u);
  EXPECT_EQ(after.counts.back(), 4u);
}

TEST(HistogramTest, CsvRows) {
  std::ostringstream out;
  write_histogram_csv(out, Histogram::of(std::vector<std::uint32_t>{3, 0, 3, 9}));
  EXPECT_EQ(out.str(), "code,count\n0,1\n3,2\n9,1\n");
}

TEST(Collect, IdentityConvGivesReluOfInput) {
  const ModelGraph g("id", {1, 2, 2}, kMaster,
                     {conv("c", 1, 1, 1, 1, 0, {1}, {-3}), simple("r", LayerKind::Relu)});
  Dataset d;
  d.inputs.push_back(Tensor::fixed({1, 2, 2}, {0, 2, 10, 4095}, kMaster));
  d.labels.push_back(0);
  EXPECT_EQ(collect(g, d, "c").values, (std::vector<std::uint32_t>{0, 0, 7, 4092}));
  Dataset zero;
  zero.inputs.push_back(Tensor::fixed({1, 2, 2}, {0, 0, 0, 0}, kMaster));
  zero.labels.push_back(0);
  const ModelGraph g0("z", {1, 2, 2}, kMaster,
                      {conv("c", 1, 1, 1, 1, 0, {1}, {0}), simple("r", LayerKind::Relu)});
  EXPECT_EQ(collect(g0, zero, "c").values, (std::vector<std::uint32_t>(4, 0)));
  EXPECT_THROW(collect(g, d, "r"), ValidationError);
  EXPECT_THROW(collect(g, Dataset{}, "c"), ValidationError);
}

TEST(Collect, FixturePoolSizes) {
  const auto g = load_model(testing::fixture_model());
  const auto calib = load_dataset(testing::fixture_calib(), g);
  ASSERT_EQ(calib.size(), 100u);
  const auto all = collect_all(g, calib);
  EXPECT_EQ(all.at("conv1").values.size(), 100u * 8 * 32 * 32);
  EXPECT_EQ(all.at("conv2").values.size(), 100u * 16 * 16 * 16);
  EXPECT_EQ(all.at("fc1").values.size(), 100u * 64);
  EXPECT_EQ(collect(g, calib, "conv2").values, all.at("conv2").values);
}

TEST(CodebookFitterTest, CachesAndSaturates) {
  const auto g = load_model(testing::fixture_model());
  const auto calib = load_dataset(testing::fixture_calib(), g, 20);
  CodebookFitter fitter(g, calib);
  const auto a = fitter.fit("conv2", 3);
  EXPECT_EQ(a, fitter.fit("conv2", 3));
  EXPECT_EQ(a->size(), 8u);
  EXPECT_EQ(a->layer(), "conv2");
  for (auto v : fitter.sample("conv3").values) ASSERT_LE(v, 4095u);
  EXPECT_THROW(fitter.sample("conv9"), ValidationError);
  CodebookFitter raw(g, calib, false);
  EXPECT_FALSE(raw.preprocess());
}

}  // namespace
}  // namespace nuq
