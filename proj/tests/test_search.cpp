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

#include <random>
#include <sstream>

#include "nuq/calib.hpp"
#include "nuq/error.hpp"
#include "nuq/search.hpp"
#include "test_support.hpp"

namespace nuq {
namespace {

using testing::conv;
using testing::fc;
using testing::simple;

const FxFormat kMaster(12, 0);

// One quantizable layer: identity 1x1 conv over 4 channels, then identity fc.
// The label is the argmax of the input, so coarse ENQ bins create ties that
// resolve to the lower index and cost accuracy.
struct LineProblem {
  ModelGraph model{"line", {4, 1, 1}, kMaster,
                   {conv("c", 4, 4, 1, 1, 0,
                         {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}, {0, 0, 0, 0}),
                    simple("r", LayerKind::Relu),
                    fc("f", 4, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1},
                       {0, 0, 0, 0})}};
  Dataset data;

  LineProblem() {
    std::mt19937 rng(17);
    std::uniform_int_distribution<std::uint32_t> d(0, 4095);
    for (int i = 0; i < 120; ++i) {
      std::vector<std::uint32_t> x(4);
      for (auto& v : x) v = d(rng);
      const auto label = static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
      data.inputs.push_back(Tensor::fixed({4, 1, 1}, x, kMaster));
      data.labels.push_back(label);
    }
  }
};

class FixtureSearch : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    model_ = new ModelGraph(load_model(testing::fixture_model()));
    data_ = new Dataset(load_dataset(testing::fixture_eval(), *model_, 150));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete model_;
  }
  static ModelGraph* model_;
  static Dataset* data_;
};

ModelGraph* FixtureSearch::model_ = nullptr;
Dataset* FixtureSearch::data_ = nullptr;

TEST(Budget, ValidateAndAccept) {
  SearchBudget b{0.02, 0.95, 1};
  EXPECT_NO_THROW(b.validate());
  EXPECT_TRUE(b.accepts(0.93));  // exactly delta, despite float rounding
  EXPECT_FALSE(b.accepts(0.9299));
  EXPECT_TRUE(b.accepts(0.99));
  for (double bad : {0.0, -0.1, 1.5}) {
    b.delta = bad;
    EXPECT_THROW(b.validate(), ValidationError);
  }
  b.delta = 1.0;
  EXPECT_NO_THROW(b.validate());
  b.top_k = 0;
  EXPECT_THROW(b.validate(), ValidationError);
}

TEST(AllocationIo, RoundTripAndSummary) {
  BitAllocation a;
  a.scheme = Scheme::Enq;
  a.bits = {{"conv1", 8}, {"conv2", 5}};
  std::stringstream ss;
  write_allocation(ss, a, {{"delta", "0.02"}, {"achieved_accuracy", "0.97"}});
  const auto f = read_allocation(ss);
  ASSERT_EQ(f.rows.size(), 2u);
  EXPECT_EQ(f.rows[1].first, "conv2");
  EXPECT_EQ(f.rows[1].second.bits, 5);
  EXPECT_EQ(f.rows[1].second.scheme, Scheme::Enq);
  EXPECT_EQ(f.summary.at("delta"), "0.02");
  EXPECT_EQ(bit_map(f), (BitMap{{"conv1", 8}, {"conv2", 5}}));
}

TEST(AllocationIo, Errors) {
  std::istringstream dup("a,enq,3\na,enq,4\n");
  EXPECT_THROW(read_allocation(dup), ParseError);
  std::istringstream scheme("a,log,3\n");
  EXPECT_THROW(read_allocation(scheme), ParseError);
  std::istringstream bits("a,enq,3x\n");
  EXPECT_THROW(read_allocation(bits), ParseError);
  std::istringstream cols("a,enq\n");
  EXPECT_THROW(read_allocation(cols), ParseError);
  EXPECT_THROW(load_allocation("/nonexistent/alloc.csv"), IoError);
}

TEST(AllocationIo, UniformFractionalColumn) {
  std::istringstream in("layer,scheme,bits\nc,uniform,8,2\n");
  const auto f = read_allocation(in);
  EXPECT_EQ(f.rows[0].second.f_bits, 2);
}

TEST(SearchMode, Parse) {
  EXPECT_EQ(parse_search_mode("greedy"), SearchMode::Greedy);
  EXPECT_EQ(parse_search_mode("exhaustive"), SearchMode::Exhaustive);
  EXPECT_THROW(parse_search_mode("anneal"), ValidationError);
}

TEST(EnqSearch, OneLayerGreedyEqualsExhaustive) {
  LineProblem p;
  const double ref = evaluate(p.model, p.data, QuantConfig::all_enq(p.model, 12), 1);
  for (double delta : {0.01, 0.05, 0.2, 0.5}) {
    const SearchBudget b{delta, ref, 1};
    EnqSearchOptions greedy, exhaustive;
    exhaustive.mode = SearchMode::Exhaustive;
    const auto g = search_enq_allocation(p.model, p.data, b, greedy);
    const auto e = search_enq_allocation(p.model, p.data, b, exhaustive);
    EXPECT_EQ(g.bits, e.bits) << "delta " << delta;
    EXPECT_TRUE(b.accepts(g.achieved_accuracy));
    // Minimal: one bit fewer misses the budget, unless already at the floor.
    const int bits = g.bits[0].second;
    if (bits > 1) {
      EXPECT_FALSE(b.accepts(evaluate(p.model, p.data, QuantConfig::all_enq(p.model, bits - 1), 1)));
    }
  }
}

TEST(EnqSearch, VacuousBudgetGivesOneBit) {
  LineProblem p;
  const auto a = search_enq_allocation(p.model, p.data, SearchBudget{1.0, 1.0, 1});
  ASSERT_EQ(a.bits.size(), 1u);
  EXPECT_EQ(a.bits[0].second, 1);
}

TEST(EnqSearch, InfeasibleBudget) {
  LineProblem p;
  EnqSearchOptions o;
  o.max_bits = 1;
  EXPECT_THROW(search_enq_allocation(p.model, p.data, SearchBudget{0.001, 1.0, 1}, o),
               InfeasibleError);
  o.max_bits = 13;
  EXPECT_THROW(search_enq_allocation(p.model, p.data, SearchBudget{0.1, 1.0, 1}, o),
               ValidationError);
}

TEST(UniformSweepTest, VacuousBudgetReachesLowerEnd) {
  LineProblem p;
  const auto s = find_min_uniform_q(p.model, p.data, SearchBudget{1.0, 1.0, 1}, 3, 12, 0);
  EXPECT_EQ(s.q_min, 3);
  ASSERT_EQ(s.table.size(), 10u);
  EXPECT_EQ(s.table.front().first, 12);
  EXPECT_EQ(s.table.back().first, 3);
  EXPECT_THROW(find_min_uniform_q(p.model, p.data, SearchBudget{1.0, 1.0, 1}, 5, 4, 0),
               ValidationError);
  EXPECT_THROW(find_min_uniform_q(p.model, p.data, SearchBudget{1.0, 1.0, 1}, 3, 8, 3),
               ValidationError);
}

TEST_F(FixtureSearch, UniformSweepIsMonotoneAboveQMin) {
  const double ref = evaluate(*model_, *data_, QuantConfig(kMaster), 1);
  const auto s = find_min_uniform_q(*model_, *data_, SearchBudget{0.01, ref, 1}, 1, 16, 0);
  ASSERT_TRUE(s.q_min.has_value());
  EXPECT_LE(*s.q_min, 12);
  double prev = 2.0;
  for (const auto& [q, acc] : s.table) {
    if (q < *s.q_min) break;
    EXPECT_LE(acc, prev) << "q=" << q;
    prev = acc;
  }
}

TEST_F(FixtureSearch, GreedyFootprintAtLeastExhaustive) {
  const Dataset small = data_->head(60);  // exhaustive is exact, so keep it cheap
  const double ref = evaluate(*model_, small, QuantConfig::all_uniform(*model_, 12, 0), 1);
  const SearchBudget b{0.02, ref, 1};
  EnqSearchOptions exhaustive;
  exhaustive.mode = SearchMode::Exhaustive;
  const auto g = search_enq_allocation(*model_, small, b);
  const auto e = search_enq_allocation(*model_, small, b, exhaustive);
  EXPECT_TRUE(b.accepts(g.achieved_accuracy));
  EXPECT_TRUE(b.accepts(e.achieved_accuracy));
  EXPECT_GE(total_bits(*model_, g.bit_map()), total_bits(*model_, e.bit_map()));
  EXPECT_DOUBLE_EQ(e.achieved_accuracy, evaluate(*model_, small, config_for(*model_, e), 1));
}

TEST_F(FixtureSearch, ExhaustiveCapIsEnforced) {
  EnqSearchOptions o;
  o.mode = SearchMode::Exhaustive;
  o.exhaustive_layer_cap = 2;
  EXPECT_THROW(search_enq_allocation(*model_, *data_, SearchBudget{0.5, 1.0, 1}, o),
               ValidationError);
}

TEST_F(FixtureSearch, KnqReturnsMinimalSharedWidth) {
  const auto calib = load_dataset(testing::fixture_calib(), *model_);
  CodebookFitter fitter(*model_, calib);
  const CodebookSource source = [&](const std::string& l, int b) { return fitter.fit(l, b); };
  const double ref = evaluate(*model_, *data_, QuantConfig(kMaster), 1);
  const SearchBudget b{0.02, ref, 1};
  const auto r = search_knq_allocation(*model_, *data_, b, source);
  ASSERT_GE(r.uniform_bits, 2);
  EXPECT_TRUE(b.accepts(r.allocation.achieved_accuracy));
  const auto below = config_for(
      *model_,
      BitAllocation{Scheme::Knq,
                    {{"conv1", r.uniform_bits - 1},
                     {"conv2", r.uniform_bits - 1},
                     {"conv3", r.uniform_bits - 1}},
                    0.0},
      source);
  EXPECT_FALSE(b.accepts(evaluate(*model_, *data_, below, 1)));
  EXPECT_EQ(r.table.back().first, r.uniform_bits);

  KnqSearchOptions refine;
  refine.per_layer_refine = true;
  const auto rr = search_knq_allocation(*model_, *data_, b, source, refine);
  EXPECT_TRUE(b.accepts(rr.allocation.achieved_accuracy));
  for (const auto& [name, bits] : rr.allocation.bits) EXPECT_LE(bits, r.uniform_bits);
}

TEST_F(FixtureSearch, KnqNeedsSource) {
  EXPECT_THROW(search_knq_allocation(*model_, *data_, SearchBudget{0.1, 1.0, 1}, {}),
               ValidationError);
}

TEST(EvalCacheTest, MemoizesIdenticalConfigs) {
  LineProblem p;
  EvalCache cache(p.model, p.data, 1);
  const auto a = cache.accuracy(QuantConfig::all_enq(p.model, 4));
  const auto b = cache.accuracy(QuantConfig::all_enq(p.model, 4));
  EXPECT_EQ(a, b);
  EXPECT_EQ(cache.evaluations(), 1u);
  cache.accuracy(QuantConfig::all_enq(p.model, 5));
  EXPECT_EQ(cache.evaluations(), 2u);
}

TEST(ConfigFor, MixedAllocationFile) {
  LineProblem p;
  std::istringstream in("layer,scheme,bits\nc,uniform,10\n");
  const auto cfg = config_for(p.model, read_allocation(in));
  EXPECT_EQ(cfg.find("c")->f_bits, 0);
  std::istringstream bad("layer,scheme,bits\nf,enq,4\n");
  EXPECT_THROW(config_for(p.model, read_allocation(bad)), ValidationError);
  std::istringstream knq("layer,scheme,bits\nc,knq,2\n");
  EXPECT_THROW(config_for(p.model, read_allocation(knq)), ValidationError);
}

}  // namespace
}  // namespace nuq
