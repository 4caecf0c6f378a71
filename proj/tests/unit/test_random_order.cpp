/*
 * Copyright 2026 The cpshap Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "../oracles.hpp"
#include "cpshap/errors.hpp"
#include "cpshap/game.hpp"
#include "cpshap/random_order.hpp"

namespace cpshap {
namespace {

const std::vector<double> kSmallGame{0.0, 1.0, 3.0, 6.0};

Permutation perm(const oracle::Order& o) { return Permutation(o); }

std::vector<double> positive_weights(int d, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.1, 5.0);
  std::vector<double> w(d);
  for (auto& x : w) x = u(gen);
  return w;
}

void expect_within_se(const AllocationVector& a, const std::vector<double>& exact,
                      double k) {
  ASSERT_TRUE(a.std_err.has_value());
  for (std::size_t j = 0; j < exact.size(); ++j) {
    EXPECT_LE(std::abs(a.values[j] - exact[j]), k * (*a.std_err)[j] + 1e-12)
        << "coordinate " << j << " estimate " << a.values[j] << " exact " << exact[j];
  }
}

TEST(Permutation, ValidatesBijection) {
  EXPECT_NO_THROW(Permutation({2, 0, 1}));
  EXPECT_THROW(Permutation({0, 0, 1}), ParameterError);
  EXPECT_THROW(Permutation({0, 3}), ParameterError);
  EXPECT_THROW(Permutation({}), ParameterError);
  EXPECT_EQ(Permutation::identity(3), Permutation({0, 1, 2}));
}

TEST(PsSampler, SinglePlayer) {
  Rng rng(1);
  EXPECT_EQ(ps_permutation_sample(std::vector<double>{4.0}, rng), Permutation({0}));
  EXPECT_DOUBLE_EQ(ps_permutation_pmf(std::vector<double>{4.0}, Permutation({0})), 1.0);
}

TEST(PsSampler, EqualValuesGiveUniformOrders) {
  Rng rng(2);
  const std::vector<double> w{2.0, 2.0};
  const int draws = 100000;
  int first = 0;
  for (int i = 0; i < draws; ++i) {
    if (ps_permutation_sample(w, rng)[0] == 0) ++first;
  }
  const double sigma = std::sqrt(0.25 / draws);
  EXPECT_NEAR(static_cast<double>(first) / draws, 0.5, 3 * sigma);
}

TEST(PsSampler, FrequenciesMatchPmf) {
  Rng rng(3);
  const std::vector<double> w{1.0, 3.0};
  const int draws = 100000;
  int count01 = 0;
  for (int i = 0; i < draws; ++i) {
    if (ps_permutation_sample(w, rng) == Permutation({0, 1})) ++count01;
  }
  const double p = ps_permutation_pmf(w, Permutation({0, 1}));
  EXPECT_DOUBLE_EQ(p, oracle::sequential_pmf(w, {0, 1}));
  // The heavier player is drawn for the last slot first.
  EXPECT_DOUBLE_EQ(p, 0.75);
  const double sigma = std::sqrt(p * (1 - p) / draws);
  EXPECT_NEAR(static_cast<double>(count01) / draws, p, 3 * sigma);
}

TEST(PsSampler, ThreePlayerFrequencies) {
  Rng rng(4);
  const std::vector<double> w{1.0, 2.0, 5.0};
  const int draws = 60000;
  std::map<std::vector<int>, int> counts;
  for (int i = 0; i < draws; ++i) {
    const auto p = ps_permutation_sample(w, rng);
    counts[{p.order().begin(), p.order().end()}]++;
  }
  for (const auto& o : oracle::all_orders(3)) {
    const double p = ps_permutation_pmf(w, perm(o));
    const double sigma = std::sqrt(p * (1 - p) / draws);
    EXPECT_NEAR(static_cast<double>(counts[o]) / draws, p, 4 * sigma);
  }
}

TEST(PsSampler, AllZeroValuesRejected) {
  Rng rng(5);
  const std::vector<double> w{0.0, 0.0};
  EXPECT_THROW(ps_permutation_sample(w, rng), DegenerateWeightsError);
  EXPECT_THROW(ps_permutation_pmf(w, Permutation({0, 1})), DegenerateWeightsError);
  EXPECT_THROW(RandomOrderDistribution::proportional(w), DegenerateWeightsError);
}

TEST(PsPmf, EqualValuesGiveInverseFactorial) {
  for (int d = 1; d <= 5; ++d) {
    const std::vector<double> w(d, 1.7);
    for (const auto& o : oracle::all_orders(d)) {
      EXPECT_NEAR(ps_permutation_pmf(w, perm(o)), 1.0 / oracle::factorial(d), 1e-15);
    }
  }
}

TEST(PsPmf, SumsToOneExhaustively) {
  std::mt19937_64 gen(6);
  for (int d = 1; d <= 5; ++d) {
    auto w = positive_weights(d, gen);
    if (d >= 3) w[1] = -w[1];
    double total = 0.0;
    for (const auto& o : oracle::all_orders(d)) total += ps_permutation_pmf(w, perm(o));
    EXPECT_NEAR(total, 1.0, 1e-12) << "d=" << d;
  }
}

TEST(PsPmf, SumsToOneWithZeroValuedPlayers) {
  const std::vector<double> w{0.0, 1.0, 0.0, 2.0};
  double total = 0.0;
  for (const auto& o : oracle::all_orders(4)) {
    const double p = ps_permutation_pmf(w, perm(o));
    EXPECT_NEAR(p, oracle::sequential_pmf(w, o), 1e-15);
    total += p;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(PsPmf, ZeroValuedPlayersArriveFirst) {
  const std::vector<double> w{0.0, 1.0, 2.0};
  Rng rng(8);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(ps_permutation_sample(w, rng)[0], 0);
}

TEST(PsPmf, MatchesSequentialAndCorrectedProductForms) {
  std::mt19937_64 gen(7);
  for (int d = 2; d <= 5; ++d) {
    const auto w = positive_weights(d, gen);
    for (const auto& o : oracle::all_orders(d)) {
      const double p = ps_permutation_pmf(w, perm(o));
      EXPECT_NEAR(p, oracle::sequential_pmf(w, o), 1e-14);
      EXPECT_NEAR(p, oracle::closed_form_pmf(w, o), 1e-14);
      EXPECT_NEAR(std::log(p), ps_permutation_log_pmf(w, perm(o)), 1e-12);
    }
  }
}

TEST(PsPmf, WeightedOrderAverageIsProportionalShapley) {
  std::mt19937_64 gen(10);
  for (int d = 2; d <= 6; ++d) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto t = oracle::random_game(d, gen);
      std::vector<double> w(d);
      for (int j = 0; j < d; ++j) w[j] = t[std::size_t{1} << j];
      const auto via_orders = oracle::random_order_value(
          d, t, [&](const oracle::Order& o) { return ps_permutation_pmf(w, perm(o)); });
      const auto exact = proportional_shapley_exact(make_tabular_game(d, t)).values;
      EXPECT_LT(oracle::max_abs_diff(via_orders, exact), 1e-10) << "d=" << d;
    }
  }
}

TEST(RandomOrderDistribution, UniformPmf) {
  const auto u = RandomOrderDistribution::uniform(4);
  EXPECT_EQ(u.kind(), OrderKind::uniform);
  EXPECT_NEAR(u.pmf(Permutation({3, 1, 0, 2})), 1.0 / 24, 1e-15);
  const auto p = RandomOrderDistribution::proportional({1.0, 3.0});
  EXPECT_DOUBLE_EQ(p.pmf(Permutation({0, 1})), 0.75);
}

TEST(Marginals, EachPermutationIsEfficient) {
  std::mt19937_64 gen(12);
  for (int d = 1; d <= 7; ++d) {
    const auto t = oracle::random_game(d, gen);
    const auto g = make_tabular_game(d, t);
    Rng rng(d);
    for (int k = 0; k < 20; ++k) {
      const auto s = marginal_contributions(g, uniform_permutation_sample(d, rng));
      double sum = 0.0;
      for (double c : s.contributions) sum += c;
      EXPECT_NEAR(sum, t.back() - t.front(), 1e-9 * std::max(1.0, std::abs(t.back() - t.front())));
    }
  }
}

TEST(Marginals, ContributionIncludesThePlayer) {
  const auto g = make_tabular_game(2, kSmallGame);
  const auto s = marginal_contributions(g, Permutation({1, 0}));
  EXPECT_DOUBLE_EQ(s.contributions[1], 3.0);
  EXPECT_DOUBLE_EQ(s.contributions[0], 3.0);
}

TEST(WeberMc, AdditiveGameIsExactWithOnePermutation) {
  const auto g = make_tabular_game(2, {0, 2, 5, 7});
  for (const auto& dist :
       {RandomOrderDistribution::uniform(2), RandomOrderDistribution::proportional({2, 5})}) {
    const auto a = weber_mc_estimate(g, dist, 1, 3);
    EXPECT_DOUBLE_EQ(a.values[0], 2.0);
    EXPECT_DOUBLE_EQ(a.values[1], 5.0);
    EXPECT_EQ((*a.std_err)[0], 0.0);
    EXPECT_EQ(a.permutations, 1u);
    EXPECT_EQ(a.estimator, EstimatorKind::monte_carlo);
  }
}

TEST(WeberMc, UniformMatchesShapley) {
  const auto g = make_tabular_game(2, kSmallGame);
  expect_within_se(weber_mc_estimate(g, RandomOrderDistribution::uniform(2), 10000, 17),
                   {2, 4}, 3);
}

TEST(WeberMc, ProportionalMatchesProportionalShapley) {
  const auto g = make_tabular_game(2, kSmallGame);
  const auto a =
      weber_mc_estimate(g, RandomOrderDistribution::proportional({1, 3}), 10000, 18);
  expect_within_se(a, {1.5, 4.5}, 3);
  EXPECT_EQ(a.kind, AllocationKind::proportional_shapley);
}

TEST(WeberMc, RejectsZeroPermutations) {
  const auto g = make_tabular_game(2, kSmallGame);
  EXPECT_THROW(weber_mc_estimate(g, RandomOrderDistribution::uniform(2), 0, 1),
               ParameterError);
}

TEST(WeberMc, DeterministicAndIndependentOfThreads) {
  std::mt19937_64 gen(14);
  const auto t = oracle::random_game(6, gen);
  setenv("CPSHAP_THREADS", "1", 1);
  const auto a = weber_mc_estimate(make_tabular_game(6, t),
                                   RandomOrderDistribution::uniform(6), 300, 5);
  setenv("CPSHAP_THREADS", "4", 1);
  const auto b = weber_mc_estimate(make_tabular_game(6, t),
                                   RandomOrderDistribution::uniform(6), 300, 5);
  unsetenv("CPSHAP_THREADS");
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(*a.std_err, *b.std_err);
}

TEST(WeberMc, EvaluationCountBound) {
  std::mt19937_64 gen(15);
  const int d = 10;
  const auto t = oracle::random_game(d, gen);
  for (std::size_t m : {1u, 5u, 40u}) {
    CoalitionGame g(d, [&](Coalition c) { return t[c.mask()]; });
    weber_mc_estimate(g, RandomOrderDistribution::uniform(d), m, 2);
    EXPECT_LE(g.evaluation_count(), m * (d - 1) + 2);
  }
}

TEST(WeberMc, EstimatesAreEfficientForAnyM) {
  std::mt19937_64 gen(16);
  for (int d = 2; d <= 7; ++d) {
    const auto t = oracle::random_game(d, gen);
    std::vector<double> w(d);
    for (int j = 0; j < d; ++j) w[j] = t[std::size_t{1} << j];
    const auto g = make_tabular_game(d, t);
    for (std::size_t m : {1u, 7u, 50u}) {
      EXPECT_LT(efficiency_gap(weber_mc_estimate(g, RandomOrderDistribution::uniform(d), m, m),
                               t.back() - t.front()),
                1e-9);
      EXPECT_LT(efficiency_gap(weber_mc_estimate(g, RandomOrderDistribution::proportional(w), m, m),
                               t.back() - t.front()),
                1e-9);
    }
  }
}

TEST(WeberMc, StdErrScalesAsInverseRootM) {
  std::mt19937_64 gen(19);
  const int d = 6;
  const auto t = oracle::random_game(d, gen);
  const auto g = make_tabular_game(d, t);
  const auto dist = RandomOrderDistribution::uniform(d);
  const auto a = weber_mc_estimate(g, dist, 100, 1);
  const auto b = weber_mc_estimate(g, dist, 400, 2);
  const auto c = weber_mc_estimate(g, dist, 1600, 3);
  for (int j = 0; j < d; ++j) {
    const double r1 = (*a.std_err)[j] / (*b.std_err)[j];
    const double r2 = (*b.std_err)[j] / (*c.std_err)[j];
    EXPECT_GT(r1, 1.0);
    EXPECT_LT(r1, 4.0);
    EXPECT_GT(r2, 1.0);
    EXPECT_LT(r2, 4.0);
  }
}

TEST(WeberMc, ErrorShrinksWithM) {
  std::mt19937_64 gen(20);
  const int d = 6;
  const auto t = oracle::random_game(d, gen);
  const auto g = make_tabular_game(d, t);
  const auto exact = shapley_exact(g).values;
  const auto dist = RandomOrderDistribution::uniform(d);
  std::vector<double> mean_err;
  for (std::size_t m : {25u, 400u}) {
    double total = 0.0;
    for (std::uint64_t s = 0; s < 40; ++s) {
      total += oracle::max_abs_diff(weber_mc_estimate(g, dist, m, 1000 + s).values, exact);
    }
    mean_err.push_back(total / 40);
  }
  EXPECT_LT(mean_err[1], mean_err[0]);
}

TEST(ImportanceReweight, SameDistributionReproducesPlainAverage) {
  std::mt19937_64 gen(22);
  const int d = 4;
  const auto t = oracle::random_game(d, gen);
  const auto g = make_tabular_game(d, t);
  const auto dist = RandomOrderDistribution::uniform(d);
  const auto perms = sample_permutations(dist, 200, 9);
  const auto samples = marginal_contributions(g, perms);
  const auto plain = average_marginals(samples, AllocationKind::shapley,
                                       EstimatorKind::monte_carlo);
  const auto direct = weber_mc_estimate(g, dist, 200, 9);
  for (auto mode : {ReweightMode::plain, ReweightMode::efficient}) {
    const auto is = importance_reweight(samples, dist, dist, mode);
    for (int j = 0; j < d; ++j) {
      EXPECT_NEAR(is.values[j], plain.values[j], 1e-12);
      EXPECT_NEAR(is.values[j], direct.values[j], 1e-12);
    }
  }
}

TEST(ImportanceReweight, UniformToProportional) {
  const auto g = make_tabular_game(2, kSmallGame);
  const auto uni = RandomOrderDistribution::uniform(2);
  const auto ps = RandomOrderDistribution::proportional({1, 3});
  const auto samples = marginal_contributions(g, sample_permutations(uni, 100000, 31));
  for (auto mode : {ReweightMode::plain, ReweightMode::efficient}) {
    const auto a = importance_reweight(samples, uni, ps, mode);
    expect_within_se(a, {1.5, 4.5}, 3);
    EXPECT_EQ(a.estimator, EstimatorKind::importance_sampling);
  }
}

TEST(ImportanceReweight, ProportionalToUniform) {
  const auto g = make_tabular_game(2, kSmallGame);
  const auto uni = RandomOrderDistribution::uniform(2);
  const auto ps = RandomOrderDistribution::proportional({1, 3});
  const auto samples = marginal_contributions(g, sample_permutations(ps, 100000, 32));
  for (auto mode : {ReweightMode::plain, ReweightMode::efficient}) {
    expect_within_se(importance_reweight(samples, ps, uni, mode), {2, 4}, 3);
  }
}

TEST(ImportanceReweight, EfficientModeSumsExactly) {
  std::mt19937_64 gen(23);
  const int d = 5;
  const auto t = oracle::random_game(d, gen);
  std::vector<double> w(d);
  for (int j = 0; j < d; ++j) w[j] = t[std::size_t{1} << j];
  const auto g = make_tabular_game(d, t);
  const auto uni = RandomOrderDistribution::uniform(d);
  const auto samples = marginal_contributions(g, sample_permutations(uni, 30, 4));
  const auto a = importance_reweight(samples, uni, RandomOrderDistribution::proportional(w));
  EXPECT_LT(efficiency_gap(a, t.back() - t.front()), 1e-9);
}

TEST(ImportanceReweight, ZeroSourceProbabilityIsASupportMismatch) {
  const auto g = make_tabular_game(2, {0, 0, 3, 6});
  const auto from = RandomOrderDistribution::proportional({0, 3});
  // The zero-weight player can never take the last slot.
  const std::vector<MarginalSample> samples{
      marginal_contributions(g, Permutation({1, 0}))};
  EXPECT_EQ(from.pmf(Permutation({1, 0})), 0.0);
  EXPECT_THROW(importance_reweight(samples, from, RandomOrderDistribution::uniform(2)),
               SupportMismatchError);
}

TEST(SamplePermutations, StreamsAreIndependentOfCount) {
  const auto dist = RandomOrderDistribution::proportional({1, 2, 3, 4});
  const auto a = sample_permutations(dist, 10, 77);
  const auto b = sample_permutations(dist, 50, 77);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], b[k]);
}

}  // namespace
}  // namespace cpshap
