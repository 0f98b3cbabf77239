#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "carl/objective.hpp"
#include "grad_oracle.hpp"

using namespace carl;
using carl::testing::gradient_error;
using carl::testing::random_tensor;
using carl::testing::TensorD;

namespace {

Tape<double> infer() { return Tape<double>(Tape<double>::Mode::kInference); }

PrototypeBank<double> bank_of(TensorD w, EnergyMode mode = EnergyMode::kRaw) {
  return PrototypeBank<double>::from_weights(std::move(w), mode);
}

TensorD random_simplex_rows(std::size_t rows, std::size_t k, std::mt19937_64& rng) {
  auto tape = infer();
  return ops::softmax_rows(tape, random_tensor({rows, k}, rng, 2.0));
}

}  // namespace

TEST(Energy, OrthonormalExample) {
  auto tape = infer();
  auto bank = bank_of(TensorD::matrix({{1, 0}, {0, 1}}));
  auto e = compute_energy(tape, TensorD::matrix({{1, 0}}), bank);
  EXPECT_EQ(e(0, 0), 1.0);
  EXPECT_EQ(e(0, 1), 0.0);
}

TEST(Energy, ZeroEmbeddingGivesZeroEnergies) {
  auto tape = infer();
  for (auto mode : {EnergyMode::kRaw, EnergyMode::kNormalized}) {
    auto e = compute_energy(tape, TensorD::matrix({{0, 0, 0}}), bank_of(TensorD::matrix({{1, 2, 3}, {0, 1, 0}}), mode));
    EXPECT_EQ(e(0, 0), 0.0);
    EXPECT_EQ(e(0, 1), 0.0);
  }
}

TEST(Energy, MatchesScalarLoop) {
  std::mt19937_64 rng(1);
  auto z = random_tensor({4, 5}, rng);
  auto c = random_tensor({3, 5}, rng);
  auto tape = infer();
  auto raw = compute_energy(tape, z, bank_of(c.clone(), EnergyMode::kRaw));
  auto cos = compute_energy(tape, z, bank_of(c.clone(), EnergyMode::kNormalized));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double dot = 0, nz = 0, nc = 0;
      for (std::size_t k = 0; k < 5; ++k) {
        dot += z(i, k) * c(j, k);
        nz += z(i, k) * z(i, k);
        nc += c(j, k) * c(j, k);
      }
      EXPECT_NEAR(raw(i, j), dot, 1e-6);
      EXPECT_NEAR(cos(i, j), dot / std::sqrt(nz * nc), 1e-6);
    }
  }
}

TEST(Energy, DimensionMismatch) {
  auto tape = infer();
  EXPECT_THROW(compute_energy(tape, TensorD(Shape{2, 4}), bank_of(TensorD(Shape{3, 5}))), DimensionError);
}

TEST(Bank, RandomRowsAreUnitNormAndRenormalizeKeepsThem) {
  auto bank = PrototypeBank<float>::random(16, 8, EnergyMode::kNormalized, 3);
  EXPECT_EQ(bank.num_prototypes(), 16u);
  EXPECT_TRUE(bank.weights.requires_grad());
  for (auto& v : bank.weights.data()) v *= 3.0f;
  bank.renormalize();
  for (std::size_t r = 0; r < 16; ++r) {
    double n = 0;
    for (std::size_t c = 0; c < 8; ++c) n += double(bank.weights(r, c)) * bank.weights(r, c);
    EXPECT_NEAR(n, 1.0, 1e-6);
  }
  EXPECT_THROW(PrototypeBank<float>::random(1, 8, EnergyMode::kRaw, 0), ContractError);
}

TEST(Assign, Examples) {
  auto tape = infer();
  auto u = assign_views(tape, TensorD::matrix({{0, 0, 0}}));
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(u(0, c), 1.0 / 3, 1e-15);
  auto a = assign_views(tape, TensorD::matrix({{std::log(2.0), 0}}));
  EXPECT_NEAR(a(0, 0), 2.0 / 3, 1e-15);
  auto s = assign_views(tape, TensorD::matrix({{50, 0, 0}}));
  EXPECT_NEAR(s(0, 0), 1.0, 1e-20 + 1e-15);
  EXPECT_LT(s(0, 1), 1e-21);
}

TEST(Consistency, Examples) {
  auto tape = infer();
  EXPECT_NEAR(consistency_loss(tape, TensorD::matrix({{1, 0}}), TensorD::matrix({{1, 0}})).item(), 0.0, 1e-9);
  EXPECT_NEAR(consistency_loss(tape, TensorD::matrix({{0.5, 0.5}}), TensorD::matrix({{0.5, 0.5}})).item(), 0.693147,
              1e-6);
  EXPECT_NEAR(consistency_loss(tape, TensorD::matrix({{1, 0}}), TensorD::matrix({{0, 1}})).item(), 27.631021, 1e-5);
  EXPECT_THROW(consistency_loss(tape, TensorD(Shape{2, 3}), TensorD(Shape{3, 3})), DimensionError);
}

TEST(Consistency, SymmetricNonnegativeAndSelfFloor) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto pa = random_simplex_rows(6, 5, rng), pp = random_simplex_rows(6, 5, rng);
    auto tape = infer();
    const double ab = consistency_loss(tape, pa, pp).item();
    EXPECT_DOUBLE_EQ(ab, consistency_loss(tape, pp, pa).item());
    EXPECT_GE(ab, 0.0);
    double expected = 0;
    for (std::size_t r = 0; r < 6; ++r) {
      double sq = 0;
      for (std::size_t c = 0; c < 5; ++c) sq += pa(r, c) * pa(r, c);
      expected -= std::log(sq);
    }
    EXPECT_NEAR(consistency_loss(tape, pa, pa).item(), expected / 6.0, 1e-12);
    EXPECT_GT(expected, 0.0);
  }
}

TEST(MeanAssignment, Examples) {
  auto tape = infer();
  auto m = batch_mean_assignment(tape, TensorD::matrix({{1, 0}, {0, 1}}));
  EXPECT_EQ(m.at(0), 0.5);
  EXPECT_EQ(m.at(1), 0.5);
  auto single = batch_mean_assignment(tape, TensorD::matrix({{0.2, 0.3, 0.5}}));
  EXPECT_NEAR(single.at(2), 0.5, 1e-15);
  std::mt19937_64 rng(4);
  auto p = random_simplex_rows(6, 4, rng);
  auto mean = batch_mean_assignment(tape, p);
  double total = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    double s = 0;
    for (std::size_t r = 0; r < 6; ++r) s += p(r, c);
    EXPECT_NEAR(mean.at(c), s / 6, 1e-7);
    total += mean.at(c);
  }
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(KlToUniform, AnalyticValues) {
  auto tape = infer();
  EXPECT_NEAR(kl_to_uniform(tape, TensorD::vector({0.25, 0.25, 0.25, 0.25})).item(), 0.0, 1e-9);
  EXPECT_NEAR(kl_to_uniform(tape, TensorD::vector({1, 0, 0, 0})).item(), std::log(4.0), 1e-9);
  EXPECT_NEAR(kl_to_uniform(tape, TensorD::vector({0.5, 0.5, 0, 0})).item(), std::log(4.0) - std::log(2.0), 1e-9);
}

TEST(KlToUniform, RejectsNonNormalizedInput) {
  auto tape = infer();
  EXPECT_THROW(kl_to_uniform(tape, TensorD::vector({0.5, 0.6})), ContractError);
  EXPECT_THROW(kl_to_uniform(tape, TensorD::vector({1.2, -0.2})), ContractError);
}

TEST(KlToUniform, RangeAndPermutationInvariance) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_simplex_rows(1, 7, rng);
    TensorD v(Shape{7}, std::vector<double>(p.data().begin(), p.data().end()));
    auto tape = infer();
    const double kl = kl_to_uniform(tape, v).item();
    EXPECT_GE(kl, 0.0);
    EXPECT_LE(kl, std::log(7.0));
    std::vector<double> shuffled(v.data().begin(), v.data().end());
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_NEAR(kl_to_uniform(tape, TensorD::vector(shuffled)).item(), kl, 1e-12);
  }
}

TEST(DecayWeight, DefaultScheduleValues) {
  const DecaySchedule s{1.0, 2.0, 100};
  EXPECT_EQ(decay_weight(s, 0), 2.0);
  EXPECT_EQ(decay_weight(s, 50), 1.5);
  EXPECT_EQ(decay_weight(s, 100), 1.0);
  EXPECT_EQ(decay_weight(s, 150), 1.0);
  EXPECT_THROW(decay_weight(s, -1), ContractError);
}

TEST(DecayWeight, PiecewiseLinearAndContinuous) {
  const DecaySchedule s{0.3, 2.7, 40};
  for (long e = 1; e < 40; ++e) {
    const double step = decay_weight(s, e) - decay_weight(s, e - 1);
    EXPECT_NEAR(step, -(2.7 - 0.3) / 40.0, 1e-12);
  }
  EXPECT_NEAR(decay_weight(s, 40), decay_weight(s, 41), 1e-12);
  EXPECT_THROW((DecaySchedule{2.0, 1.0, 100}.validate()), ContractError);
  EXPECT_THROW((DecaySchedule{1.0, 2.0, 0}.validate()), ContractError);
}

TEST(CarlTotal, UniformAssignmentsK2) {
  for (long epoch : {0L, 50L, 200L}) {
    auto tape = infer();
    auto p = TensorD::matrix({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
    auto loss = carl_total_loss(tape, p, p, DecaySchedule{}, epoch);
    EXPECT_NEAR(loss.total.item(), 0.693147, 1e-6);
    EXPECT_NEAR(loss.parts.kl, 0.0, 1e-12);
  }
}

TEST(CarlTotal, SpreadMatchingOneHotsIsGlobalOptimum) {
  auto tape = infer();
  auto p = TensorD::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  EXPECT_NEAR(carl_total_loss(tape, p, p, DecaySchedule{}, 0).total.item(), 0.0, 1e-9);
}

TEST(CarlTotal, EqualsSumOfParts) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto pa = random_simplex_rows(4, 3, rng), pp = random_simplex_rows(4, 3, rng);
    auto tape = infer();
    // λ = 3 − (3 − 1)·25/50 = 2
    auto loss = carl_total_loss(tape, pa, pp, DecaySchedule{1.0, 3.0, 50}, 25);
    const double lc = consistency_loss(tape, pa, pp).item();
    std::vector<double> mean(3, 0.0);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 3; ++c) mean[c] += (pa(r, c) + pp(r, c)) / 8.0;
    double kl = std::log(3.0);
    for (double m : mean) kl += m * std::log(m);
    EXPECT_DOUBLE_EQ(loss.parts.lambda, 2.0);
    EXPECT_NEAR(loss.total.item(), lc + 2.0 * kl, 1e-6);
    EXPECT_NEAR(loss.parts.consistency, lc, 1e-12);
    EXPECT_NEAR(loss.parts.kl, kl, 1e-9);
  }
}

TEST(CarlTotal, PrototypePermutationLeavesLossUnchanged) {
  std::mt19937_64 rng(9);
  auto za = random_tensor({5, 4}, rng), zp = random_tensor({5, 4}, rng), c = random_tensor({6, 4}, rng);
  std::vector<std::size_t> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  TensorD cp(Shape{6, 4});
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t k = 0; k < 4; ++k) cp(r, k) = c(perm[r], k);
  for (auto mode : {EnergyMode::kRaw, EnergyMode::kNormalized}) {
    auto tape = infer();
    auto eval = [&](const TensorD& w) {
      auto bank = bank_of(w.clone(), mode);
      auto pa = assign_views(tape, compute_energy(tape, za, bank));
      auto pp = assign_views(tape, compute_energy(tape, zp, bank));
      return carl_total_loss(tape, pa, pp, DecaySchedule{}, 10).total.item();
    };
    EXPECT_NEAR(eval(c), eval(cp), 1e-12);
  }
}

TEST(InfoNCE, EqualSimilaritiesB2) {
  auto tape = infer();
  auto z = TensorD::matrix({{1, 2}, {1, 2}});
  EXPECT_NEAR(infonce_loss(tape, z, z, InfoNCEConfig{0.2}).item(), 1.098612, 1e-6);
}

TEST(InfoNCE, SmallTauWithDominantPositiveGoesToZero) {
  auto tape = infer();
  auto a = TensorD::matrix({{1, 0}, {0, 1}});
  auto p = TensorD::matrix({{1, 0.01}, {0.01, 1}});
  EXPECT_LT(infonce_loss(tape, a, p, InfoNCEConfig{0.01}).item(), 1e-6);
}

TEST(InfoNCE, MatchesScalarLoop) {
  std::mt19937_64 rng(10);
  auto a = random_tensor({3, 4}, rng), p = random_tensor({3, 4}, rng);
  const double tau = 0.2;
  std::vector<std::vector<double>> all;
  for (std::size_t i = 0; i < 3; ++i) all.emplace_back(a.data().begin() + long(i * 4), a.data().begin() + long(i * 4 + 4));
  for (std::size_t i = 0; i < 3; ++i) all.emplace_back(p.data().begin() + long(i * 4), p.data().begin() + long(i * 4 + 4));
  auto cosine = [](const std::vector<double>& x, const std::vector<double>& y) {
    double d = 0, nx = 0, ny = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      d += x[k] * y[k];
      nx += x[k] * x[k];
      ny += y[k] * y[k];
    }
    return d / std::sqrt(nx * ny);
  };
  double expected = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    double denom = 0;
    for (std::size_t j = 0; j < 6; ++j)
      if (j != i) denom += std::exp(cosine(all[i], all[j]) / tau);
    expected -= std::log(std::exp(cosine(all[i], all[3 + i]) / tau) / denom);
  }
  auto tape = infer();
  EXPECT_NEAR(infonce_loss(tape, a, p, InfoNCEConfig{tau}).item(), expected / 3.0, 1e-6);
}

TEST(InfoNCE, Errors) {
  auto tape = infer();
  EXPECT_THROW(infonce_loss(tape, TensorD::matrix({{1, 0}}), TensorD::matrix({{1, 0}}), InfoNCEConfig{}), ContractError);
  auto z = TensorD::matrix({{1, 0}, {0, 1}});
  EXPECT_THROW(infonce_loss(tape, z, z, InfoNCEConfig{0.0}), ContractError);
}

// Toy of the full objective: 4 samples, K = 3, d = 5, every parameter checked.
TEST(CarlGradient, ToyInstanceAllParameters) {
  std::mt19937_64 rng(12);
  for (auto mode : {EnergyMode::kNormalized, EnergyMode::kRaw}) {
    const double err = gradient_error(
        [mode](Tape<double>& t, std::vector<TensorD>& x) {
          auto bank = PrototypeBank<double>{x[2], mode};
          auto pa = assign_views(t, compute_energy(t, x[0], bank));
          auto pp = assign_views(t, compute_energy(t, x[1], bank));
          return carl_total_loss(t, pa, pp, DecaySchedule{}, 30).total;
        },
        {random_tensor({4, 5}, rng), random_tensor({4, 5}, rng), random_tensor({3, 5}, rng)});
    EXPECT_LT(err, 1e-4);
  }
}

TEST(CarlGradient, KlOfSoftmaxEightVector) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const double err = gradient_error(
        [](Tape<double>& t, std::vector<TensorD>& x) {
          auto p = ops::softmax_rows(t, x[0]);
          return kl_to_uniform(t, batch_mean_assignment(t, p));
        },
        {random_tensor({1, 8}, rng)});
    EXPECT_LT(err, 1e-5);
  }
}

class LossGradient : public ::testing::TestWithParam<int> {};

TEST_P(LossGradient, AllLossesOnRandomInstances) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  const std::size_t bs[] = {2, 4, 8}, ks[] = {2, 3, 16}, ds[] = {3, 8};
  std::mt19937_64 rng(seed);
  const std::size_t b = bs[seed % 3], k = ks[(seed / 3) % 3], d = ds[(seed / 9) % 2];
  using V = std::vector<TensorD>;
  EXPECT_LT(gradient_error([](Tape<double>& t, V& x) { return consistency_loss(t, assign_views(t, x[0]), assign_views(t, x[1])); },
                           {random_tensor({b, k}, rng), random_tensor({b, k}, rng)}),
            1e-4);
  EXPECT_LT(gradient_error(
                [](Tape<double>& t, V& x) {
                  auto p = ops::concat_rows(t, assign_views(t, x[0]), assign_views(t, x[1]));
                  return kl_to_uniform(t, batch_mean_assignment(t, p));
                },
                {random_tensor({b, k}, rng), random_tensor({b, k}, rng)}),
            1e-4);
  EXPECT_LT(gradient_error(
                [seed](Tape<double>& t, V& x) {
                  PrototypeBank<double> bank{x[2], EnergyMode::kNormalized};
                  auto pa = assign_views(t, compute_energy(t, x[0], bank));
                  auto pp = assign_views(t, compute_energy(t, x[1], bank));
                  return carl_total_loss(t, pa, pp, DecaySchedule{}, long(seed * 7 % 130)).total;
                },
                {random_tensor({b, d}, rng), random_tensor({b, d}, rng), random_tensor({k, d}, rng)}),
            1e-4);
  EXPECT_LT(gradient_error([](Tape<double>& t, V& x) { return infonce_loss(t, x[0], x[1], InfoNCEConfig{0.2}); },
                           {random_tensor({b, d}, rng), random_tensor({b, d}, rng)}),
            1e-4);
}

INSTANTIATE_TEST_SUITE_P(Seeds, LossGradient, ::testing::Range(0, 20));
