#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "smoothbandit/schedule.hpp"

using namespace smoothbandit;

namespace {

PolicyConfig make_cfg(double beta, std::size_t d, double p, double c, std::size_t T, std::size_t arms = 2) {
  PolicyConfig cfg;
  cfg.beta = beta;
  cfg.dim = d;
  cfg.p = p;
  cfg.c_epoch = c;
  cfg.horizon = T;
  cfg.arm_count = arms;
  return cfg;
}

// Nominal length written out independently from the library.
double hand_length(double beta, double d, double p, double c, double T, int k, double arms) {
  const double delta = std::pow(T, -beta / (2 * beta + d)) / std::log(T);
  const double eps = std::pow(2.0, -k);
  const double base = std::log(T * std::pow(delta, -d)) / (c * eps * eps);
  return std::ceil(2.0 * arms / p * std::pow(base, (2 * beta + d) / (2 * beta)) + arms * arms / (2 * p * p) * std::log(T));
}

}  // namespace

TEST(Schedule, ToleranceSequence) {
  const auto s = make_schedule(make_cfg(2, 1, 0.5, 8, 100000));
  ASSERT_GE(s.tolerances.size(), 3u);
  EXPECT_EQ(s.tolerances[0], 0.5);
  EXPECT_EQ(s.tolerances[1], 0.25);
  EXPECT_EQ(s.tolerances[2], 0.125);
}

TEST(Schedule, LengthsMatchHandFormula) {
  for (std::size_t arms : {2u, 3u, 5u}) {
    const auto cfg = make_cfg(1.5, 2, 0.4, 2.0, 1000000, arms);
    const auto s = make_schedule(cfg);
    for (std::size_t k = 0; k < s.nominal_lengths.size(); ++k) {
      EXPECT_EQ(static_cast<double>(s.nominal_lengths[k]),
                hand_length(1.5, 2, 0.4, 2.0, 1e6, static_cast<int>(k + 1), static_cast<double>(arms)));
    }
  }
}

TEST(Schedule, ExampleBoundBetaOne) {
  const auto cfg = make_cfg(1, 1, 1, 1, 10000);
  EXPECT_EQ(epoch_count_bound(1e4, 1.0, 1), 5u);
  EXPECT_LE(make_schedule(cfg).epochs(), 5u);
}

TEST(Schedule, AccountingAndMinimality) {
  for (double beta : {1.0, 2.0, 3.0}) {
    for (std::size_t d : {1u, 2u}) {
      for (double c : {0.5, 2.0, 8.0, 32.0}) {
        for (std::size_t T : {100u, 1000u, 20000u, 300000u}) {
          const auto s = make_schedule(make_cfg(beta, d, 0.5, c, T));
          EXPECT_EQ(std::accumulate(s.lengths.begin(), s.lengths.end(), std::size_t{0}), T);
          std::size_t before_last = 0;
          for (std::size_t k = 0; k + 1 < s.epochs(); ++k) {
            EXPECT_EQ(s.lengths[k], s.nominal_lengths[k]);
            before_last += s.nominal_lengths[k];
          }
          EXPECT_LT(before_last, T);
          EXPECT_LE(s.lengths.back(), s.nominal_lengths.back());
          for (std::size_t k = 1; k < s.epochs(); ++k) EXPECT_GT(s.nominal_lengths[k], s.nominal_lengths[k - 1]);
          EXPECT_EQ(s.start(1), 1u);
          if (s.epochs() > 1) EXPECT_EQ(s.start(2), 1 + s.lengths[0]);
        }
      }
    }
  }
}

TEST(Schedule, EpochCountBoundHoldsOnGrid) {
  for (double beta : {1.0, 1.5, 2.0, 3.0}) {
    for (std::size_t d : {1u, 2u, 3u}) {
      for (double p : {0.1, 0.5, 1.0}) {
        for (double c : {0.5, 1.0, 4.0}) {
          for (double T : {1e3, 1e4, 1e5}) {
            if (T < std::exp(std::max(c, 1.0))) continue;
            const auto s = make_schedule(make_cfg(beta, d, p, c, static_cast<std::size_t>(T)));
            EXPECT_LE(s.epochs(), epoch_count_bound(T, beta, d)) << beta << " " << d << " " << p << " " << c << " " << T;
          }
        }
      }
    }
  }
}

TEST(Schedule, TwoArmAndMultiArmFormsCoincideAtTwoArms) {
  const auto cfg = make_cfg(2, 1, 0.5, 8, 50000);
  const auto a = make_schedule(cfg, ScheduleForm::two_arm);
  const auto b = make_schedule(cfg, ScheduleForm::multi_arm);
  EXPECT_EQ(a.nominal_lengths, b.nominal_lengths);
  EXPECT_EQ(a.lengths, b.lengths);
  EXPECT_THROW(make_schedule(make_cfg(2, 1, 0.5, 8, 50000, 3), ScheduleForm::two_arm), ParameterError);
}

TEST(Schedule, SingleTruncatedEpochWhenHorizonTooShort) {
  const auto s = make_schedule(make_cfg(2, 1, 0.5, 0.5, 50));
  EXPECT_EQ(s.epochs(), 1u);
  EXPECT_TRUE(s.single_truncated_epoch);
  EXPECT_EQ(s.lengths[0], 50u);
  EXPECT_FALSE(make_schedule(make_cfg(2, 1, 0.5, 8, 100000)).single_truncated_epoch);
}

TEST(PolicyConfig, Validation) {
  EXPECT_THROW(make_schedule(make_cfg(0.5, 1, 0.5, 1, 1000)), ParameterError);
  EXPECT_THROW(make_schedule(make_cfg(2, 1, 0.0, 1, 1000)), ParameterError);
  EXPECT_THROW(make_schedule(make_cfg(2, 1, 1.5, 1, 1000)), ParameterError);
  EXPECT_THROW(make_schedule(make_cfg(2, 1, 0.5, 0.0, 1000)), ParameterError);
  EXPECT_THROW(make_schedule(make_cfg(2, 1, 0.5, 1, 2)), ParameterError);
  auto c = make_cfg(2, 1, 0.5, 1, 1000);
  c.c0 = 1.5;
  EXPECT_THROW(c.validate(), ParameterError);
  c.c0 = 1.0;
  c.arm_count = 1;
  EXPECT_THROW(c.validate(), ParameterError);
  c.arm_count = 2;
  EXPECT_NEAR(c.resolved_eig_tol(), 2e-8, 1e-20);
}
