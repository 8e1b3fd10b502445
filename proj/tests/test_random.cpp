#include <gtest/gtest.h>

#include <cstdint>
#include <set>
#include <vector>

#include "smoothbandit/random.hpp"

using smoothbandit::Rng;

namespace {

// Reference FNV-1a followed by the splitmix64 finalizer, written out directly.
std::uint64_t fnv_then_mix(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

}  // namespace

TEST(Random, StableHashMatchesReference) {
  for (const char* s : {"", "a", "smooth_bandit", "binned_ucb"}) {
    EXPECT_EQ(smoothbandit::stable_hash(s), fnv_then_mix(s)) << s;
  }
}

TEST(Random, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Random, ForkDoesNotAdvanceParentAndDiffersByStream) {
  Rng a(7);
  Rng b(7);
  Rng c1 = a.fork(1);
  Rng c2 = a.fork(2);
  EXPECT_EQ(a.next_u64(), b.next_u64());
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 100; ++i) {
    seen.insert(c1.next_u64());
    seen.insert(c2.next_u64());
  }
  EXPECT_EQ(seen.size(), 200u);
}

TEST(Random, UniformInUnitInterval) {
  Rng r(1);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // Mean 1/2, sd of the mean sqrt(1/12/n).
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Random, UniformIndexCoversRangeEvenly) {
  Rng r(3);
  std::vector<int> counts(3, 0);
  const int n = 30000;
  for (int i = 0; i < n; ++i) ++counts[r.uniform_index(3)];
  const double sd = std::sqrt(n * (1.0 / 3.0) * (2.0 / 3.0));
  for (int c : counts) EXPECT_NEAR(c, n / 3.0, 4.0 * sd);
}

TEST(Random, BernoulliFrequency) {
  Rng r(5);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += r.bernoulli(0.3);
  EXPECT_NEAR(hits / double(n), 0.3, 4.0 * std::sqrt(0.3 * 0.7 / n));
  EXPECT_FALSE(Rng(9).bernoulli(0.0));
  EXPECT_TRUE(Rng(9).bernoulli(1.0));
}

TEST(Random, NormalMoments) {
  Rng r(11);
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.03);
}
