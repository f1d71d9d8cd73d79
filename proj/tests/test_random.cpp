#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <vector>

#include "ditherlab/random.hpp"

using namespace ditherlab;

TEST(RandomStream, IdenticalTripleGivesByteIdenticalDraws) {
  RandomStream a(42, 7, 1);
  RandomStream b(42, 7, 1);
  for (int i = 0; i < 10000; ++i) {
    const double x = a.normal();
    const double y = b.normal();
    EXPECT_EQ(std::memcmp(&x, &y, sizeof x), 0);
  }
}

TEST(RandomStream, DrawsDependOnlyOnIdentityNotCallOrder) {
  // Interleaving draws from other streams does not perturb a stream.
  RandomStream lone(3, 9, 0);
  std::vector<double> expected(100);
  for (auto& x : expected) x = lone.uniform();
  RandomStream s(3, 9, 0);
  RandomStream other(3, 10, 0);
  for (int i = 0; i < 100; ++i) {
    other.uniform();
    EXPECT_EQ(s.uniform(), expected[i]);
  }
}

TEST(RandomStream, DistinctTriplesDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed : {0ULL, 1ULL})
    for (std::uint64_t stream : {0ULL, 1ULL, 2ULL})
      for (std::uint64_t sub : {0ULL, 1ULL, 2ULL}) firsts.insert(RandomStream(seed, stream, sub).next_u64());
  EXPECT_EQ(firsts.size(), 18u);
}

TEST(RandomStream, SubstreamKeepsSeedAndStream) {
  RandomStream s(5, 6, 0);
  s.next_u64();
  auto sub = s.substream(2);
  EXPECT_EQ(sub.master_seed(), 5u);
  EXPECT_EQ(sub.stream_id(), 6u);
  EXPECT_EQ(sub.substream_id(), 2u);
  EXPECT_EQ(sub.position(), 0u);
  RandomStream direct(5, 6, 2);
  EXPECT_EQ(sub.next_u64(), direct.next_u64());
}

TEST(RandomStream, UniformMomentsAndRange) {
  RandomStream s(1, 0, 0);
  const int n = 200000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum2 += u * u;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sum2 / n - mean * mean, 1.0 / 12.0, 2e-3);
}

TEST(RandomStream, NormalMoments) {
  RandomStream s(2, 0, 0);
  const int n = 200000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    sum += z;
    sum2 += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sum2 / n, 1.0, 0.015);
}
