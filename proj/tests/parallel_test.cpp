#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "chadkit/parallel.hpp"
#include "chadkit/rng.hpp"

using namespace chadkit;

TEST(Parallel, EveryIndexRunsOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  parallel_for(0, [](std::size_t) { FAIL(); });
}

TEST(Parallel, ExceptionsPropagate) {
  EXPECT_THROW(parallel_for(50, [](std::size_t i) {
                 if (i == 17) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Parallel, ThreadLimitFromEnvironment) {
  ::setenv("CHADKIT_THREADS", "3", 1);
  EXPECT_EQ(thread_limit(), 3u);
  ::setenv("CHADKIT_THREADS", "0", 1);
  EXPECT_GE(thread_limit(), 1u);
  ::unsetenv("CHADKIT_THREADS");
  EXPECT_GE(thread_limit(), 1u);
}

TEST(Seeds, NamedStreamsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
  EXPECT_NE(derive_seed(7, 1, 2), derive_seed(7, 2, 1));
  const auto s = SeedStreams::from_root(9);
  EXPECT_NE(s.init, s.shuffle);
  EXPECT_NE(s.negsampler, s.noise);
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform_open01(rng);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}
