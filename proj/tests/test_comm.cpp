#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <numeric>
#include <thread>
#include <vector>

#include "dabench/comm.hpp"
#include "dabench/errors.hpp"

using namespace dabench;

TEST_CASE("allreduce_sum identity on a single rank") {
  comm::SoloComm solo;
  const std::vector<double> local{3.0, -1.0};
  CHECK(solo.allreduce_sum(local) == std::vector<double>{3.0, -1.0});
}

TEST_CASE("allreduce_sum sums element-wise across ranks") {
  std::vector<std::vector<double>> results(4);
  comm::run_ranks(4, [&](comm::Communicator& c) {
    results[c.rank()] = c.allreduce_sum(std::vector<double>{1.0, 2.0});
  });
  for (const auto& r : results) CHECK(r == std::vector<double>{4.0, 8.0});
}

TEST_CASE("allreduce_sum arithmetic series") {
  std::vector<std::vector<double>> results(3);
  comm::run_ranks(3, [&](comm::Communicator& c) {
    results[c.rank()] = c.allreduce_sum(std::vector<double>{static_cast<double>(c.rank())});
  });
  for (const auto& r : results) CHECK(r == std::vector<double>{3.0});
}

TEST_CASE("allreduce_sum equals a sequential ascending-rank fold exactly") {
  constexpr int kRanks = 4;
  constexpr std::size_t kLen = 64;
  std::vector<std::vector<double>> inputs(kRanks, std::vector<double>(kLen));
  for (int r = 0; r < kRanks; ++r)
    for (std::size_t i = 0; i < kLen; ++i)
      inputs[r][i] = 0.1 * static_cast<double>(r + 1) + 1e-9 * static_cast<double>(i) +
                     (r % 2 ? -1.0 : 1.0) * 3.7e-13;

  std::vector<double> expected = inputs[0];
  for (int r = 1; r < kRanks; ++r)
    for (std::size_t i = 0; i < kLen; ++i) expected[i] += inputs[r][i];

  std::vector<std::vector<double>> results(kRanks);
  comm::run_ranks(kRanks, [&](comm::Communicator& c) {
    results[c.rank()] = c.allreduce_sum(inputs[c.rank()]);
  });
  for (const auto& r : results) CHECK(r == expected);  // bit-exact, not approximate
}

TEST_CASE("collectives are deterministic across executions") {
  auto run_once = [] {
    std::vector<double> r0;
    comm::run_ranks(3, [&](comm::Communicator& c) {
      std::vector<double> local(8);
      for (std::size_t i = 0; i < local.size(); ++i)
        local[i] = 1.0 / (1.0 + static_cast<double>(c.rank()) + static_cast<double>(i));
      auto out = c.allreduce_sum(local);
      if (c.rank() == 0) r0 = out;
    });
    return r0;
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("allreduce_sum rejects mismatched lengths") {
  CHECK_THROWS_AS(comm::run_ranks(
                      2,
                      [&](comm::Communicator& c) {
                        std::vector<double> local(c.rank() == 0 ? 2 : 3, 1.0);
                        c.allreduce_sum(local);
                      },
                      std::chrono::milliseconds{2000}),
                  ProtocolError);
}

TEST_CASE("collective called by a subset of ranks times out") {
  CHECK_THROWS_AS(comm::run_ranks(
                      2,
                      [&](comm::Communicator& c) {
                        if (c.rank() == 0) c.allreduce_sum(std::vector<double>{1.0});
                        // rank 1 never joins the collective
                      },
                      std::chrono::milliseconds{250}),
                  TimeoutError);
}

TEST_CASE("broadcast identity on a single rank") {
  comm::SoloComm solo;
  const std::vector<double> v{1.5, 2.5};
  CHECK(solo.broadcast(std::span<const double>(v), 0) == v);
}

TEST_CASE("broadcast delivers the root payload to all ranks") {
  const std::vector<std::int32_t> payload{1, 2, 3};
  std::vector<std::vector<std::int32_t>> results(4);
  comm::run_ranks(4, [&](comm::Communicator& c) {
    std::vector<std::int32_t> mine = c.rank() == 2 ? payload : std::vector<std::int32_t>{-9};
    results[c.rank()] = c.broadcast(std::span<const std::int32_t>(mine), 2);
  });
  for (const auto& r : results) CHECK(r == payload);
}

TEST_CASE("broadcast of an empty payload") {
  std::vector<std::size_t> sizes(2, 999);
  comm::run_ranks(2, [&](comm::Communicator& c) {
    std::vector<double> empty;
    sizes[c.rank()] = c.broadcast(std::span<const double>(empty), 1).size();
  });
  CHECK(sizes == std::vector<std::size_t>{0, 0});
}

TEST_CASE("broadcast rejects an invalid root") {
  comm::SoloComm solo;
  const std::vector<double> v{1.0};
  CHECK_THROWS_AS(solo.broadcast(std::span<const double>(v), 1), std::invalid_argument);
  CHECK_THROWS_AS(comm::run_ranks(2,
                                  [&](comm::Communicator& c) {
                                    std::vector<double> mine{1.0};
                                    c.broadcast(std::span<const double>(mine), 5);
                                  }),
                  std::invalid_argument);
}

TEST_CASE("gather on a single rank") {
  comm::SoloComm solo;
  auto got = solo.gather(5.0, 0);
  REQUIRE(got.has_value());
  CHECK(*got == std::vector<double>{5.0});
}

TEST_CASE("gather orders values by rank and returns nothing off-root") {
  std::vector<std::optional<std::vector<double>>> results(3);
  comm::run_ranks(3, [&](comm::Communicator& c) {
    results[c.rank()] = c.gather(static_cast<double>(c.rank()), 0);
  });
  REQUIRE(results[0].has_value());
  CHECK(*results[0] == std::vector<double>{0.0, 1.0, 2.0});
  CHECK(!results[1].has_value());
  CHECK(!results[2].has_value());
}

TEST_CASE("gather of equal values") {
  std::vector<std::optional<std::vector<double>>> results(2);
  comm::run_ranks(2, [&](comm::Communicator& c) { results[c.rank()] = c.gather(7.0, 1); });
  CHECK(!results[0].has_value());
  REQUIRE(results[1].has_value());
  CHECK(*results[1] == std::vector<double>{7.0, 7.0});
}

TEST_CASE("gather length equals size and element i came from rank i") {
  constexpr int kRanks = 5;
  std::optional<std::vector<double>> at_root;
  comm::run_ranks(kRanks, [&](comm::Communicator& c) {
    auto got = c.gather(100.0 + c.rank(), 0);
    if (c.rank() == 0) at_root = got;
  });
  REQUIRE(at_root.has_value());
  REQUIRE(at_root->size() == kRanks);
  for (int i = 0; i < kRanks; ++i) CHECK((*at_root)[i] == 100.0 + i);
}

TEST_CASE("barrier returns immediately on a single rank") {
  comm::SoloComm solo;
  solo.barrier();
}

TEST_CASE("barrier releases nobody before the last entry") {
  std::atomic<int> entered{0};
  std::vector<int> seen_at_release(4, -1);
  comm::run_ranks(4, [&](comm::Communicator& c) {
    // stagger entry so the barrier actually has to hold early ranks
    std::this_thread::sleep_for(std::chrono::milliseconds(20 * c.rank()));
    entered.fetch_add(1);
    c.barrier();
    seen_at_release[c.rank()] = entered.load();
  });
  for (int r = 0; r < 4; ++r) CHECK(seen_at_release[r] == 4);
}

TEST_CASE("repeated barriers complete without deadlock") {
  comm::run_ranks(4, [&](comm::Communicator& c) {
    for (int i = 0; i < 100; ++i) c.barrier();
    (void)c;
  });
}

TEST_CASE("barrier times out when a rank never arrives") {
  CHECK_THROWS_AS(comm::run_ranks(
                      3,
                      [&](comm::Communicator& c) {
                        if (c.rank() != 2) c.barrier();
                      },
                      std::chrono::milliseconds{250}),
                  TimeoutError);
}

TEST_CASE("scalar allreduce convenience") {
  std::vector<double> results(4, 0.0);
  comm::run_ranks(4, [&](comm::Communicator& c) {
    results[c.rank()] = c.allreduce_sum_scalar(0.5);
  });
  for (double v : results) CHECK(v == 2.0);
}
