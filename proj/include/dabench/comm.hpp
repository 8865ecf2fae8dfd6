#pragma once

#include <chrono>
#include <cstddef>
#include <cstring>
#include <functional>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

namespace dabench::comm {

/// Rank identity plus the collective operations the kernels are written against.
///
/// All collectives are SPMD: every rank of a group must call the same sequence
/// of collectives with compatible arguments. Reductions use a fixed ascending-rank
/// pairwise-left fold, so results are bit-identical on every rank and across
/// repeated runs.
///
/// Backends: SoloComm (trivial single rank), the in-process multi-worker group
/// driven by run_ranks, and - through this interface - any external
/// message-passing runtime an adapter chooses to provide.
class Communicator {
 public:
  virtual ~Communicator() = default;

  int rank() const noexcept { return rank_; }
  int size() const noexcept { return size_; }

  /// Element-wise sum across ranks. Every rank receives the same vector.
  virtual std::vector<double> allreduce_sum(std::span<const double> local) = 0;

  double allreduce_sum_scalar(double x) {
    const auto v = allreduce_sum(std::span<const double>(&x, 1));
    return v.front();
  }

  /// Every rank returns a copy of the root's payload, bit-identical.
  virtual std::vector<std::byte> broadcast_bytes(std::span<const std::byte> payload, int root) = 0;

  /// Root receives the per-rank values ordered by rank index; others get nullopt.
  virtual std::optional<std::vector<double>> gather(double value, int root) = 0;

  /// No rank returns before all ranks have entered.
  virtual void barrier() = 0;

  template <class T>
    requires std::is_trivially_copyable_v<T>
  std::vector<T> broadcast(std::span<const T> payload, int root) {
    const auto bytes = broadcast_bytes(std::as_bytes(payload), root);
    std::vector<T> out(bytes.size() / sizeof(T));
    if (!bytes.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
  }

  template <class T>
    requires std::is_trivially_copyable_v<T>
  T broadcast_value(const T& value, int root) {
    return broadcast(std::span<const T>(&value, 1), root).front();
  }

 protected:
  Communicator(int rank, int size) : rank_(rank), size_(size) {}

 private:
  int rank_;
  int size_;
};

/// Pass-through backend for a group of one; collectives are identities.
class SoloComm final : public Communicator {
 public:
  SoloComm() : Communicator(0, 1) {}

  std::vector<double> allreduce_sum(std::span<const double> local) override {
    return {local.begin(), local.end()};
  }

  std::vector<std::byte> broadcast_bytes(std::span<const std::byte> payload, int root) override;

  std::optional<std::vector<double>> gather(double value, int root) override;

  void barrier() override {}
};

inline constexpr std::chrono::milliseconds kDefaultCollectiveTimeout{60'000};

/// Runs `body` once per rank, each rank on its own worker thread, over an
/// in-process group whose collectives rendezvous through shared buffers.
/// A collective that not all ranks reach within `collective_timeout` throws
/// TimeoutError in the waiting ranks. After all workers finish, the exception
/// of the lowest-ranked failing worker (if any) is rethrown.
void run_ranks(int nranks, const std::function<void(Communicator&)>& body,
               std::chrono::milliseconds collective_timeout = kDefaultCollectiveTimeout);

}  // namespace dabench::comm
