#include "dabench/comm.hpp"

#include <condition_variable>
#include <exception>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "dabench/errors.hpp"

namespace dabench::comm {

namespace {

void check_root(int root, int size) {
  if (root < 0 || root >= size) {
    throw std::invalid_argument("root rank " + std::to_string(root) + " not in [0, " +
                                std::to_string(size) + ")");
  }
}

// Shared rendezvous state for one in-process group. Each rank owns one slot of
// every buffer; deposits happen before a sync point and reads after it, so the
// sync's mutex provides the necessary ordering and no per-slot locking is needed.
class InProcessGroup {
 public:
  InProcessGroup(int size, std::chrono::milliseconds timeout)
      : size_(size),
        timeout_(timeout),
        double_slots_(size),
        byte_slots_(size),
        scalar_slots_(size, 0.0) {}

  int size() const noexcept { return size_; }

  std::vector<std::vector<double>>& double_slots() { return double_slots_; }
  std::vector<std::vector<std::byte>>& byte_slots() { return byte_slots_; }
  std::vector<double>& scalar_slots() { return scalar_slots_; }

  /// Blocks until all ranks of the group have entered this sync point.
  void sync(const char* what) {
    std::unique_lock lk(mu_);
    const auto my_generation = generation_;
    if (++arrived_ == size_) {
      arrived_ = 0;
      ++generation_;
      cv_.notify_all();
      return;
    }
    const bool ok = cv_.wait_for(lk, timeout_, [&] { return generation_ != my_generation; });
    if (!ok) {
      throw TimeoutError(std::string(what) + ": timed out after " +
                         std::to_string(timeout_.count()) + " ms with " +
                         std::to_string(arrived_) + " of " + std::to_string(size_) +
                         " ranks arrived (deadlock or rank failure)");
    }
  }

 private:
  int size_;
  std::chrono::milliseconds timeout_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t generation_ = 0;
  int arrived_ = 0;
  std::vector<std::vector<double>> double_slots_;
  std::vector<std::vector<std::byte>> byte_slots_;
  std::vector<double> scalar_slots_;
};

class InProcessComm final : public Communicator {
 public:
  InProcessComm(std::shared_ptr<InProcessGroup> group, int rank)
      : Communicator(rank, group->size()), group_(std::move(group)) {}

  std::vector<double> allreduce_sum(std::span<const double> local) override {
    auto& slots = group_->double_slots();
    slots[rank()].assign(local.begin(), local.end());
    group_->sync("allreduce_sum");
    for (int r = 0; r < size(); ++r) {
      if (slots[r].size() != local.size()) {
        throw ProtocolError("allreduce_sum: rank " + std::to_string(r) + " supplied " +
                            std::to_string(slots[r].size()) + " elements, rank " +
                            std::to_string(rank()) + " supplied " + std::to_string(local.size()));
      }
    }
    // Fixed ascending-rank pairwise-left fold keeps the result bit-reproducible.
    std::vector<double> result = slots[0];
    for (int r = 1; r < size(); ++r) {
      for (std::size_t i = 0; i < result.size(); ++i) result[i] += slots[r][i];
    }
    group_->sync("allreduce_sum");
    return result;
  }

  std::vector<std::byte> broadcast_bytes(std::span<const std::byte> payload, int root) override {
    check_root(root, size());
    group_->byte_slots()[rank()].assign(payload.begin(), payload.end());
    group_->sync("broadcast");
    std::vector<std::byte> result = group_->byte_slots()[root];
    group_->sync("broadcast");
    return result;
  }

  std::optional<std::vector<double>> gather(double value, int root) override {
    check_root(root, size());
    group_->scalar_slots()[rank()] = value;
    group_->sync("gather");
    std::optional<std::vector<double>> result;
    if (rank() == root) result = group_->scalar_slots();
    group_->sync("gather");
    return result;
  }

  void barrier() override { group_->sync("barrier"); }

 private:
  std::shared_ptr<InProcessGroup> group_;
};

}  // namespace

std::vector<std::byte> SoloComm::broadcast_bytes(std::span<const std::byte> payload, int root) {
  check_root(root, 1);
  return {payload.begin(), payload.end()};
}

std::optional<std::vector<double>> SoloComm::gather(double value, int root) {
  check_root(root, 1);
  return std::vector<double>{value};
}

void run_ranks(int nranks, const std::function<void(Communicator&)>& body,
               std::chrono::milliseconds collective_timeout) {
  if (nranks < 1) throw std::invalid_argument("run_ranks: nranks must be >= 1");

  auto group = std::make_shared<InProcessGroup>(nranks, collective_timeout);
  std::vector<std::exception_ptr> failures(nranks);
  std::vector<std::thread> workers;
  workers.reserve(nranks);
  for (int r = 0; r < nranks; ++r) {
    workers.emplace_back([&, r] {
      try {
        InProcessComm comm(group, r);
        body(comm);
      } catch (...) {
        failures[r] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

}  // namespace dabench::comm
