#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mwd/grid.hpp"
#include "mwd/kernels.hpp"
#include "mwd/tiling.hpp"

namespace mwd {

/// group_size threads share one extruded diamond; n_groups diamonds run
/// concurrently. group_size = 1 is one-thread wavefront diamond blocking.
struct ThreadGroupConfig {
  int group_size = 1;
  int n_groups = 1;
  int total_threads() const { return group_size * n_groups; }
};

/// Cooperative cancellation shared by every thread of a run (and by every
/// rank of a distributed run). Waiters registered via on_abort are woken.
class AbortToken {
 public:
  bool aborted() const { return flag_.load(std::memory_order_acquire); }
  /// Records the first failure and wakes all registered waiters.
  void abort(std::exception_ptr cause = nullptr);
  /// Returns a handle for remove_waker(). Runs `wake` at once if already aborted.
  std::size_t on_abort(std::function<void()> wake);
  void remove_waker(std::size_t handle);
  std::exception_ptr cause() const;

 private:
  std::atomic<bool> flag_{false};
  mutable std::mutex mu_;
  std::exception_ptr cause_;
  std::size_t next_handle_ = 0;
  std::vector<std::pair<std::size_t, std::function<void()>>> wakers_;
};

/// Thrown inside worker threads to unwind after another thread aborted.
struct Aborted {};

/// Reusable counter barrier owned by one thread group.
class GroupBarrier {
 public:
  explicit GroupBarrier(int n) : n_(n) {}
  /// Returns false if the barrier was poisoned (run aborted).
  bool arrive_and_wait();
  void poison();

 private:
  const int n_;
  std::atomic<int> arrived_{0};
  std::atomic<std::uint32_t> generation_{0};
  std::atomic<bool> poisoned_{false};
};

/// FIFO of tiles whose dependencies are all satisfied. Dependency counters
/// are decremented atomically; the FIFO itself sits behind one mutex.
class ReadyQueue {
 public:
  /// Covers `tiles` (every tile of `tess` when empty). Parents outside the
  /// covered set do not count as dependencies.
  explicit ReadyQueue(const Tessellation& tess, std::span<const int> tiles = {});

  std::optional<int> try_pop();
  /// Pops the oldest queued tile for which `eligible` holds.
  std::optional<int> try_pop(const std::function<bool(int)>& eligible);
  /// Marks `finished` done and enqueues the children that became ready.
  /// Throws InternalError when a tile is finished twice.
  std::vector<int> push_children(int finished);
  /// Blocks until work may be available, everything finished or `timeout`.
  /// With `even_if_queued` it also waits while tiles are queued (they may be
  /// held back by an eligibility test).
  void wait_for_work(std::chrono::microseconds timeout, bool even_if_queued = false);
  void wake_all();

  bool done() const { return finished_count_.load(std::memory_order_acquire) == total_; }
  int total() const { return total_; }
  std::int64_t pops() const { return pops_.load(); }
  std::int64_t enqueued() const { return enqueued_.load(); }

 private:
  const Tessellation* tess_;
  std::vector<std::uint8_t> member_;
  std::unique_ptr<std::atomic<int>[]> remaining_;
  std::unique_ptr<std::atomic<bool>[]> finished_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<int> fifo_;
  int total_ = 0;
  std::atomic<int> finished_count_{0};
  std::atomic<std::int64_t> pops_{0}, enqueued_{0};
};

enum class LogEvent { kTile, kQueueWait, kHalo };

const char* to_string(LogEvent e);

struct LogRecord {
  int group = 0;
  int tile = -1;
  std::int64_t t_start_ns = 0;
  std::int64_t t_end_ns = 0;
  LogEvent event = LogEvent::kTile;
  std::uint64_t seq_start = 0;  ///< global start/finish order (tile events)
  std::uint64_t seq_end = 0;
  std::int64_t barriers = 0;
};

/// Where one worker thread spent its time. The categories partition the
/// thread's wall time.
struct ThreadTimes {
  int group = 0;
  int member = 0;
  std::int64_t compute_ns = 0;
  std::int64_t barrier_ns = 0;
  std::int64_t queue_wait_ns = 0;
  std::int64_t comm_ns = 0;
  std::int64_t wall_ns = 0;
  std::int64_t accounted_ns() const { return compute_ns + barrier_ns + queue_wait_ns + comm_ns; }
};

struct GroupFractions {
  double compute = 0;
  double comm = 0;
  double idle = 0;
};

struct ExecutionLog {
  std::vector<LogRecord> records;
  std::vector<ThreadTimes> threads;
  std::int64_t wall_ns = 0;
  std::int64_t lups = 0;
  std::int64_t barriers = 0;
  std::int64_t pops = 0;
  std::int64_t tiles_run = 0;

  /// Tile start/finish events in global order, for dependency_check.
  std::vector<ScheduleEvent> schedule() const;
  /// Compute (incl. group barriers) / communicate / idle share per group,
  /// averaged over the group's threads.
  std::vector<GroupFractions> group_fractions() const;
  /// CSV with header "group,tile,t_start_ns,t_end_ns,event".
  void write_csv(std::ostream& os) const;
};

/// Monotonic event sequence shared by all threads of a run.
using SequenceCounter = std::atomic<std::uint64_t>;

/// Handle a hook uses to coordinate with the rest of its thread group.
class GroupContext {
 public:
  GroupContext(int group, int member, int size, GroupBarrier* barrier)
      : group_(group), member_(member), size_(size), barrier_(barrier) {}
  int group() const { return group_; }
  int member() const { return member_; }
  int size() const { return size_; }
  bool leader() const { return member_ == 0; }
  /// Group-local barrier; throws Aborted if the run was cancelled.
  void sync() {
    if (size_ > 1 && !barrier_->arrive_and_wait()) throw Aborted{};
  }

 private:
  int group_, member_, size_;
  GroupBarrier* barrier_;
};

/// Optional per-tile callbacks executed by every member of the group right
/// before and after a tile's stencil updates. Time spent here is charged as
/// communication.
struct TileHooks {
  /// Extra readiness test applied by the group leader when picking a tile
  /// (e.g. "all remote inputs have arrived"). May throw to abort the run.
  std::function<bool(int)> eligible;
  std::function<void(GroupContext&, const DiamondTile&)> before;
  std::function<void(GroupContext&, const DiamondTile&)> after;
};

struct RunOptions {
  /// Fault injection: the tile is scheduled but its updates are skipped.
  std::optional<int> skip_tile;
  /// Upper bound on one idle wait before re-polling the queue.
  std::chrono::microseconds idle_backoff{200};
};

/// Executes the share of `plan` owned by ctx.member(), with a group barrier
/// after every entry when the group has more than one thread. Level t reads
/// buffer (start_parity + t) & 1. Returns the number of barriers executed.
std::int64_t group_execute_tile(const StencilOperator& op, Grid3D& g, int start_parity,
                                const WavefrontPlan& plan, GroupContext& ctx,
                                bool skip_updates = false);

/// Lower-level engine: runs the tiles in `tiles` (all when empty) with
/// dynamic FIFO scheduling. Does not change the grid's parity.
ExecutionLog execute_tiles(const StencilOperator& op, Grid3D& g, const Tessellation& tess,
                           std::span<const int> tiles, const ThreadGroupConfig& cfg, int n_f,
                           const RunOptions& options = {}, const TileHooks* hooks = nullptr,
                           SequenceCounter* sequence = nullptr, AbortToken* abort = nullptr);

/// Multi-threaded wavefront diamond blocking over T steps. The final grid is
/// bitwise identical to sweep_naive() with the same operator and steps.
/// Throws UsageError on tessellation/grid mismatch or a stencil that is not
/// eligible for temporal blocking.
ExecutionLog run_mwd(const StencilOperator& op, Grid3D& g, int steps, const Tessellation& tess,
                     const ThreadGroupConfig& cfg, int n_f, const RunOptions& options = {});

}  // namespace mwd
