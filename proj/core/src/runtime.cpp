#include "mwd/runtime.hpp"

#include <algorithm>
#include <ostream>
#include <string>
#include <thread>

#include "mwd/error.hpp"

namespace mwd {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ns_since(Clock::time_point origin, Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(t - origin).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// AbortToken / GroupBarrier

void AbortToken::abort(std::exception_ptr cause) {
  // Wakers run under the lock so remove_waker() cannot race with them.
  std::lock_guard lock(mu_);
  if (!cause_ && cause) cause_ = cause;
  if (flag_.exchange(true, std::memory_order_acq_rel)) return;
  for (auto& w : wakers_) w.second();
}

std::size_t AbortToken::on_abort(std::function<void()> wake) {
  std::lock_guard lock(mu_);
  const std::size_t handle = next_handle_++;
  wakers_.emplace_back(handle, wake);
  if (flag_.load()) wake();
  return handle;
}

void AbortToken::remove_waker(std::size_t handle) {
  std::lock_guard lock(mu_);
  std::erase_if(wakers_, [&](const auto& w) { return w.first == handle; });
}

std::exception_ptr AbortToken::cause() const {
  std::lock_guard lock(mu_);
  return cause_;
}

bool GroupBarrier::arrive_and_wait() {
  const auto gen = generation_.load(std::memory_order_acquire);
  if (poisoned_.load(std::memory_order_acquire)) return false;
  if (arrived_.fetch_add(1, std::memory_order_acq_rel) + 1 == n_) {
    arrived_.store(0, std::memory_order_relaxed);
    generation_.fetch_add(1, std::memory_order_release);
    generation_.notify_all();
    return !poisoned_.load(std::memory_order_acquire);
  }
  for (int spin = 0; spin < 64; ++spin) {
    if (generation_.load(std::memory_order_acquire) != gen) {
      return !poisoned_.load(std::memory_order_acquire);
    }
  }
  while (generation_.load(std::memory_order_acquire) == gen) {
    generation_.wait(gen, std::memory_order_acquire);
  }
  return !poisoned_.load(std::memory_order_acquire);
}

void GroupBarrier::poison() {
  poisoned_.store(true, std::memory_order_release);
  generation_.fetch_add(1, std::memory_order_release);
  generation_.notify_all();
}

// ---------------------------------------------------------------------------
// ReadyQueue

ReadyQueue::ReadyQueue(const Tessellation& tess, std::span<const int> tiles)
    : tess_(&tess),
      member_(tess.tile_count(), tiles.empty() ? 1 : 0),
      remaining_(new std::atomic<int>[tess.tile_count()]),
      finished_(new std::atomic<bool>[tess.tile_count()]) {
  for (int id : tiles) member_.at(id) = 1;
  for (int id = 0; id < tess.tile_count(); ++id) {
    int deps = 0;
    for (int p : tess.tile(id).parents) deps += member_[p];
    remaining_[id].store(deps);
    finished_[id].store(false);
    if (!member_[id]) continue;
    ++total_;
    if (deps == 0) {
      fifo_.push_back(id);
      ++enqueued_;
    }
  }
}

std::optional<int> ReadyQueue::try_pop() {
  std::lock_guard lock(mu_);
  if (fifo_.empty()) return std::nullopt;
  const int id = fifo_.front();
  fifo_.pop_front();
  ++pops_;
  return id;
}

std::optional<int> ReadyQueue::try_pop(const std::function<bool(int)>& eligible) {
  std::lock_guard lock(mu_);
  for (auto it = fifo_.begin(); it != fifo_.end(); ++it) {
    if (!eligible(*it)) continue;
    const int id = *it;
    fifo_.erase(it);
    ++pops_;
    return id;
  }
  return std::nullopt;
}

std::vector<int> ReadyQueue::push_children(int finished) {
  if (finished < 0 || finished >= tess_->tile_count() || !member_[finished]) {
    throw InternalError("push_children: tile " + std::to_string(finished) +
                        " is not managed by this queue");
  }
  if (finished_[finished].exchange(true, std::memory_order_acq_rel)) {
    throw InternalError("tile " + std::to_string(finished) + " finished twice");
  }
  std::vector<int> ready;
  for (int c : tess_->tile(finished).children) {
    if (!member_[c]) continue;
    if (remaining_[c].fetch_sub(1, std::memory_order_acq_rel) == 1) ready.push_back(c);
  }
  {
    std::lock_guard lock(mu_);
    for (int c : ready) fifo_.push_back(c);
    enqueued_ += static_cast<std::int64_t>(ready.size());
    finished_count_.fetch_add(1, std::memory_order_acq_rel);
  }
  cv_.notify_all();
  return ready;
}

void ReadyQueue::wait_for_work(std::chrono::microseconds timeout, bool even_if_queued) {
  std::unique_lock lock(mu_);
  if ((!even_if_queued && !fifo_.empty()) || done()) return;
  cv_.wait_for(lock, timeout);
}

void ReadyQueue::wake_all() {
  { std::lock_guard lock(mu_); }
  cv_.notify_all();
}

// ---------------------------------------------------------------------------
// ExecutionLog

const char* to_string(LogEvent e) {
  switch (e) {
    case LogEvent::kTile:
      return "tile";
    case LogEvent::kQueueWait:
      return "queue-wait";
    case LogEvent::kHalo:
      return "halo";
  }
  return "?";
}

std::vector<ScheduleEvent> ExecutionLog::schedule() const {
  std::vector<std::pair<std::uint64_t, ScheduleEvent>> ev;
  for (const auto& r : records) {
    if (r.event != LogEvent::kTile) continue;
    ev.push_back({r.seq_start, {r.tile, EventType::kStart}});
    ev.push_back({r.seq_end, {r.tile, EventType::kFinish}});
  }
  std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<ScheduleEvent> out;
  out.reserve(ev.size());
  for (const auto& e : ev) out.push_back(e.second);
  return out;
}

std::vector<GroupFractions> ExecutionLog::group_fractions() const {
  int n_groups = 0;
  for (const auto& t : threads) n_groups = std::max(n_groups, t.group + 1);
  std::vector<GroupFractions> out(n_groups);
  std::vector<int> members(n_groups, 0);
  for (const auto& t : threads) {
    const double total = static_cast<double>(t.accounted_ns());
    if (total <= 0) continue;
    auto& f = out[t.group];
    f.compute += (t.compute_ns + t.barrier_ns) / total;
    f.comm += t.comm_ns / total;
    f.idle += t.queue_wait_ns / total;
    ++members[t.group];
  }
  for (int g = 0; g < n_groups; ++g) {
    if (members[g] == 0) continue;
    out[g].compute /= members[g];
    out[g].comm /= members[g];
    out[g].idle /= members[g];
  }
  return out;
}

void ExecutionLog::write_csv(std::ostream& os) const {
  os << "group,tile,t_start_ns,t_end_ns,event\n";
  for (const auto& r : records) {
    os << r.group << ',' << r.tile << ',' << r.t_start_ns << ',' << r.t_end_ns << ','
       << to_string(r.event) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Execution

std::int64_t group_execute_tile(const StencilOperator& op, Grid3D& g, int start_parity,
                                const WavefrontPlan& plan, GroupContext& ctx,
                                bool skip_updates) {
  const int nx = g.nx();
  std::int64_t barriers = 0;
  for (const auto& e : plan.entries) {
    if (!skip_updates) {
      const auto share = member_share(e, ctx.size(), ctx.member());
      const int src = (start_parity + e.t) & 1;
      const int yw = e.y_end - e.y_begin;
      for (auto row = share.first; row < share.last; ++row) {
        const int z = e.z_begin + static_cast<int>(row / yw);
        const int y = e.y_begin + static_cast<int>(row % yw);
        op.update_row(g, src, z, y, 0, nx);
      }
    }
    if (ctx.size() > 1) {
      ctx.sync();
      ++barriers;
    }
  }
  return barriers;
}

namespace {

class Engine {
 public:
  Engine(const StencilOperator& op, Grid3D& g, const Tessellation& tess,
         std::span<const int> tiles, const ThreadGroupConfig& cfg, int n_f,
         const RunOptions& options, const TileHooks* hooks, SequenceCounter* sequence,
         AbortToken* abort)
      : op_(op),
        g_(g),
        tess_(tess),
        cfg_(cfg),
        options_(options),
        hooks_(hooks),
        sequence_(sequence ? sequence : &own_sequence_),
        abort_(abort ? abort : &own_abort_),
        queue_(tess, tiles),
        start_parity_(g.newest()),
        slots_(cfg.n_groups, -1) {
    plans_.resize(tess.tile_count());
    const auto build = [&](int id) {
      plans_[id] = build_wavefront_plan(tess.tile(id), tess, g.nz(), n_f, cfg.group_size);
    };
    if (tiles.empty()) {
      for (int id = 0; id < tess.tile_count(); ++id) build(id);
    } else {
      for (int id : tiles) build(id);
    }
    for (int i = 0; i < cfg.n_groups; ++i) {
      barriers_.push_back(std::make_unique<GroupBarrier>(cfg.group_size));
    }
    group_records_.resize(cfg.n_groups);
    times_.resize(cfg.total_threads());
    waker_ = abort_->on_abort([this] {
      for (auto& b : barriers_) b->poison();
      queue_.wake_all();
    });
  }

  ~Engine() { abort_->remove_waker(waker_); }

  ExecutionLog run() {
    origin_ = Clock::now();
    {
      std::vector<std::jthread> workers;
      workers.reserve(cfg_.total_threads());
      for (int gi = 0; gi < cfg_.n_groups; ++gi) {
        for (int m = 0; m < cfg_.group_size; ++m) {
          workers.emplace_back([this, gi, m] { worker(gi, m); });
        }
      }
    }
    const auto end = Clock::now();
    if (abort_->aborted()) {
      if (auto cause = abort_->cause()) std::rethrow_exception(cause);
      throw Aborted{};
    }
    ExecutionLog log;
    log.wall_ns = ns_since(origin_, end);
    for (auto& recs : group_records_) {
      for (auto& r : recs) log.records.push_back(r);
    }
    std::sort(log.records.begin(), log.records.end(),
              [](const LogRecord& a, const LogRecord& b) { return a.t_start_ns < b.t_start_ns; });
    log.threads = times_;
    log.lups = lups_.load();
    log.barriers = barrier_count_.load();
    log.pops = queue_.pops();
    log.tiles_run = tiles_run_.load();
    if (!queue_.done()) throw InternalError("engine stopped with unfinished tiles");
    return log;
  }

 private:
  // Leader-side: wait until a tile is available or everything is done.
  int acquire_tile() {
    int spins = 0;
    while (true) {
      if (abort_->aborted()) return -1;
      auto id = (hooks_ && hooks_->eligible) ? queue_.try_pop(hooks_->eligible) : queue_.try_pop();
      if (id) return *id;
      if (queue_.done()) return -1;
      if (spins < 16) {
        ++spins;
        std::this_thread::yield();
      } else {
        queue_.wait_for_work(options_.idle_backoff, hooks_ && hooks_->eligible);
      }
    }
  }

  void worker(int gi, int member) {
    const int ti = gi * cfg_.group_size + member;
    auto& tt = times_[ti];
    tt.group = gi;
    tt.member = member;
    GroupContext ctx(gi, member, cfg_.group_size, barriers_[gi].get());
    auto last = Clock::now();
    const auto thread_start = last;
    auto charge = [&](std::int64_t& bucket) {
      const auto now = Clock::now();
      bucket += std::chrono::duration_cast<std::chrono::nanoseconds>(now - last).count();
      last = now;
      return now;
    };
    try {
      while (true) {
        if (ctx.leader()) {
          const auto wait_start = last;
          slots_[gi] = acquire_tile();
          const auto now = charge(tt.queue_wait_ns);
          if (now - wait_start > std::chrono::microseconds(1) && slots_[gi] >= 0) {
            group_records_[gi].push_back({gi, slots_[gi], ns_since(origin_, wait_start),
                                          ns_since(origin_, now), LogEvent::kQueueWait});
          }
        }
        ctx.sync();
        charge(tt.queue_wait_ns);
        const int id = slots_[gi];
        if (id < 0) break;
        const auto& tile = tess_.tile(id);
        LogRecord rec;
        if (ctx.leader()) {
          rec.group = gi;
          rec.tile = id;
          rec.t_start_ns = ns_since(origin_, last);
          rec.seq_start = sequence_->fetch_add(1);
        }
        if (hooks_ && hooks_->before) {
          hooks_->before(ctx, tile);
          charge(tt.comm_ns);
        }
        const bool skip = options_.skip_tile && *options_.skip_tile == id;
        const auto& plan = plans_[id];
        const int nx = g_.nx();
        std::int64_t barriers = 0;
        for (const auto& e : plan.entries) {
          if (!skip) {
            const auto share = member_share(e, ctx.size(), member);
            const int src = (start_parity_ + e.t) & 1;
            const int yw = e.y_end - e.y_begin;
            for (auto row = share.first; row < share.last; ++row) {
              op_.update_row(g_, src, e.z_begin + static_cast<int>(row / yw),
                             e.y_begin + static_cast<int>(row % yw), 0, nx);
            }
          }
          charge(tt.compute_ns);
          if (ctx.size() > 1) {
            ctx.sync();
            ++barriers;
            charge(tt.barrier_ns);
          }
        }
        // Finished as far as ordering goes: the after hook may already
        // release dependants on other ranks.
        if (ctx.leader()) rec.seq_end = sequence_->fetch_add(1);
        if (hooks_ && hooks_->after) {
          hooks_->after(ctx, tile);
          charge(tt.comm_ns);
        }
        if (ctx.leader()) {
          rec.barriers = barriers;
          rec.t_end_ns = ns_since(origin_, Clock::now());
          rec.event = LogEvent::kTile;
          group_records_[gi].push_back(rec);
          barrier_count_ += barriers;
          ++tiles_run_;
          if (!skip) lups_ += plan.row_updates() * nx;
          queue_.push_children(id);
          charge(tt.queue_wait_ns);
        }
      }
    } catch (const Aborted&) {
      abort_->abort();
    } catch (...) {
      abort_->abort(std::current_exception());
    }
    tt.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(last - thread_start).count();
  }

  const StencilOperator& op_;
  Grid3D& g_;
  const Tessellation& tess_;
  ThreadGroupConfig cfg_;
  RunOptions options_;
  const TileHooks* hooks_;
  SequenceCounter own_sequence_{0};
  AbortToken own_abort_;
  SequenceCounter* sequence_;
  AbortToken* abort_;
  ReadyQueue queue_;
  int start_parity_;
  std::size_t waker_ = 0;
  std::vector<WavefrontPlan> plans_;
  std::vector<std::unique_ptr<GroupBarrier>> barriers_;
  std::vector<int> slots_;
  std::vector<std::vector<LogRecord>> group_records_;
  std::vector<ThreadTimes> times_;
  Clock::time_point origin_;
  std::atomic<std::int64_t> lups_{0}, barrier_count_{0}, tiles_run_{0};
};

}  // namespace

ExecutionLog execute_tiles(const StencilOperator& op, Grid3D& g, const Tessellation& tess,
                           std::span<const int> tiles, const ThreadGroupConfig& cfg, int n_f,
                           const RunOptions& options, const TileHooks* hooks,
                           SequenceCounter* sequence, AbortToken* abort) {
  if (cfg.group_size < 1 || cfg.n_groups < 1) {
    throw UsageError("thread group config needs group_size >= 1 and n_groups >= 1");
  }
  if (n_f < 0) throw UsageError("extra frontline count must be >= 0");
  if (tess.ny() != g.ny()) {
    throw UsageError("tessellation covers ny = " + std::to_string(tess.ny()) +
                     " but the grid has ny = " + std::to_string(g.ny()));
  }
  if (tess.radius() < op.spec().radius) {
    throw UsageError("tessellation slope is shallower than the stencil radius");
  }
  if (!op.spec().wavefront_eligible()) {
    throw UsageError(std::string(to_string(op.spec().kind)) +
                     " is not supported by wavefront diamond blocking");
  }
  Engine engine(op, g, tess, tiles, cfg, n_f, options, hooks, sequence, abort);
  return engine.run();
}

ExecutionLog run_mwd(const StencilOperator& op, Grid3D& g, int steps, const Tessellation& tess,
                     const ThreadGroupConfig& cfg, int n_f, const RunOptions& options) {
  if (steps < 1) throw UsageError("time step count must be >= 1");
  if (tess.t_total() != steps) {
    throw UsageError("tessellation spans " + std::to_string(tess.t_total()) +
                     " steps but " + std::to_string(steps) + " were requested");
  }
  auto log = execute_tiles(op, g, tess, {}, cfg, n_f, options);
  g.advance(steps);
  return log;
}

}  // namespace mwd
