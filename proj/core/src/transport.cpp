#include <algorithm>
#include <atomic>
#include <bit>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <queue>
#include <random>
#include <thread>
#include <utility>

#include "mwd/distrib.hpp"
#include "mwd/error.hpp"

namespace mwd {

namespace {

void put_le(std::uint8_t* out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_le(const std::uint8_t* in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode(const HaloMessage& msg) {
  const std::uint64_t len = msg.byte_length();
  std::vector<std::uint8_t> frame(kFrameHeaderBytes + len);
  put_le(frame.data(), msg.src_rank, 4);
  put_le(frame.data() + 4, msg.dst_rank, 4);
  put_le(frame.data() + 8, msg.tile, 8);
  put_le(frame.data() + 16, len, 8);
  std::uint8_t* out = frame.data() + kFrameHeaderBytes;
  for (double d : msg.payload) {
    put_le(out, std::bit_cast<std::uint64_t>(d), 8);
    out += 8;
  }
  return frame;
}

HaloMessage decode(std::span<const std::uint8_t> frame) {
  if (frame.size() < kFrameHeaderBytes) throw ProtocolError("truncated frame header");
  HaloMessage msg;
  msg.src_rank = static_cast<std::uint32_t>(get_le(frame.data(), 4));
  msg.dst_rank = static_cast<std::uint32_t>(get_le(frame.data() + 4, 4));
  msg.tile = get_le(frame.data() + 8, 8);
  const std::uint64_t len = get_le(frame.data() + 16, 8);
  if (len != frame.size() - kFrameHeaderBytes) {
    throw ProtocolError("frame length field " + std::to_string(len) + " but " +
                        std::to_string(frame.size() - kFrameHeaderBytes) + " payload bytes");
  }
  if (len % sizeof(double) != 0) throw ProtocolError("payload is not a whole number of doubles");
  msg.payload.resize(len / sizeof(double));
  const std::uint8_t* in = frame.data() + kFrameHeaderBytes;
  for (auto& d : msg.payload) {
    d = std::bit_cast<double>(get_le(in, 8));
    in += 8;
  }
  return msg;
}

namespace {

using Clock = std::chrono::steady_clock;

class LoopbackTransport final : public Transport {
 public:
  LoopbackTransport(int p, LoopbackOptions options)
      : options_(options), boxes_(p), rng_(options.jitter_seed) {
    if (p < 1) throw UsageError("loopback transport needs at least one rank");
    if (options_.max_jitter.count() > 0) {
      courier_ = std::jthread([this](std::stop_token st) { deliver_loop(st); });
    }
  }

  ~LoopbackTransport() override {
    if (courier_.joinable()) {
      courier_.request_stop();
      { std::lock_guard lock(pending_mu_); }
      pending_cv_.notify_all();
    }
  }

  void send(const HaloMessage& msg) override {
    if (msg.dst_rank >= boxes_.size() || msg.src_rank >= boxes_.size()) {
      throw UsageError("message addressed outside the rank range");
    }
    auto frame = encode(msg);
    ++sent_;
    bytes_ += static_cast<std::int64_t>(msg.byte_length());
    if (options_.drop_tag && *options_.drop_tag == msg.tile) return;
    if (!courier_.joinable()) {
      deposit(msg.dst_rank, msg.src_rank, msg.tile, std::move(frame));
      return;
    }
    std::lock_guard lock(pending_mu_);
    const auto pair = std::make_pair(msg.src_rank, msg.dst_rank);
    std::uniform_int_distribution<std::int64_t> dist(0, options_.max_jitter.count());
    auto due = Clock::now() + std::chrono::microseconds(dist(rng_));
    // Never overtake an earlier message of the same pair.
    auto& last = last_due_[pair];
    if (due < last) due = last;
    last = due;
    pending_.push({due, seq_++, msg.dst_rank, msg.src_rank, msg.tile, std::move(frame)});
    pending_cv_.notify_all();
  }

  bool probe(int dst, int src, std::uint64_t tag) override {
    auto& box = boxes_.at(dst);
    std::lock_guard lock(box.mu);
    auto it = box.queues.find({src, tag});
    return it != box.queues.end() && !it->second.empty();
  }

  HaloMessage receive(int dst, int src, std::uint64_t tag,
                      std::chrono::milliseconds timeout) override {
    auto& box = boxes_.at(dst);
    std::unique_lock lock(box.mu);
    auto& q = box.queues[{src, tag}];
    if (!box.cv.wait_for(lock, timeout, [&] { return !q.empty(); })) {
      throw TransportError("halo receive from rank " + std::to_string(src) + " timed out", dst,
                           static_cast<int>(tag & 0xffffffffu));
    }
    auto frame = std::move(q.front());
    q.pop_front();
    lock.unlock();
    auto msg = decode(frame);
    if (msg.src_rank != static_cast<std::uint32_t>(src) ||
        msg.dst_rank != static_cast<std::uint32_t>(dst) || msg.tile != tag) {
      throw ProtocolError("frame header does not match its mailbox");
    }
    return msg;
  }

  std::int64_t messages_sent() const override { return sent_.load(); }
  std::int64_t bytes_sent() const override { return bytes_.load(); }

 private:
  struct Mailbox {
    std::mutex mu;
    std::condition_variable cv;
    std::map<std::pair<int, std::uint64_t>, std::deque<std::vector<std::uint8_t>>> queues;
  };

  struct Pending {
    Clock::time_point due;
    std::uint64_t seq;
    std::uint32_t dst, src;
    std::uint64_t tag;
    std::vector<std::uint8_t> frame;
    bool operator>(const Pending& o) const {
      return due != o.due ? due > o.due : seq > o.seq;
    }
  };

  void deposit(int dst, int src, std::uint64_t tag, std::vector<std::uint8_t> frame) {
    auto& box = boxes_[dst];
    {
      std::lock_guard lock(box.mu);
      box.queues[{src, tag}].push_back(std::move(frame));
    }
    box.cv.notify_all();
  }

  void deliver_loop(std::stop_token st) {
    std::unique_lock lock(pending_mu_);
    while (!st.stop_requested()) {
      if (pending_.empty()) {
        pending_cv_.wait(lock, [&] { return st.stop_requested() || !pending_.empty(); });
        continue;
      }
      const auto due = pending_.top().due;
      if (Clock::now() < due) {
        pending_cv_.wait_until(lock, due);
        continue;
      }
      auto item = std::move(const_cast<Pending&>(pending_.top()));
      pending_.pop();
      lock.unlock();
      deposit(item.dst, item.src, item.tag, std::move(item.frame));
      lock.lock();
    }
  }

  LoopbackOptions options_;
  std::vector<Mailbox> boxes_;
  std::atomic<std::int64_t> sent_{0}, bytes_{0};

  std::mutex pending_mu_;
  std::condition_variable pending_cv_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, Clock::time_point> last_due_;
  std::uint64_t seq_ = 0;
  std::mt19937_64 rng_;
  std::jthread courier_;
};

}  // namespace

std::unique_ptr<Transport> make_loopback_transport(int p, LoopbackOptions options) {
  return std::make_unique<LoopbackTransport>(p, options);
}

}  // namespace mwd
