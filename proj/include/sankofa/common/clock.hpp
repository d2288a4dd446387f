#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace sankofa {

/// Monotonic nanoseconds. Origin is clock-specific.
using Nanos = std::int64_t;

constexpr Nanos kNanosPerMilli = 1'000'000;
constexpr Nanos kNanosPerSecond = 1'000'000'000;

constexpr Nanos millis(std::int64_t ms) { return ms * kNanosPerMilli; }
constexpr Nanos seconds(std::int64_t s) { return s * kNanosPerSecond; }

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Nanos now() const = 0;
  /// Blocks until now() >= deadline.
  virtual void sleep_until(Nanos deadline) = 0;

  void sleep_for(Nanos duration) { sleep_until(now() + duration); }
};

class SteadyClock final : public Clock {
 public:
  Nanos now() const override;
  void sleep_until(Nanos deadline) override;

  static SteadyClock& instance();
};

/// Time only moves when someone sleeps on it or calls advance().
/// Lets timing-dependent code run deterministically and instantly.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(Nanos start = 0) : now_(start) {}

  Nanos now() const override { return now_.load(std::memory_order_acquire); }
  void sleep_until(Nanos deadline) override;
  void advance(Nanos duration) { now_.fetch_add(duration, std::memory_order_acq_rel); }

 private:
  std::atomic<Nanos> now_;
};

}  // namespace sankofa
