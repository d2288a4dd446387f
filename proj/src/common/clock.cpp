#include "sankofa/common/clock.hpp"

#include <thread>

namespace sankofa {

Nanos SteadyClock::now() const {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void SteadyClock::sleep_until(Nanos deadline) {
  const Nanos remaining = deadline - now();
  if (remaining > 0) std::this_thread::sleep_for(std::chrono::nanoseconds(remaining));
}

SteadyClock& SteadyClock::instance() {
  static SteadyClock clock;
  return clock;
}

void VirtualClock::sleep_until(Nanos deadline) {
  Nanos current = now_.load(std::memory_order_acquire);
  while (current < deadline &&
         !now_.compare_exchange_weak(current, deadline, std::memory_order_acq_rel)) {
  }
}

}  // namespace sankofa
