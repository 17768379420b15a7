#ifndef FAUN_SRC_TIMER_HPP_
#define FAUN_SRC_TIMER_HPP_

#include <chrono>

namespace faun {

// Lap timer: lap() returns seconds since construction or the previous lap.
class Stopwatch {
 public:
  Stopwatch() : last_(Clock::now()) {}
  double lap() {
    const auto now = Clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  using Clock = std::chrono::steady_clock;
  Clock::time_point last_;
};

}  // namespace faun

#endif  // FAUN_SRC_TIMER_HPP_
