#pragma once

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <vector>

namespace lightrdl {

/// Monotonic wall clock.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  void reset() { start_ = std::chrono::steady_clock::now(); }
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

/// Runs `fn` once to warm up, then `repeats` timed times; returns the median seconds.
template <typename Fn>
double time_median(int repeats, Fn&& fn) {
  fn();
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(repeats));
  for (int i = 0; i < repeats; ++i) {
    Stopwatch clock;
    fn();
    samples.push_back(clock.seconds());
  }
  return median(std::move(samples));
}

}  // namespace lightrdl
