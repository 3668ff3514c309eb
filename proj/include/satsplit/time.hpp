#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace satsplit {

/// Virtual time since simulation start, in integer microseconds.
using SimTime = std::chrono::duration<std::uint64_t, std::micro>;

inline constexpr SimTime kZeroTime{0};

constexpr SimTime from_ms(std::uint64_t ms) { return SimTime{ms * 1000}; }
constexpr SimTime from_s(std::uint64_t s) { return SimTime{s * 1000000}; }

/// Milliseconds with exactly three decimals ("1620.000"); integer-only so the
/// text is identical on every platform.
inline std::string format_ms(SimTime t) {
  const auto us = t.count();
  std::string frac = std::to_string(us % 1000);
  frac.insert(0, 3 - frac.size(), '0');
  return std::to_string(us / 1000) + "." + frac;
}

}  // namespace satsplit
