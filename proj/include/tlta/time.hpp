#pragma once

#include <chrono>
#include <cmath>

namespace tlta {

// Simulation time; integral microseconds keep event ordering exact.
using SimTime = std::chrono::microseconds;

inline SimTime from_seconds(double s) { return SimTime{std::llround(s * 1e6)}; }
inline double to_seconds(SimTime t) { return static_cast<double>(t.count()) / 1e6; }

}  // namespace tlta
