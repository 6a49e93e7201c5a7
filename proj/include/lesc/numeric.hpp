#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

namespace lesc {

// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Logistic loss log(1 + exp(-y s)) for y in {-1, +1}, and its derivative in s.
inline double logistic_loss(double score, double y) { return softplus(-y * score); }
inline double logistic_grad(double score, double y) { return -y * sigmoid(-y * score); }

inline std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace lesc
