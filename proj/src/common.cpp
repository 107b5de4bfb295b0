#include "fiberkit/common.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>

namespace fiberkit {

const char* version() { return FIBERKIT_VERSION; }

double wrap_pi(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

double wrap_half_pi(double a) {
  double r = std::remainder(a, kPi);
  if (r <= -kPi / 2) r += kPi;
  return r;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FIBERKIT_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw ConfigError(std::string("FIBERKIT_THREADS must be a positive integer, got '") + env + "'");
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void set_threads(int n) {
  omp_set_num_threads(n > 0 ? n : 1);
  Eigen::setNbThreads(n > 0 ? n : 1);
}

}  // namespace fiberkit
