#pragma once

#include <Eigen/Dense>

#include <climits>
#include <cstdint>
#include <exception>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace fiberkit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using ScalarField = std::vector<double>;
using VectorField = std::vector<Vec3>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegenerateEps = 1e-8;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

const char* version();

// Error hierarchy. The CLI maps Usage-like errors to exit 2 and numeric ones to exit 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool is_usage_error() const { return false; }
};

class DegeneracyError : public Error {
 public:
  explicit DegeneracyError(const std::string& what, long index = -1)
      : Error(index >= 0 ? what + " (node " + std::to_string(index) + ")" : what), index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  explicit SolverError(const std::string& what) : Error(what), residual_(0.0) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
  bool is_usage_error() const override { return true; }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  long line() const { return line_; }
  bool is_usage_error() const override { return true; }

 private:
  long line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  bool is_usage_error() const override { return true; }
};

class IoError : public Error {
 public:
  using Error::Error;
  bool is_usage_error() const override { return true; }
};

// Wrap to (-pi, pi].
double wrap_pi(double a);
// Wrap to (-pi/2, pi/2]; direction data has period pi.
double wrap_half_pi(double a);

// Stable 64-bit FNV-1a, used for config hashes in provenance headers.
std::uint64_t fnv1a64(const std::string& data);
std::string hex64(std::uint64_t v);

// Thread count for the parallel loops: explicit value, else FIBERKIT_THREADS, else hardware.
int resolve_threads(int requested);
void set_threads(int n);

// OpenMP loop over [0, n). If iterations throw, the exception from the lowest index is rethrown,
// so failures are reported identically for any thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::exception_ptr err;
  long err_index = LONG_MAX;
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(fiberkit_parallel_for)
      {
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace fiberkit
