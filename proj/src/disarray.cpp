#include "fiberkit/fiberfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace fiberkit {

namespace {

// 53-bit uniform in (0, 1), fixed bit recipe so streams match across standard libraries.
double uniform01(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Best & Fisher (1979) rejection sampler on (-pi, pi].
double sample_von_mises(double kappa, std::mt19937_64& rng) {
  if (kappa < 1e-8) return kPi * (2.0 * uniform01(rng) - 1.0);
  if (kappa > 1e6) {
    double u1 = uniform01(rng), u2 = uniform01(rng);
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    return wrap_pi(z / std::sqrt(kappa));
  }
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  for (;;) {
    double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
    double z = std::cos(kPi * u1);
    double f = (1.0 + r * z) / (r + z);
    double c = kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      double th = std::acos(std::clamp(f, -1.0, 1.0));
      return u3 > 0.5 ? th : -th;
    }
  }
}

// E[h(Y/2)] for Y ~ VonMises(0, kappa), composite Simpson on (-pi, pi).
template <class H>
double vm_expect_half(double kappa, H&& h) {
  if (std::isinf(kappa)) return h(0.0);
  const int n = 4000;
  const double dy = 2.0 * kPi / n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= n; ++i) {
    double y = -kPi + i * dy;
    double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    double p = std::exp(kappa * (std::cos(y) - 1.0));
    num += wgt * p * h(0.5 * y);
    den += wgt * p;
  }
  return num / den;
}

double bisect_log_kappa(double target, double (*g)(double), bool decreasing) {
  double lo = -12.0, hi = 12.0;  // log10 kappa
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double v = g(std::pow(10.0, mid));
    bool go_up = decreasing ? (v > target) : (v < target);
    (go_up ? lo : hi) = mid;
  }
  return std::pow(10.0, 0.5 * (lo + hi));
}

double mean_abs_sin(double kappa) {
  return vm_expect_half(kappa, [](double e) { return std::abs(std::sin(e)); });
}
double mean_cos(double kappa) {
  return vm_expect_half(kappa, [](double e) { return std::cos(e); });
}

}  // namespace

double von_mises_resultant(double kappa) {
  if (!(kappa >= 0.0)) throw ValidationError("concentration must be non-negative");
  if (std::isinf(kappa)) return 1.0;
  if (kappa == 0.0) return 0.0;
  if (kappa > 500.0) {
    double k = kappa;
    return 1.0 - 1.0 / (2.0 * k) - 1.0 / (8.0 * k * k) - 1.0 / (8.0 * k * k * k);
  }
  return std::cyl_bessel_i(1.0, kappa) / std::cyl_bessel_i(0.0, kappa);
}

double kappa_for_circular_std(double std_rad) {
  if (!(std_rad >= 0.0)) throw ValidationError("circular std must be non-negative");
  if (std_rad == 0.0) return std::numeric_limits<double>::infinity();
  double R = resultant_from_circular_std(std_rad);
  double lo = -12.0, hi = 12.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (von_mises_resultant(std::pow(10.0, mid)) < R ? lo : hi) = mid;
  }
  return std::pow(10.0, 0.5 * (lo + hi));
}

TriadField synthesize_disarray(const FrameField& frames, const TriadField& base, const DisarrayNoise& noise,
                               std::uint64_t seed) {
  if (frames.size() != base.size()) throw ValidationError("frame and triad fields differ in length");
  if (!(noise.kappa_alpha > 0.0) || !(noise.kappa_gamma > 0.0))
    throw ValidationError("von Mises concentrations must be positive");
  if (!(noise.disorder_fraction >= 0.0 && noise.disorder_fraction <= 1.0))
    throw ValidationError("disorder fraction must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  TriadField out(base.size());
  constexpr double kGammaLimit = kPi / 2 - 1e-7;
  for (std::size_t i = 0; i < base.size(); ++i) {
    Angles a = fibers_to_angles(base[i], frames[i]);
    if (noise.disorder_fraction > 0.0 && uniform01(rng) < noise.disorder_fraction) {
      a.alpha = kPi * (2.0 * uniform01(rng) - 1.0);
      a.gamma = std::asin(2.0 * uniform01(rng) - 1.0);
    } else {
      if (!std::isinf(noise.kappa_alpha)) a.alpha += 0.5 * sample_von_mises(noise.kappa_alpha, rng);
      if (!std::isinf(noise.kappa_gamma)) a.gamma += 0.5 * sample_von_mises(noise.kappa_gamma, rng);
    }
    a = normalize_angles(a);
    a.gamma = std::clamp(a.gamma, -kGammaLimit, kGammaLimit);
    out[i] = angles_to_fibers(a, frames[i]);
  }
  return out;
}

ProjectionStats expected_projection(const DisarrayNoise& noise) {
  const double p = noise.disorder_fraction;
  const double ca = mean_cos(noise.kappa_alpha), cg = mean_cos(noise.kappa_gamma);
  const double sa = mean_abs_sin(noise.kappa_alpha), sg = mean_abs_sin(noise.kappa_gamma);
  // a uniformly random direction projects onto any fixed axis with mean 1/2
  return {(1 - p) * ca * cg + 0.5 * p, (1 - p) * sg + 0.5 * p, (1 - p) * sa * cg + 0.5 * p};
}

DisarrayNoise calibrate_projection_noise(const ProjectionStats& t) {
  const double smax = mean_abs_sin(0.0);
  if (!(t.mean_abs_fs > 0 && t.mean_abs_fn > 0 && t.mean_abs_ff < 1 && t.mean_abs_ff > 0.5))
    throw ValidationError("projection targets outside the reachable range");
  auto solve_for = [&](double p) {
    DisarrayNoise nz;
    nz.disorder_fraction = p;
    double sg = (t.mean_abs_fs - 0.5 * p) / (1 - p);
    if (!(sg > 0 && sg < smax)) throw ValidationError("sheet projection target unreachable");
    nz.kappa_gamma = bisect_log_kappa(sg, mean_abs_sin, true);
    double cg = mean_cos(nz.kappa_gamma);
    double sa = (t.mean_abs_fn - 0.5 * p) / ((1 - p) * cg);
    if (!(sa > 0 && sa < smax)) throw ValidationError("normal projection target unreachable");
    nz.kappa_alpha = bisect_log_kappa(sa, mean_abs_sin, true);
    return nz;
  };
  auto excess = [&](double p) { return expected_projection(solve_for(p)).mean_abs_ff - t.mean_abs_ff; };
  double lo = 0.0, hi = 2.0 * std::min(t.mean_abs_fs, t.mean_abs_fn) * (1 - 1e-9);
  if (excess(lo) < 0) throw ValidationError("fiber projection target is above what von Mises noise allows");
  if (excess(hi) > 0) throw ValidationError("fiber projection target unreachable");
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    (excess(mid) > 0 ? lo : hi) = mid;
  }
  return solve_for(0.5 * (lo + hi));
}

}  // namespace fiberkit
