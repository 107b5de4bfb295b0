#include "fiberkit/circ0d.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace fiberkit {

double EdpvrCurve::operator()(double V) const {
  const double u = V - V0;
  if (std::abs(b * u) < 1e-8) return k * u * (1.0 + 0.5 * b * u);
  return k * std::expm1(b * u) / b;
}

namespace {

double phase_fraction(double t, double period) {
  double x = std::fmod(t / period, 1.0);
  return x < 0 ? x + 1.0 : x;
}

// Levenberg-Marquardt on (k, b, V0), started from the linear least-squares fit.
EdpvrCurve fit_edpvr(const std::vector<double>& V, const std::vector<double>& P) {
  const std::size_t n = V.size();
  if (n < 3) throw DataError("EDPVR fit needs at least three diastolic samples");
  double mv = 0, mp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mv += V[i];
    mp += P[i];
  }
  mv /= n;
  mp /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (V[i] - mv) * (V[i] - mv);
    sxy += (V[i] - mv) * (P[i] - mp);
  }
  if (sxx <= 0) throw DataError("diastolic samples span no volume range");
  EdpvrCurve c;
  c.k = sxy / sxx;
  if (c.k == 0) throw DataError("diastolic pressure does not vary with volume");
  c.b = 0.0;
  c.V0 = mv - mp / c.k;

  auto residuals = [&](const EdpvrCurve& cv, Eigen::VectorXd& r, Eigen::MatrixXd* Jac) {
    r.resize(n);
    if (Jac) Jac->resize(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = V[i] - cv.V0, bu = cv.b * u;
      double g, dg, e = std::exp(bu);
      if (std::abs(bu) < 1e-5) {
        g = u * (1.0 + bu / 2.0 + bu * bu / 6.0);
        dg = u * u * (0.5 + bu / 3.0 + bu * bu / 8.0);
      } else {
        g = std::expm1(bu) / cv.b;
        dg = (bu * e - std::expm1(bu)) / (cv.b * cv.b);
      }
      r[i] = cv.k * g - P[i];
      if (Jac) {
        (*Jac)(i, 0) = g;
        (*Jac)(i, 1) = cv.k * dg;
        (*Jac)(i, 2) = -cv.k * e;
      }
    }
  };
  Eigen::VectorXd r;
  Eigen::MatrixXd Jm;
  residuals(c, r, &Jm);
  double cost = r.squaredNorm(), mu = 1e-3;
  for (int it = 0; it < 500 && cost > 0; ++it) {
    Eigen::Matrix3d H = Jm.transpose() * Jm;
    Eigen::Vector3d g = Jm.transpose() * r;
    Eigen::Matrix3d A = H;
    for (int d = 0; d < 3; ++d) A(d, d) += mu * std::max(H(d, d), 1e-300);
    Eigen::Vector3d delta = A.ldlt().solve(-g);
    EdpvrCurve trial{c.k + delta[0], c.b + delta[1], c.V0 + delta[2]};
    Eigen::VectorXd rt;
    residuals(trial, rt, nullptr);
    const double ct = rt.squaredNorm();
    if (std::isfinite(ct) && ct < cost) {
      const double gain = cost - ct;
      c = trial;
      cost = ct;
      residuals(c, r, &Jm);
      mu = std::max(mu / 3.0, 1e-15);
      if (gain <= 1e-30 * std::max(cost, 1e-300) || delta.norm() < 1e-15 * (1.0 + std::abs(c.V0))) break;
    } else {
      mu *= 4.0;
      if (mu > 1e15) break;
    }
  }
  return c;
}

// Iterated maximal-elastance corners: per loop, the sample maximizing P / (V - V0), then a line fit.
EspvrCurve fit_espvr(const std::vector<PVLoop>& loops) {
  if (loops.size() < 2) throw DataError("ESPVR fit needs at least two loops at different loads");
  EspvrCurve c{0.0, 0.0};
  double vmin = loops[0].V[0];
  for (const auto& l : loops)
    for (double v : l.V) vmin = std::min(vmin, v);
  c.V0 = std::min(0.0, vmin - 1e-6);
  std::vector<std::size_t> corner(loops.size(), static_cast<std::size_t>(-1));
  for (int it = 0; it < 200; ++it) {
    std::vector<std::size_t> next(loops.size());
    for (std::size_t j = 0; j < loops.size(); ++j) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < loops[j].V.size(); ++i) {
        const double dv = loops[j].V[i] - c.V0;
        if (dv <= 0) continue;
        const double ratio = loops[j].P[i] / dv;
        if (ratio > best) {
          best = ratio;
          next[j] = i;
        }
      }
      if (!std::isfinite(best)) throw DataError("ESPVR fit: loop lies below the volume intercept");
    }
    if (next == corner) break;
    corner = next;
    double mv = 0, mp = 0;
    for (std::size_t j = 0; j < loops.size(); ++j) {
      mv += loops[j].V[corner[j]];
      mp += loops[j].P[corner[j]];
    }
    mv /= loops.size();
    mp /= loops.size();
    double sxx = 0, sxy = 0;
    for (std::size_t j = 0; j < loops.size(); ++j) {
      const double dv = loops[j].V[corner[j]] - mv;
      sxx += dv * dv;
      sxy += dv * (loops[j].P[corner[j]] - mp);
    }
    if (sxx <= 0) throw DataError("ESPVR fit: end-systolic corners share one volume");
    c.E = sxy / sxx;
    if (!(c.E > 0)) throw DataError("ESPVR fit: non-positive end-systolic elastance");
    c.V0 = mv - mp / c.E;
  }
  return c;
}

double periodic_interp(const std::vector<double>& x, const std::vector<double>& y, double period, double t) {
  if (x.size() == 1) return y[0];
  const double tau = phase_fraction(t, period) * period;
  if (tau < x.front() || tau >= x.back()) {
    const double x0 = x.back(), x1 = x.front() + period;
    const double s = tau >= x.back() ? tau : tau + period;
    return y.back() + (s - x0) / (x1 - x0) * (y.front() - y.back());
  }
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), tau) - x.begin());
  return y[i - 1] + (tau - x[i - 1]) / (x[i] - x[i - 1]) * (y[i] - y[i - 1]);
}

}  // namespace

double EmulatorFit::activation(double t) const {
  if (phase.empty()) throw ValidationError("emulator fit has no activation samples");
  return periodic_interp(phase, phi, period, t);
}

EmulatorFit emulator_fit(const std::vector<PVLoop>& loops, const EmulatorFitOptions& opts) {
  if (!(opts.period > 0)) throw ValidationError("heartbeat period must be positive");
  for (const auto& l : loops)
    if (l.t.size() != l.V.size() || l.V.size() != l.P.size() || l.V.empty())
      throw ValidationError("PV loop samples must have matching t, V, P");
  EmulatorFit fit;
  fit.period = opts.period;

  std::vector<double> dv, dp;
  for (const auto& l : loops)
    for (std::size_t i = 0; i < l.t.size(); ++i) {
      const double x = phase_fraction(l.t[i], opts.period);
      const bool in = opts.diastole_start < opts.diastole_end
                          ? (x >= opts.diastole_start && x < opts.diastole_end)
                          : (x >= opts.diastole_start || x < opts.diastole_end);
      if (in) {
        dv.push_back(l.V[i]);
        dp.push_back(l.P[i]);
      }
    }
  fit.edpvr = fit_edpvr(dv, dp);
  fit.espvr = fit_espvr(loops);

  // phi_act per sample, averaged over loops sharing a phase
  std::map<long long, std::pair<double, int>> acc;
  const double quantum = opts.period * 1e-9;
  for (const auto& l : loops)
    for (std::size_t i = 0; i < l.t.size(); ++i) {
      const double ped = fit.edpvr(l.V[i]), pes = fit.espvr(l.V[i]);
      const double den = pes - ped;
      if (!(den > opts.separation_tol))
        throw DataError("degenerate separation: ESPVR and EDPVR meet at V = " + std::to_string(l.V[i]) + " mL");
      const double phi = std::clamp((l.P[i] - ped) / den, 0.0, 1.0);
      const long long key = std::llround(phase_fraction(l.t[i], opts.period) * opts.period / quantum);
      auto& slot = acc[key];
      slot.first += phi;
      slot.second += 1;
    }
  for (const auto& [key, v] : acc) {
    const double tau = static_cast<double>(key) * quantum;
    if (tau >= opts.period) continue;
    fit.phase.push_back(tau);
    fit.phi.push_back(v.first / v.second);
  }
  if (fit.phase.empty()) throw DataError("no activation samples");
  return fit;
}

double emulator_pressure(double V, double t, const EmulatorFit& fit) {
  const double phi = fit.activation(t);
  return (1.0 - phi) * fit.edpvr(V) + phi * fit.espvr(V);
}

ParametricEmulator make_parametric_emulator(EmulatorFit fit_a, EmulatorFit fit_b, double a_a, double a_b) {
  if (!(a_a != a_b) || !std::isfinite(a_a) || !std::isfinite(a_b))
    throw ValidationError("parametric emulator needs two distinct finite a_XB values");
  if (fit_a.period != fit_b.period) throw ValidationError("emulator fits use different heartbeat periods");
  return {std::move(fit_a), std::move(fit_b), a_a, a_b};
}

double ParametricEmulator::pressure(double V, double t, double a) const {
  const double pa = emulator_pressure(V, t, fit_a), pb = emulator_pressure(V, t, fit_b);
  return (a - a_a) / (a_b - a_a) * pb + (a - a_b) / (a_a - a_b) * pa;
}

LoopQoIs emulated_qois(const ParametricEmulator& em, double a, const CircParams& p, const CircState& init, int beats) {
  SimOptions so;
  so.beats = beats;
  so.stride = 0;
  so.lv_law = [&em, a](double V, double t) { return em.pressure(V, t, a); };
  return simulate(p, init, so).lv_beats.back();
}

CalibrationResult calibrate_axb(const LoopQoIs& target, const ParametricEmulator& em, const CircParams& p,
                                const CircState& init, const CalibrationOptions& opts) {
  double lo = opts.lower, hi = opts.upper;
  if (lo == 0 && hi == 0) {
    lo = std::min(em.a_a, em.a_b);
    hi = std::max(em.a_a, em.a_b);
  }
  if (!(lo < hi)) throw ValidationError("calibration bounds must satisfy lower < upper");
  if (opts.beats < 1) throw ValidationError("calibration needs at least one beat");
  CalibrationResult res;
  const double tq[4] = {target.EDV, target.ESV, target.EDP, target.ESP};
  auto objective = [&](double a) {
    ++res.evaluations;
    const LoopQoIs q = emulated_qois(em, a, p, init, opts.beats);
    const double v[4] = {q.EDV, q.ESV, q.EDP, q.ESP};
    double J = 0;
    for (int k = 0; k < 4; ++k) {
      const double scale = tq[k] != 0 ? std::abs(tq[k]) : 1.0;
      const double d = (v[k] - tq[k]) / scale;
      J += opts.weights[k] * d * d;
    }
    return J;
  };
  // QoIs taken at extremal samples make the objective jagged on a fine scale, so the basin is
  // located by two nested grid scans before the golden-section refinement.
  const double width = hi - lo;
  double best_a = lo, best_f = std::numeric_limits<double>::infinity();
  double a = lo, b = hi;
  for (int level = 0; level < 2; ++level) {
    const int n = std::max(3, opts.scan_points);
    const double step = (b - a) / (n - 1);
    int k_best = 0;
    double f_level = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      const double x = k == n - 1 ? b : a + k * step;
      const double f = objective(x);
      if (f < f_level) f_level = f, k_best = k;
      if (f < best_f) best_f = f, best_a = x;
    }
    const double centre = k_best == n - 1 ? b : a + k_best * step;
    a = std::max(lo, centre - step);
    b = std::min(hi, centre + step);
  }
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = objective(x1), f2 = objective(x2);
  while (b - a > opts.rel_tol * width) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = objective(x2);
    }
  }
  res.a = f1 <= f2 ? x1 : x2;
  res.objective = std::min(f1, f2);
  if (best_f < res.objective) {
    res.a = best_a;
    res.objective = best_f;
  }
  const double edge = 10.0 * opts.rel_tol * width;
  for (double bound : {lo, hi}) {
    if (std::abs(res.a - bound) <= edge) {
      res.a = bound;
      res.on_boundary = true;
      res.warnings.push_back("no interior minimum: a_XB at the search bound " + std::to_string(bound));
    }
  }
  res.qois = emulated_qois(em, res.a, p, init, opts.beats);
  return res;
}

std::string emulator_to_json(const EmulatorFit& fit, const std::string& provenance) {
  nlohmann::json j;
  j["provenance"] = provenance;
  j["period_s"] = fit.period;
  j["edpvr"] = {{"k", fit.edpvr.k}, {"b", fit.edpvr.b}, {"V0", fit.edpvr.V0}};
  j["espvr"] = {{"E", fit.espvr.E}, {"V0", fit.espvr.V0}};
  j["phase_s"] = fit.phase;
  j["phi_act"] = fit.phi;
  j["a_xb_pa"] = fit.a_xb;
  return j.dump(1) + "\n";
}

EmulatorFit emulator_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EmulatorFit f;
    f.period = j.at("period_s").get<double>();
    f.edpvr = {j.at("edpvr").at("k").get<double>(), j.at("edpvr").at("b").get<double>(),
               j.at("edpvr").at("V0").get<double>()};
    f.espvr = {j.at("espvr").at("E").get<double>(), j.at("espvr").at("V0").get<double>()};
    f.phase = j.at("phase_s").get<std::vector<double>>();
    f.phi = j.at("phi_act").get<std::vector<double>>();
    f.a_xb = j.value("a_xb_pa", 0.0);
    if (f.phase.size() != f.phi.size() || f.phase.empty()) throw ValidationError("emulator fit: bad activation table");
    if (!(f.period > 0)) throw ValidationError("emulator fit: period must be positive");
    if (!std::is_sorted(f.phase.begin(), f.phase.end())) throw ValidationError("emulator fit: phases must be sorted");
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("emulator fit: ") + e.what(), 0);
  }
}

}  // namespace fiberkit
