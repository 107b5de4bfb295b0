#include "fiberkit/circ0d.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fiberkit {

namespace {
void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}
bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0; }
}  // namespace

void ElastanceChamber::validate(const std::string& name) const {
  require(finite_nonneg(A) && finite_nonneg(B), name + ": elastances must be non-negative");
  require(finite_nonneg(V0), name + ": V0 must be non-negative");
  require(contraction > 0 && contraction < 1 && relaxation > 0 && relaxation < 1,
          name + ": contraction and relaxation durations must lie in (0, 1)");
  require(contraction + relaxation <= 1, name + ": contraction plus relaxation exceeds one period");
  require(std::isfinite(t0), name + ": onset must be finite");
}

double chamber_activation(const ElastanceChamber& ch, double t, double period) {
  double x = std::fmod(t / period - ch.t0, 1.0);
  if (x < 0) x += 1.0;
  if (x < ch.contraction) return 0.5 * (1.0 - std::cos(kPi * x / ch.contraction));
  x -= ch.contraction;
  if (x < ch.relaxation) return 0.5 * (1.0 + std::cos(kPi * x / ch.relaxation));
  return 0.0;
}

double chamber_pressure(const ElastanceChamber& ch, double V, double t, double period) {
  if (!(period > 0)) throw ValidationError("heartbeat period must be positive");
  return (ch.A + ch.B * chamber_activation(ch, t, period)) * (V - ch.V0);
}

void RLCCompartment::validate(const std::string& name) const {
  require(R > 0 && std::isfinite(R), name + ": R must be positive");
  require(C > 0 && std::isfinite(C), name + ": C must be positive");
  require(finite_nonneg(L), name + ": L must be non-negative");
  require(finite_nonneg(R_up), name + ": R_up must be non-negative");
}

void ValveModel::validate() const {
  require(R_min > 0 && R_min < R_max && std::isfinite(R_max), "valves: need 0 < R_min < R_max");
}

double valve_resistance(double dp, const ValveModel& v) { return dp > 0 ? v.R_min : v.R_max; }

const char* compartment_name(int c) {
  static const char* names[] = {"LA", "LV", "RA", "RV", "ARS", "VENS", "ARP", "VENP"};
  return c >= 0 && c < kNumCompartments ? names[c] : "?";
}

void CircParams::validate() const {
  require(period > 0 && std::isfinite(period), "heartbeat period must be positive");
  require(dt > 0 && dt <= period, "time step must lie in (0, period]");
  la.validate("LA");
  lv.validate("LV");
  ra.validate("RA");
  rv.validate("RV");
  ars.validate("systemic arterial");
  vens.validate("systemic venous");
  arp.validate("pulmonary arterial");
  venp.validate("pulmonary venous");
  valves.validate();
}

double CircState::total_volume() const {
  double s = 0.0;
  for (double v : V) s += v;
  return s;
}

CircState default_initial_state() {
  CircState s;
  s.V = {0.016, 0.026, 0.0025, 0.029, 0.059, 0.51, 0.017, 0.30};
  return s;
}

std::array<double, kNumCompartments> pressures(const CircParams& p, const CircState& s, const PressureLaw* lv_law) {
  std::array<double, kNumCompartments> P;
  P[kLA] = chamber_pressure(p.la, s.V[kLA], s.t, p.period);
  P[kLV] = lv_law && *lv_law ? (*lv_law)(s.V[kLV], s.t) : chamber_pressure(p.lv, s.V[kLV], s.t, p.period);
  P[kRA] = chamber_pressure(p.ra, s.V[kRA], s.t, p.period);
  P[kRV] = chamber_pressure(p.rv, s.V[kRV], s.t, p.period);
  P[kARS] = s.V[kARS] / p.ars.C;
  P[kVENS] = s.V[kVENS] / p.vens.C;
  P[kARP] = s.V[kARP] / p.arp.C;
  P[kVENP] = s.V[kVENP] / p.venp.C;
  return P;
}

CircState step(const CircParams& p, const CircState& s, double dt, const PressureLaw* lv_law) {
  if (!(dt > 0)) throw ValidationError("time step must be positive");
  const auto P = pressures(p, s, lv_law);
  auto valve = [&](double up, double down, double extra) {
    double dp = up - down;
    return dp / (valve_resistance(dp, p.valves) + extra);
  };
  const double q_av = valve(P[kLV], P[kARS], p.ars.R_up);
  const double q_mv = valve(P[kLA], P[kLV], 0.0);
  const double q_tv = valve(P[kRA], P[kRV], 0.0);
  const double q_pv = valve(P[kRV], P[kARP], p.arp.R_up);

  const RLCCompartment* rlc[kNumInductors] = {&p.ars, &p.vens, &p.arp, &p.venp};
  const int up[kNumInductors] = {kARS, kVENS, kARP, kVENP};
  const int down[kNumInductors] = {kVENS, kRA, kVENP, kLA};
  std::array<double, kNumInductors> Q = s.Q;
  for (int k = 0; k < kNumInductors; ++k)
    if (rlc[k]->L == 0.0) Q[k] = (P[up[k]] - P[down[k]]) / rlc[k]->R;

  std::array<double, kNumCompartments> dV;
  dV[kARS] = q_av - Q[kQARS];
  dV[kVENS] = Q[kQARS] - Q[kQVENS];
  dV[kRA] = Q[kQVENS] - q_tv;
  dV[kRV] = q_tv - q_pv;
  dV[kARP] = q_pv - Q[kQARP];
  dV[kVENP] = Q[kQARP] - Q[kQVENP];
  dV[kLA] = Q[kQVENP] - q_mv;
  dV[kLV] = q_mv - q_av;

  CircState n = s;
  n.t = s.t + dt;
  for (int c = 0; c < kNumCompartments; ++c) {
    n.V[c] = s.V[c] + dt * dV[c];
    if (!(n.V[c] > 0) || !std::isfinite(n.V[c])) {
      std::ostringstream os;
      os << "circulation diverged at t = " << n.t << " s in compartment " << compartment_name(c);
      throw SolverError(os.str(), n.V[c]);
    }
  }
  for (int k = 0; k < kNumInductors; ++k) {
    if (rlc[k]->L > 0.0)
      n.Q[k] = s.Q[k] + dt * (P[up[k]] - P[down[k]] - rlc[k]->R * s.Q[k]) / rlc[k]->L;
    else
      n.Q[k] = Q[k];
    if (!std::isfinite(n.Q[k])) throw SolverError("circulation diverged: non-finite flow", n.Q[k]);
  }
  return n;
}

LoopQoIs pvloop_qois(const PVLoop& loop, std::vector<std::string>* warnings) {
  if (loop.V.empty() || loop.V.size() != loop.P.size()) throw ValidationError("PV loop needs matching V and P samples");
  // first occurrence of each extremum: the start of the isovolumic phases
  const auto mn = std::min_element(loop.V.begin(), loop.V.end());
  const auto mx = std::max_element(loop.V.begin(), loop.V.end());
  const std::size_t ed = static_cast<std::size_t>(mx - loop.V.begin());
  const std::size_t es = static_cast<std::size_t>(mn - loop.V.begin());
  LoopQoIs q{loop.V[ed], loop.V[es], loop.P[ed], loop.P[es], 0.0};
  if (q.EDV > 0 && q.EDV > q.ESV) {
    q.EF = (q.EDV - q.ESV) / q.EDV;
  } else if (warnings) {
    warnings->push_back("flat PV loop: ejection fraction set to 0");
  }
  return q;
}

SimResult simulate(const CircParams& p, const CircState& init, const SimOptions& opts) {
  p.validate();
  if (opts.beats < 1) throw ValidationError("at least one beat must be simulated");
  if (opts.stride < 0) throw ValidationError("output stride must be non-negative");
  for (double v : init.V)
    if (!(v > 0)) throw ValidationError("initial volumes must be positive");
  const long n = std::max(1L, std::lround(p.period / p.dt));
  const double dt = p.period / static_cast<double>(n);
  const PressureLaw* law = opts.lv_law ? &opts.lv_law : nullptr;

  SimResult res;
  CircState s = init;
  const double t_start = init.t;
  for (int b = 0; b < opts.beats; ++b) {
    std::array<PVLoop, 4> loops;
    for (auto& l : loops) {
      l.t.reserve(n);
      l.V.reserve(n);
      l.P.reserve(n);
    }
    const double vol0 = s.total_volume();
    for (long i = 0; i < n; ++i) {
      s.t = t_start + static_cast<double>(b * n + i) * dt;
      const auto P = pressures(p, s, law);
      const int chambers[4] = {kLA, kLV, kRA, kRV};
      for (int c = 0; c < 4; ++c) {
        loops[c].t.push_back(s.t);
        loops[c].V.push_back(s.V[chambers[c]]);
        loops[c].P.push_back(P[chambers[c]]);
      }
      if (opts.stride > 0 && (b * n + i) % opts.stride == 0) res.trajectory.push_back({s.t, s.V, P, s.Q});
      s = step(p, s, dt, law);
    }
    s.t = t_start + static_cast<double>((b + 1) * n) * dt;
    res.max_volume_drift = std::max(res.max_volume_drift, std::abs(s.total_volume() - vol0) / vol0);
    res.lv_beats.push_back(pvloop_qois(loops[1], &res.warnings));
    res.rv_beats.push_back(pvloop_qois(loops[3], &res.warnings));
    if (opts.keep_ventricle_loops) {
      res.lv_loops.push_back(loops[1]);
      res.rv_loops.push_back(loops[3]);
    }
    if (b + 1 == opts.beats) res.last_loops = std::move(loops);
  }
  if (res.lv_beats.size() >= 2) {
    const LoopQoIs& a = res.lv_beats[res.lv_beats.size() - 2];
    const LoopQoIs& c = res.lv_beats.back();
    res.limit_cycle_change = std::max(std::abs(c.EDV - a.EDV) / c.EDV, std::abs(c.ESV - a.ESV) / c.ESV);
  }
  std::sort(res.warnings.begin(), res.warnings.end());
  res.warnings.erase(std::unique(res.warnings.begin(), res.warnings.end()), res.warnings.end());
  res.final_state = s;
  return res;
}

}  // namespace fiberkit
