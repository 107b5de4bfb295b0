#include "fiberkit/circ0d.hpp"

#include <doctest.h>

#include <cmath>

using namespace fiberkit;

TEST_CASE("elastance chamber oracles") {
  ElastanceChamber ch{10.0, 50.0, 0.01, 0.2, 0.3, 0.3};
  for (double t : {0.0, 0.03, 0.07, 0.13}) CHECK(chamber_pressure(ch, ch.V0, t, 0.2) == 0.0);
  // e(t) = 0 outside the active window
  CHECK(chamber_activation(ch, 0.9 * 0.2, 0.2) == 0.0);
  CHECK(chamber_pressure(ch, ch.V0 + 0.0492, 0.9 * 0.2, 0.2) == doctest::Approx(0.492).epsilon(1e-12));

  CircParams p;
  const double T = p.period;
  double best = -1, tpk = 0;
  for (int i = 0; i < 20000; ++i) {
    const double t = i * T / 20000;
    const double e = chamber_activation(p.la, t, T);
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
    if (e > best) best = e, tpk = t / T;
  }
  CHECK(std::abs(tpk - std::fmod(0.85 + 0.36, 1.0)) < 1e-3);
  CHECK(best == doctest::Approx(1.0).epsilon(1e-6));

  for (double t : {0.013, 0.077, 0.191})
    CHECK(chamber_pressure(p.lv, 0.03, t, T) == chamber_pressure(p.lv, 0.03, t + T, T));
}

TEST_CASE("valve resistance oracles") {
  ValveModel v;
  CHECK(valve_resistance(1.0, v) == 7.5);
  CHECK(valve_resistance(-1.0, v) == 75000.0);
  CHECK(valve_resistance(0.0, v) == 75000.0);
}

TEST_CASE("parameter validation") {
  CircParams p;
  CHECK_NOTHROW(p.validate());
  p.ars.C = 0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = CircParams{};
  p.valves.R_max = 1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = CircParams{};
  p.lv.contraction = 1.2;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

namespace {

CircState equal_pressure_state(const CircParams& p, double p0) {
  CircState s;
  s.V[kLA] = p.la.V0 + p0 / p.la.A;
  s.V[kLV] = p.lv.V0 + p0 / p.lv.A;
  s.V[kRA] = p.ra.V0 + p0 / p.ra.A;
  s.V[kRV] = p.rv.V0 + p0 / p.rv.A;
  s.V[kARS] = p0 * p.ars.C;
  s.V[kVENS] = p0 * p.vens.C;
  s.V[kARP] = p0 * p.arp.C;
  s.V[kVENP] = p0 * p.venp.C;
  return s;
}

}  // namespace

TEST_CASE("equal pressures with closed valves is an equilibrium") {
  CircParams p;
  for (ElastanceChamber* ch : {&p.la, &p.lv, &p.ra, &p.rv}) ch->B = 0.0;
  const double p0 = 5.0;
  CircState s;
  s.V[kLA] = p.la.V0 + p0 / p.la.A;
  s.V[kLV] = p.lv.V0 + p0 / p.lv.A;
  s.V[kRA] = p.ra.V0 + p0 / p.ra.A;
  s.V[kRV] = p.rv.V0 + p0 / p.rv.A;
  s.V[kARS] = p0 * p.ars.C;
  s.V[kVENS] = p0 * p.vens.C;
  s.V[kARP] = p0 * p.arp.C;
  s.V[kVENP] = p0 * p.venp.C;
  CircState n = step(p, s, 1e-4);
  for (int c = 0; c < kNumCompartments; ++c) CHECK(n.V[c] == doctest::Approx(s.V[c]).epsilon(1e-15));
  for (int k = 0; k < kNumInductors; ++k) CHECK(n.Q[k] == 0.0);
}

TEST_CASE("divergence is reported") {
  CircParams p;
  CircState s = default_initial_state();
  CHECK_THROWS_AS(step(p, s, 10.0), SolverError);
}

TEST_CASE("baseline circulation reaches a limit cycle and conserves volume") {
  CircParams p;
  SimOptions o;
  o.stride = 0;
  SimResult r = simulate(p, default_initial_state(), o);
  CHECK(r.max_volume_drift < 1e-9);
  CHECK(r.limit_cycle_change < 1e-3);
  const LoopQoIs& lv = r.lv_beats.back();
  CHECK(std::isfinite(lv.EDV));
  CHECK(lv.EF > 0.0);
  CHECK(lv.EF < 1.0);
  CHECK(lv.EDV >= lv.ESV);
  // regression values of the baseline run
  CHECK(lv.EDV == doctest::Approx(0.03623).epsilon(2e-3));
  CHECK(lv.EF == doctest::Approx(0.444).epsilon(1e-2));
  CHECK(r.rv_beats.back().EF > 0.0);
}

TEST_CASE("no active elastance, no pumping") {
  CircParams p;
  for (ElastanceChamber* ch : {&p.la, &p.lv, &p.ra, &p.rv}) ch->B = 0.0;
  SimOptions o;
  o.stride = 0;
  o.beats = 3;
  SimResult r = simulate(p, equal_pressure_state(p, 5.0), o);
  CHECK(r.lv_beats.back().EF < 1e-12);
  CHECK(r.rv_beats.back().EF < 1e-12);
}

TEST_CASE("PV-loop QoIs") {
  PVLoop rect;
  rect.V = {0.05, 0.05, 0.02, 0.02};
  rect.P = {2, 80, 80, 2};
  rect.t = {0, 1, 2, 3};
  LoopQoIs q = pvloop_qois(rect);
  CHECK(q.EDV == 0.05);
  CHECK(q.ESV == 0.02);
  CHECK(q.EDP == 2);
  CHECK(q.ESP == 80);
  CHECK(q.EF == doctest::Approx(0.6));

  PVLoop flat{{0, 1}, {0.03, 0.03}, {1, 1}};
  std::vector<std::string> w;
  CHECK(pvloop_qois(flat, &w).EF == 0.0);
  CHECK(w.size() == 1);
}

TEST_CASE("emulator pressure identities") {
  EmulatorFit f;
  f.edpvr = {100.0, 0.0, 0.0};
  f.espvr = {2000.0, 0.0};
  f.period = 0.2;
  f.phase = {0.0, 0.1};
  f.phi = {0.0, 1.0};
  const double V = 0.02;  // P_ED = 2, P_ES = 40
  CHECK(emulator_pressure(V, 0.0, f) == f.edpvr(V));
  CHECK(emulator_pressure(V, 0.1, f) == f.espvr(V));
  CHECK(emulator_pressure(V, 0.05, f) == doctest::Approx(21.0));

  EmulatorFit g;
  g.edpvr = {2.0, 0.0, 0.0};
  g.espvr = {80.0, 0.0};
  g.period = 1.0;
  g.phase = {0.0};
  g.phi = {0.5};
  CHECK(emulator_pressure(1.0, 0.3, g) == doctest::Approx(41.0));
}

TEST_CASE("EDPVR curve: exponential form and linear limit") {
  EdpvrCurve c{150.0, 40.0, 0.01};
  CHECK(c(0.01) == 0.0);
  CHECK(c(0.03) == doctest::Approx(150.0 * std::expm1(40.0 * 0.02) / 40.0).epsilon(1e-14));
  EdpvrCurve lin{150.0, 0.0, 0.01};
  CHECK(lin(0.03) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("parametric emulator endpoints and midpoint") {
  EmulatorFit a, b;
  a.edpvr = {100, 20, 0.01};
  a.espvr = {3000, 0.008};
  a.phase = {0, 0.05, 0.1, 0.15};
  a.phi = {0, 0.4, 1.0, 0.2};
  b = a;
  b.espvr.E = 5000;
  b.phi = {0, 0.6, 0.9, 0.1};
  ParametricEmulator em = make_parametric_emulator(a, b, 20e6, 26e6);
  for (double t : {0.0, 0.031, 0.1, 0.17})
    for (double V : {0.015, 0.03}) {
      const double pa = emulator_pressure(V, t, a), pb = emulator_pressure(V, t, b);
      CHECK(em.pressure(V, t, 20e6) == pa);
      CHECK(em.pressure(V, t, 26e6) == pb);
      CHECK(em.pressure(V, t, 23e6) == doctest::Approx(0.5 * (pa + pb)).epsilon(1e-14));
    }
  CHECK_THROWS_AS(make_parametric_emulator(a, b, 1.0, 1.0), ValidationError);
}

TEST_CASE("emulator fit recovers synthetic curves and activation") {
  const double T = 0.2;
  const int n = 1000;
  EdpvrCurve ed{120.0, 30.0, 0.008};
  EspvrCurve es{4000.0, 0.006};
  auto phi_of = [](double x) {
    if (x < 0.3 || x >= 0.8) return 0.0;
    const double s = std::sin(kPi * (x - 0.3) / 0.5);
    return s * s;
  };
  std::vector<PVLoop> loops;
  for (int j = 0; j < 3; ++j) {
    PVLoop l;
    for (int i = 0; i < n; ++i) {
      const double t = i * T / n, x = static_cast<double>(i) / n;
      const double V = 0.025 + 0.004 * j + 0.008 * std::cos(2 * kPi * x);
      const double ph = phi_of(x);
      l.t.push_back(t);
      l.V.push_back(V);
      l.P.push_back((1 - ph) * ed(V) + ph * es(V));
    }
    loops.push_back(l);
  }
  EmulatorFitOptions o;
  o.period = T;
  EmulatorFit f = emulator_fit(loops, o);
  CHECK(f.edpvr.k == doctest::Approx(ed.k).epsilon(1e-4));
  CHECK(f.edpvr.b == doctest::Approx(ed.b).epsilon(1e-4));
  CHECK(f.edpvr.V0 == doctest::Approx(ed.V0).epsilon(1e-4));
  CHECK(f.espvr.E == doctest::Approx(es.E).epsilon(1e-4));
  CHECK(f.espvr.V0 == doctest::Approx(es.V0).epsilon(1e-4));
  double err = 0;
  for (std::size_t k = 0; k < f.phase.size(); ++k) err = std::max(err, std::abs(f.phi[k] - phi_of(f.phase[k] / T)));
  CHECK(err < 1e-6);
  for (double ph : f.phi) {
    CHECK(ph >= 0.0);
    CHECK(ph <= 1.0);
  }

  // at the end-diastolic (maximal volume) sample the activation is zero, at the corner one
  CHECK(f.activation(0.0) < 1e-6);
  CHECK(std::abs(f.activation(0.55 * T) - 1.0) < 1e-6);

  EmulatorFit back = emulator_from_json(emulator_to_json(f, "test"));
  CHECK(back.edpvr.k == f.edpvr.k);
  CHECK(back.espvr.V0 == f.espvr.V0);
  CHECK(back.phi == f.phi);

  CHECK_THROWS_AS(emulator_fit({loops[0]}, o), DataError);
  CHECK_THROWS_AS(emulator_from_json("{\"period_s\": 1}"), ParseError);
}

TEST_CASE("calibration: endpoint optimum and boundary warning") {
  CircParams p;
  auto fit_at = [&](double scale) {
    CircParams q = p;
    q.lv.B *= scale;
    std::vector<PVLoop> loops;
    for (double pre : {0.9, 1.0, 1.1}) {
      CircState s = default_initial_state();
      s.V[kVENS] *= pre;
      SimOptions o;
      o.beats = 8;
      o.stride = 0;
      loops.push_back(simulate(q, s, o).last_loops[1]);
    }
    EmulatorFitOptions fo;
    fo.period = p.period;
    fo.diastole_start = 0.8;
    fo.diastole_end = 0.3;
    return emulator_fit(loops, fo);
  };
  ParametricEmulator em = make_parametric_emulator(fit_at(20.0 / 23.0), fit_at(26.0 / 23.0), 20e6, 26e6);
  CalibrationOptions co;
  co.beats = 4;
  co.rel_tol = 1e-4;
  const LoopQoIs at_a = emulated_qois(em, 20e6, p, default_initial_state(), co.beats);
  CalibrationResult r = calibrate_axb(at_a, em, p, default_initial_state(), co);
  CHECK(r.a == doctest::Approx(20e6).epsilon(1e-3));

  const LoopQoIs beyond = emulated_qois(em, 35e6, p, default_initial_state(), co.beats);
  CalibrationResult rb = calibrate_axb(beyond, em, p, default_initial_state(), co);
  CHECK(rb.on_boundary);
  CHECK(rb.a == 26e6);
  CHECK_FALSE(rb.warnings.empty());
}
