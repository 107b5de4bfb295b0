#pragma once

#include "fiberkit/common.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

// Units at this layer: mL, mmHg, s.
namespace fiberkit {

struct ElastanceChamber {
  double A = 0.0;            // passive elastance, mmHg/mL
  double B = 0.0;            // active elastance amplitude, mmHg/mL
  double V0 = 0.0;           // mL
  double t0 = 0.0;           // activation onset, fraction of period
  double contraction = 0.3;  // fraction of period
  double relaxation = 0.3;   // fraction of period
  void validate(const std::string& name) const;
};

// Raised-cosine activation in [0, 1], periodic in the heartbeat period.
double chamber_activation(const ElastanceChamber& ch, double t, double period);
// P = (A + B e(t)) (V - V0)
double chamber_pressure(const ElastanceChamber& ch, double V, double t, double period);

struct RLCCompartment {
  double R = 1.0;     // mmHg s/mL
  double C = 1.0;     // mL/mmHg
  double L = 0.0;     // mmHg s^2/mL
  double R_up = 0.0;  // added to the inflow valve resistance
  void validate(const std::string& name) const;
};

struct ValveModel {
  double R_min = 7.5;
  double R_max = 75000.0;
  void validate() const;
};

// R_min for forward pressure drop, R_max otherwise (closed at dp == 0).
double valve_resistance(double dp, const ValveModel& v);

enum Compartment : int { kLA = 0, kLV, kRA, kRV, kARS, kVENS, kARP, kVENP, kNumCompartments };
enum Inductor : int { kQARS = 0, kQVENS, kQARP, kQVENP, kNumInductors };
const char* compartment_name(int c);

struct CircParams {
  double period = 0.2;  // s
  double dt = 2e-5;     // s
  ElastanceChamber la{140, 360, 0.0008, 0.85, 0.36, 0.36};
  ElastanceChamber lv{150, 8000, 0.01, 0.3, 0.3, 0.2};
  ElastanceChamber ra{1000, 40, 0.0008, 0.83, 0.38, 0.38};
  ElastanceChamber rv{60, 1200, 0.01, 0.3, 0.3, 0.2};
  RLCCompartment ars{500, 0.0008, 2.064, 0.0};
  RLCCompartment vens{400, 0.0145, 0.2064, 0.0};
  RLCCompartment arp{5.216, 0.0024, 0.2064, 0.0};
  RLCCompartment venp{55.45, 0.0387, 0.2064, 0.0};
  ValveModel valves;
  void validate() const;
};

struct CircState {
  std::array<double, kNumCompartments> V{};
  std::array<double, kNumInductors> Q{};
  double t = 0.0;
  double total_volume() const;
};

// Physiological starting point for the default parameters.
CircState default_initial_state();

// Replaces the LV elastance law, e.g. with an emulator P(V, t).
using PressureLaw = std::function<double(double V, double t)>;

std::array<double, kNumCompartments> pressures(const CircParams& p, const CircState& s,
                                               const PressureLaw* lv_law = nullptr);
// One explicit Euler step; throws SolverError on a non-finite or non-positive volume.
CircState step(const CircParams& p, const CircState& s, double dt, const PressureLaw* lv_law = nullptr);

struct PVLoop {
  std::vector<double> t, V, P;
};

struct LoopQoIs {
  double EDV = 0, ESV = 0, EDP = 0, ESP = 0, EF = 0;
};

// End diastole at the maximal-volume sample, end systole at the minimal one.
LoopQoIs pvloop_qois(const PVLoop& loop, std::vector<std::string>* warnings = nullptr);

struct SimOptions {
  int beats = 30;
  int stride = 50;               // trajectory output every stride steps (0 = none)
  bool keep_ventricle_loops = false;
  PressureLaw lv_law;            // empty: elastance model
};

struct TrajectorySample {
  double t;
  std::array<double, kNumCompartments> V, P;
  std::array<double, kNumInductors> Q;
};

struct SimResult {
  std::vector<TrajectorySample> trajectory;
  std::array<PVLoop, 4> last_loops;          // LA, LV, RA, RV over the final beat
  std::vector<PVLoop> lv_loops, rv_loops;    // per beat, if requested
  std::vector<LoopQoIs> lv_beats, rv_beats;  // QoIs of every beat
  double limit_cycle_change = 0.0;           // max relative change of LV (EDV, ESV) over the last two beats
  double max_volume_drift = 0.0;             // max relative change of total volume over a beat
  CircState final_state;
  std::vector<std::string> warnings;
};

SimResult simulate(const CircParams& p, const CircState& init, const SimOptions& opts);

// ---- PV-loop emulator ----

// P_ED(V) = k (exp(b (V - V0)) - 1) / b, linear limit k (V - V0) at b = 0.
struct EdpvrCurve {
  double k = 0, b = 0, V0 = 0;
  double operator()(double V) const;
};

// P_ES(V) = E (V - V0)
struct EspvrCurve {
  double E = 0, V0 = 0;
  double operator()(double V) const { return E * (V - V0); }
};

struct EmulatorFit {
  EdpvrCurve edpvr;
  EspvrCurve espvr;
  double period = 0.2;
  std::vector<double> phase, phi;  // phi_act at sorted phases in [0, period)
  double a_xb = 0.0;               // contractility the loops were generated with, 0 if unknown
  double activation(double t) const;
};

struct EmulatorFitOptions {
  double period = 0.2;
  // diastolic samples: phase fraction in [start, end), wrapping through 1
  double diastole_start = 0.8, diastole_end = 0.3;
  double separation_tol = 1e-6;  // mmHg, minimum P_ES - P_ED
};

EmulatorFit emulator_fit(const std::vector<PVLoop>& loops, const EmulatorFitOptions& opts);
// (1 - phi(t)) P_ED(V) + phi(t) P_ES(V)
double emulator_pressure(double V, double t, const EmulatorFit& fit);

struct ParametricEmulator {
  EmulatorFit fit_a, fit_b;
  double a_a = 0, a_b = 1;
  double pressure(double V, double t, double a) const;
};
ParametricEmulator make_parametric_emulator(EmulatorFit fit_a, EmulatorFit fit_b, double a_a, double a_b);

struct CalibrationOptions {
  double lower = 0, upper = 0;  // search bounds; default to the emulator pair
  int beats = 10;
  std::array<double, 4> weights{1, 1, 1, 1};  // EDV, ESV, EDP, ESP
  double rel_tol = 1e-7;
  int scan_points = 25;  // per level of the two bracketing scans
};

struct CalibrationResult {
  double a = 0;
  double objective = 0;
  bool on_boundary = false;
  int evaluations = 0;
  LoopQoIs qois;
  std::vector<std::string> warnings;
};

// QoIs of the LV loop after opts.beats beats from `init`, with the LV driven by the emulator at a.
LoopQoIs emulated_qois(const ParametricEmulator& em, double a, const CircParams& p, const CircState& init, int beats);
// Weighted relative QoI mismatch minimized by two grid scans and a golden-section refinement.
CalibrationResult calibrate_axb(const LoopQoIs& target, const ParametricEmulator& em, const CircParams& p,
                                const CircState& init, const CalibrationOptions& opts);

std::string emulator_to_json(const EmulatorFit& fit, const std::string& provenance);
EmulatorFit emulator_from_json(const std::string& text);

}  // namespace fiberkit
