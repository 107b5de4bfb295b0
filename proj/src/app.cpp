#include "fiberkit/app.hpp"

#include "fiberkit/circ0d.hpp"
#include "fiberkit/eikonal.hpp"
#include "fiberkit/fiberfield.hpp"
#include "fiberkit/frames.hpp"
#include "fiberkit/laplace.hpp"
#include "fiberkit/ldrbm.hpp"
#include "fiberkit/tissue.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fiberkit {

namespace fs = std::filesystem;

void OutputSet::text(const std::string& path, const std::string& content) {
  paths_.push_back(path);
  write_text_file(path, content);
}

void OutputSet::mesh(const MeshFile& f, const std::string& path) { text(path, mesh_to_text(f)); }

void OutputSet::csv(const CsvWriter& w, const std::string& path) { text(path, w.str() + '\n'); }

void OutputSet::remove_all() noexcept {
  for (const auto& p : paths_) {
    std::error_code ec;
    fs::remove(p, ec);
    fs::remove(p + ".partial", ec);
  }
  paths_.clear();
}

namespace {

DirichletSpec transmural_bcs() {
  return {{SurfaceLabel::Epi, 0.0}, {SurfaceLabel::EndoRV, -1.0}, {SurfaceLabel::EndoLV, 2.0}};
}
DirichletSpec apicobasal_bcs() { return {{SurfaceLabel::Apex, 0.0}, {SurfaceLabel::Base, 1.0}}; }

void put_triads(MeshFile& f, const TriadField& t, const std::string& suffix) {
  VectorField a(t.size()), b(t.size()), c(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    a[i] = t[i].f;
    b[i] = t[i].s;
    c[i] = t[i].n;
  }
  f.set_point_vector("fiber" + suffix, a);
  f.set_point_vector("sheet" + suffix, b);
  f.set_point_vector("normal" + suffix, c);
}

TriadField get_triads(const MeshFile& f, const std::string& suffix) {
  VectorField a = f.point_vector("fiber" + suffix), b = f.point_vector("sheet" + suffix),
              c = f.point_vector("normal" + suffix);
  TriadField t(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) t[i] = {a[i], b[i], c[i]};
  return t;
}

void put_frames(MeshFile& f, const FrameField& fr) {
  VectorField l(fr.size()), t(fr.size()), n(fr.size());
  for (std::size_t i = 0; i < fr.size(); ++i) {
    l[i] = fr[i].l;
    t[i] = fr[i].t;
    n[i] = fr[i].n;
  }
  f.set_point_vector("e_l", l);
  f.set_point_vector("e_t", t);
  f.set_point_vector("e_n", n);
}

FrameField get_frames(const MeshFile& f) {
  if (f.find_point("e_l") && f.find_point("e_t") && f.find_point("e_n")) {
    VectorField l = f.point_vector("e_l"), t = f.point_vector("e_t"), n = f.point_vector("e_n");
    FrameField fr(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) fr[i] = {l[i], t[i], n[i]};
    return fr;
  }
  return frame_field(f.mesh, f.point_scalar("phi"), f.point_scalar("psi")).frames;
}

void put_angles(MeshFile& f, const AngleField& a, const std::string& suffix, bool beta) {
  ScalarField al(a.size()), ga(a.size()), be(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    al[i] = rad2deg(a[i].alpha);
    ga[i] = rad2deg(a[i].gamma);
    be[i] = rad2deg(a[i].beta);
  }
  f.set_point_scalar("alpha" + suffix + "_deg", al);
  f.set_point_scalar("gamma" + suffix + "_deg", ga);
  if (beta) f.set_point_scalar("beta" + suffix + "_deg", be);
}

ScalarField to_deg(const ScalarField& v) {
  ScalarField o(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) o[i] = rad2deg(v[i]);
  return o;
}

struct Regions {
  std::vector<int> labels;
  std::vector<std::string> names;
};

// Region labels per node; regions without nodes are left out.
Regions make_regions(const std::string& mode, const TetMesh& m, const ScalarField& phi) {
  const std::size_t n = m.num_nodes();
  std::vector<int> raw(n, 0);
  std::vector<std::string> names;
  if (mode == "all") {
    names = {"all"};
  } else if (mode == "ventricles" || mode == "layers") {
    auto sides = node_sides(m, phi);
    if (mode == "ventricles") {
      names = {"LV", "RV"};
      for (std::size_t i = 0; i < n; ++i) raw[i] = sides[i] == RegionLabel::LV ? 0 : 1;
    } else {
      names = {"LV_endo", "LV_mid", "LV_epi", "RV_endo", "RV_mid", "RV_epi"};
      auto layers = layers_from_w(transmural_coordinate(phi));
      for (std::size_t i = 0; i < n; ++i)
        raw[i] = (sides[i] == RegionLabel::LV ? 0 : 3) + static_cast<int>(layers[i]);
    }
  } else {
    throw ValidationError("unknown region mode '" + mode + "' (expected all, ventricles or layers)");
  }
  std::vector<int> remap(names.size(), -1);
  std::vector<char> present(names.size(), 0);
  for (int r : raw) present[r] = 1;
  Regions out;
  for (std::size_t r = 0; r < names.size(); ++r)
    if (present[r]) {
      remap[r] = static_cast<int>(out.names.size());
      out.names.push_back(names[r]);
    }
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = remap[raw[i]];
  return out;
}

void add_histograms(CsvWriter& w, const std::string& quantity, const std::vector<RegionHistogram>& hs) {
  for (const auto& h : hs)
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      w.row().add(quantity).add(h.region).add(h.bin_centers_deg[b]).add(static_cast<long long>(h.counts[b]));
}

void add_summaries(CsvWriter& w, const std::string& quantity, const std::vector<RegionHistogram>& hs) {
  for (const auto& h : hs)
    w.row()
        .add(quantity)
        .add(h.region)
        .add(rad2deg(h.summary.mean))
        .add(rad2deg(h.summary.std))
        .add(static_cast<long long>(h.summary.count));
}

DisarrayNoise noise_from_config(const Config& cfg) {
  DisarrayNoise nz;
  nz.kappa_alpha = kappa_for_circular_std(deg2rad(cfg.fiber.alpha_noise_std_deg));
  nz.kappa_gamma = kappa_for_circular_std(deg2rad(cfg.fiber.gamma_noise_std_deg));
  nz.disorder_fraction = cfg.fiber.disorder_fraction;
  return nz;
}

std::vector<StimulationSite> stimuli_or_config(const std::vector<std::string>& specs, const Config& cfg) {
  if (specs.empty()) return cfg.eikonal.stimuli;
  std::vector<StimulationSite> out;
  for (const auto& s : specs) out.push_back(parse_stimulus(s));
  return out;
}

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string qoi_block(const std::string& chamber, const LoopQoIs& q) {
  std::ostringstream os;
  os << chamber << "_EDV_mL=" << format_double(q.EDV) << "\n"
     << chamber << "_ESV_mL=" << format_double(q.ESV) << "\n"
     << chamber << "_EDP_mmHg=" << format_double(q.EDP) << "\n"
     << chamber << "_ESP_mmHg=" << format_double(q.ESP) << "\n"
     << chamber << "_EF=" << format_double(q.EF) << "\n";
  return os.str();
}

CsvWriter trajectory_csv(const Provenance& prov, const SimResult& r) {
  CsvWriter w(prov, {"t_s", "compartment", "V_mL", "P_mmHg", "Q_out_mL_s"});
  const int inductor_of[kNumCompartments] = {-1, -1, -1, -1, kQARS, kQVENS, kQARP, kQVENP};
  for (const auto& s : r.trajectory)
    for (int c = 0; c < kNumCompartments; ++c) {
      w.row().add(s.t).add(compartment_name(c)).add(s.V[c]).add(s.P[c]);
      if (inductor_of[c] >= 0) w.add(s.Q[inductor_of[c]]);
      else w.add(std::string());
    }
  return w;
}

SimResult run_circulation(const Config& cfg, int beats, int stride) {
  SimOptions so;
  so.beats = beats;
  so.stride = stride;
  return simulate(cfg.circ.params, default_initial_state(), so);
}

EmulatorFitOptions fit_options_for(const ElastanceChamber& ch, double period) {
  EmulatorFitOptions o;
  o.period = period;
  o.diastole_start = std::fmod(ch.t0 + ch.contraction + ch.relaxation, 1.0);
  o.diastole_end = std::fmod(ch.t0, 1.0);
  return o;
}

// LV loops of the final beat at several preloads (systemic venous volume scaled).
std::vector<PVLoop> preload_loops(const CircParams& p, const std::vector<double>& scales, int beats) {
  std::vector<PVLoop> loops;
  for (double s : scales) {
    if (!(s > 0)) throw ValidationError("preload scales must be positive");
    CircState init = default_initial_state();
    init.V[kVENS] *= s;
    SimOptions so;
    so.beats = beats;
    so.stride = 0;
    loops.push_back(simulate(p, init, so).last_loops[1]);
  }
  return loops;
}

}  // namespace

PipelineSummary run_pipeline(const Config& cfg, const std::string& dir, const Provenance& prov, OutputSet& out) {
  fs::create_directories(dir);
  PipelineSummary sum;

  TetMesh mesh = generate_idealized_biventricle(cfg.geometry);
  sum.nodes = mesh.num_nodes();
  sum.tets = mesh.num_tets();
  MeshFile mf;
  mf.mesh = mesh;
  mf.title = prov.line();

  const ScalarField phi = solve_laplace(mesh, transmural_bcs(), cfg.laplace);
  const ScalarField psi = solve_laplace(mesh, apicobasal_bcs(), cfg.laplace);
  mf.set_point_scalar("phi", phi);
  mf.set_point_scalar("psi", psi);

  LdrbmResult ld = ldrbm_fibers(mesh, phi, psi, cfg.ldrbm);
  put_frames(mf, ld.frames);
  mf.set_point_scalar("w", ld.w);
  put_triads(mf, ld.triads, "");
  put_angles(mf, ld.angles, "", false);

  const TriadField measured = synthesize_disarray(ld.frames, ld.triads, noise_from_config(cfg), prov.seed);
  const AngleField meas_angles = fibers_to_angles(measured, ld.frames);
  put_triads(mf, measured, "_measured");
  put_angles(mf, meas_angles, "_measured", false);

  // smoothing sweep
  const std::size_t n = mesh.num_nodes();
  const std::vector<double> vol = nodal_volumes(mesh);
  double vsum = 0;
  for (double v : vol) vsum += v;
  auto mad = [&](const AngleField& a, bool gamma) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = gamma ? a[i].gamma - ld.angles[i].gamma : a[i].alpha - ld.angles[i].alpha;
      acc += vol[i] * std::abs(wrap_half_pi(d));
    }
    return rad2deg(acc / vsum);
  };
  CsvWriter sweep(prov, {"ell_m", "eps_alpha_std_deg", "eps_gamma_std_deg", "mad_alpha_raw_deg",
                         "mad_alpha_smoothed_deg", "mad_gamma_raw_deg", "mad_gamma_smoothed_deg", "proj_ff",
                         "proj_fs", "proj_fn", "proj_norm"});
  const double mad_a_raw = mad(meas_angles, false), mad_g_raw = mad(meas_angles, true);
  double ref_ell = cfg.fiber.ells.back();
  for (double e : cfg.fiber.ells)
    if (std::abs(e - 0.25e-3) < 1e-12) ref_ell = e;
  for (double ell : cfg.fiber.ells) {
    Decomposition d = decompose(mesh, meas_angles, ell, cfg.laplace);
    const TriadField macro = angles_to_fibers(d.macroscopic, ld.frames);
    const auto ps = projection_stats(mesh, measured, macro).global;
    const double sa = rad2deg(circular_summary(d.disarray.eps_alpha).std);
    const double sg = rad2deg(circular_summary(d.disarray.eps_gamma).std);
    sweep.row()
        .add(ell)
        .add(sa)
        .add(sg)
        .add(mad_a_raw)
        .add(mad(d.macroscopic, false))
        .add(mad_g_raw)
        .add(mad(d.macroscopic, true))
        .add(ps.mean_abs_ff)
        .add(ps.mean_abs_fs)
        .add(ps.mean_abs_fn)
        .add(ps.norm());
    if (ell == ref_ell) {
      sum.eps_alpha_std_deg = sa;
      sum.eps_gamma_std_deg = sg;
      put_angles(mf, d.macroscopic, "_macro", false);
      mf.set_point_scalar("eps_alpha_deg", to_deg(d.disarray.eps_alpha));
      mf.set_point_scalar("eps_gamma_deg", to_deg(d.disarray.eps_gamma));
    }
  }

  // angle distributions of the measured field per layer
  Regions reg = make_regions("layers", mesh, phi);
  ScalarField alpha(n), gamma(n);
  for (std::size_t i = 0; i < n; ++i) {
    alpha[i] = meas_angles[i].alpha;
    gamma[i] = meas_angles[i].gamma;
  }
  const auto ha = angle_statistics(alpha, reg.labels, reg.names, cfg.fiber.hist_bins);
  const auto hg = angle_statistics(gamma, reg.labels, reg.names, cfg.fiber.hist_bins);
  CsvWriter hist(prov, {"quantity", "region", "bin_center_deg", "count"});
  add_histograms(hist, "alpha", ha);
  add_histograms(hist, "gamma", hg);
  CsvWriter stats(prov, {"quantity", "region", "circular_mean_deg", "circular_std_deg", "count"});
  add_summaries(stats, "alpha", ha);
  add_summaries(stats, "gamma", hg);

  // activation
  const auto D = build_conductivity(mesh, ld.triads, cfg.eikonal.sigma);
  EikonalOptions eo;
  eo.tolerance = cfg.eikonal.tolerance;
  const EikonalResult eik = solve_eikonal(mesh, D, cfg.eikonal.c0, cfg.eikonal.stimuli, eo);
  mf.set_point_scalar("activation_time", eik.T);
  ScalarField iso(n);
  for (std::size_t i = 0; i < n; ++i) iso[i] = std::floor(eik.T[i] / cfg.eikonal.isochrone_spacing);
  mf.set_point_scalar("isochrone", iso);
  sum.activation_max_s = *std::max_element(eik.T.begin(), eik.T.end());

  // circulation
  const SimResult circ = run_circulation(cfg, cfg.circ.beats, cfg.circ.stride);
  const LoopQoIs lv = circ.lv_beats.back(), rv = circ.rv_beats.back();
  sum.lv_ef = lv.EF;
  CsvWriter traj = trajectory_csv(prov, circ);

  CsvWriter summary(prov, {"key", "value"});
  auto kv = [&](const std::string& k, double v) { summary.row().add(k).add(v); };
  kv("nodes", static_cast<double>(sum.nodes));
  kv("tets", static_cast<double>(sum.tets));
  kv("repaired_frames", static_cast<double>(ld.repaired_frames));
  kv("reference_ell_m", ref_ell);
  kv("eps_alpha_std_deg", sum.eps_alpha_std_deg);
  kv("eps_gamma_std_deg", sum.eps_gamma_std_deg);
  kv("activation_min_s", *std::min_element(eik.T.begin(), eik.T.end()));
  kv("activation_max_s", sum.activation_max_s);
  kv("eikonal_updates", static_cast<double>(eik.updates));
  kv("eikonal_final_sweep_updates", static_cast<double>(eik.final_sweep_updates));
  kv("eikonal_metric_obtuse_tets", static_cast<double>(eik.metric_obtuse_tets));
  kv("lv_EDV_mL", lv.EDV);
  kv("lv_ESV_mL", lv.ESV);
  kv("lv_EDP_mmHg", lv.EDP);
  kv("lv_ESP_mmHg", lv.ESP);
  kv("lv_EF", lv.EF);
  kv("rv_EDV_mL", rv.EDV);
  kv("rv_ESV_mL", rv.ESV);
  kv("rv_EF", rv.EF);
  kv("circ_limit_cycle_change", circ.limit_cycle_change);
  kv("circ_max_volume_drift", circ.max_volume_drift);

  out.mesh(mf, join_path(dir, "heart.vtk"));
  out.csv(sweep, join_path(dir, "ell_sweep.csv"));
  out.csv(hist, join_path(dir, "angle_histograms.csv"));
  out.csv(stats, join_path(dir, "angle_summary.csv"));
  out.csv(traj, join_path(dir, "circulation.csv"));
  out.csv(summary, join_path(dir, "summary.csv"));
  return sum;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"fiberkit: myocardial fiber architecture, activation and circulation toolkit"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));

  std::string config_path;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "INI configuration file (defaults apply to missing keys)");
  app.add_option("--threads", threads, "worker threads (default: FIBERKIT_THREADS or hardware)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "random seed (overrides run.seed)");

  // mesh
  auto* c_mesh = app.add_subcommand("mesh", "generate the idealized biventricular mesh");
  std::string mesh_out;
  std::optional<double> edge;
  c_mesh->add_option("--out", mesh_out, "output VTK file")->required();
  c_mesh->add_option("--edge-length", edge, "target edge length (m)");

  // laplace
  auto* c_lap = app.add_subcommand("laplace", "solve Laplace-Dirichlet problems on a mesh");
  std::string lap_in, lap_out, lap_name = "u";
  std::vector<std::string> lap_bcs;
  c_lap->add_option("--mesh", lap_in, "input mesh")->required();
  c_lap->add_option("--out", lap_out, "output mesh with fields")->required();
  c_lap->add_option("--bc", lap_bcs, "label=value (repeatable); without it phi and psi are solved");
  c_lap->add_option("--name", lap_name, "field name when --bc is given");

  // frames
  auto* c_fr = app.add_subcommand("frames", "build local (e_l, e_t, e_n) frames from phi and psi");
  std::string fr_in, fr_out;
  c_fr->add_option("--mesh", fr_in, "mesh with phi and psi")->required();
  c_fr->add_option("--out", fr_out, "output mesh")->required();

  // ldrbm
  auto* c_ld = app.add_subcommand("ldrbm", "rule-based fiber generation");
  std::string ld_in, ld_out;
  std::map<std::string, std::optional<double>> ld_angles;
  const char* ld_names[] = {"alpha-endo-lv", "alpha-epi-lv", "alpha-endo-rv", "alpha-epi-rv",
                            "gamma-endo-lv", "gamma-epi-lv", "gamma-endo-rv", "gamma-epi-rv"};
  c_ld->add_option("--mesh", ld_in, "mesh with phi and psi")->required();
  c_ld->add_option("--out", ld_out, "output mesh")->required();
  for (const char* nm : ld_names) c_ld->add_option(std::string("--") + nm, ld_angles[nm], "degrees");

  // smooth
  auto* c_sm = app.add_subcommand("smooth", "split a fiber field into macroscopic architecture and disarray");
  std::string sm_in, sm_out, sm_field = "fiber";
  double sm_ell = 0.25e-3;
  c_sm->add_option("--mesh", sm_in, "mesh with phi, psi and a triad field")->required();
  c_sm->add_option("--out", sm_out, "output mesh")->required();
  c_sm->add_option("--ell", sm_ell, "filter length (m)");
  c_sm->add_option("--field", sm_field, "triad prefix: <field>, sheet/normal use the same suffix");

  // disarray-stats
  auto* c_ds = app.add_subcommand("disarray-stats", "angle histograms, circular statistics, projection means");
  std::string ds_in, ds_out, ds_summary, ds_regions = "layers", ds_suffix = "", ds_reference;
  std::optional<int> ds_bins;
  c_ds->add_option("--mesh", ds_in, "mesh with phi, psi and a triad field")->required();
  c_ds->add_option("--out", ds_out, "histogram CSV")->required();
  c_ds->add_option("--summary", ds_summary, "circular mean/std and projection CSV");
  c_ds->add_option("--regions", ds_regions, "all, ventricles or layers");
  c_ds->add_option("--bins", ds_bins, "histogram bins over (-90, 90]");
  c_ds->add_option("--suffix", ds_suffix, "suffix of the measured triad arrays, e.g. _measured");
  c_ds->add_option("--reference", ds_reference, "suffix of the reference triad for projection means");

  // eikonal
  auto* c_ek = app.add_subcommand("eikonal", "anisotropic activation times");
  std::string ek_in, ek_out, ek_suffix = "";
  std::optional<double> ek_sf, ek_ss, ek_sn, ek_c0;
  std::vector<std::string> ek_stims;
  c_ek->add_option("--mesh", ek_in, "mesh with fiber/sheet/normal")->required();
  c_ek->add_option("--out", ek_out, "output mesh")->required();
  c_ek->add_option("--sigma-f", ek_sf, "m^2/s");
  c_ek->add_option("--sigma-s", ek_ss, "m^2/s");
  c_ek->add_option("--sigma-n", ek_sn, "m^2/s");
  c_ek->add_option("--c0", ek_c0, "s^-1/2");
  c_ek->add_option("--stim", ek_stims, "x,y,z,r,t (repeatable)");
  c_ek->add_option("--suffix", ek_suffix, "triad suffix");

  // strain
  auto* c_st = app.add_subcommand("strain", "Green-Lagrange invariants of a displacement field");
  std::string st_in, st_out, st_field = "displacement";
  c_st->add_option("--displacement", st_in, "mesh with a point vector displacement")->required();
  c_st->add_option("--out", st_out, "output mesh")->required();
  c_st->add_option("--field", st_field, "displacement array name");

  // constitutive-table
  auto* c_ct = app.add_subcommand("constitutive-table", "batch stress and energy evaluation");
  std::string ct_in, ct_out;
  c_ct->add_option("--in", ct_in, "CSV with F11..F33, f1..f3, s1..s3, n1..n3, Ta, m_f, m_s, m_n")->required();
  c_ct->add_option("--out", ct_out, "output CSV")->required();

  // circ
  auto* c_ci = app.add_subcommand("circ", "closed-loop circulation");
  std::string ci_out, ci_params, ci_summary;
  std::optional<int> ci_beats;
  c_ci->add_option("--out", ci_out, "trajectory CSV")->required();
  c_ci->add_option("--params", ci_params, "parameter file (same format as --config)");
  c_ci->add_option("--beats", ci_beats, "number of beats");
  c_ci->add_option("--summary", ci_summary, "key=value QoI file");

  // emulator
  auto* c_em = app.add_subcommand("emulator", "fit the PV-loop emulator of the LV");
  std::string em_out;
  std::vector<double> em_preload{0.9, 1.0, 1.1};
  std::optional<double> em_axb;
  int em_beats = 30;
  c_em->add_option("--out", em_out, "fit JSON")->required();
  c_em->add_option("--preload", em_preload, "systemic venous volume scales, one loop each")->delimiter(',');
  c_em->add_option("--axb", em_axb, "crossbridge stiffness (Pa); scales LV active elastance");
  c_em->add_option("--beats", em_beats, "beats per preload level");

  // calibrate-axb
  auto* c_ca = app.add_subcommand("calibrate-axb", "calibrate a_XB against target LV QoIs");
  std::string ca_a, ca_b, ca_out;
  std::vector<double> ca_target;
  std::optional<double> ca_target_axb, ca_lower, ca_upper;
  int ca_beats = 10;
  c_ca->add_option("--fit-a", ca_a, "emulator fit at a_A")->required();
  c_ca->add_option("--fit-b", ca_b, "emulator fit at a_B")->required();
  c_ca->add_option("--target", ca_target, "EDV,ESV,EDP,ESP (mL, mmHg)")->delimiter(',')->expected(4);
  c_ca->add_option("--target-axb", ca_target_axb, "generate the target from the emulator at this a_XB");
  c_ca->add_option("--lower", ca_lower, "lower bound (Pa)");
  c_ca->add_option("--upper", ca_upper, "upper bound (Pa)");
  c_ca->add_option("--beats", ca_beats, "beats per evaluation");
  c_ca->add_option("--out", ca_out, "result file (key=value)");

  // pipeline
  auto* c_pl = app.add_subcommand("pipeline", "end-to-end run on the idealized geometry");
  std::string pl_out;
  c_pl->add_option("--out", pl_out, "output directory (default run.output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  OutputSet out;
  try {
    Config cfg = config_path.empty() ? default_config() : load_config(config_path);
    if (c_ci->parsed() && !ci_params.empty()) cfg = load_config(ci_params);
    if (seed) cfg.run.seed = *seed;
    set_threads(resolve_threads(threads));
    const Provenance prov{config_hash(cfg), cfg.run.seed};
    std::vector<std::string> warnings;
    auto flush_warnings = [&] {
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      warnings.clear();
    };
    auto load = [&](const std::string& path) {
      MeshFile f = read_mesh_file(path, &warnings);
      flush_warnings();
      f.title = prov.line();
      return f;
    };

    if (c_mesh->parsed()) {
      BiventricleParams gp = cfg.geometry;
      if (edge) gp.edge_length = *edge;
      MeshFile f;
      f.mesh = generate_idealized_biventricle(gp);
      f.title = prov.line();
      out.mesh(f, mesh_out);
      std::cout << "nodes=" << f.mesh.num_nodes() << " tets=" << f.mesh.num_tets()
                << " min_dihedral_deg=" << format_double(min_dihedral_angle_deg(f.mesh))
                << " max_aspect=" << format_double(max_aspect_ratio(f.mesh)) << "\n";
    } else if (c_lap->parsed()) {
      MeshFile f = load(lap_in);
      if (lap_bcs.empty()) {
        f.set_point_scalar("phi", solve_laplace(f.mesh, transmural_bcs(), cfg.laplace));
        f.set_point_scalar("psi", solve_laplace(f.mesh, apicobasal_bcs(), cfg.laplace));
      } else {
        DirichletSpec bcs;
        for (const auto& s : lap_bcs) {
          const auto eq = s.find('=');
          if (eq == std::string::npos) throw ValidationError("--bc expects label=value, got '" + s + "'");
          double v;
          try {
            v = std::stod(s.substr(eq + 1));
          } catch (const std::exception&) {
            throw ValidationError("--bc value in '" + s + "' is not a number");
          }
          const auto label = surface_label_from_string(s.substr(0, eq));
          if (!label) throw ValidationError("unknown surface label '" + s.substr(0, eq) + "'");
          bcs.emplace_back(*label, v);
        }
        f.set_point_scalar(lap_name, solve_laplace(f.mesh, bcs, cfg.laplace));
      }
      out.mesh(f, lap_out);
    } else if (c_fr->parsed()) {
      MeshFile f = load(fr_in);
      auto res = frame_field(f.mesh, f.point_scalar("phi"), f.point_scalar("psi"));
      if (res.repaired) std::cerr << "warning: " << res.repaired << " degenerate frame(s) filled from neighbors\n";
      put_frames(f, res.frames);
      out.mesh(f, fr_out);
    } else if (c_ld->parsed()) {
      MeshFile f = load(ld_in);
      PrescribedAngles pa = cfg.ldrbm;
      double* slots[] = {&pa.alpha_endo_lv, &pa.alpha_epi_lv, &pa.alpha_endo_rv, &pa.alpha_epi_rv,
                         &pa.gamma_endo_lv, &pa.gamma_epi_lv, &pa.gamma_endo_rv, &pa.gamma_epi_rv};
      for (int i = 0; i < 8; ++i)
        if (ld_angles[ld_names[i]]) *slots[i] = deg2rad(*ld_angles[ld_names[i]]);
      validate(pa);
      LdrbmResult r = ldrbm_fibers(f.mesh, f.point_scalar("phi"), f.point_scalar("psi"), pa);
      if (r.repaired_frames) std::cerr << "warning: " << r.repaired_frames << " degenerate frame(s) filled\n";
      put_frames(f, r.frames);
      f.set_point_scalar("w", r.w);
      put_triads(f, r.triads, "");
      put_angles(f, r.angles, "", true);
      out.mesh(f, ld_out);
    } else if (c_sm->parsed()) {
      MeshFile f = load(sm_in);
      const std::string suffix = sm_field.rfind("fiber", 0) == 0 ? sm_field.substr(5) : sm_field;
      const FrameField frames = get_frames(f);
      const AngleField angles = fibers_to_angles(get_triads(f, suffix), frames);
      Decomposition d = decompose(f.mesh, angles, sm_ell, cfg.laplace);
      put_angles(f, d.macroscopic, "_macro", false);
      put_triads(f, angles_to_fibers(d.macroscopic, frames), "_macro");
      f.set_point_scalar("eps_alpha_deg", to_deg(d.disarray.eps_alpha));
      f.set_point_scalar("eps_gamma_deg", to_deg(d.disarray.eps_gamma));
      out.mesh(f, sm_out);
    } else if (c_ds->parsed()) {
      MeshFile f = load(ds_in);
      const FrameField frames = get_frames(f);
      const TriadField meas = get_triads(f, ds_suffix);
      const AngleField angles = fibers_to_angles(meas, frames);
      Regions reg = make_regions(ds_regions, f.mesh, f.point_scalar("phi"));
      ScalarField a(angles.size()), g(angles.size());
      for (std::size_t i = 0; i < angles.size(); ++i) {
        a[i] = angles[i].alpha;
        g[i] = angles[i].gamma;
      }
      const int bins = ds_bins ? *ds_bins : cfg.fiber.hist_bins;
      const auto ha = angle_statistics(a, reg.labels, reg.names, bins);
      const auto hg = angle_statistics(g, reg.labels, reg.names, bins);
      CsvWriter hist(prov, {"quantity", "region", "bin_center_deg", "count"});
      add_histograms(hist, "alpha", ha);
      add_histograms(hist, "gamma", hg);
      out.csv(hist, ds_out);
      if (!ds_summary.empty()) {
        CsvWriter s(prov, {"quantity", "region", "circular_mean_deg", "circular_std_deg", "count"});
        add_summaries(s, "alpha", ha);
        add_summaries(s, "gamma", hg);
        if (!ds_reference.empty()) {
          const auto rep = projection_stats(f.mesh, meas, get_triads(f, ds_reference), reg.labels, reg.names);
          auto put = [&](const std::string& region, const ProjectionStats& p) {
            s.row().add("proj_ff").add(region).add(p.mean_abs_ff).add(std::string()).add(std::string());
            s.row().add("proj_fs").add(region).add(p.mean_abs_fs).add(std::string()).add(std::string());
            s.row().add("proj_fn").add(region).add(p.mean_abs_fn).add(std::string()).add(std::string());
            s.row().add("proj_norm").add(region).add(p.norm()).add(std::string()).add(std::string());
          };
          put("global", rep.global);
          for (const auto& [name, p] : rep.regions) put(name, p);
        }
        out.csv(s, ds_summary);
      }
    } else if (c_ek->parsed()) {
      MeshFile f = load(ek_in);
      Conductivities sg = cfg.eikonal.sigma;
      if (ek_sf) sg.sigma_f = *ek_sf;
      if (ek_ss) sg.sigma_s = *ek_ss;
      if (ek_sn) sg.sigma_n = *ek_sn;
      const double c0 = ek_c0 ? *ek_c0 : cfg.eikonal.c0;
      const auto D = build_conductivity(f.mesh, get_triads(f, ek_suffix), sg);
      EikonalOptions eo;
      eo.tolerance = cfg.eikonal.tolerance;
      const EikonalResult r = solve_eikonal(f.mesh, D, c0, stimuli_or_config(ek_stims, cfg), eo);
      if (r.metric_obtuse_tets)
        std::cerr << "warning: " << r.metric_obtuse_tets << " tet(s) violate the local causality condition\n";
      f.set_point_scalar("activation_time", r.T);
      ScalarField iso(r.T.size());
      for (std::size_t i = 0; i < r.T.size(); ++i) iso[i] = std::floor(r.T[i] / cfg.eikonal.isochrone_spacing);
      f.set_point_scalar("isochrone", iso);
      out.mesh(f, ek_out);
      std::cout << "updates=" << r.updates << " final_sweep_updates=" << r.final_sweep_updates
                << " T_max_s=" << format_double(*std::max_element(r.T.begin(), r.T.end())) << "\n";
    } else if (c_st->parsed()) {
      MeshFile f = load(st_in);
      InvariantFields inv = strain_invariant_fields(f.mesh, f.point_vector(st_field));
      f.set_point_scalar("I1", inv.I1);
      f.set_point_scalar("I2", inv.I2);
      f.set_point_scalar("I3", inv.I3);
      out.mesh(f, st_out);
    } else if (c_ct->parsed()) {
      const std::string text = read_text_file(ct_in);
      std::istringstream in(text);
      std::string line;
      long lineno = 0;
      std::vector<std::string> header;
      const std::vector<std::string> need = {"F11", "F12", "F13", "F21", "F22", "F23", "F31", "F32", "F33",
                                             "f1",  "f2",  "f3",  "s1",  "s2",  "s3",  "n1",  "n2",  "n3",
                                             "Ta",  "m_f", "m_s", "m_n"};
      std::vector<int> col(need.size(), -1);
      std::vector<std::string> out_cols = need;
      for (const char* p : {"P11", "P12", "P13", "P21", "P22", "P23", "P31", "P32", "P33", "W"}) out_cols.push_back(p);
      CsvWriter w(prov, out_cols);
      while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (header.empty()) {
          header = cells;
          for (std::size_t k = 0; k < need.size(); ++k) {
            auto it = std::find(header.begin(), header.end(), need[k]);
            if (it == header.end()) throw ParseError("constitutive table: missing column " + need[k], lineno);
            col[k] = static_cast<int>(it - header.begin());
          }
          continue;
        }
        if (cells.size() != header.size()) throw ParseError("constitutive table: wrong number of cells", lineno);
        std::vector<double> v(need.size());
        for (std::size_t k = 0; k < need.size(); ++k) {
          try {
            std::size_t used = 0;
            v[k] = std::stod(cells[col[k]], &used);
          } catch (const std::exception&) {
            throw ParseError("constitutive table: '" + cells[col[k]] + "' is not a number", lineno);
          }
        }
        Mat3 F;
        F << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
        FiberTriad tr{Vec3(v[9], v[10], v[11]), Vec3(v[12], v[13], v[14]), Vec3(v[15], v[16], v[17])};
        StressFactors sf = normalize_sf({v[19], v[20], v[21]}, cfg.tissue.sf_passthrough);
        Mat3 P;
        double W;
        try {
          P = piola_stress(F, tr, v[18], sf, cfg.tissue.usyk);
          W = usyk_energy(F, tr, cfg.tissue.usyk);
        } catch (const Error& e) {
          throw DataError("constitutive table line " + std::to_string(lineno) + ": " + e.what());
        }
        w.row();
        for (double x : v) w.add(x);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) w.add(P(i, j));
        w.add(W);
      }
      if (header.empty()) throw ParseError("constitutive table: empty input", 0);
      out.csv(w, ct_out);
    } else if (c_ci->parsed()) {
      const int beats = ci_beats ? *ci_beats : cfg.circ.beats;
      const SimResult r = run_circulation(cfg, beats, cfg.circ.stride);
      for (const auto& wmsg : r.warnings) std::cerr << "warning: " << wmsg << "\n";
      CsvWriter w = trajectory_csv(prov, r);
      std::string block = qoi_block("LV", r.lv_beats.back()) + qoi_block("RV", r.rv_beats.back());
      block += "limit_cycle_change=" + format_double(r.limit_cycle_change) + "\n";
      block += "max_volume_drift=" + format_double(r.max_volume_drift) + "\n";
      std::istringstream bs(block);
      for (std::string l; std::getline(bs, l);) w.comment(l);
      out.csv(w, ci_out);
      if (!ci_summary.empty()) out.text(ci_summary, "# " + prov.line() + "\n" + block);
      std::cout << block;
    } else if (c_em->parsed()) {
      CircParams p = cfg.circ.params;
      const double a = em_axb ? *em_axb : cfg.tissue.a_xb * cfg.tissue.lv_contractility;
      if (!(a >= 0)) throw ValidationError("--axb must be non-negative");
      const double ref = cfg.tissue.a_xb * cfg.tissue.lv_contractility;
      if (ref > 0) p.lv.B *= a / ref;
      EmulatorFit fit = emulator_fit(preload_loops(p, em_preload, em_beats), fit_options_for(p.lv, p.period));
      fit.a_xb = a;
      out.text(em_out, emulator_to_json(fit, prov.line()));
      std::cout << "edpvr k=" << format_double(fit.edpvr.k) << " b=" << format_double(fit.edpvr.b)
                << " V0=" << format_double(fit.edpvr.V0) << "\nespvr E=" << format_double(fit.espvr.E)
                << " V0=" << format_double(fit.espvr.V0) << "\n";
    } else if (c_ca->parsed()) {
      EmulatorFit fa = emulator_from_json(read_text_file(ca_a)), fb = emulator_from_json(read_text_file(ca_b));
      const ParametricEmulator em = make_parametric_emulator(fa, fb, fa.a_xb, fb.a_xb);
      LoopQoIs target;
      if (ca_target_axb) {
        target = emulated_qois(em, *ca_target_axb, cfg.circ.params, default_initial_state(), ca_beats);
      } else if (ca_target.size() == 4) {
        target = {ca_target[0], ca_target[1], ca_target[2], ca_target[3], 0.0};
      } else {
        throw ValidationError("calibrate-axb needs --target EDV,ESV,EDP,ESP or --target-axb");
      }
      CalibrationOptions co;
      co.beats = ca_beats;
      if (ca_lower) co.lower = *ca_lower;
      if (ca_upper) co.upper = *ca_upper;
      if ((ca_lower || ca_upper) && !(ca_lower && ca_upper))
        throw ValidationError("--lower and --upper must be given together");
      const CalibrationResult r = calibrate_axb(target, em, cfg.circ.params, default_initial_state(), co);
      for (const auto& wmsg : r.warnings) std::cerr << "warning: " << wmsg << "\n";
      std::string block = "a_xb_pa=" + format_double(r.a) + "\nobjective=" + format_double(r.objective) +
                          "\non_boundary=" + (r.on_boundary ? "1" : "0") +
                          "\nevaluations=" + std::to_string(r.evaluations) + "\n" + qoi_block("LV", r.qois);
      if (!ca_out.empty()) out.text(ca_out, "# " + prov.line() + "\n" + block);
      std::cout << block;
    } else if (c_pl->parsed()) {
      const std::string dir = pl_out.empty() ? cfg.run.output_dir : pl_out;
      const PipelineSummary s = run_pipeline(cfg, dir, prov, out);
      std::cout << "nodes=" << s.nodes << " tets=" << s.tets << " eps_alpha_std_deg=" << format_double(s.eps_alpha_std_deg)
                << " eps_gamma_std_deg=" << format_double(s.eps_gamma_std_deg)
                << " activation_max_s=" << format_double(s.activation_max_s) << " lv_EF=" << format_double(s.lv_ef)
                << "\nartifacts in " << dir << "\n";
    }
    return 0;
  } catch (const Error& e) {
    out.remove_all();
    std::cerr << "error: " << e.what() << "\n";
    return e.is_usage_error() ? 2 : 1;
  } catch (const std::filesystem::filesystem_error& e) {
    out.remove_all();
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    out.remove_all();
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fiberkit
