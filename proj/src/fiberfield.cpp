#include "fiberkit/fiberfield.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace fiberkit {

Embedded embed(const ScalarField& theta) {
  Embedded e;
  e.sin2.resize(theta.size());
  e.cos2.resize(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    e.sin2[i] = std::sin(2.0 * theta[i]);
    e.cos2[i] = std::cos(2.0 * theta[i]);
  }
  return e;
}

ScalarField alpha_channel(const AngleField& a) {
  ScalarField v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].alpha;
  return v;
}

ScalarField gamma_channel(const AngleField& a) {
  ScalarField v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].gamma;
  return v;
}

HelmholtzFilter::HelmholtzFilter(const TetMesh& m, double ell, const SolverOptions& opts)
    : ell_(ell), opts_(opts) {
  if (!(ell >= 0.0) || !std::isfinite(ell)) throw ValidationError("regularization radius must be finite and >= 0");
  lumped_ = nodal_volumes(m);
  if (ell > 0.0) {
    A_ = assemble_stiffness(m);
    A_ *= ell * ell;
    for (std::size_t i = 0; i < lumped_.size(); ++i) A_.coeffRef(i, i) += lumped_[i];
  }
}

ScalarField HelmholtzFilter::apply(const ScalarField& eta, SolveStats* stats) const {
  if (eta.size() != lumped_.size()) throw ValidationError("field length does not match node count");
  if (ell_ == 0.0) {
    if (stats) *stats = {};
    return eta;
  }
  // Constants pass through exactly, so only the deviation from the weighted mean is solved for.
  // Keeps large ell (matrix dominated by ell^2 K) well conditioned.
  double mass = 0, mean = 0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    mass += lumped_[i];
    mean += lumped_[i] * eta[i];
  }
  mean /= mass;
  Eigen::VectorXd b(eta.size()), x0(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) {
    b[i] = lumped_[i] * (eta[i] - mean);
    x0[i] = eta[i] - mean;
  }
  Eigen::VectorXd x = solve_spd(A_, b, opts_, stats, &x0);
  double drift = 0;
  for (std::size_t i = 0; i < eta.size(); ++i) drift += lumped_[i] * x[i];
  drift /= mass;
  ScalarField out(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) out[i] = mean + (x[i] - drift);
  return out;
}

ScalarField helmholtz_filter(const TetMesh& m, const ScalarField& eta, double ell, const SolverOptions& opts) {
  return HelmholtzFilter(m, ell, opts).apply(eta);
}

namespace {

ScalarField smooth_channel(const HelmholtzFilter& filter, const ScalarField& theta, const char* name) {
  Embedded e = embed(theta);
  ScalarField s = filter.apply(e.sin2), c = filter.apply(e.cos2);
  ScalarField out(theta.size());
  std::vector<std::size_t> undefined;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (std::abs(s[i]) < 1e-12 && std::abs(c[i]) < 1e-12) {
      undefined.push_back(i);
      continue;
    }
    out[i] = 0.5 * std::atan2(s[i], c[i]);
    if (out[i] == -kPi / 2) out[i] = kPi / 2;
  }
  if (!undefined.empty()) {
    std::string msg = std::string("smoothed ") + name + " undefined (incoherent neighborhood) at nodes";
    for (std::size_t k = 0; k < undefined.size() && k < 10; ++k) msg += " " + std::to_string(undefined[k]);
    if (undefined.size() > 10) msg += " ... (" + std::to_string(undefined.size()) + " total)";
    throw DataError(msg);
  }
  return out;
}

}  // namespace

AngleField smooth_angles(const HelmholtzFilter& filter, const AngleField& angles) {
  ScalarField a = smooth_channel(filter, alpha_channel(angles), "alpha");
  ScalarField g = smooth_channel(filter, gamma_channel(angles), "gamma");
  AngleField out(angles.size());
  for (std::size_t i = 0; i < angles.size(); ++i) out[i] = {a[i], g[i], 0.0};
  return out;
}

AngleField smooth_angles(const TetMesh& m, const AngleField& angles, double ell, const SolverOptions& opts) {
  return smooth_angles(HelmholtzFilter(m, ell, opts), angles);
}

Decomposition decompose(const HelmholtzFilter& filter, const AngleField& angles) {
  Decomposition d;
  if (filter.ell() == 0.0) {
    d.macroscopic = angles;
    for (auto& a : d.macroscopic) a.beta = 0.0;
    d.disarray.eps_alpha.assign(angles.size(), 0.0);
    d.disarray.eps_gamma.assign(angles.size(), 0.0);
    return d;
  }
  d.macroscopic = smooth_angles(filter, angles);
  d.disarray.eps_alpha.resize(angles.size());
  d.disarray.eps_gamma.resize(angles.size());
  for (std::size_t i = 0; i < angles.size(); ++i) {
    d.disarray.eps_alpha[i] = wrap_half_pi(angles[i].alpha - d.macroscopic[i].alpha);
    d.disarray.eps_gamma[i] = wrap_half_pi(angles[i].gamma - d.macroscopic[i].gamma);
  }
  return d;
}

Decomposition decompose(const TetMesh& m, const AngleField& angles, double ell, const SolverOptions& opts) {
  return decompose(HelmholtzFilter(m, ell, opts), angles);
}

double circular_std_from_resultant(double R) { return 0.5 * std::sqrt(-2.0 * std::log(std::clamp(R, 1e-12, 1.0))); }

double resultant_from_circular_std(double s) { return std::exp(-2.0 * s * s); }

CircularSummary circular_summary(const std::vector<double>& theta, const std::vector<double>* weights) {
  CircularSummary c;
  double sx = 0.0, sy = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double w = weights ? (*weights)[i] : 1.0;
    sx += w * std::cos(2.0 * theta[i]);
    sy += w * std::sin(2.0 * theta[i]);
    sw += w;
  }
  c.count = theta.size();
  if (sw <= 0.0) return c;
  c.resultant = std::hypot(sx, sy) / sw;
  c.mean = 0.5 * std::atan2(sy, sx);
  c.std = circular_std_from_resultant(c.resultant);
  return c;
}

std::vector<RegionHistogram> angle_statistics(const ScalarField& theta, const std::vector<int>& labels,
                                              const std::vector<std::string>& region_names, int bins) {
  if (bins < 1) throw ValidationError("histogram needs at least one bin");
  if (labels.size() != theta.size()) throw ValidationError("labels and values differ in length");
  const double width = 180.0 / bins;
  std::vector<RegionHistogram> out(region_names.size());
  std::vector<std::vector<double>> members(region_names.size());
  for (std::size_t r = 0; r < region_names.size(); ++r) {
    out[r].region = region_names[r];
    out[r].counts.assign(bins, 0);
    for (int b = 0; b < bins; ++b) out[r].bin_centers_deg.push_back(-90.0 + (b + 0.5) * width);
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    int r = labels[i];
    if (r < 0) continue;
    if (r >= static_cast<int>(region_names.size())) throw ValidationError("region label out of range");
    double d = rad2deg(wrap_half_pi(theta[i]));
    int b = static_cast<int>(std::ceil((d + 90.0) / width)) - 1;
    b = std::clamp(b, 0, bins - 1);
    out[r].counts[b]++;
    members[r].push_back(theta[i]);
  }
  for (std::size_t r = 0; r < region_names.size(); ++r) {
    if (members[r].empty()) throw ValidationError("region '" + region_names[r] + "' is empty");
    out[r].summary = circular_summary(members[r]);
  }
  return out;
}

double ProjectionStats::norm() const {
  return std::sqrt(mean_abs_ff * mean_abs_ff + mean_abs_fs * mean_abs_fs + mean_abs_fn * mean_abs_fn);
}

ProjectionReport projection_stats(const TetMesh& m, const TriadField& measured, const TriadField& reference,
                                  const std::vector<int>& labels, const std::vector<std::string>& region_names) {
  const std::size_t n = m.num_nodes();
  if (measured.size() != n || reference.size() != n) throw ValidationError("triad fields must be nodal");
  if (!labels.empty() && labels.size() != n) throw ValidationError("labels must be nodal");
  std::vector<double> w = nodal_volumes(m);
  ProjectionReport rep;
  std::vector<std::array<double, 4>> acc(region_names.size() + 1, {0, 0, 0, 0});
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& f = measured[i].f;
    double ff = std::abs(f.dot(reference[i].f));
    double fs = std::abs(f.dot(reference[i].s));
    double fn = std::abs(f.dot(reference[i].n));
    rep.max_unit_defect = std::max(rep.max_unit_defect, std::abs(ff * ff + fs * fs + fn * fn - 1.0));
    auto add = [&](std::size_t k) {
      acc[k][0] += w[i] * ff;
      acc[k][1] += w[i] * fs;
      acc[k][2] += w[i] * fn;
      acc[k][3] += w[i];
    };
    add(0);
    if (!labels.empty() && labels[i] >= 0) {
      if (labels[i] >= static_cast<int>(region_names.size())) throw ValidationError("region label out of range");
      add(static_cast<std::size_t>(labels[i]) + 1);
    }
  }
  auto finish = [](const std::array<double, 4>& a) {
    ProjectionStats s;
    if (a[3] > 0) s = {a[0] / a[3], a[1] / a[3], a[2] / a[3]};
    return s;
  };
  rep.global = finish(acc[0]);
  for (std::size_t r = 0; r < region_names.size(); ++r) rep.regions.emplace_back(region_names[r], finish(acc[r + 1]));
  return rep;
}

}  // namespace fiberkit
