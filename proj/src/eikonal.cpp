#include "fiberkit/eikonal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fiberkit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::vector<Mat3> build_conductivity(const TetMesh& m, const TriadField& triads, const Conductivities& sg,
                                     const std::vector<Mat3>* F) {
  if (!(sg.sigma_f > 0 && sg.sigma_s > 0 && sg.sigma_n > 0)) throw ValidationError("conductivities must be positive");
  if (triads.size() != m.num_nodes()) throw ValidationError("triad field must be nodal");
  if (F && F->size() != m.num_tets()) throw ValidationError("deformation gradients must be given per cell");
  std::vector<Mat3> D(m.num_tets());
  parallel_for(m.num_tets(), [&](std::size_t t) {
    Mat3 acc = Mat3::Zero();
    for (int v : m.tets[t]) {
      const FiberTriad& tr = triads[v];
      auto term = [&](const Vec3& a, double s) {
        Vec3 d = F ? Vec3((*F)[t] * a) : a;
        acc += s * d * d.transpose() / d.squaredNorm();
      };
      term(tr.f, sg.sigma_f);
      term(tr.s, sg.sigma_s);
      term(tr.n, sg.sigma_n);
    }
    acc *= 0.25;
    acc = 0.5 * (acc + acc.transpose());
    Eigen::LLT<Mat3> llt(acc);
    if (llt.info() != Eigen::Success || !acc.allFinite())
      throw DataError("conductivity tensor of cell " + std::to_string(t) + " is not positive definite");
    D[t] = acc;
  });
  return D;
}

StimulationSite parse_stimulus(const std::string& spec) {
  std::vector<double> v;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("stimulus '" + spec + "': '" + item + "' is not a number");
    }
  }
  if (v.size() != 5) throw ValidationError("stimulus '" + spec + "' must be x,y,z,r,t");
  StimulationSite s;
  s.center = Vec3(v[0], v[1], v[2]);
  s.radius = v[3];
  s.onset = v[4];
  if (!(s.radius >= 0)) throw ValidationError("stimulus radius must be non-negative");
  if (!(s.onset >= 0)) throw ValidationError("stimulus onset must be non-negative");
  return s;
}

namespace {

double quad(const Vec3& x, const Mat3& A, const Vec3& y) { return x.dot(A * y); }

// Arrival at xv through the segment [xj, xi] with linear T along it.
double edge_solve(const Vec3& xv, const Vec3& xi, double Ti, const Vec3& xj, double Tj, const Mat3& A) {
  const Vec3 d = xi - xj, e0 = xv - xj;
  const double delta = Ti - Tj;
  const double a = quad(d, A, d), b = quad(d, A, e0), c = quad(e0, A, e0);
  double best = std::min(Tj + std::sqrt(c), Ti + std::sqrt(std::max(c - 2 * b + a, 0.0)));
  const double disc = a * c - b * b;
  if (a > delta * delta && disc > 0) {
    const double u = -delta * std::sqrt(disc / (a - delta * delta));
    const double lam = (u + b) / a;
    if (lam > 0 && lam < 1) {
      const double q = c - 2 * lam * b + lam * lam * a;
      best = std::min(best, Tj + lam * delta + std::sqrt(std::max(q, 0.0)));
    }
  }
  return best;
}

// Arrival at xv through the triangle (xa, xb, xc) with linear T; falls back to the edges.
double face_solve(const Vec3& xv, const Vec3& xa, double Ta, const Vec3& xb, double Tb, const Vec3& xc, double Tc,
                  const Mat3& A) {
  Eigen::Matrix<double, 3, 2> L;
  L.col(0) = xa - xc;
  L.col(1) = xb - xc;
  const Vec3 e3 = xv - xc;
  const Eigen::Matrix2d G = L.transpose() * A * L;
  const Eigen::Vector2d h = L.transpose() * (A * e3);
  const double c = quad(e3, A, e3);
  const Eigen::Vector2d delta(Ta - Tc, Tb - Tc);
  const double det = G.determinant();
  if (det > 0) {
    const Eigen::Matrix2d Gi = G.inverse();
    const double den = 1.0 - delta.dot(Gi * delta);
    const double num = c - h.dot(Gi * h);
    if (den > 0 && num > 0) {
      const double s = std::sqrt(num / den);
      const Eigen::Vector2d lam = Gi * (h - s * delta);
      if (lam[0] >= 0 && lam[1] >= 0 && lam[0] + lam[1] <= 1) return Tc + delta.dot(lam) + s;
    }
  }
  return std::min({edge_solve(xv, xa, Ta, xb, Tb, A), edge_solve(xv, xa, Ta, xc, Tc, A),
                   edge_solve(xv, xb, Tb, xc, Tc, A)});
}

struct Solver {
  const TetMesh& m;
  std::vector<Mat3> metric;
  NodeAdjacency vt, nb;

  double update(int v, const ScalarField& T) const {
    double best = kInf;
    auto [b, e] = vt.range(v);
    for (auto it = b; it != e; ++it) {
      const auto& tet = m.tets[*it];
      int o[3], k = 0;
      for (int x : tet)
        if (x != v && std::isfinite(T[x])) o[k++] = x;
      const Mat3& A = metric[*it];
      const Vec3& xv = m.nodes[v];
      double cand;
      if (k == 3)
        cand = face_solve(xv, m.nodes[o[0]], T[o[0]], m.nodes[o[1]], T[o[1]], m.nodes[o[2]], T[o[2]], A);
      else if (k == 2)
        cand = edge_solve(xv, m.nodes[o[0]], T[o[0]], m.nodes[o[1]], T[o[1]], A);
      else if (k == 1)
        cand = T[o[0]] + std::sqrt(quad(xv - m.nodes[o[0]], A, xv - m.nodes[o[0]]));
      else
        continue;
      best = std::min(best, cand);
    }
    return best;
  }

  // Exact arrival times of the metric around the source, averaged over its cells, on the nodes
  // within `layers` mean incident edge lengths.
  std::vector<std::pair<int, double>> point_source(int src, double onset, double layers) const {
    Mat3 A = Mat3::Zero();
    auto [tb, te] = vt.range(src);
    for (auto it = tb; it != te; ++it) A += metric[*it];
    A /= static_cast<double>(te - tb);
    const Vec3& xs = m.nodes[src];
    double h = 0;
    auto [nb0, ne0] = nb.range(src);
    for (auto it = nb0; it != ne0; ++it) h += (m.nodes[*it] - xs).norm();
    const double radius = layers * h / std::max<std::ptrdiff_t>(1, ne0 - nb0);
    std::vector<std::pair<int, double>> out{{src, onset}};
    std::vector<char> seen(m.num_nodes(), 0);
    seen[src] = 1;
    std::vector<int> stack{src};
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      auto [b, e] = nb.range(u);
      for (auto it = b; it != e; ++it) {
        const int w = *it;
        if (seen[w]) continue;
        seen[w] = 1;
        const Vec3 d = m.nodes[w] - xs;
        if (d.norm() > radius) continue;
        out.emplace_back(w, onset + std::sqrt(quad(d, A, d)));
        stack.push_back(w);
      }
    }
    return out;
  }

  // Fast iterative method: Gauss-Seidel sweeps over an active list in a fixed order.
  ScalarField run(const std::vector<std::pair<int, double>>& seeds, const EikonalOptions& opts,
                  EikonalResult& res) const {
    const std::size_t n = m.num_nodes();
    ScalarField T(n, kInf);
    std::vector<char> in_list(n, 0);
    std::vector<int> list;
    for (auto [s, t] : seeds) T[s] = std::min(T[s], t);
    for (auto [s, t] : seeds) {
      auto [b, e] = nb.range(s);
      for (auto it = b; it != e; ++it)
        if (!in_list[*it] && !std::isfinite(T[*it])) {
          in_list[*it] = 1;
          list.push_back(*it);
        }
    }
    const long cap = opts.max_updates_factor * static_cast<long>(n);
    long updates = 0;
    double last_change = 0.0;
    auto drain = [&] {
      while (!list.empty()) {
        std::vector<int> next;
        next.reserve(list.size());
        for (int v : list) {
          const double p = T[v];
          const double q = std::min(p, update(v, T));
          T[v] = q;
          ++updates;
          last_change = std::isfinite(p) ? p - q : kInf;
          if (!(p - q <= opts.tolerance)) {
            next.push_back(v);
            continue;
          }
          in_list[v] = 0;
          auto [b, e] = nb.range(v);
          for (auto it = b; it != e; ++it) {
            const int w = *it;
            if (in_list[w]) continue;
            const double c = update(w, T);
            if (c < T[w]) {
              T[w] = c;
              in_list[w] = 1;
              next.push_back(w);
            }
          }
        }
        if (updates > cap)
          throw SolverError("eikonal iteration cap reached (" + std::to_string(updates) + " updates)", last_change);
        list.swap(next);
      }
    };
    drain();
    // verification sweep: a converged field admits no further decrease
    for (std::size_t v = 0; v < n; ++v) {
      const double q = update(static_cast<int>(v), T);
      if (q < T[v] - opts.tolerance) {
        res.final_sweep_updates++;
        res.max_final_change = std::max(res.max_final_change, std::isfinite(T[v]) ? T[v] - q : kInf);
        T[v] = q;
        if (!in_list[v]) {
          in_list[v] = 1;
          list.push_back(static_cast<int>(v));
        }
      }
    }
    drain();
    res.updates += updates;
    return T;
  }
};

}  // namespace

EikonalResult solve_eikonal(const TetMesh& m, const std::vector<Mat3>& D, double c0,
                            const std::vector<StimulationSite>& stimuli, const EikonalOptions& opts) {
  if (!(c0 > 0) || !std::isfinite(c0)) throw ValidationError("depolarization coefficient must be positive");
  if (stimuli.empty()) throw ValidationError("at least one stimulation site is required");
  if (D.size() != m.num_tets()) throw ValidationError("conductivity must be given per cell");
  Solver s{m, std::vector<Mat3>(m.num_tets()), node_tets(m), node_neighbors(m)};
  EikonalResult res;
  for (std::size_t t = 0; t < m.num_tets(); ++t) {
    s.metric[t] = (c0 * c0 * D[t]).inverse();
    const auto& k = m.tets[t];
    bool obtuse = false;
    for (int a = 0; a < 4 && !obtuse; ++a)
      for (int b = 0; b < 4 && !obtuse; ++b)
        for (int c = b + 1; c < 4 && !obtuse; ++c) {
          if (b == a || c == a) continue;
          Vec3 eb = m.nodes[k[b]] - m.nodes[k[a]], ec = m.nodes[k[c]] - m.nodes[k[a]];
          double scale = std::sqrt(quad(eb, s.metric[t], eb) * quad(ec, s.metric[t], ec));
          obtuse = quad(eb, s.metric[t], ec) < -1e-12 * scale;
        }
    res.metric_obtuse_tets += obtuse;
  }
  res.T.assign(m.num_nodes(), kInf);
  for (std::size_t k = 0; k < stimuli.size(); ++k) {
    const StimulationSite& st = stimuli[k];
    if (!(st.onset >= 0)) throw ValidationError("stimulus onset must be non-negative");
    std::vector<int> seeds = st.nodes;
    for (int v : seeds)
      if (v < 0 || v >= static_cast<int>(m.num_nodes())) throw ValidationError("stimulus node out of range");
    if (st.center)
      for (std::size_t v = 0; v < m.num_nodes(); ++v)
        if ((m.nodes[v] - *st.center).norm() <= st.radius) seeds.push_back(static_cast<int>(v));
    if (seeds.empty()) throw ValidationError("stimulation site " + std::to_string(k) + " contains no mesh nodes");
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    // independent solves combined by pointwise minimum: exact superposition of first arrivals
    std::vector<std::pair<int, double>> init;
    if (seeds.size() == 1 && opts.point_source_layers > 0) {
      init = s.point_source(seeds[0], st.onset, opts.point_source_layers);
    } else {
      for (int v : seeds) init.emplace_back(v, st.onset);
    }
    ScalarField Tk = s.run(init, opts, res);
    for (std::size_t v = 0; v < Tk.size(); ++v) res.T[v] = std::min(res.T[v], Tk[v]);
  }
  for (std::size_t v = 0; v < res.T.size(); ++v)
    if (!std::isfinite(res.T[v])) throw SolverError("node " + std::to_string(v) + " unreachable (disconnected mesh?)");
  return res;
}

void CalciumTransient::validate() const {
  if (!(period > 0)) throw ValidationError("transient period must be positive");
  if (t.size() != value.size() || t.size() < 2) throw ValidationError("transient needs at least two (t, value) samples");
  double max_step = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || !std::isfinite(value[i])) throw ValidationError("transient samples must be finite");
    if (value[i] < 0) throw ValidationError("transient values must be non-negative");
    if (t[i] < 0 || t[i] > period) throw ValidationError("transient times must lie within one period");
    if (i > 0) {
      if (!(t[i] > t[i - 1])) throw ValidationError("transient times must be strictly increasing");
      max_step = std::max(max_step, std::abs(value[i] - value[i - 1]));
    }
  }
  if (std::abs(value.back() - value.front()) > max_step + 1e-12 * std::abs(value.front()))
    throw ValidationError("transient is not continuous across the period boundary");
}

double CalciumTransient::operator()(double time) const {
  double tau = std::fmod(time, period);
  if (tau < 0) tau += period;
  if (tau < t.front()) {
    double t0 = t.back() - period;
    double w = (tau - t0) / (t.front() - t0);
    return value.back() + w * (value.front() - value.back());
  }
  if (tau >= t.back()) {
    double t1 = t.front() + period;
    if (t1 == t.back()) return value.back();
    double w = (tau - t.back()) / (t1 - t.back());
    return value.back() + w * (value.front() - value.back());
  }
  auto it = std::upper_bound(t.begin(), t.end(), tau);
  std::size_t i = static_cast<std::size_t>(it - t.begin());
  double w = (tau - t[i - 1]) / (t[i] - t[i - 1]);
  return value[i - 1] + w * (value[i] - value[i - 1]);
}

ShiftedCalcium::ShiftedCalcium(ScalarField activation, CalciumTransient transient)
    : T_(std::move(activation)), tr_(std::move(transient)) {
  tr_.validate();
}

double ShiftedCalcium::at(std::size_t node, double t) const { return tr_(t - T_.at(node)); }

ScalarField ShiftedCalcium::snapshot(double t) const {
  ScalarField out(T_.size());
  for (std::size_t i = 0; i < T_.size(); ++i) out[i] = tr_(t - T_[i]);
  return out;
}

ShiftedCalcium shift_calcium(const ScalarField& activation, const CalciumTransient& transient, double T_HB) {
  if (!(T_HB > 0)) throw ValidationError("heartbeat period must be positive");
  CalciumTransient tr = transient;
  tr.period = T_HB;
  return ShiftedCalcium(activation, std::move(tr));
}

std::vector<double> fluorescence_to_calcium(const std::vector<double>& F, double Kd, double Fmin, double Fmax,
                                            std::vector<std::string>* warnings) {
  if (!(Fmin < Fmax)) throw ValidationError("Fmin must be below Fmax");
  if (!(Kd > 0)) throw ValidationError("dissociation constant must be positive");
  std::vector<double> out(F.size());
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < F.size(); ++i) {
    if (!(F[i] < Fmax))
      throw DataError("fluorescence sample " + std::to_string(i) + " saturates the dye (F >= Fmax)");
    if (F[i] < Fmin) {
      out[i] = 0.0;
      ++clamped;
    } else {
      out[i] = Kd * (F[i] - Fmin) / (Fmax - F[i]);
    }
  }
  if (clamped && warnings)
    warnings->push_back(std::to_string(clamped) + " fluorescence sample(s) below Fmin clamped to zero");
  return out;
}

}  // namespace fiberkit
