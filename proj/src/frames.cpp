#include "fiberkit/frames.hpp"
#include "fiberkit/laplace.hpp"

#include <algorithm>
#include <cmath>

namespace fiberkit {

Frame build_frame(const Vec3& grad_phi, const Vec3& grad_psi, long node, double eps) {
  const double gp = grad_phi.norm();
  if (!(gp > eps)) throw DegeneracyError("transmural gradient vanishes", node);
  const double gq = grad_psi.norm();
  if (!(gq > eps)) throw DegeneracyError("apico-basal gradient vanishes", node);
  Frame fr;
  fr.t = grad_phi / gp;
  Vec3 k = grad_psi / gq;
  Vec3 perp = k - k.dot(fr.t) * fr.t;
  const double pn = perp.norm();
  if (!(pn > eps)) throw DegeneracyError("apico-basal gradient parallel to transmural gradient", node);
  fr.n = perp / pn;
  fr.l = fr.n.cross(fr.t);
  return fr;
}

Angles fibers_to_angles(const FiberTriad& triad, const Frame& fr, double eps) {
  const Vec3& f = triad.f;
  Vec3 f_ln = f - f.dot(fr.t) * fr.t;
  const double nrm = f_ln.norm();
  if (!(nrm > eps)) throw DegeneracyError("fiber parallel to the transmural direction; helical angle undefined");
  Vec3 fh = f_ln / nrm;
  Angles a;
  a.alpha = std::atan2(fr.n.dot(fh), fr.l.dot(fh));
  // f . fh = |f_LN| >= 0, so gamma stays in [-pi/2, pi/2] and inverts the reconstruction exactly.
  a.gamma = std::atan2(fr.t.dot(f), f.dot(fh));
  Vec3 et = fr.t - fr.t.dot(f) * f;
  et.normalize();
  Vec3 en = et.cross(f);
  a.beta = std::atan2(triad.s.dot(en), triad.s.dot(et));
  if (a.alpha == -kPi) a.alpha = kPi;
  if (a.beta == -kPi) a.beta = kPi;
  return a;
}

FiberTriad angles_to_fibers(const Angles& a, const Frame& fr, double eps) {
  if (!(std::abs(a.gamma) < kPi / 2 - eps))
    throw DegeneracyError("intrusion angle at +-90 degrees; sheet direction undefined");
  const double ca = std::cos(a.alpha), sa = std::sin(a.alpha);
  const double cg = std::cos(a.gamma), sg = std::sin(a.gamma);
  FiberTriad tr;
  tr.f = ca * cg * fr.l + sa * cg * fr.n + sg * fr.t;
  tr.f.normalize();
  Vec3 et = fr.t - sg * tr.f;
  et.normalize();
  Vec3 en = et.cross(tr.f);
  if (a.beta == 0.0) {
    tr.s = et;
    tr.n = en;
  } else {
    const double cb = std::cos(a.beta), sb = std::sin(a.beta);
    tr.s = cb * et + sb * en;
    tr.n = -sb * et + cb * en;
  }
  return tr;
}

Angles normalize_angles(Angles a) {
  double g = wrap_pi(a.gamma);
  double al = a.alpha;
  if (g > kPi / 2) {
    g = kPi - g;
    al += kPi;
  } else if (g <= -kPi / 2) {
    g = -kPi - g;
    al += kPi;
  }
  a.gamma = g;
  a.alpha = wrap_pi(al);
  return a;
}

FrameFieldResult frame_field(const TetMesh& m, const ScalarField& phi, const ScalarField& psi,
                             double max_patch_fraction) {
  const std::size_t n = m.num_nodes();
  if (phi.size() != n || psi.size() != n) throw ValidationError("phi/psi length does not match node count");
  VectorField gphi = recover_gradient(m, phi);
  VectorField gpsi = recover_gradient(m, psi);
  FrameFieldResult res;
  res.frames.resize(n);
  std::vector<char> bad(n, 0);
  parallel_for(n, [&](std::size_t i) {
    try {
      res.frames[i] = build_frame(gphi[i], gpsi[i], static_cast<long>(i));
    } catch (const DegeneracyError&) {
      bad[i] = 1;
    }
  });
  std::size_t nbad = static_cast<std::size_t>(std::count(bad.begin(), bad.end(), 1));
  if (nbad == 0) return res;

  NodeAdjacency adj = node_neighbors(m);
  // Largest connected degenerate patch.
  {
    std::vector<char> seen(n, 0);
    std::vector<int> stack;
    for (std::size_t s = 0; s < n; ++s) {
      if (!bad[s] || seen[s]) continue;
      std::size_t size = 0;
      stack.push_back(static_cast<int>(s));
      seen[s] = 1;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        ++size;
        auto [b, e] = adj.range(u);
        for (auto it = b; it != e; ++it)
          if (bad[*it] && !seen[*it]) {
            seen[*it] = 1;
            stack.push_back(*it);
          }
      }
      if (static_cast<double>(size) > max_patch_fraction * static_cast<double>(n))
        throw DegeneracyError("degenerate frame patch of " + std::to_string(size) + " nodes exceeds the allowed fraction",
                              static_cast<long>(s));
    }
  }

  std::vector<double> w = nodal_volumes(m);
  std::vector<char> pending = bad;
  std::size_t left = nbad;
  while (left > 0) {
    std::vector<std::pair<int, Frame>> fixed;
    for (std::size_t i = 0; i < n; ++i) {
      if (!pending[i]) continue;
      Vec3 t = Vec3::Zero(), nn = Vec3::Zero();
      int heaviest = -1;
      auto [b, e] = adj.range(static_cast<int>(i));
      for (auto it = b; it != e; ++it)
        if (!pending[*it]) {
          t += w[*it] * res.frames[*it].t;
          nn += w[*it] * res.frames[*it].n;
          if (heaviest < 0 || w[*it] > w[heaviest]) heaviest = *it;
        }
      if (heaviest < 0) continue;  // no usable neighbors yet; retry on a later pass
      try {
        fixed.emplace_back(static_cast<int>(i), build_frame(t, nn, static_cast<long>(i)));
      } catch (const DegeneracyError&) {
        // neighbor frames cancel (e.g. around the apex): inherit the heaviest neighbor's frame
        fixed.emplace_back(static_cast<int>(i), res.frames[heaviest]);
      }
    }
    if (fixed.empty()) throw DegeneracyError("cannot repair degenerate frames from neighbors");
    for (auto& [i, fr] : fixed) {
      res.frames[i] = fr;
      pending[i] = 0;
      --left;
    }
  }
  res.repaired = nbad;
  return res;
}

TriadField angles_to_fibers(const AngleField& angles, const FrameField& frames) {
  if (angles.size() != frames.size()) throw ValidationError("angle and frame fields differ in length");
  TriadField out(angles.size());
  parallel_for(angles.size(), [&](std::size_t i) {
    try {
      out[i] = angles_to_fibers(angles[i], frames[i]);
    } catch (const DegeneracyError& e) {
      throw DegeneracyError(e.what(), static_cast<long>(i));
    }
  });
  return out;
}

AngleField fibers_to_angles(const TriadField& triads, const FrameField& frames) {
  if (triads.size() != frames.size()) throw ValidationError("triad and frame fields differ in length");
  AngleField out(triads.size());
  parallel_for(triads.size(), [&](std::size_t i) {
    try {
      out[i] = fibers_to_angles(triads[i], frames[i]);
    } catch (const DegeneracyError& e) {
      throw DegeneracyError(e.what(), static_cast<long>(i));
    }
  });
  return out;
}

}  // namespace fiberkit
