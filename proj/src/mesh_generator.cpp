#include "fiberkit/mesh.hpp"
#include "mesh_internal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace fiberkit {

namespace {

constexpr int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};

// Uniform grid of cubes, each split into the six Kuhn tets sharing the main diagonal.
// The split is conforming across cubes and every dihedral angle is 45, 60 or 90 degrees.
struct KuhnGrid {
  Vec3 lo;
  Vec3 h;
  std::array<int, 3> n;  // cubes per axis

  long node_id(int i, int j, int k) const {
    return (static_cast<long>(k) * (n[1] + 1) + j) * (n[0] + 1) + i;
  }
  Vec3 node_pos(int i, int j, int k) const {
    return lo + Vec3(i * h.x(), j * h.y(), k * h.z());
  }
  std::array<long, 4> tet_nodes(int i, int j, int k, int perm) const {
    std::array<int, 3> c{i, j, k};
    std::array<long, 4> out;
    out[0] = node_id(c[0], c[1], c[2]);
    for (int s = 0; s < 3; ++s) {
      c[kPerms[perm][s]] += 1;
      out[s + 1] = node_id(c[0], c[1], c[2]);
    }
    return out;
  }
  Vec3 tet_centroid(int i, int j, int k, int perm) const {
    Vec3 u;
    u[kPerms[perm][0]] = 0.75;
    u[kPerms[perm][1]] = 0.5;
    u[kPerms[perm][2]] = 0.25;
    return lo + Vec3((i + u.x()) * h.x(), (j + u.y()) * h.y(), (k + u.z()) * h.z());
  }
  // Grid tet containing p: returns false if p is outside the grid.
  bool locate(const Vec3& p, int& i, int& j, int& k, int& perm) const {
    Vec3 g((p.x() - lo.x()) / h.x(), (p.y() - lo.y()) / h.y(), (p.z() - lo.z()) / h.z());
    int c[3];
    Vec3 u;
    for (int a = 0; a < 3; ++a) {
      c[a] = static_cast<int>(std::floor(g[a]));
      if (c[a] < 0 || c[a] >= n[a]) return false;
      u[a] = g[a] - c[a];
    }
    i = c[0];
    j = c[1];
    k = c[2];
    for (perm = 0; perm < 6; ++perm)
      if (u[kPerms[perm][0]] >= u[kPerms[perm][1]] && u[kPerms[perm][1]] >= u[kPerms[perm][2]]) break;
    return true;
  }
};

struct RawMesh {
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 4>> tets;
};

// Builds tets for the kept grid cells; nodes are numbered in grid order restricted to used ones.
template <class Keep>
RawMesh build_kept(const KuhnGrid& g, Keep&& keep) {
  std::vector<std::array<long, 4>> tets;
  for (int k = 0; k < g.n[2]; ++k)
    for (int j = 0; j < g.n[1]; ++j)
      for (int i = 0; i < g.n[0]; ++i)
        for (int p = 0; p < 6; ++p)
          if (keep(i, j, k, p)) tets.push_back(g.tet_nodes(i, j, k, p));
  std::vector<long> used;
  used.reserve(tets.size() * 4);
  for (auto& t : tets)
    for (long v : t) used.push_back(v);
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  RawMesh out;
  out.nodes.reserve(used.size());
  const long nx = g.n[0] + 1, ny = g.n[1] + 1;
  for (long id : used) {
    int i = static_cast<int>(id % nx);
    int j = static_cast<int>((id / nx) % ny);
    int k = static_cast<int>(id / (nx * ny));
    out.nodes.push_back(g.node_pos(i, j, k));
  }
  out.tets.reserve(tets.size());
  for (auto& t : tets) {
    std::array<int, 4> r;
    for (int a = 0; a < 4; ++a)
      r[a] = static_cast<int>(std::lower_bound(used.begin(), used.end(), t[a]) - used.begin());
    if (signed_volume(out.nodes[r[0]], out.nodes[r[1]], out.nodes[r[2]], out.nodes[r[3]]) < 0)
      std::swap(r[2], r[3]);
    out.tets.push_back(r);
  }
  return out;
}

std::vector<int> largest_component(const TetMesh& m) {
  std::vector<int> parent(m.tets.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto faces = detail::collect_faces(m);
  for (std::size_t i = 0; i + 1 < faces.size(); ++i)
    if (faces[i].key == faces[i + 1].key) {
      int a = find(faces[i].tet), b = find(faces[i + 1].tet);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  std::vector<int> size(m.tets.size(), 0);
  for (std::size_t t = 0; t < m.tets.size(); ++t) size[find(static_cast<int>(t))]++;
  int best = static_cast<int>(std::max_element(size.begin(), size.end()) - size.begin());
  std::vector<int> keep;
  for (std::size_t t = 0; t < m.tets.size(); ++t)
    if (find(static_cast<int>(t)) == best) keep.push_back(static_cast<int>(t));
  return keep;
}

TetMesh subset(const TetMesh& m, const std::vector<int>& tets) {
  std::vector<int> map(m.nodes.size(), -1);
  for (int t : tets)
    for (int v : m.tets[t]) map[v] = 0;
  TetMesh out;
  for (std::size_t i = 0; i < m.nodes.size(); ++i)
    if (map[i] == 0) {
      map[i] = static_cast<int>(out.nodes.size());
      out.nodes.push_back(m.nodes[i]);
    }
  for (int t : tets) {
    std::array<int, 4> r;
    for (int a = 0; a < 4; ++a) r[a] = map[m.tets[t][a]];
    out.tets.push_back(r);
    out.regions.push_back(m.regions.empty() ? RegionLabel::LV : m.regions[t]);
  }
  return out;
}

bool inside(const Vec3& p, const Vec3& c, const Vec3& r) {
  Vec3 d = (p - c).cwiseQuotient(r);
  return d.squaredNorm() < 1.0;
}

enum class Cell { Tissue, CavityLV, CavityRV, Above, Outside };

void label_apex(TetMesh& m, double radius) {
  std::vector<std::vector<std::pair<int, double>>> adj(m.nodes.size());
  int apex = -1;
  for (const auto& f : m.facets) {
    if (f.label != SurfaceLabel::Epi) continue;
    for (int a = 0; a < 3; ++a) {
      int u = f.nodes[a], v = f.nodes[(a + 1) % 3];
      double len = (m.nodes[u] - m.nodes[v]).norm();
      adj[u].emplace_back(v, len);
      adj[v].emplace_back(u, len);
      if (apex < 0 || m.nodes[u].z() < m.nodes[apex].z() ||
          (m.nodes[u].z() == m.nodes[apex].z() && u < apex))
        apex = u;
    }
  }
  if (apex < 0) throw ValidationError("no epicardial surface to place the apex on");
  std::vector<double> dist(m.nodes.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[apex] = 0.0;
  pq.emplace(0.0, apex);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (auto [v, len] : adj[u])
      if (d + len < dist[v]) {
        dist[v] = d + len;
        pq.emplace(dist[v], v);
      }
  }
  std::size_t count = 0;
  for (auto& f : m.facets)
    if (f.label == SurfaceLabel::Epi &&
        std::all_of(f.nodes.begin(), f.nodes.end(), [&](int v) { return dist[v] <= radius; })) {
      f.label = SurfaceLabel::Apex;
      ++count;
    }
  if (count == 0)
    for (auto& f : m.facets)
      if (f.label == SurfaceLabel::Epi && std::find(f.nodes.begin(), f.nodes.end(), apex) != f.nodes.end())
        f.label = SurfaceLabel::Apex;
}

}  // namespace

void validate(const BiventricleParams& p) {
  std::vector<std::string> errs;
  for (int a = 0; a < 3; ++a) {
    if (!(p.lv_endo_radii[a] > 0)) errs.push_back("LV radii must be positive");
    if (!(p.rv_endo_radii[a] > 0)) errs.push_back("RV radii must be positive");
  }
  if (!(p.lv_wall > 0)) errs.push_back("LV wall thickness must be positive");
  if (!(p.rv_wall > 0)) errs.push_back("RV wall thickness must be positive");
  if (!(p.lv_wall < p.lv_endo_radii.minCoeff())) errs.push_back("LV wall thickness must be below the inner radius");
  if (!(p.rv_wall < p.rv_endo_radii.minCoeff())) errs.push_back("RV wall thickness must be below the inner radius");
  if (!(p.edge_length > 0)) errs.push_back("edge length must be positive");
  if (!(p.apex_radius >= 0)) errs.push_back("apex radius must be non-negative");
  if (!(p.rv_offset + p.rv_endo_radii.x() > p.lv_endo_radii.x() + p.lv_wall))
    errs.push_back("RV cavity does not extend beyond the LV epicardium");
  if (!errs.empty()) {
    std::string msg = "invalid biventricle parameters:";
    for (auto& e : errs) msg += "\n  " + e;
    throw ValidationError(msg);
  }
}

TetMesh generate_idealized_biventricle(const BiventricleParams& p) {
  validate(p);
  const double h = p.edge_length;
  const Vec3 lv_c(0, 0, p.base_height), rv_c(p.rv_offset, 0, p.base_height);
  const Vec3 lv_endo = p.lv_endo_radii, lv_epi = lv_endo.array() + p.lv_wall;
  const Vec3 rv_endo = p.rv_endo_radii, rv_epi = rv_endo.array() + p.rv_wall;

  auto classify = [&](const Vec3& x) {
    if (x.z() > p.base_height) return Cell::Above;
    if (inside(x, lv_c, lv_endo)) return Cell::CavityLV;
    if (inside(x, lv_c, lv_epi)) return Cell::Tissue;
    if (inside(x, rv_c, rv_endo)) return Cell::CavityRV;
    if (inside(x, rv_c, rv_epi)) return Cell::Tissue;
    return Cell::Outside;
  };

  const double xmin = std::min(-lv_epi.x(), p.rv_offset - rv_epi.x());
  const double xmax = std::max(lv_epi.x(), p.rv_offset + rv_epi.x());
  const double ymax = std::max(lv_epi.y(), rv_epi.y());
  const double zdepth = std::max(lv_epi.z(), rv_epi.z());
  KuhnGrid g;
  const int i0 = static_cast<int>(std::floor(xmin / h)) - 2;
  const int i1 = static_cast<int>(std::ceil(xmax / h)) + 2;
  const int j0 = static_cast<int>(std::floor(-ymax / h)) - 2;
  const int j1 = -j0;
  const int k0 = -static_cast<int>(std::ceil(zdepth / h)) - 2;
  const int k1 = 1;  // one layer above the base plane
  g.lo = Vec3(i0 * h, j0 * h, p.base_height + k0 * h);
  g.h = Vec3(h, h, h);
  g.n = {i1 - i0, j1 - j0, k1 - k0};

  RawMesh raw = build_kept(g, [&](int i, int j, int k, int perm) {
    return classify(g.tet_centroid(i, j, k, perm)) == Cell::Tissue;
  });
  TetMesh full;
  full.nodes = std::move(raw.nodes);
  full.tets = std::move(raw.tets);
  full.regions.resize(full.tets.size());
  for (std::size_t t = 0; t < full.tets.size(); ++t)
    full.regions[t] = inside(full.tet_centroid(t), lv_c, lv_epi) ? RegionLabel::LV : RegionLabel::RV;

  TetMesh m = subset(full, largest_component(full));

  for (const auto& bf : detail::boundary_faces(m)) {
    BoundaryFacet f{bf.winding, SurfaceLabel::Epi};
    const Vec3& a = m.nodes[f.nodes[0]];
    const Vec3& b = m.nodes[f.nodes[1]];
    const Vec3& c = m.nodes[f.nodes[2]];
    Vec3 probe = (a + b + c) / 3.0 + 0.05 * h * (b - a).cross(c - a).normalized();
    int i, j, k, perm;
    Cell cell = Cell::Outside;
    if (g.locate(probe, i, j, k, perm)) cell = classify(g.tet_centroid(i, j, k, perm));
    switch (cell) {
      case Cell::CavityLV: f.label = SurfaceLabel::EndoLV; break;
      case Cell::CavityRV: f.label = SurfaceLabel::EndoRV; break;
      case Cell::Above: f.label = SurfaceLabel::Base; break;
      default: f.label = SurfaceLabel::Epi; break;
    }
    m.facets.push_back(f);
  }
  label_apex(m, p.apex_radius);

  bool present[5] = {false, false, false, false, false};
  for (const auto& f : m.facets) present[static_cast<int>(f.label)] = true;
  for (int l = 0; l < 5; ++l)
    if (!present[l])
      throw ValidationError(std::string("degenerate geometry: no '") + to_string(static_cast<SurfaceLabel>(l)) +
                            "' surface at this resolution");
  if (min_dihedral_angle_deg(m) <= 5.0) throw ValidationError("mesh quality gate failed: dihedral angle below 5 degrees");
  return m;
}

TetMesh make_box_mesh(int nx, int ny, int nz, const Vec3& lo, const Vec3& hi,
                      const std::array<SurfaceLabel, 6>& face_labels) {
  if (nx < 1 || ny < 1 || nz < 1) throw ValidationError("box mesh needs at least one cell per axis");
  if (!((hi - lo).minCoeff() > 0)) throw ValidationError("box mesh extent must be positive");
  KuhnGrid g;
  g.lo = lo;
  g.h = (hi - lo).cwiseQuotient(Vec3(nx, ny, nz));
  g.n = {nx, ny, nz};
  RawMesh raw = build_kept(g, [](int, int, int, int) { return true; });
  TetMesh m;
  m.nodes = std::move(raw.nodes);
  m.tets = std::move(raw.tets);
  m.regions.assign(m.tets.size(), RegionLabel::LV);
  for (const auto& bf : detail::boundary_faces(m)) {
    Vec3 c = (m.nodes[bf.winding[0]] + m.nodes[bf.winding[1]] + m.nodes[bf.winding[2]]) / 3.0;
    int side = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      double dl = std::abs(c[a] - lo[a]) / g.h[a], dh = std::abs(c[a] - hi[a]) / g.h[a];
      if (dl < best) best = dl, side = 2 * a;
      if (dh < best) best = dh, side = 2 * a + 1;
    }
    m.facets.push_back({bf.winding, face_labels[side]});
  }
  return m;
}

}  // namespace fiberkit
