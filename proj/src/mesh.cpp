#include "fiberkit/mesh.hpp"
#include "mesh_internal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace fiberkit {

const char* to_string(SurfaceLabel l) {
  switch (l) {
    case SurfaceLabel::Epi: return "epi";
    case SurfaceLabel::EndoLV: return "endo_lv";
    case SurfaceLabel::EndoRV: return "endo_rv";
    case SurfaceLabel::Base: return "base";
    case SurfaceLabel::Apex: return "apex";
  }
  return "?";
}

const char* to_string(RegionLabel r) { return r == RegionLabel::LV ? "lv" : "rv"; }

std::optional<SurfaceLabel> surface_label_from_string(const std::string& s) {
  std::string k;
  for (char c : s) k += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (k == "epi") return SurfaceLabel::Epi;
  if (k == "endo_lv" || k == "endolv") return SurfaceLabel::EndoLV;
  if (k == "endo_rv" || k == "endorv") return SurfaceLabel::EndoRV;
  if (k == "base") return SurfaceLabel::Base;
  if (k == "apex") return SurfaceLabel::Apex;
  return std::nullopt;
}

std::optional<SurfaceLabel> surface_label_from_int(int v) {
  if (v < 0 || v > 4) return std::nullopt;
  return static_cast<SurfaceLabel>(v);
}

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

double TetMesh::tet_volume(std::size_t t) const {
  const auto& k = tets[t];
  return signed_volume(nodes[k[0]], nodes[k[1]], nodes[k[2]], nodes[k[3]]);
}

Vec3 TetMesh::tet_centroid(std::size_t t) const {
  const auto& k = tets[t];
  return 0.25 * (nodes[k[0]] + nodes[k[1]] + nodes[k[2]] + nodes[k[3]]);
}

Vec3 TetMesh::facet_normal(std::size_t f) const {
  const auto& k = facets[f].nodes;
  return 0.5 * (nodes[k[1]] - nodes[k[0]]).cross(nodes[k[2]] - nodes[k[0]]);
}

TetGeometry tet_geometry(const TetMesh& m, std::size_t t) {
  const auto& k = m.tets[t];
  Mat3 J;
  J.col(0) = m.nodes[k[1]] - m.nodes[k[0]];
  J.col(1) = m.nodes[k[2]] - m.nodes[k[0]];
  J.col(2) = m.nodes[k[3]] - m.nodes[k[0]];
  TetGeometry g;
  g.volume = J.determinant() / 6.0;
  Mat3 inv = J.inverse();
  g.grad.block<3, 3>(1, 0) = inv;
  g.grad.row(0) = -inv.colwise().sum();
  return g;
}

namespace detail {

std::vector<FaceRecord> collect_faces(const TetMesh& m) {
  std::vector<FaceRecord> faces;
  faces.reserve(4 * m.tets.size());
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> v{m.tets[t][kTetFaces[f][0]], m.tets[t][kTetFaces[f][1]],
                           m.tets[t][kTetFaces[f][2]]};
      std::array<int, 3> key = v;
      std::sort(key.begin(), key.end());
      faces.push_back({key, v, static_cast<int>(t)});
    }
  }
  std::sort(faces.begin(), faces.end(), [](const FaceRecord& a, const FaceRecord& b) {
    return a.key != b.key ? a.key < b.key : a.tet < b.tet;
  });
  return faces;
}

std::vector<FaceRecord> boundary_faces(const TetMesh& m) {
  auto faces = collect_faces(m);
  std::vector<FaceRecord> out;
  for (std::size_t i = 0; i < faces.size();) {
    std::size_t j = i;
    while (j < faces.size() && faces[j].key == faces[i].key) ++j;
    if (j - i == 1) out.push_back(faces[i]);
    if (j - i > 2) throw ValidationError("non-manifold face shared by more than two tets");
    i = j;
  }
  return out;
}

}  // namespace detail

void validate_mesh(const TetMesh& m) {
  const int n = static_cast<int>(m.nodes.size());
  if (m.tets.empty()) throw ValidationError("mesh has no tets");
  if (m.regions.size() != m.tets.size())
    throw ValidationError("region label count does not match tet count");
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    for (int v : m.tets[t])
      if (v < 0 || v >= n) throw ValidationError("tet " + std::to_string(t) + " references node out of range");
    if (!(m.tet_volume(t) > 0.0))
      throw ValidationError("tet " + std::to_string(t) + " has non-positive volume");
  }
  auto bnd = detail::boundary_faces(m);
  std::vector<std::array<int, 3>> keys;
  keys.reserve(m.facets.size());
  for (std::size_t f = 0; f < m.facets.size(); ++f) {
    auto k = m.facets[f].nodes;
    for (int v : k)
      if (v < 0 || v >= n) throw ValidationError("facet " + std::to_string(f) + " references node out of range");
    std::sort(k.begin(), k.end());
    keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end());
  if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
    throw ValidationError("boundary facet labeled more than once");
  if (keys.size() != bnd.size())
    throw ValidationError("labeled facets (" + std::to_string(keys.size()) + ") do not cover the boundary (" +
                          std::to_string(bnd.size()) + " faces)");
  for (std::size_t i = 0; i < keys.size(); ++i)
    if (keys[i] != bnd[i].key) throw ValidationError("labeled facet is not a boundary face of exactly one tet");
}

static NodeAdjacency build_csr(std::size_t n, std::vector<std::pair<int, int>>& pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  NodeAdjacency a;
  a.offsets.assign(n + 1, 0);
  for (auto& p : pairs) a.offsets[p.first + 1]++;
  for (std::size_t i = 0; i < n; ++i) a.offsets[i + 1] += a.offsets[i];
  a.indices.reserve(pairs.size());
  for (auto& p : pairs) a.indices.push_back(p.second);
  return a;
}

NodeAdjacency node_neighbors(const TetMesh& m) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(m.tets.size() * 12);
  for (const auto& t : m.tets)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (i != j) pairs.emplace_back(t[i], t[j]);
  return build_csr(m.nodes.size(), pairs);
}

NodeAdjacency node_tets(const TetMesh& m) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(m.tets.size() * 4);
  for (std::size_t t = 0; t < m.tets.size(); ++t)
    for (int v : m.tets[t]) pairs.emplace_back(v, static_cast<int>(t));
  return build_csr(m.nodes.size(), pairs);
}

std::vector<double> nodal_volumes(const TetMesh& m) {
  std::vector<double> w(m.nodes.size(), 0.0);
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    double v = 0.25 * m.tet_volume(t);
    for (int k : m.tets[t]) w[k] += v;
  }
  return w;
}

std::vector<RegionLabel> node_regions(const TetMesh& m) {
  std::vector<double> lv(m.nodes.size(), 0.0), rv(m.nodes.size(), 0.0);
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    double v = m.tet_volume(t);
    auto& acc = m.regions[t] == RegionLabel::LV ? lv : rv;
    for (int k : m.tets[t]) acc[k] += v;
  }
  std::vector<RegionLabel> out(m.nodes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rv[i] > lv[i] ? RegionLabel::RV : RegionLabel::LV;
  return out;
}

std::vector<char> nodes_on(const TetMesh& m, std::initializer_list<SurfaceLabel> labels) {
  std::vector<char> on(m.nodes.size(), 0);
  for (const auto& f : m.facets)
    if (std::find(labels.begin(), labels.end(), f.label) != labels.end())
      for (int v : f.nodes) on[v] = 1;
  return on;
}

double min_dihedral_angle_deg(const TetMesh& m) {
  double best = 180.0;
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    const auto& k = m.tets[t];
    Vec3 nrm[4];
    for (int f = 0; f < 4; ++f) {
      const Vec3& a = m.nodes[k[detail::kTetFaces[f][0]]];
      const Vec3& b = m.nodes[k[detail::kTetFaces[f][1]]];
      const Vec3& c = m.nodes[k[detail::kTetFaces[f][2]]];
      nrm[f] = (b - a).cross(c - a).normalized();
    }
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        double cosv = std::clamp(-nrm[i].dot(nrm[j]), -1.0, 1.0);
        best = std::min(best, rad2deg(std::acos(cosv)));
      }
  }
  return best;
}

double max_aspect_ratio(const TetMesh& m) {
  double worst = 0.0;
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    const auto& k = m.tets[t];
    double lmax = 0.0, area = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) lmax = std::max(lmax, (m.nodes[k[i]] - m.nodes[k[j]]).norm());
    for (int f = 0; f < 4; ++f) {
      const Vec3& a = m.nodes[k[detail::kTetFaces[f][0]]];
      const Vec3& b = m.nodes[k[detail::kTetFaces[f][1]]];
      const Vec3& c = m.nodes[k[detail::kTetFaces[f][2]]];
      area += 0.5 * (b - a).cross(c - a).norm();
    }
    double inradius = 3.0 * m.tet_volume(t) / area;
    // normalized so the regular tet scores 1
    worst = std::max(worst, lmax / (2.0 * std::sqrt(6.0) * inradius));
  }
  return worst;
}

double boundary_volume(const TetMesh& m) {
  double v = 0.0;
  for (const auto& f : m.facets) {
    const Vec3& a = m.nodes[f.nodes[0]];
    const Vec3& b = m.nodes[f.nodes[1]];
    const Vec3& c = m.nodes[f.nodes[2]];
    v += a.dot(b.cross(c)) / 6.0;
  }
  return v;
}

}  // namespace fiberkit
