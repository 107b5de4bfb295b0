#pragma once

#include "fiberkit/common.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fiberkit {

enum class SurfaceLabel : int { Epi = 0, EndoLV = 1, EndoRV = 2, Base = 3, Apex = 4 };
enum class RegionLabel : int { LV = 0, RV = 1 };

const char* to_string(SurfaceLabel l);
const char* to_string(RegionLabel r);
std::optional<SurfaceLabel> surface_label_from_string(const std::string& s);
std::optional<SurfaceLabel> surface_label_from_int(int v);

struct BoundaryFacet {
  std::array<int, 3> nodes;  // ordered so the normal points out of the domain
  SurfaceLabel label;
};

struct TetMesh {
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 4>> tets;
  std::vector<BoundaryFacet> facets;
  std::vector<RegionLabel> regions;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_tets() const { return tets.size(); }

  double tet_volume(std::size_t t) const;
  Vec3 tet_centroid(std::size_t t) const;
  Vec3 facet_normal(std::size_t f) const;  // area-weighted, outward
};

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

// Gradients of the four barycentric shape functions of a tet (rows), plus volume.
struct TetGeometry {
  Eigen::Matrix<double, 4, 3> grad;
  double volume;
};
TetGeometry tet_geometry(const TetMesh& m, std::size_t t);

// Structural checks: index bounds, positive volumes, facets on the boundary exactly once,
// boundary fully labeled. Throws ValidationError.
void validate_mesh(const TetMesh& m);

// Compressed node adjacency (nodes sharing a tet) and node -> incident tets.
struct NodeAdjacency {
  std::vector<int> offsets;
  std::vector<int> indices;
  auto range(int i) const {
    return std::pair{indices.begin() + offsets[i], indices.begin() + offsets[i + 1]};
  }
};
NodeAdjacency node_neighbors(const TetMesh& m);
NodeAdjacency node_tets(const TetMesh& m);

// Lumped nodal volumes (one quarter of each incident tet).
std::vector<double> nodal_volumes(const TetMesh& m);

// Per-node region: majority (by volume) of incident tets.
std::vector<RegionLabel> node_regions(const TetMesh& m);

// Set of nodes touched by facets carrying any of the given labels.
std::vector<char> nodes_on(const TetMesh& m, std::initializer_list<SurfaceLabel> labels);

double min_dihedral_angle_deg(const TetMesh& m);
double max_aspect_ratio(const TetMesh& m);

// Volume enclosed by the labeled boundary (divergence theorem).
double boundary_volume(const TetMesh& m);

struct BiventricleParams {
  Vec3 lv_endo_radii{1.6e-3, 1.6e-3, 4.2e-3};
  Vec3 rv_endo_radii{2.75e-3, 3.0e-3, 3.5e-3};
  double lv_wall = 1.0e-3;
  double rv_wall = 0.45e-3;
  double rv_offset = 2.25e-3;  // x offset of the RV ellipsoid center
  double base_height = 0.0;
  double edge_length = 0.25e-3;
  double apex_radius = 0.6e-3;  // geodesic radius of the apical patch
};

void validate(const BiventricleParams& p);

TetMesh generate_idealized_biventricle(const BiventricleParams& p);

// Axis-aligned box split into Kuhn tets. Face labels indexed -x,+x,-y,+y,-z,+z.
TetMesh make_box_mesh(int nx, int ny, int nz, const Vec3& lo, const Vec3& hi,
                      const std::array<SurfaceLabel, 6>& face_labels = {
                          SurfaceLabel::Epi, SurfaceLabel::Epi, SurfaceLabel::Epi,
                          SurfaceLabel::Epi, SurfaceLabel::Apex, SurfaceLabel::Base});

}  // namespace fiberkit
