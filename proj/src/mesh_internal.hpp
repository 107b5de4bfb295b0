#pragma once

#include "fiberkit/mesh.hpp"

#include <array>
#include <vector>

namespace fiberkit::detail {

// Local faces of a positively oriented tet, each wound so its normal points outward.
inline constexpr int kTetFaces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

struct FaceRecord {
  std::array<int, 3> key;      // sorted node ids
  std::array<int, 3> winding;  // outward winding from the owning tet
  int tet;
};

std::vector<FaceRecord> collect_faces(const TetMesh& m);
// Faces owned by exactly one tet, sorted by key.
std::vector<FaceRecord> boundary_faces(const TetMesh& m);

}  // namespace fiberkit::detail
