#pragma once

#include "fiberkit/mesh.hpp"

#include <vector>

namespace fiberkit {

// Local myocardial directions: l circumferential, t transmural, n apico-basal.
struct Frame {
  Vec3 l, t, n;
};

struct FiberTriad {
  Vec3 f, s, n;
};

struct Angles {
  double alpha = 0.0;  // helical, (-pi, pi]
  double gamma = 0.0;  // intrusion, (-pi/2, pi/2]
  double beta = 0.0;   // cross-fiber, (-pi, pi]
};

using FrameField = std::vector<Frame>;
using TriadField = std::vector<FiberTriad>;
using AngleField = std::vector<Angles>;

Frame build_frame(const Vec3& grad_phi, const Vec3& grad_psi, long node = -1, double eps = kDegenerateEps);

Angles fibers_to_angles(const FiberTriad& triad, const Frame& frame, double eps = kDegenerateEps);
FiberTriad angles_to_fibers(const Angles& a, const Frame& frame, double eps = kDegenerateEps);

// Folds (alpha, gamma) so gamma lies in (-pi/2, pi/2] and alpha in (-pi, pi], preserving the fiber line.
Angles normalize_angles(Angles a);

struct FrameFieldResult {
  FrameField frames;
  std::size_t repaired = 0;
};

// Builds the per-node frame from nodal gradients of phi and psi; degenerate nodes are filled
// from neighbors. A degenerate patch larger than max_patch_fraction of the nodes is an error.
FrameFieldResult frame_field(const TetMesh& m, const ScalarField& phi, const ScalarField& psi,
                             double max_patch_fraction = 0.01);

TriadField angles_to_fibers(const AngleField& angles, const FrameField& frames);
AngleField fibers_to_angles(const TriadField& triads, const FrameField& frames);

}  // namespace fiberkit
