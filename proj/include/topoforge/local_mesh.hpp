#pragma once

// Meshes around an inclusion: an unstructured core B(0, r_c) fitted to omega,
// surrounded by concentric rings of N vertices with geometric radius ratio q.
// Rings are shared between the corrector ball B(0, R) and every rescaled copy
// z + eps * (core + rings) glued into the computational domain, so that the
// perturbed meshes for eps and eps / delta differ only inside radius eps * r_c.

#include <memory>
#include <optional>
#include <vector>

#include "topoforge/geometry.hpp"
#include "topoforge/mesh.hpp"

namespace topoforge {

struct LocalMeshOptions {
  double h_inclusion = 0.05;    // element size in omega (reference coordinates)
  double grading = 1.8;         // core size growth per doubling of |x| beyond omega
  double ball_radius = 1000.0;  // R
  double delta = 1.5;           // ratio between consecutive Taylor radii
  int rings_per_delta = 8;      // q = delta^(1 / rings_per_delta); must be even
  double core_factor = 2.0;     // r_c = core_factor * max |x| over omega
  double min_angle_deg = 28.0;
};

struct RingLayout {
  int points = 0;
  double ratio = 1.0;
  double core_radius = 1.0;

  static RingLayout make(double core_radius, const LocalMeshOptions& options);
  double radius(int ring) const;
  double angle_offset(int ring) const;
  Point vertex(int ring, int i, double radius_override = 0.0) const;
};

struct BallCore {
  Mesh mesh;              // regions: inside = omega
  RingLayout layout;
  std::vector<int> ring0; // boundary vertices in angular order
  int origin = -1;        // vertex at the origin
  double inclusion_area = 0.0;
};

BallCore build_core(const InclusionShape& shape, const LocalMeshOptions& options);

// Core plus rings up to radius R, outer edges marked outer_ball.
Mesh build_ball(const BallCore& core, double radius);

Mesh triangulate_ball(double R, const InclusionShape& inclusion, double h_inclusion, double grading);

struct OuterMeshOptions {
  double h_coarse = 0.05;
  double interface_h = 0.0;     // 0: h_coarse / 2
  double growth = 0.25;         // size increase per unit distance
  double local_radius = 0.1;    // target radius of the glued ball around z
  double reference_eps = 0.005; // eps for which rho / eps is a ring radius
};

struct PerturbedMesh {
  Mesh mesh;                             // inside = Omega plus z + eps * omega
  std::vector<Region> reference_regions; // same mesh with the inclusion marked outside
  std::vector<int> inclusion_triangles;
  double eps = 0.0;
  double inclusion_area = 0.0;           // meshed, physical units
  int shared_vertex_count = 0;           // leading vertices identical for every eps
};

class PerturbationFactory {
 public:
  PerturbationFactory(const DomainGeometry& geometry, Point z, const InclusionShape& shape,
                      const LocalMeshOptions& local, const OuterMeshOptions& outer);

  // Meshes for eps whose rescaled rings coincide with the layout share the
  // outer mesh (D minus B(z, rho)). Larger eps get their own outer mesh, and
  // when even the core does not fit, omega_eps is meshed directly.
  // Throws MeshError when z + eps * omega reaches the boundary of D or Omega.
  PerturbedMesh perturbed(double eps) const;
  // eps uses the shared outer mesh.
  bool admissible(double eps) const;

  Mesh ball() const { return build_ball(*core_, local_.ball_radius); }
  const BallCore& core() const { return *core_; }
  const InclusionShape& shape() const { return shape_; }
  const DomainGeometry& geometry() const { return geometry_; }
  Point z() const { return z_; }
  double rho() const { return rho_; }
  const Mesh& outer() const { return outer_; }

 private:
  int ring_index(double eps) const;
  Mesh outer_with_hole(double eps, int ring) const;
  Mesh outer_around(const std::vector<Point>& hole, double rho, double spacing) const;
  PerturbedMesh glue(const Mesh& outer, double hole_offset, double eps, int last) const;

  DomainGeometry geometry_;
  Point z_;
  InclusionShape shape_;
  LocalMeshOptions local_;
  OuterMeshOptions options_;
  double clearance_ = 0.0;
  std::shared_ptr<const BallCore> core_;
  int rho_ring_ = 0;  // ring index of rho / reference_eps
  double reference_eps_ = 0.0;
  double rho_ = 0.0;
  Mesh outer_;        // D minus B(z, rho); first N vertices on the circle
};

// Unperturbed-domain mesh with the perturbation check (z + eps * omega
// inside D and away from Omega) done up front.
Mesh perturb_domain(const DomainGeometry& geometry, Point z, double eps, const InclusionShape& inclusion,
                    const LocalMeshOptions& local = {}, OuterMeshOptions outer = {});

}  // namespace topoforge
