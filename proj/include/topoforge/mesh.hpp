#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "topoforge/geometry.hpp"
#include "topoforge/tensor.hpp"

namespace topoforge {

enum class Region : unsigned char { outside = 0, inside = 1 };

struct BoundaryEdge {
  std::array<int, 2> v{};
  BoundaryMarker marker = BoundaryMarker::natural;
};

struct Mesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<Region> regions;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<BoundaryEdge> load_edges;  // interior edges carrying Neumann data
  double h_inside = 0.0;                 // target sizes the mesh was built for
  double h_outside = 0.0;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double area(int t) const;
  Point centroid(int t) const;
  double diameter(int t) const;
  double min_angle_deg(int t) const;
  double region_area(Region r) const;
  double total_area() const;
};

// Throws MeshError naming the first violated invariant: orientation,
// conformity (edge shared by at most two triangles), unreferenced vertices,
// boundary edges equal to the topological boundary.
void validate_mesh(const Mesh& mesh);
double min_angle_deg(const Mesh& mesh);

struct RefineSpec {
  Point z{};
  double h_fine = 0.0;
  double radius = 0.0;
};

struct DomainMeshOptions {
  double interface_h = 0.0;       // size on the subdomain circles (0: h_coarse / 2)
  double growth = 0.3;            // size increase per unit distance from refined features
  double min_angle_deg = 28.0;
};

Mesh triangulate_domain(const DomainGeometry& geometry, double h_coarse, std::optional<RefineSpec> refine = {},
                        const DomainMeshOptions& options = {});

// Mesh of D minus the polygon `hole_loop` (sampled counter-clockwise, kept
// unsplit). The hole vertices are the first hole_loop.size() vertices of the
// result, in loop order; the hole edges are not listed as boundary edges.
Mesh triangulate_domain_with_hole(const DomainGeometry& geometry, const std::function<double(Point)>& size,
                                  const std::vector<Point>& hole_loop, double min_angle_deg = 28.0);

// Canonical content hash of a mesh-producing description.
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed = 1469598103934665603ULL);

struct VtkField {
  std::string name;
  int components = 1;  // 1 (scalar) or 2 (written as a 3-vector with zero z)
  std::vector<double> values;
};

// Legacy VTK ASCII unstructured grid. Triangles carry the region marker,
// boundary edges are written as line cells carrying their marker.
void write_vtk(std::ostream& os, const Mesh& mesh, const std::vector<VtkField>& cell_data = {},
               const std::vector<VtkField>& point_data = {});
Mesh read_vtk(std::istream& is);

// Binary mesh cache; returns std::nullopt when the key is absent.
void save_mesh_binary(const std::string& path, const Mesh& mesh);
std::optional<Mesh> load_mesh_binary(const std::string& path);

}  // namespace topoforge
