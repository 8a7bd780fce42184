#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "topoforge/tensor.hpp"

namespace topoforge {

enum class BoundaryMarker : unsigned char {
  dirichlet,
  neumann,      // carries the Neumann datum g_N
  natural,      // homogeneous Neumann (traction free)
  outer_ball,   // truncation boundary of B_R
};

const char* to_string(BoundaryMarker m);

enum class EllipseAxes { semi, full };

// Reference inclusion omega; always contains the origin in its interior.
class InclusionShape {
 public:
  enum class Kind { disk, ellipse, lshape };

  static InclusionShape disk(Point center, double radius);
  static InclusionShape ellipse(Point center, double semi_x, double semi_y);
  // ([-a,a]^2 \ [0,a]^2) with a = sqrt(pi/3), translated by (a/4, a/4).
  static InclusionShape lshape();

  // Named catalog: disk, shifted_disk, ellipse, shifted_ellipse, lshape
  // (also omega1 ... omega5). Throws std::invalid_argument on unknown names.
  static InclusionShape named(const std::string& name, EllipseAxes axes = EllipseAxes::semi);
  static const std::vector<std::string>& catalog_names();

  Kind kind() const { return kind_; }
  const std::string& id() const { return id_; }
  Point center() const { return center_; }
  double semi_x() const { return rx_; }
  double semi_y() const { return ry_; }

  bool contains(Point p) const;
  double area() const;
  // max |x| over the closure of omega.
  double max_radius() const;
  // Disk or ellipse centred at the origin: invariant under x -> -x and y -> -y.
  bool doubly_symmetric() const;

  // Closed counter-clockwise loop (first point not repeated) with spacing <= h.
  std::vector<Point> boundary_loop(double h) const;
  // Upper half of the boundary of a doubly symmetric shape, from (+a,0) to (-a,0).
  std::vector<Point> upper_arc(double h) const;

  InclusionShape scaled(double factor) const;
  std::string description() const;

 private:
  InclusionShape(Kind kind, std::string id, Point center, double rx, double ry)
      : kind_(kind), id_(std::move(id)), center_(center), rx_(rx), ry_(ry) {}

  std::vector<Point> lshape_corners() const;

  Kind kind_;
  std::string id_;
  Point center_;
  double rx_;  // disk radius, ellipse semi-axis in x, L-shape side a
  double ry_;
};

struct Circle {
  Point center{};
  double radius = 0.0;
};

// Straight piece of the outer boundary (counter-clockwise order) or an
// interior line carrying a load.
struct BoundaryPiece {
  Point a{};
  Point b{};
  BoundaryMarker marker = BoundaryMarker::natural;
};

// The computational domain D with the subdomain Omega given as disjoint disks.
struct DomainGeometry {
  std::vector<BoundaryPiece> boundary;   // closed polygon, counter-clockwise
  std::optional<Circle> outer_circle;    // D is a disk instead of a polygon
  BoundaryMarker outer_circle_marker = BoundaryMarker::dirichlet;
  std::vector<Circle> subdomains;        // Omega
  std::vector<BoundaryPiece> load_lines; // interior segments with Neumann data

  // Rectangle split at the given boundary points; each piece is marked by
  // evaluating `marker` at its midpoint.
  static DomainGeometry rectangle(Point lo, Point hi, const std::function<BoundaryMarker(Point)>& marker,
                                  const std::vector<Point>& breakpoints = {});
  static DomainGeometry disk(Circle c, BoundaryMarker marker);

  bool in_omega(Point p) const;
  bool contains(Point p) const;
  // Distance from p to the outer boundary.
  double distance_to_boundary(Point p) const;
  // Distance from p to the union of subdomain boundaries (infinity if none).
  double distance_to_omega(Point p) const;
  double area() const;

  // Throws MeshError for zero-area regions, subdomains touching the boundary
  // or each other.
  void validate() const;
  std::string description() const;
};

// Points on the segment [a, b] with spacing <= h(point); both ends included.
std::vector<Point> sample_segment(Point a, Point b, const std::function<double(Point)>& h);

// Shoelace signed area of a closed polygon.
double polygon_area(const std::vector<Point>& loop);
bool point_in_polygon(Point p, const std::vector<Point>& loop);

}  // namespace topoforge
