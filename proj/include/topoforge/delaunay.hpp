#pragma once

// Conforming Delaunay refinement of a planar straight-line graph.

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "topoforge/tensor.hpp"

namespace topoforge {

struct PlanarGraph {
  struct Segment {
    int a = 0;
    int b = 0;
    int tag = 0;
    // Locked segments are never split; their end points appear unchanged in
    // the output (used for interfaces that must match another mesh).
    bool locked = false;
  };

  std::vector<Point> points;
  std::vector<Segment> segments;
  std::vector<Point> holes;  // seeds of regions to remove
};

struct RefinementOptions {
  double min_angle_deg = 28.0;
  // Upper bound for the longest edge of a triangle, evaluated at its centroid.
  std::function<double(Point)> size;
  std::size_t max_vertices = 4'000'000;
};

struct Triangulation {
  struct Edge {
    int a = 0;
    int b = 0;
    int tag = 0;
  };

  std::vector<Point> vertices;                // input points first, in input order
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<Edge> segments;                 // sub-segments of the input segments
  std::vector<int> component;                 // per triangle, regions separated by segments
  int component_count = 0;
};

// Throws MeshError on inconsistent input or when refinement does not terminate.
Triangulation triangulate(const PlanarGraph& graph, const RefinementOptions& options);

}  // namespace topoforge
