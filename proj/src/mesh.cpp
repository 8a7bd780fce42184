#include "topoforge/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <unordered_map>

#include "topoforge/delaunay.hpp"
#include "topoforge/error.hpp"

namespace topoforge {

namespace {

constexpr int tag_boundary = 1;   // + marker
constexpr int tag_interface = 100;
constexpr int tag_load = 200;
constexpr int tag_hole = 300;

std::uint64_t undirected(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

// Closed circle sampled with spacing following the size field.
std::vector<Point> sample_circle(const Circle& c, const std::function<double(Point)>& size) {
  constexpr int table = 2048;
  std::vector<double> cumulative(table + 1, 0.0);
  const double ds = 2 * std::numbers::pi * c.radius / table;
  for (int i = 0; i < table; ++i) {
    const double t = 2 * std::numbers::pi * (i + 0.5) / table;
    const Point p = c.center + c.radius * make_point(std::cos(t), std::sin(t));
    cumulative[static_cast<std::size_t>(i + 1)] = cumulative[static_cast<std::size_t>(i)] + ds / (0.95 * size(p));
  }
  const int n = std::max(12, static_cast<int>(std::ceil(cumulative.back())));
  std::vector<Point> out;
  for (int k = 0; k < n; ++k) {
    const double target = cumulative.back() * k / n;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
    const auto j = std::max<std::ptrdiff_t>(1, it - cumulative.begin());
    const double c0 = cumulative[static_cast<std::size_t>(j - 1)], c1 = cumulative[static_cast<std::size_t>(j)];
    const double frac = c1 > c0 ? (target - c0) / (c1 - c0) : 0.0;
    const double t = 2 * std::numbers::pi * (static_cast<double>(j - 1) + frac) / table;
    out.push_back(c.center + c.radius * make_point(std::cos(t), std::sin(t)));
  }
  return out;
}

class GraphBuilder {
 public:
  int add(Point p) {
    graph.points.push_back(p);
    return static_cast<int>(graph.points.size()) - 1;
  }
  void add_loop(const std::vector<Point>& loop, int tag, bool locked) {
    const int first = static_cast<int>(graph.points.size());
    for (const Point& p : loop) add(p);
    const int n = static_cast<int>(loop.size());
    for (int i = 0; i < n; ++i) graph.segments.push_back({first + i, first + (i + 1) % n, tag, locked});
  }
  // Open polyline; end points shared with previously added points when given.
  void add_polyline(const std::vector<Point>& pts, int tag, int first_index = -1, int last_index = -1) {
    int prev = first_index >= 0 ? first_index : add(pts.front());
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const int cur = (i + 1 == pts.size() && last_index >= 0) ? last_index : add(pts[i]);
      graph.segments.push_back({prev, cur, tag, false});
      prev = cur;
    }
  }
  PlanarGraph graph;
};

Mesh build_mesh(const DomainGeometry& geometry, const std::function<double(Point)>& size,
                const std::vector<Point>& hole_loop, double min_angle) {
  geometry.validate();
  GraphBuilder b;
  if (!hole_loop.empty()) {
    b.add_loop(hole_loop, tag_hole, true);
    Point c{};
    for (const Point& p : hole_loop) c += p;
    b.graph.holes.push_back((1.0 / static_cast<double>(hole_loop.size())) * c);
  }
  if (geometry.outer_circle) {
    b.add_loop(sample_circle(*geometry.outer_circle, size), tag_boundary + static_cast<int>(geometry.outer_circle_marker),
               false);
  } else {
    const std::size_t n = geometry.boundary.size();
    const int first = static_cast<int>(b.graph.points.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& piece = geometry.boundary[i];
      const auto pts = sample_segment(piece.a, piece.b, size);
      const int start = i == 0 ? -1 : static_cast<int>(b.graph.points.size()) - 1;
      const int end = i + 1 == n ? first : -1;
      b.add_polyline(pts, tag_boundary + static_cast<int>(piece.marker), start, end);
    }
  }
  std::vector<std::vector<Point>> omega_loops;
  for (std::size_t i = 0; i < geometry.subdomains.size(); ++i) {
    omega_loops.push_back(sample_circle(geometry.subdomains[i], size));
    b.add_loop(omega_loops.back(), tag_interface + static_cast<int>(i), false);
  }
  for (std::size_t i = 0; i < geometry.load_lines.size(); ++i) {
    const auto& line = geometry.load_lines[i];
    b.add_polyline(sample_segment(line.a, line.b, size), tag_load + static_cast<int>(i));
  }

  RefinementOptions opts;
  opts.min_angle_deg = min_angle;
  opts.size = size;
  const Triangulation tri = triangulate(b.graph, opts);

  Mesh mesh;
  mesh.vertices = tri.vertices;
  mesh.triangles = tri.triangles;
  // Classify each component by its largest triangle against the sampled Omega polygons.
  std::vector<int> representative(static_cast<std::size_t>(tri.component_count), -1);
  std::vector<double> best(static_cast<std::size_t>(tri.component_count), -1.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const int c = tri.component[static_cast<std::size_t>(t)];
    const double a = mesh.area(t);
    if (a > best[static_cast<std::size_t>(c)]) {
      best[static_cast<std::size_t>(c)] = a;
      representative[static_cast<std::size_t>(c)] = t;
    }
  }
  std::vector<Region> component_region(static_cast<std::size_t>(tri.component_count), Region::outside);
  for (int c = 0; c < tri.component_count; ++c) {
    const Point p = mesh.centroid(representative[static_cast<std::size_t>(c)]);
    for (const auto& loop : omega_loops)
      if (point_in_polygon(p, loop)) component_region[static_cast<std::size_t>(c)] = Region::inside;
  }
  mesh.regions.resize(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    mesh.regions[t] = component_region[static_cast<std::size_t>(tri.component[t])];

  for (const auto& e : tri.segments) {
    if (e.tag >= tag_boundary && e.tag < tag_interface)
      mesh.boundary_edges.push_back({{e.a, e.b}, static_cast<BoundaryMarker>(e.tag - tag_boundary)});
    else if (e.tag >= tag_load && e.tag < tag_hole)
      mesh.load_edges.push_back({{e.a, e.b}, BoundaryMarker::neumann});
  }
  return mesh;
}

}  // namespace

double Mesh::area(int t) const {
  const auto& tr = triangles[static_cast<std::size_t>(t)];
  const Point& a = vertices[static_cast<std::size_t>(tr[0])];
  const Point& b = vertices[static_cast<std::size_t>(tr[1])];
  const Point& c = vertices[static_cast<std::size_t>(tr[2])];
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

Point Mesh::centroid(int t) const {
  const auto& tr = triangles[static_cast<std::size_t>(t)];
  return (1.0 / 3.0) * (vertices[static_cast<std::size_t>(tr[0])] + vertices[static_cast<std::size_t>(tr[1])] +
                        vertices[static_cast<std::size_t>(tr[2])]);
}

double Mesh::diameter(int t) const {
  const auto& tr = triangles[static_cast<std::size_t>(t)];
  double d = 0.0;
  for (int i = 0; i < 3; ++i)
    d = std::max(d, distance(vertices[static_cast<std::size_t>(tr[static_cast<std::size_t>(i)])],
                             vertices[static_cast<std::size_t>(tr[static_cast<std::size_t>((i + 1) % 3)])]));
  return d;
}

double Mesh::min_angle_deg(int t) const {
  const auto& tr = triangles[static_cast<std::size_t>(t)];
  double best = 180.0;
  for (int i = 0; i < 3; ++i) {
    const Point& p = vertices[static_cast<std::size_t>(tr[static_cast<std::size_t>(i)])];
    const Point u = vertices[static_cast<std::size_t>(tr[static_cast<std::size_t>((i + 1) % 3)])] - p;
    const Point w = vertices[static_cast<std::size_t>(tr[static_cast<std::size_t>((i + 2) % 3)])] - p;
    const double cross = std::abs(u[0] * w[1] - u[1] * w[0]);
    best = std::min(best, std::atan2(cross, dot(u, w)) * 180.0 / std::numbers::pi);
  }
  return best;
}

double Mesh::region_area(Region r) const {
  double s = 0.0;
  for (int t = 0; t < num_triangles(); ++t)
    if (regions[static_cast<std::size_t>(t)] == r) s += area(t);
  return s;
}

double Mesh::total_area() const {
  double s = 0.0;
  for (int t = 0; t < num_triangles(); ++t) s += area(t);
  return s;
}

double min_angle_deg(const Mesh& mesh) {
  double m = 180.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) m = std::min(m, mesh.min_angle_deg(t));
  return m;
}

void validate_mesh(const Mesh& mesh) {
  if (mesh.regions.size() != mesh.triangles.size()) throw MeshError("region markers do not match triangles");
  std::vector<char> used(mesh.vertices.size(), 0);
  std::unordered_map<std::uint64_t, int> edge_count;
  edge_count.reserve(mesh.triangles.size() * 2);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tr = mesh.triangles[static_cast<std::size_t>(t)];
    for (int v : tr) {
      if (v < 0 || v >= mesh.num_vertices()) throw MeshError("triangle references a missing vertex");
      used[static_cast<std::size_t>(v)] = 1;
    }
    if (!(mesh.area(t) > 0)) throw MeshError("triangle " + std::to_string(t) + " is not positively oriented");
    for (int i = 0; i < 3; ++i) {
      const int c = ++edge_count[undirected(tr[static_cast<std::size_t>(i)], tr[static_cast<std::size_t>((i + 1) % 3)])];
      if (c > 2) throw MeshError("edge shared by more than two triangles");
    }
  }
  if (std::find(used.begin(), used.end(), 0) != used.end()) throw MeshError("mesh has unreferenced vertices");
  std::unordered_map<std::uint64_t, int> boundary;
  for (const auto& e : mesh.boundary_edges) {
    const auto key = undirected(e.v[0], e.v[1]);
    if (!boundary.emplace(key, 1).second) throw MeshError("duplicate boundary edge");
    const auto it = edge_count.find(key);
    if (it == edge_count.end() || it->second != 1) throw MeshError("boundary edge is not on the mesh boundary");
  }
  for (const auto& [key, count] : edge_count)
    if (count == 1 && !boundary.count(key)) throw MeshError("mesh boundary edge without a marker");
}

Mesh triangulate_domain(const DomainGeometry& geometry, double h_coarse, std::optional<RefineSpec> refine,
                        const DomainMeshOptions& options) {
  if (!(h_coarse > 0)) throw MeshError("h_coarse must be positive");
  if (refine && !(refine->h_fine > 0 && refine->h_fine <= h_coarse))
    throw MeshError("refinement size must satisfy 0 < h_fine <= h_coarse");
  const double h_if = options.interface_h > 0 ? options.interface_h : 0.5 * h_coarse;
  const double growth = options.growth;
  const auto size = [&](Point x) {
    double h = h_coarse;
    if (!geometry.subdomains.empty()) h = std::min(h, h_if + growth * geometry.distance_to_omega(x));
    if (refine) {
      const double r = distance(x, refine->z);
      h = std::min(h, r <= refine->radius ? refine->h_fine : refine->h_fine + growth * (r - refine->radius));
    }
    return h;
  };
  Mesh mesh = build_mesh(geometry, size, {}, options.min_angle_deg);
  mesh.h_inside = std::min(h_if, h_coarse);
  mesh.h_outside = h_coarse;
  validate_mesh(mesh);
  return mesh;
}

Mesh triangulate_domain_with_hole(const DomainGeometry& geometry, const std::function<double(Point)>& size,
                                  const std::vector<Point>& hole_loop, double min_angle_deg) {
  return build_mesh(geometry, size, hole_loop, min_angle_deg);
}

}  // namespace topoforge
