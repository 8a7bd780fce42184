#include "topoforge/local_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "topoforge/delaunay.hpp"
#include "topoforge/error.hpp"

namespace topoforge {

namespace {

constexpr double two_pi = 2 * std::numbers::pi;

double signed_area(Point a, Point b, Point c) {
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

void push_ccw(Mesh& mesh, int a, int b, int c, Region region) {
  const auto& v = mesh.vertices;
  if (signed_area(v[static_cast<std::size_t>(a)], v[static_cast<std::size_t>(b)], v[static_cast<std::size_t>(c)]) < 0)
    std::swap(b, c);
  mesh.triangles.push_back({a, b, c});
  mesh.regions.push_back(region);
}

// Triangulates the annulus between two closed rings of equal length whose
// i-th vertices sit at angles inner_offset + 2 pi i / N and outer_offset + 2 pi i / N.
void stitch(Mesh& mesh, const std::vector<int>& inner, double inner_offset, const std::vector<int>& outer,
            double outer_offset) {
  const int n = static_cast<int>(inner.size());
  const double step = two_pi / n;
  const int k = static_cast<int>(std::floor((inner_offset - outer_offset) / step + 1e-9));
  const int j0 = ((k % n) + n) % n;
  const double alpha0 = inner_offset;
  const double beta0 = outer_offset + k * step;
  auto in = [&](int i) { return inner[static_cast<std::size_t>(i % n)]; };
  auto out = [&](int j) { return outer[static_cast<std::size_t>((j0 + j) % n)]; };
  int i = 0, j = 0;
  while (i < n || j < n) {
    const double a_next = alpha0 + step * (i + 1);
    const double b_next = beta0 + step * (j + 1);
    if (i < n && (j >= n || a_next <= b_next + 1e-12)) {
      push_ccw(mesh, in(i), in(i + 1), out(j), Region::outside);
      ++i;
    } else {
      push_ccw(mesh, in(i), out(j + 1), out(j), Region::outside);
      ++j;
    }
  }
}

std::vector<Point> axis_samples(double from, double to, const std::function<double(Point)>& size) {
  return sample_segment(make_point(from, 0.0), make_point(to, 0.0), size);
}

}  // namespace

RingLayout RingLayout::make(double core_radius, const LocalMeshOptions& options) {
  if (options.rings_per_delta < 2 || options.rings_per_delta % 2 != 0)
    throw MeshError("rings_per_delta must be even and at least 2");
  if (!(options.delta > 1)) throw MeshError("delta must exceed 1");
  RingLayout layout;
  layout.core_radius = core_radius;
  layout.ratio = std::pow(options.delta, 1.0 / options.rings_per_delta);
  // Near-equilateral triangles between rings: radial gap r (q - 1) equals the
  // height of an equilateral triangle on the arc spacing 2 pi r / N.
  const double n = std::numbers::pi * std::sqrt(3.0) / (layout.ratio - 1);
  layout.points = std::max(16, 2 * static_cast<int>(std::lround(n / 2)));
  return layout;
}

double RingLayout::radius(int ring) const { return core_radius * std::pow(ratio, ring); }

double RingLayout::angle_offset(int ring) const { return (ring % 2 != 0) ? std::numbers::pi / points : 0.0; }

Point RingLayout::vertex(int ring, int i, double radius_override) const {
  const double r = radius_override > 0 ? radius_override : radius(ring);
  const double t = angle_offset(ring) + two_pi * i / points;
  return r * make_point(std::cos(t), std::sin(t));
}

BallCore build_core(const InclusionShape& shape, const LocalMeshOptions& options) {
  if (!(options.grading > 1)) throw MeshError("grading must exceed 1");
  if (!(options.h_inclusion > 0)) throw MeshError("h_inclusion must be positive");
  if (!shape.contains(Point{})) throw MeshError("inclusion must contain the origin");
  const double r_omega = shape.max_radius();
  BallCore core;
  core.layout = RingLayout::make(options.core_factor * r_omega, options);
  const RingLayout& layout = core.layout;
  const int n = layout.points;
  const double r_c = layout.core_radius;
  const double log_g = std::log2(options.grading);
  const double h0 = options.h_inclusion;
  // Graded growth away from omega, bent up towards the ring spacing at r_c so
  // that the locked ring-0 edges meet interior triangles of matching size.
  const double boundary_boost =
      std::max(1.0, two_pi * r_c / n / (h0 * std::pow(r_c / r_omega, log_g)));
  const auto size = [h0, log_g, r_omega, r_c, n, boundary_boost](Point x) {
    const double r = norm(x);
    if (r <= r_omega) return h0;
    const double s = (r - r_omega) / (r_c - r_omega);
    const double graded = h0 * std::pow(r / r_omega, log_g) * std::pow(boundary_boost, s * s);
    return std::min(graded, two_pi * r / n);
  };

  RefinementOptions refine;
  refine.min_angle_deg = options.min_angle_deg;
  refine.size = size;
  PlanarGraph graph;
  std::vector<Point> omega_loop;

  if (shape.doubly_symmetric()) {
    // Upper half with the symmetry axis kept unsplit, then reflected.
    const int half = n / 2;
    for (int i = 0; i <= half; ++i) {
      Point p = layout.vertex(0, i);
      if (i == 0 || i == half) p[1] = 0.0;
      graph.points.push_back(p);
    }
    for (int i = 0; i < half; ++i) graph.segments.push_back({i, i + 1, 1, true});
    const double a = shape.semi_x();
    auto right_outer = axis_samples(r_c, a, size);
    auto right_inner = axis_samples(a, 0.0, size);
    auto left_inner = axis_samples(0.0, -a, size);
    auto left_outer = axis_samples(-a, -r_c, size);
    std::vector<Point> axis = right_outer;
    axis.insert(axis.end(), right_inner.begin() + 1, right_inner.end());
    axis.insert(axis.end(), left_inner.begin() + 1, left_inner.end());
    axis.insert(axis.end(), left_outer.begin() + 1, left_outer.end());
    // axis runs from ring vertex 0 to ring vertex `half`
    std::vector<int> axis_ids{0};
    for (std::size_t k = 1; k + 1 < axis.size(); ++k) {
      graph.points.push_back(make_point(axis[k][0], 0.0));
      axis_ids.push_back(static_cast<int>(graph.points.size()) - 1);
    }
    axis_ids.push_back(half);
    for (std::size_t k = 0; k + 1 < axis_ids.size(); ++k)
      graph.segments.push_back({axis_ids[k], axis_ids[k + 1], 2, true});
    auto id_at = [&](double x) {
      for (int id : axis_ids)
        if (std::abs(graph.points[static_cast<std::size_t>(id)][0] - x) < 1e-12) return id;
      throw MeshError("axis sample missing");
    };
    const int right = id_at(a), left = id_at(-a);
    const auto arc = shape.upper_arc(size(make_point(a, 0.0)));
    int prev = right;
    for (std::size_t k = 1; k < arc.size(); ++k) {
      int cur;
      if (k + 1 == arc.size()) {
        cur = left;
      } else {
        graph.points.push_back(arc[k]);
        cur = static_cast<int>(graph.points.size()) - 1;
      }
      graph.segments.push_back({prev, cur, 100, false});
      prev = cur;
    }
    omega_loop = arc;
    for (std::size_t k = arc.size() - 2; k >= 1; --k) omega_loop.push_back(make_point(arc[k][0], -arc[k][1]));

    const Triangulation tri = triangulate(graph, refine);
    Mesh& mesh = core.mesh;
    mesh.vertices = tri.vertices;
    const int nv = static_cast<int>(tri.vertices.size());
    std::vector<int> mirror(static_cast<std::size_t>(nv));
    for (int v = 0; v < nv; ++v) {
      const Point p = tri.vertices[static_cast<std::size_t>(v)];
      if (p[1] == 0.0) {
        mirror[static_cast<std::size_t>(v)] = v;
      } else {
        if (p[1] < 0) throw MeshError("half-core mesh left the upper half plane");
        mesh.vertices.push_back(make_point(p[0], -p[1]));
        mirror[static_cast<std::size_t>(v)] = static_cast<int>(mesh.vertices.size()) - 1;
      }
    }
    for (const auto& t : tri.triangles) {
      mesh.triangles.push_back(t);
      mesh.triangles.push_back({mirror[static_cast<std::size_t>(t[0])], mirror[static_cast<std::size_t>(t[2])],
                                mirror[static_cast<std::size_t>(t[1])]});
    }
    core.ring0.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      core.ring0[static_cast<std::size_t>(i)] = i <= half ? i : mirror[static_cast<std::size_t>(n - i)];
    core.origin = id_at(0.0);
  } else {
    for (int i = 0; i < n; ++i) graph.points.push_back(layout.vertex(0, i));
    for (int i = 0; i < n; ++i) graph.segments.push_back({i, (i + 1) % n, 1, true});
    graph.points.push_back(Point{});
    core.origin = n;
    omega_loop = shape.boundary_loop(h0);
    const int first = static_cast<int>(graph.points.size());
    const int m = static_cast<int>(omega_loop.size());
    for (const Point& p : omega_loop) graph.points.push_back(p);
    for (int i = 0; i < m; ++i) graph.segments.push_back({first + i, first + (i + 1) % m, 100, false});
    const Triangulation tri = triangulate(graph, refine);
    core.mesh.vertices = tri.vertices;
    core.mesh.triangles = tri.triangles;
    core.ring0.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) core.ring0[static_cast<std::size_t>(i)] = i;
  }

  Mesh& mesh = core.mesh;
  mesh.regions.resize(mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    mesh.regions[static_cast<std::size_t>(t)] =
        point_in_polygon(mesh.centroid(t), omega_loop) ? Region::inside : Region::outside;
  mesh.h_inside = h0;
  mesh.h_outside = two_pi * r_c / n;
  core.inclusion_area = mesh.region_area(Region::inside);
  return core;
}

Mesh build_ball(const BallCore& core, double radius) {
  const RingLayout& layout = core.layout;
  const int n = layout.points;
  const double r_c = layout.core_radius;
  if (!(radius > layout.radius(1))) throw MeshError("ball radius must exceed the core radius");
  int last = static_cast<int>(std::ceil(std::log(radius / r_c) / std::log(layout.ratio) - 1e-9));
  if (radius / layout.radius(last - 1) < 1 + 0.5 * (layout.ratio - 1)) --last;
  Mesh mesh = core.mesh;
  std::vector<int> prev = core.ring0;
  for (int l = 1; l <= last; ++l) {
    std::vector<int> cur(static_cast<std::size_t>(n));
    const double r = l == last ? radius : 0.0;
    for (int i = 0; i < n; ++i) {
      mesh.vertices.push_back(layout.vertex(l, i, r));
      cur[static_cast<std::size_t>(i)] = static_cast<int>(mesh.vertices.size()) - 1;
    }
    stitch(mesh, prev, layout.angle_offset(l - 1), cur, layout.angle_offset(l));
    prev = std::move(cur);
  }
  for (int i = 0; i < n; ++i)
    mesh.boundary_edges.push_back(
        {{prev[static_cast<std::size_t>(i)], prev[static_cast<std::size_t>((i + 1) % n)]}, BoundaryMarker::outer_ball});
  return mesh;
}

Mesh triangulate_ball(double R, const InclusionShape& inclusion, double h_inclusion, double grading) {
  if (!(grading > 1)) throw MeshError("grading must exceed 1");
  if (!(inclusion.max_radius() <= R / 10)) throw MeshError("inclusion does not fit in B(0, R/10)");
  LocalMeshOptions options;
  options.h_inclusion = h_inclusion;
  options.grading = grading;
  options.ball_radius = R;
  const Mesh mesh = build_ball(build_core(inclusion, options), R);
  validate_mesh(mesh);
  return mesh;
}

PerturbationFactory::PerturbationFactory(const DomainGeometry& geometry, Point z, const InclusionShape& shape,
                                         const LocalMeshOptions& local, const OuterMeshOptions& outer)
    : geometry_(geometry), z_(z), shape_(shape), local_(local), options_(outer) {
  geometry_.validate();
  if (!geometry_.contains(z) || geometry_.in_omega(z)) throw MeshError("z must lie in D outside the closure of Omega");
  core_ = std::make_shared<const BallCore>(build_core(shape, local));
  const RingLayout& layout = core_->layout;
  clearance_ = std::min(geometry_.distance_to_boundary(z), geometry_.distance_to_omega(z));
  const double rho_target = std::min(outer.local_radius, 0.5 * clearance_);
  reference_eps_ = outer.reference_eps;
  if (!(reference_eps_ > 0)) throw MeshError("reference eps must be positive");
  rho_ring_ = static_cast<int>(std::floor(std::log(rho_target / (reference_eps_ * layout.core_radius)) /
                                          std::log(layout.ratio) + 1e-9));
  if (rho_ring_ < 0) throw MeshError("z + eps * omega does not fit between z and the boundary of D or Omega");
  rho_ = reference_eps_ * layout.radius(rho_ring_);
  outer_ = outer_with_hole(reference_eps_, rho_ring_);
}

// D minus the disk bounded by ring `ring` of the layout scaled by eps; the
// first N vertices are that ring.
Mesh PerturbationFactory::outer_with_hole(double eps, int ring) const {
  const RingLayout& layout = core_->layout;
  const int n = layout.points;
  std::vector<Point> hole(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) hole[static_cast<std::size_t>(i)] = z_ + eps * layout.vertex(ring, i);
  const double rho = eps * layout.radius(ring);
  return outer_around(hole, rho, two_pi * rho / n);
}

Mesh PerturbationFactory::outer_around(const std::vector<Point>& hole, double rho, double spacing) const {
  const double h = options_.h_coarse;
  const double h_if = options_.interface_h > 0 ? options_.interface_h : 0.5 * h;
  const double growth = options_.growth;
  const Point z = z_;
  const auto size = [this, z, rho, spacing, h, h_if, growth](Point x) {
    double s = std::min(h, spacing + growth * std::max(0.0, distance(x, z) - rho));
    if (!geometry_.subdomains.empty()) s = std::min(s, h_if + growth * geometry_.distance_to_omega(x));
    return s;
  };
  Mesh mesh = triangulate_domain_with_hole(geometry_, size, hole, local_.min_angle_deg);
  mesh.h_inside = std::min(h, h_if);
  mesh.h_outside = h;
  return mesh;
}

int PerturbationFactory::ring_index(double eps) const {
  if (!(eps > 0)) return -1;
  const double x = rho_ring_ + std::log(reference_eps_ / eps) / std::log(core_->layout.ratio);
  const double l = std::round(x);
  if (std::abs(x - l) > 1e-6 || l < 0) return -1;
  const int ring = static_cast<int>(l);
  if (ring == 0 && rho_ring_ % 2 != 0) return -1;
  return ring;
}

bool PerturbationFactory::admissible(double eps) const { return ring_index(eps) >= 0; }

PerturbedMesh PerturbationFactory::glue(const Mesh& outer, double hole_offset, double eps, int last) const {
  const BallCore& core = *core_;
  const RingLayout& layout = core.layout;
  const int n = layout.points;

  PerturbedMesh out;
  out.eps = eps;
  Mesh& mesh = out.mesh;
  mesh = outer;
  out.shared_vertex_count = outer.num_vertices();
  out.reference_regions = outer.regions;

  // Core vertices; with no intermediate ring the core boundary is the hole itself.
  std::vector<int> core_map(core.mesh.vertices.size(), -1);
  if (last == 0)
    for (int i = 0; i < n; ++i) core_map[static_cast<std::size_t>(core.ring0[static_cast<std::size_t>(i)])] = i;
  for (std::size_t v = 0; v < core.mesh.vertices.size(); ++v) {
    if (core_map[v] >= 0) continue;
    mesh.vertices.push_back(z_ + eps * core.mesh.vertices[v]);
    core_map[v] = mesh.num_vertices() - 1;
  }
  for (int t = 0; t < core.mesh.num_triangles(); ++t) {
    const auto& tri = core.mesh.triangles[static_cast<std::size_t>(t)];
    mesh.triangles.push_back({core_map[static_cast<std::size_t>(tri[0])], core_map[static_cast<std::size_t>(tri[1])],
                              core_map[static_cast<std::size_t>(tri[2])]});
    const Region r = core.mesh.regions[static_cast<std::size_t>(t)];
    mesh.regions.push_back(r);
    out.reference_regions.push_back(Region::outside);
    if (r == Region::inside) {
      out.inclusion_triangles.push_back(mesh.num_triangles() - 1);
      out.inclusion_area += mesh.area(mesh.num_triangles() - 1);
    }
  }
  std::vector<int> prev(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    prev[static_cast<std::size_t>(i)] = core_map[static_cast<std::size_t>(core.ring0[static_cast<std::size_t>(i)])];
  for (int l = 1; l <= last; ++l) {
    std::vector<int> cur(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      if (l == last) {
        cur[static_cast<std::size_t>(i)] = i;
      } else {
        mesh.vertices.push_back(z_ + eps * layout.vertex(l, i));
        cur[static_cast<std::size_t>(i)] = mesh.num_vertices() - 1;
      }
    }
    const double outer_offset = l == last ? hole_offset : layout.angle_offset(l);
    stitch(mesh, prev, layout.angle_offset(l - 1), cur, outer_offset);
    prev = std::move(cur);
  }
  out.reference_regions.resize(mesh.triangles.size(), Region::outside);
  return out;
}

PerturbedMesh PerturbationFactory::perturbed(double eps) const {
  if (!(eps > 0)) throw MeshError("eps must be positive");
  const int last = ring_index(eps);
  if (last >= 0) return glue(outer_, core_->layout.angle_offset(rho_ring_), eps, last);

  const RingLayout& layout = core_->layout;
  const double reach = eps * shape_.max_radius();
  if (!(reach < clearance_))
    throw MeshError("z + eps * omega with eps = " + std::to_string(eps) + " reaches the boundary of D or Omega");

  // Larger than the shared layout allows: glue the core with its own outer
  // mesh while it fits, otherwise mesh the inclusion directly.
  const double rho_max = 0.9 * clearance_;
  if (eps * layout.core_radius <= rho_max) {
    const int ring = static_cast<int>(std::floor(std::log(rho_max / (eps * layout.core_radius)) / std::log(layout.ratio)));
    PerturbedMesh out = glue(outer_with_hole(eps, ring), layout.angle_offset(ring), eps, ring);
    out.shared_vertex_count = 0;
    return out;
  }

  const double h_in = eps * local_.h_inclusion;
  std::vector<Point> loop = shape_.boundary_loop(local_.h_inclusion);
  for (Point& p : loop) p = z_ + eps * p;
  PerturbedMesh out;
  out.eps = eps;
  Mesh& mesh = out.mesh;
  mesh = outer_around(loop, reach, h_in);
  out.reference_regions = mesh.regions;

  PlanarGraph graph;
  graph.points = loop;
  const int m = static_cast<int>(loop.size());
  for (int i = 0; i < m; ++i) graph.segments.push_back({i, (i + 1) % m, 100, true});
  RefinementOptions refine;
  refine.min_angle_deg = local_.min_angle_deg;
  refine.size = [h_in](Point) { return h_in; };
  const Triangulation inner = triangulate(graph, refine);
  std::vector<int> map(inner.vertices.size());
  for (std::size_t v = 0; v < inner.vertices.size(); ++v) {
    if (static_cast<int>(v) < m) {
      map[v] = static_cast<int>(v);
    } else {
      mesh.vertices.push_back(inner.vertices[v]);
      map[v] = mesh.num_vertices() - 1;
    }
  }
  for (const auto& t : inner.triangles) {
    mesh.triangles.push_back({map[static_cast<std::size_t>(t[0])], map[static_cast<std::size_t>(t[1])],
                              map[static_cast<std::size_t>(t[2])]});
    mesh.regions.push_back(Region::inside);
    out.reference_regions.push_back(Region::outside);
    out.inclusion_triangles.push_back(mesh.num_triangles() - 1);
    out.inclusion_area += mesh.area(mesh.num_triangles() - 1);
  }
  return out;
}

Mesh perturb_domain(const DomainGeometry& geometry, Point z, double eps, const InclusionShape& inclusion,
                    const LocalMeshOptions& local, OuterMeshOptions outer) {
  outer.reference_eps = eps;
  const PerturbationFactory factory(geometry, z, inclusion, local, outer);
  Mesh mesh = factory.perturbed(eps).mesh;
  validate_mesh(mesh);
  return mesh;
}

}  // namespace topoforge
