#include "topoforge/fem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "topoforge/error.hpp"
#include "topoforge/linear_solver.hpp"

namespace topoforge {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

std::size_t sz(int i) { return static_cast<std::size_t>(i); }

// Triangle across the edge opposite each local vertex (-1 on the boundary).
std::vector<std::array<int, 3>> neighbours(const Mesh& mesh) {
  std::unordered_map<std::uint64_t, std::pair<int, int>> owner;
  owner.reserve(mesh.triangles.size() * 3);
  std::vector<std::array<int, 3>> nb(mesh.triangles.size(), {-1, -1, -1});
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[sz(t)];
    for (int i = 0; i < 3; ++i) {
      const auto key = edge_key(tri[sz((i + 1) % 3)], tri[sz((i + 2) % 3)]);
      auto [it, fresh] = owner.try_emplace(key, t, i);
      if (!fresh) {
        nb[sz(t)][sz(i)] = it->second.first;
        nb[sz(it->second.first)][sz(it->second.second)] = t;
      }
    }
  }
  return nb;
}

// Neumann boundary edges and load lines with their adjacent triangle.
struct LoadEdge {
  int a, b, triangle;
};

std::vector<LoadEdge> load_edges(const Mesh& mesh, bool include_lines) {
  std::unordered_map<std::uint64_t, int> tri_of;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[sz(t)];
    for (int i = 0; i < 3; ++i) tri_of.emplace(edge_key(tri[sz(i)], tri[sz((i + 1) % 3)]), t);
  }
  std::vector<LoadEdge> out;
  for (const auto& e : mesh.boundary_edges)
    if (e.marker == BoundaryMarker::neumann) out.push_back({e.v[0], e.v[1], tri_of.at(edge_key(e.v[0], e.v[1]))});
  if (include_lines)
    for (const auto& e : mesh.load_edges) out.push_back({e.v[0], e.v[1], tri_of.at(edge_key(e.v[0], e.v[1]))});
  return out;
}

template <class T>
Vec2<T> seeded_vec(const Vec2<double>& v, const Vec2<double>& d) {
  Vec2<T> r;
  for (int i = 0; i < 2; ++i) r[i] = T(v[i], d[i]);
  return r;
}

template <class T>
Mat2<T> seeded_mat(const Mat2<double>& v, const Mat2<double>& d) {
  Mat2<T> r;
  for (std::size_t i = 0; i < 4; ++i) r.a[i] = T(v.a[i], d.a[i]);
  return r;
}

// The m + 2m unit tangents of (y1, y2) in TangentDirection order.
std::vector<TangentDirection> tangent_set(int m) {
  std::vector<TangentDirection> dirs;
  for (int c = 0; c < m; ++c) dirs.push_back(TangentDirection::value(c));
  for (int c = 0; c < m; ++c)
    for (int k = 0; k < 2; ++k) dirs.push_back(TangentDirection::gradient(c, k));
  return dirs;
}

// Derivative of a test-function pairing coefficient w.r.t. a basis function
// (component c', vertex b) given derivatives along the unit tangents.
double tangent_weight(const TangentDirection& dir, int component, double lambda_b, const Point& grad_b) {
  if (dir.component() != component) return 0.0;
  return dir.kind() == TangentDirection::Kind::state_value ? lambda_b : grad_b[dir.direction()];
}

struct LocalState {
  std::array<Vec2<double>, 3> u{};
  Mat2<double> du{};
};

LocalState local_state(const FieldFunction& u, int t, const ElementGeometry& g) {
  LocalState s;
  const auto& tri = u.mesh().triangles[sz(t)];
  for (int a = 0; a < 3; ++a) s.u[sz(a)] = u.vertex_value(tri[sz(a)]);
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < u.components(); ++c)
      for (int k = 0; k < 2; ++k) s.du(c, k) += s.u[sz(a)][c] * g.grad[sz(a)][k];
  return s;
}

Point map_point(const Mesh& mesh, int t, const std::array<double, 3>& lambda) {
  const auto& tri = mesh.triangles[sz(t)];
  Point x{};
  for (int a = 0; a < 3; ++a) x += lambda[sz(a)] * mesh.vertices[sz(tri[sz(a)])];
  return x;
}

Vec2<double> interp(const LocalState& s, const std::array<double, 3>& lambda) {
  Vec2<double> y{};
  for (int a = 0; a < 3; ++a) y += lambda[sz(a)] * s.u[sz(a)];
  return y;
}

}  // namespace

namespace {

ElementGeometry triangle_geometry(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[sz(t)];
  const Point p[3] = {mesh.vertices[sz(tri[0])], mesh.vertices[sz(tri[1])], mesh.vertices[sz(tri[2])]};
  const double det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
  ElementGeometry g;
  g.area = 0.5 * det;
  for (int i = 0; i < 3; ++i) {
    const Point& pj = p[(i + 1) % 3];
    const Point& pk = p[(i + 2) % 3];
    g.grad[sz(i)] = make_point((pj[1] - pk[1]) / det, (pk[0] - pj[0]) / det);
  }
  return g;
}

}  // namespace

std::vector<ElementGeometry> element_geometry(const Mesh& mesh) {
  std::vector<ElementGeometry> out(mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) out[sz(t)] = triangle_geometry(mesh, t);
  return out;
}

std::array<double, 3> barycentric(const Mesh& mesh, int t, Point x) {
  const auto& tri = mesh.triangles[sz(t)];
  const Point a = mesh.vertices[sz(tri[0])], b = mesh.vertices[sz(tri[1])], c = mesh.vertices[sz(tri[2])];
  const double det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  const double l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (x[1] - a[1]) * (c[0] - a[0])) / det;
  const double l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])) / det;
  return {1.0 - l1 - l2, l1, l2};
}

// ---------------------------------------------------------------------------
// Point location: coarse grid for a start triangle, then a visibility walk.

struct PointLocator::Adjacency {
  std::vector<std::array<int, 3>> across;
  std::vector<std::vector<int>> vertex_triangles;
};

namespace {
constexpr double inside_tol = 1e-12;
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(&mesh) {
  if (mesh.triangles.empty()) throw MeshError("cannot locate points in an empty mesh");
  Point lo = mesh.vertices[0], hi = mesh.vertices[0];
  for (const Point& p : mesh.vertices)
    for (int k = 0; k < 2; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  lo_ = lo;
  const double w = std::max(hi[0] - lo[0], hi[1] - lo[1]);
  const int n = std::clamp(static_cast<int>(std::sqrt(static_cast<double>(mesh.triangles.size()) / 4)), 1, 256);
  cell_ = w / n * (1 + 1e-9);
  nx_ = ny_ = n;
  // Start triangle per cell: centroid nearest the cell centre; empty cells
  // inherit from the nearest filled cell in the same row, then column.
  start_.assign(sz(nx_ * ny_), -1);
  std::vector<double> best(sz(nx_ * ny_), std::numeric_limits<double>::infinity());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Point c = mesh.centroid(t);
    const int i = std::clamp(static_cast<int>((c[0] - lo_[0]) / cell_), 0, nx_ - 1);
    const int j = std::clamp(static_cast<int>((c[1] - lo_[1]) / cell_), 0, ny_ - 1);
    const double d = distance(c, lo_ + make_point((i + 0.5) * cell_, (j + 0.5) * cell_));
    if (d < best[sz(j * nx_ + i)]) {
      best[sz(j * nx_ + i)] = d;
      start_[sz(j * nx_ + i)] = t;
    }
  }
  const int any = *std::max_element(start_.begin(), start_.end());
  for (int pass = 0; pass < 2; ++pass)
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) {
        int& s = start_[sz(j * nx_ + i)];
        if (s >= 0) continue;
        for (int r = 1; r < std::max(nx_, ny_) && s < 0; ++r)
          for (int cand : {pass == 0 ? i - r : j - r, pass == 0 ? i + r : j + r}) {
            if (cand < 0 || cand >= (pass == 0 ? nx_ : ny_)) continue;
            const int other = pass == 0 ? start_[sz(j * nx_ + cand)] : start_[sz(cand * nx_ + i)];
            if (other >= 0) {
              s = other;
              break;
            }
          }
        if (pass == 1 && s < 0) s = any;
      }
  auto adj = std::make_shared<Adjacency>();
  adj->across = neighbours(mesh);
  adj->vertex_triangles.resize(mesh.vertices.size());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int v : mesh.triangles[sz(t)]) adj->vertex_triangles[sz(v)].push_back(t);
  adjacency_ = std::move(adj);
}

std::optional<PointLocator::Hit> PointLocator::locate(Point x, double outside_tolerance) const {
  const Mesh& mesh = *mesh_;
  const int i = std::clamp(static_cast<int>((x[0] - lo_[0]) / cell_), 0, nx_ - 1);
  const int j = std::clamp(static_cast<int>((x[1] - lo_[1]) / cell_), 0, ny_ - 1);
  int t = start_[sz(j * nx_ + i)];
  int best_t = -1;
  double best_violation = std::numeric_limits<double>::infinity();
  for (int step = 0; step < mesh.num_triangles(); ++step) {
    const auto lambda = barycentric(mesh, t, x);
    int worst = 0;
    for (int a = 1; a < 3; ++a)
      if (lambda[sz(a)] < lambda[sz(worst)]) worst = a;
    if (lambda[sz(worst)] >= -inside_tol) return Hit{t, lambda};
    if (-lambda[sz(worst)] < best_violation) {
      best_violation = -lambda[sz(worst)];
      best_t = t;
    }
    int next = adjacency_->across[sz(t)][sz(worst)];
    if (next < 0)
      for (int a = 0; a < 3; ++a)
        if (a != worst && lambda[sz(a)] < -inside_tol && adjacency_->across[sz(t)][sz(a)] >= 0)
          next = adjacency_->across[sz(t)][sz(a)];
    if (next < 0) break;
    t = next;
  }
  // Outside the mesh (or a walk through a non-convex region): brute force.
  for (int s = 0; s < mesh.num_triangles(); ++s) {
    const auto lambda = barycentric(mesh, s, x);
    const double v = -std::min({lambda[0], lambda[1], lambda[2]});
    if (v <= inside_tol) return Hit{s, lambda};
    if (v < best_violation) {
      best_violation = v;
      best_t = s;
    }
  }
  if (best_t >= 0 && outside_tolerance > 0) {
    // Barycentric violation times the element size approximates the distance.
    if (best_violation * mesh.diameter(best_t) <= outside_tolerance) {
      auto lambda = barycentric(mesh, best_t, x);
      double sum = 0.0;
      for (double& l : lambda) {
        l = std::max(l, 0.0);
        sum += l;
      }
      for (double& l : lambda) l /= sum;
      return Hit{best_t, lambda};
    }
  }
  return std::nullopt;
}

std::vector<PointLocator::Hit> PointLocator::locate_all(Point x) const {
  std::vector<Hit> hits;
  const auto first = locate(x);
  if (!first) return hits;
  const auto& tri = mesh_->triangles[sz(first->triangle)];
  std::vector<int> candidates;
  for (int v : tri)
    for (int t : adjacency_->vertex_triangles[sz(v)]) candidates.push_back(t);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (int t : candidates) {
    const auto lambda = barycentric(*mesh_, t, x);
    if (std::min({lambda[0], lambda[1], lambda[2]}) >= -1e-10) hits.push_back({t, lambda});
  }
  if (hits.empty()) hits.push_back(*first);
  return hits;
}

// ---------------------------------------------------------------------------

FieldFunction::FieldFunction(std::shared_ptr<const Mesh> mesh, int components)
    : mesh_(std::move(mesh)), m_(components) {
  if (m_ < 1 || m_ > 2) throw std::invalid_argument("fields have 1 or 2 components");
  values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_) * mesh_->num_vertices());
  constrained_.assign(sz(num_dofs()), 0);
}

void FieldFunction::constrain(const std::vector<BoundaryMarker>& markers) {
  for (const auto& e : mesh_->boundary_edges) {
    if (std::find(markers.begin(), markers.end(), e.marker) == markers.end()) continue;
    for (int v : e.v)
      for (int c = 0; c < m_; ++c) {
        constrained_[sz(dof(v, c))] = 1;
        values_[dof(v, c)] = 0.0;
      }
  }
}

Vec2<double> FieldFunction::vertex_value(int v) const {
  Vec2<double> r{};
  for (int c = 0; c < m_; ++c) r[c] = values_[dof(v, c)];
  return r;
}

Vec2<double> FieldFunction::value(int t, const std::array<double, 3>& lambda) const {
  const auto& tri = mesh_->triangles[sz(t)];
  Vec2<double> r{};
  for (int a = 0; a < 3; ++a) r += lambda[sz(a)] * vertex_value(tri[sz(a)]);
  return r;
}

Mat2<double> FieldFunction::gradient(int t, const ElementGeometry& g) const {
  const auto& tri = mesh_->triangles[sz(t)];
  Mat2<double> d{};
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < m_; ++c)
      for (int k = 0; k < 2; ++k) d(c, k) += values_[dof(tri[sz(a)], c)] * g.grad[sz(a)][k];
  return d;
}

Mat2<double> FieldFunction::gradient(int t) const { return gradient(t, triangle_geometry(*mesh_, t)); }

PointValue evaluate_at(const FieldFunction& u, Point x, const PointLocator* locator) {
  std::optional<PointLocator> own;
  if (!locator) {
    own.emplace(u.mesh());
    locator = &*own;
  }
  const auto hits = locator->locate_all(x);
  if (hits.empty()) throw EvaluationError("point outside the mesh", x);
  PointValue out;
  out.value = u.value(hits[0].triangle, hits[0].lambda);
  double total = 0.0;
  for (const auto& h : hits) {
    const double a = u.mesh().area(h.triangle);
    out.gradient += a * u.gradient(h.triangle);
    total += a;
  }
  out.gradient = (1.0 / total) * out.gradient;
  return out;
}

FieldFunction interpolate(const FieldFunction& source, std::shared_ptr<const Mesh> target) {
  FieldFunction out(target, source.components());
  const PointLocator locator(source.mesh());
  const double tol = 1e-9 * std::max(1.0, source.mesh().diameter(0));
  for (int v = 0; v < target->num_vertices(); ++v) {
    const Point x = target->vertices[sz(v)];
    const auto hit = locator.locate(x, tol);
    if (!hit) throw EvaluationError("interpolation target vertex outside the source mesh", x);
    const auto val = source.value(hit->triangle, hit->lambda);
    for (int c = 0; c < out.components(); ++c) out.values()[out.dof(v, c)] = val[c];
  }
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<QuadraturePoint>& triangle_rule() {
  static const std::vector<QuadraturePoint> rule = [] {
    const double a = 0.445948490915965, wa = 0.223381589678011;
    const double b = 0.091576213509771, wb = 0.109951743655322;
    return std::vector<QuadraturePoint>{
        {{a, a, 1 - 2 * a}, wa}, {{a, 1 - 2 * a, a}, wa}, {{1 - 2 * a, a, a}, wa},
        {{b, b, 1 - 2 * b}, wb}, {{b, 1 - 2 * b, b}, wb}, {{1 - 2 * b, b, b}, wb},
    };
  }();
  return rule;
}

const std::vector<QuadraturePoint>& centroid_rule() {
  static const std::vector<QuadraturePoint> rule{{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 1.0}};
  return rule;
}

const std::vector<std::pair<double, double>>& edge_rule() {
  static const std::vector<std::pair<double, double>> rule = [] {
    const double h = 0.5 * std::sqrt(0.6);
    return std::vector<std::pair<double, double>>{{0.5 - h, 5.0 / 18}, {0.5, 8.0 / 18}, {0.5 + h, 5.0 / 18}};
  }();
  return rule;
}

template <class T>
void StateForm::eval(int t, Point x, const Vec2<T>& y1, const Mat2<T>& y2, Vec2<T>& a1, Mat2<T>& a2) const {
  const Material& mat = spec_->material((*regions_)[sz(t)]);
  a1 = mat.A1(x, y1, y2);
  a2 = mat.A2(x, y1, y2);
  if (load_ != 0.0) {
    if (mat.F1) {
      const Vec2<double> f = mat.F1(x);
      for (int c = 0; c < 2; ++c) a1[c] -= load_ * f[c];
    }
    if (mat.F2) {
      const Mat2<double> f = mat.F2(x);
      for (std::size_t i = 0; i < 4; ++i) a2.a[i] -= load_ * f.a[i];
    }
  }
}

void StateForm::flux(int t, Point x, const Vec2<double>& y1, const Mat2<double>& y2, Vec2<double>& a1,
                     Mat2<double>& a2) const {
  eval(t, x, y1, y2, a1, a2);
}

void StateForm::flux(int t, Point x, const Vec2<Dual>& y1, const Mat2<Dual>& y2, Vec2<Dual>& a1,
                     Mat2<Dual>& a2) const {
  eval(t, x, y1, y2, a1, a2);
}

Eigen::VectorXd assemble_residual(const FluxForm& form, const FieldFunction& u, const AssemblyContext& ctx) {
  const Mesh& mesh = *ctx.mesh;
  const int m = u.components();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(u.num_dofs());
  const auto& rule = form.constant_per_element() ? centroid_rule() : triangle_rule();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& g = ctx.geometry[sz(t)];
    const auto& tri = mesh.triangles[sz(t)];
    const LocalState s = local_state(u, t, g);
    for (const auto& q : rule) {
      const Point x = map_point(mesh, t, q.lambda);
      Vec2<double> a1{};
      Mat2<double> a2{};
      form.flux(t, x, interp(s, q.lambda), s.du, a1, a2);
      for (int c = 0; c < m; ++c)
        if (!std::isfinite(a1[c]) || !std::isfinite(a2(c, 0)) || !std::isfinite(a2(c, 1)))
          throw EvaluationError("non-finite flux in triangle " + std::to_string(t), x);
      const double w = q.weight * g.area;
      for (int a = 0; a < 3; ++a)
        for (int c = 0; c < m; ++c)
          r[u.dof(tri[sz(a)], c)] +=
              w * (a1[c] * q.lambda[sz(a)] + a2(c, 0) * g.grad[sz(a)][0] + a2(c, 1) * g.grad[sz(a)][1]);
    }
  }
  if (form.has_surface_load()) {
    for (const auto& e : load_edges(mesh, true)) {
      const Point pa = mesh.vertices[sz(e.a)], pb = mesh.vertices[sz(e.b)];
      const double len = distance(pa, pb);
      for (const auto& [s, w] : edge_rule()) {
        const Point x = (1 - s) * pa + s * pb;
        const Vec2<double> g = form.surface_load(x);
        for (int c = 0; c < m; ++c) {
          r[u.dof(e.a, c)] -= w * len * g[c] * (1 - s);
          r[u.dof(e.b, c)] -= w * len * g[c] * s;
        }
      }
    }
  }
  for (int i = 0; i < u.num_dofs(); ++i)
    if (u.constrained()[sz(i)]) r[i] = 0.0;
  return r;
}

SparseMatrix assemble_jacobian(const FluxForm& form, const FieldFunction& u, const AssemblyContext& ctx) {
  const Mesh& mesh = *ctx.mesh;
  const int m = u.components();
  const auto dirs = tangent_set(m);
  const int nd = static_cast<int>(dirs.size());
  const auto& rule = form.constant_per_element() ? centroid_rule() : triangle_rule();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.triangles.size() * sz(9 * m * m));
  std::vector<Vec2<double>> da1(sz(nd));
  std::vector<Mat2<double>> da2(sz(nd));
  const auto& fixed = u.constrained();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& g = ctx.geometry[sz(t)];
    const auto& tri = mesh.triangles[sz(t)];
    const LocalState s = local_state(u, t, g);
    double local[6][6] = {};
    for (const auto& q : rule) {
      const Point x = map_point(mesh, t, q.lambda);
      const Vec2<double> y1 = interp(s, q.lambda);
      for (int d = 0; d < nd; ++d) {
        Vec2<double> dy1;
        Mat2<double> dy2;
        tangent_components(dirs[sz(d)], dy1, dy2);
        Vec2<Dual> a1;
        Mat2<Dual> a2;
        form.flux(t, x, seeded_vec<Dual>(y1, dy1), seeded_mat<Dual>(s.du, dy2), a1, a2);
        detail::check_finite(a1, x);
        detail::check_finite(a2, x);
        da1[sz(d)] = detail::derivative_part(a1);
        da2[sz(d)] = detail::derivative_part(a2);
      }
      const double w = q.weight * g.area;
      for (int a = 0; a < 3; ++a)
        for (int c = 0; c < m; ++c)
          for (int b = 0; b < 3; ++b)
            for (int cp = 0; cp < m; ++cp) {
              double v = 0.0;
              for (int d = 0; d < nd; ++d) {
                const double tw = tangent_weight(dirs[sz(d)], cp, q.lambda[sz(b)], g.grad[sz(b)]);
                if (tw == 0.0) continue;
                v += tw * (da1[sz(d)][c] * q.lambda[sz(a)] + da2[sz(d)](c, 0) * g.grad[sz(a)][0] +
                           da2[sz(d)](c, 1) * g.grad[sz(a)][1]);
              }
              local[a * m + c][b * m + cp] += w * v;
            }
    }
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < m; ++c) {
        const int row = u.dof(tri[sz(a)], c);
        if (fixed[sz(row)]) continue;
        for (int b = 0; b < 3; ++b)
          for (int cp = 0; cp < m; ++cp) {
            const int col = u.dof(tri[sz(b)], cp);
            if (fixed[sz(col)]) continue;
            triplets.emplace_back(row, col, local[a * m + c][b * m + cp]);
          }
      }
  }
  for (int i = 0; i < u.num_dofs(); ++i)
    if (fixed[sz(i)]) triplets.emplace_back(i, i, 1.0);
  SparseMatrix jac(u.num_dofs(), u.num_dofs());
  jac.setFromTriplets(triplets.begin(), triplets.end());
  jac.makeCompressed();
  return jac;
}

Eigen::VectorXd assemble_residual(const ProblemSpec& spec, const FieldFunction& u) {
  const AssemblyContext ctx(u.mesh());
  return assemble_residual(StateForm(spec, u.mesh().regions), u, ctx);
}

SparseMatrix assemble_jacobian(const ProblemSpec& spec, const FieldFunction& u) {
  const AssemblyContext ctx(u.mesh());
  return assemble_jacobian(StateForm(spec, u.mesh().regions), u, ctx);
}

// ---------------------------------------------------------------------------

namespace {

double free_norm(const Eigen::VectorXd& r) { return r.norm(); }

// Newton on form(u) - offset = 0 at one load level; u is updated in place.
void newton_loop(FieldFunction& u, const FluxForm& form, const AssemblyContext& ctx, const Eigen::VectorXd* offset,
                 const NewtonOptions& opt, const std::string& stage, const std::string& where, NewtonReport* report) {
  auto residual = [&] {
    Eigen::VectorXd r = assemble_residual(form, u, ctx);
    if (offset) {
      r -= *offset;
      for (int i = 0; i < u.num_dofs(); ++i)
        if (u.constrained()[sz(i)]) r[i] = 0.0;
    }
    return r;
  };
  Eigen::VectorXd r = residual();
  const double r0 = free_norm(r);
  std::vector<double> history{r0};
  const double target = std::max(opt.tol, opt.rel_tol * r0);
  bool converged = r0 <= target;
  int it = 0;
  while (!converged && it < opt.max_iter) {
    ++it;
    const SparseMatrix jac = assemble_jacobian(form, u, ctx);
    const Eigen::VectorXd du = solve_linear(jac, -r, stage);
    const double step = std::min(1.0, opt.damping * it);
    const double scale = std::max(u.values().norm(), 1e-300);
    u.values() += step * du;
    Eigen::VectorXd trial = residual();
    const double norm = free_norm(trial);
    // Correction at noise level that no longer lowers the residual: keep the previous iterate.
    if (trial.allFinite() && norm >= history.back() && du.norm() <= 1e-10 * scale) {
      u.values() -= step * du;
      converged = true;
      break;
    }
    r = std::move(trial);
    history.push_back(norm);
    if (!r.allFinite()) break;
    converged = history.back() <= target;
    // The Newton correction is at rounding level: the residual cannot drop further.
    if (!converged && du.norm() <= 1e-13 * scale) converged = true;
  }
  if (report) {
    report->iterations += it;
    report->residual = history.back();
    report->history = history;
  }
  if (!converged)
    throw SolverError(stage, "Newton did not converge" + where + " after " + std::to_string(it) +
                                 " iterations (damping " + std::to_string(opt.damping) + "), residual " +
                                 std::to_string(history.back()));
}

}  // namespace

FieldFunction solve_newton(const FormFactory& form_at, FieldFunction initial, const NewtonOptions& options,
                           const std::string& stage, NewtonReport* report) {
  if (options.load_steps < 1) throw std::invalid_argument("load_steps must be >= 1");
  if (!(options.damping > 0 && options.damping <= 1)) throw std::invalid_argument("damping must lie in (0, 1]");
  FieldFunction u = std::move(initial);
  for (int i = 0; i < u.num_dofs(); ++i)
    if (u.constrained()[sz(i)]) u.values()[i] = 0.0;
  const AssemblyContext ctx(u.mesh());
  if (report) *report = {};
  const int n = options.load_steps;
  for (int k = 1; k <= n; ++k) {
    const auto form = form_at(static_cast<double>(k) / n);
    const std::string where = n > 1 ? " at load step " + std::to_string(k) + "/" + std::to_string(n) : "";
    newton_loop(u, *form, ctx, nullptr, options, stage, where, report);
  }
  return u;
}

FieldFunction solve_newton_offset(const FluxForm& form, const FieldFunction& base, const Eigen::VectorXd& offset,
                                  const NewtonOptions& options, const std::string& stage, NewtonReport* report) {
  FieldFunction u = base;
  const AssemblyContext ctx(u.mesh());
  if (report) *report = {};
  newton_loop(u, form, ctx, &offset, options, stage, "", report);
  return u;
}

FieldFunction solve_state(const ProblemSpec& spec, std::shared_ptr<const Mesh> mesh, const NewtonOptions& options,
                          NewtonReport* report) {
  const auto& regions = mesh->regions;
  return solve_state(spec, mesh, regions, options, nullptr, report);
}

FieldFunction solve_state(const ProblemSpec& spec, std::shared_ptr<const Mesh> mesh, const std::vector<Region>& regions,
                          const NewtonOptions& options, const FieldFunction* initial, NewtonReport* report) {
  if (regions.size() != mesh->triangles.size()) throw std::invalid_argument("region list does not match the mesh");
  FieldFunction u(mesh, spec.components);
  if (initial) u.values() = initial->values();
  u.constrain({BoundaryMarker::dirichlet});
  const FormFactory factory = [&](double load) { return std::make_unique<StateForm>(spec, regions, load); };
  return solve_newton(factory, std::move(u), options, "state", report);
}

// ---------------------------------------------------------------------------

double CostBreakdown::total() const {
  double s = boundary;
  for (double v : per_triangle) s += v;
  return s;
}

CostBreakdown evaluate_cost(const ProblemSpec& spec, const FieldFunction& u, const std::vector<Region>& regions) {
  const Mesh& mesh = u.mesh();
  const auto geometry = element_geometry(mesh);
  CostBreakdown out;
  out.per_triangle.assign(mesh.triangles.size(), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Material& mat = spec.material(regions[sz(t)]);
    if (!mat.j) continue;
    const auto& g = geometry[sz(t)];
    const LocalState s = local_state(u, t, g);
    double sum = 0.0;
    for (const auto& q : triangle_rule()) {
      const Point x = map_point(mesh, t, q.lambda);
      const double v = mat.j(x, interp(s, q.lambda), s.du);
      if (!std::isfinite(v)) throw EvaluationError("non-finite cost density", x);
      sum += q.weight * v;
    }
    out.per_triangle[sz(t)] = sum * g.area;
  }
  if (spec.j_boundary) {
    for (const auto& e : load_edges(mesh, false)) {
      const Point pa = mesh.vertices[sz(e.a)], pb = mesh.vertices[sz(e.b)];
      const double len = distance(pa, pb);
      const Mat2<double> du = u.gradient(e.triangle, geometry[sz(e.triangle)]);
      const Vec2<double> ua = u.vertex_value(e.a), ub = u.vertex_value(e.b);
      for (const auto& [s, w] : edge_rule()) {
        const Point x = (1 - s) * pa + s * pb;
        out.boundary += w * len * spec.j_boundary(x, (1 - s) * ua + s * ub, du);
      }
    }
  }
  return out;
}

double evaluate_cost(const ProblemSpec& spec, const FieldFunction& u) {
  return evaluate_cost(spec, u, u.mesh().regions).total();
}

Eigen::VectorXd cost_gradient(const ProblemSpec& spec, const FieldFunction& u, const std::vector<Region>& regions) {
  const Mesh& mesh = u.mesh();
  const int m = u.components();
  const auto geometry = element_geometry(mesh);
  const auto dirs = tangent_set(m);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(u.num_dofs());
  // d j / d(tangent) for every tangent, contracted with the basis functions of triangle t.
  auto scatter = [&](int t, const std::vector<double>& dj, double w, const std::array<double, 3>& lambda) {
    const auto& tri = mesh.triangles[sz(t)];
    const auto& g = geometry[sz(t)];
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < m; ++c) {
        double v = 0.0;
        for (std::size_t d = 0; d < dirs.size(); ++d) v += dj[d] * tangent_weight(dirs[d], c, lambda[sz(b)], g.grad[sz(b)]);
        grad[u.dof(tri[sz(b)], c)] += w * v;
      }
  };
  std::vector<double> dj(dirs.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Material& mat = spec.material(regions[sz(t)]);
    if (!mat.j) continue;
    const auto& g = geometry[sz(t)];
    const LocalState s = local_state(u, t, g);
    for (const auto& q : triangle_rule()) {
      const Point x = map_point(mesh, t, q.lambda);
      const StatePoint at{x, interp(s, q.lambda), s.du};
      for (std::size_t d = 0; d < dirs.size(); ++d) dj[d] = directional_derivative(mat.j, at, dirs[d], m, 2);
      scatter(t, dj, q.weight * g.area, q.lambda);
    }
  }
  if (spec.j_boundary) {
    for (const auto& e : load_edges(mesh, false)) {
      const Point pa = mesh.vertices[sz(e.a)], pb = mesh.vertices[sz(e.b)];
      const double len = distance(pa, pb);
      const Mat2<double> du = u.gradient(e.triangle, geometry[sz(e.triangle)]);
      const Vec2<double> ua = u.vertex_value(e.a), ub = u.vertex_value(e.b);
      const auto& tri = mesh.triangles[sz(e.triangle)];
      for (const auto& [s, w] : edge_rule()) {
        const Point x = (1 - s) * pa + s * pb;
        const StatePoint at{x, (1 - s) * ua + s * ub, du};
        for (std::size_t d = 0; d < dirs.size(); ++d) dj[d] = directional_derivative(spec.j_boundary, at, dirs[d], m, 2);
        // The trace of the basis function of vertex b on the edge is linear in s.
        std::array<double, 3> lambda{};
        for (int b = 0; b < 3; ++b) lambda[sz(b)] = tri[sz(b)] == e.a ? 1 - s : tri[sz(b)] == e.b ? s : 0.0;
        scatter(e.triangle, dj, w * len, lambda);
      }
    }
  }
  for (int i = 0; i < u.num_dofs(); ++i)
    if (u.constrained()[sz(i)]) grad[i] = 0.0;
  return grad;
}

FieldFunction solve_adjoint(const ProblemSpec& spec, const FieldFunction& u0) {
  return solve_adjoint(spec, u0, u0.mesh().regions);
}

FieldFunction solve_adjoint(const ProblemSpec& spec, const FieldFunction& u0, const std::vector<Region>& regions) {
  const AssemblyContext ctx(u0.mesh());
  const SparseMatrix jac = assemble_jacobian(StateForm(spec, regions), u0, ctx);
  const Eigen::VectorXd rhs = -cost_gradient(spec, u0, regions);
  const SparseMatrix jt = jac.transpose();
  FieldFunction p(u0.mesh_ptr(), u0.components());
  p.constrained() = u0.constrained();
  p.values() = solve_linear(jt, rhs, "adjoint");
  return p;
}

}  // namespace topoforge
