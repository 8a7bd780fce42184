#pragma once

// P1 finite elements for scalar and 2-component fields: element geometry,
// point location, residual/Jacobian assembly of flux forms, Newton with
// damping and load stepping, adjoint and cost evaluation.

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Sparse>

#include "topoforge/autodiff.hpp"
#include "topoforge/mesh.hpp"
#include "topoforge/problem.hpp"

namespace topoforge {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct ElementGeometry {
  double area = 0.0;
  std::array<Point, 3> grad{};  // gradients of the barycentric coordinates
};

std::vector<ElementGeometry> element_geometry(const Mesh& mesh);

// Barycentric coordinates of x in triangle t.
std::array<double, 3> barycentric(const Mesh& mesh, int t, Point x);

// Coarse grid of start triangles followed by a walk across neighbours;
// brute force when the walk leaves the mesh.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);

  struct Hit {
    int triangle = -1;
    std::array<double, 3> lambda{};
  };
  // Every triangle containing x (up to a relative tolerance).
  std::vector<Hit> locate_all(Point x) const;
  // Containing triangle, or the closest one when x lies just outside the mesh.
  std::optional<Hit> locate(Point x, double outside_tolerance = 0.0) const;

 private:
  const Mesh* mesh_;
  Point lo_{};
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<int> start_;  // start triangle per grid cell
  struct Adjacency;
  std::shared_ptr<const Adjacency> adjacency_;
};

// P1 field with m components, dofs interleaved (vertex-major).
class FieldFunction {
 public:
  FieldFunction() = default;
  FieldFunction(std::shared_ptr<const Mesh> mesh, int components);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int components() const { return m_; }
  int num_dofs() const { return static_cast<int>(values_.size()); }
  int dof(int vertex, int component) const { return m_ * vertex + component; }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  std::vector<char>& constrained() { return constrained_; }
  const std::vector<char>& constrained() const { return constrained_; }

  // Constrain every dof on boundary edges with the given markers to zero.
  void constrain(const std::vector<BoundaryMarker>& markers);

  Vec2<double> vertex_value(int v) const;
  Vec2<double> value(int t, const std::array<double, 3>& lambda) const;
  Mat2<double> gradient(int t, const ElementGeometry& g) const;
  Mat2<double> gradient(int t) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  int m_ = 1;
  Eigen::VectorXd values_;
  std::vector<char> constrained_;
};

struct PointValue {
  Vec2<double> value{};
  Mat2<double> gradient{};
};

// Barycentric value; gradient averaged (area weighted) over every triangle
// containing x. Throws EvaluationError outside the mesh.
PointValue evaluate_at(const FieldFunction& u, Point x, const PointLocator* locator = nullptr);

// Nodal interpolation of `source` onto `target`, locating every target vertex.
FieldFunction interpolate(const FieldFunction& source, std::shared_ptr<const Mesh> target);

struct QuadraturePoint {
  std::array<double, 3> lambda{};
  double weight = 0.0;  // sums to 1 over the rule
};
const std::vector<QuadraturePoint>& triangle_rule();     // 6 points, degree 4
const std::vector<QuadraturePoint>& centroid_rule();     // 1 point
const std::vector<std::pair<double, double>>& edge_rule();  // (t in [0,1], weight), degree 5

// Weak form  sum_T int a1(x, u, Du) . psi + a2(x, u, Du) : Dpsi  -  int_{load edges} g . psi.
class FluxForm {
 public:
  virtual ~FluxForm() = default;
  virtual void flux(int t, Point x, const Vec2<double>& y1, const Mat2<double>& y2, Vec2<double>& a1,
                    Mat2<double>& a2) const = 0;
  virtual void flux(int t, Point x, const Vec2<Dual>& y1, const Mat2<Dual>& y2, Vec2<Dual>& a1,
                    Mat2<Dual>& a2) const = 0;
  // Flux independent of x within each triangle and affine-free of quadrature (one point suffices).
  virtual bool constant_per_element() const { return false; }
  // Surface load on Neumann edges and load lines; empty by default.
  virtual bool has_surface_load() const { return false; }
  virtual Vec2<double> surface_load(Point) const { return {}; }
};

// State equation of a ProblemSpec on a mesh with the given region markers;
// F1, F2, g_N scaled by load_factor.
class StateForm : public FluxForm {
 public:
  StateForm(const ProblemSpec& spec, const std::vector<Region>& regions, double load_factor = 1.0)
      : spec_(&spec), regions_(&regions), load_(load_factor) {}
  void flux(int t, Point x, const Vec2<double>& y1, const Mat2<double>& y2, Vec2<double>& a1,
            Mat2<double>& a2) const override;
  void flux(int t, Point x, const Vec2<Dual>& y1, const Mat2<Dual>& y2, Vec2<Dual>& a1,
            Mat2<Dual>& a2) const override;
  bool has_surface_load() const override { return static_cast<bool>(spec_->neumann); }
  Vec2<double> surface_load(Point x) const override { return load_ * spec_->neumann(x); }

 private:
  template <class T>
  void eval(int t, Point x, const Vec2<T>& y1, const Mat2<T>& y2, Vec2<T>& a1, Mat2<T>& a2) const;
  const ProblemSpec* spec_;
  const std::vector<Region>* regions_;
  double load_;
};

struct AssemblyContext {
  const Mesh* mesh = nullptr;
  std::vector<ElementGeometry> geometry;
  explicit AssemblyContext(const Mesh& m) : mesh(&m), geometry(element_geometry(m)) {}
};

// Residual with constrained rows zeroed.
Eigen::VectorXd assemble_residual(const FluxForm& form, const FieldFunction& u, const AssemblyContext& ctx);
// Jacobian with constrained rows and columns replaced by identity.
SparseMatrix assemble_jacobian(const FluxForm& form, const FieldFunction& u, const AssemblyContext& ctx);

Eigen::VectorXd assemble_residual(const ProblemSpec& spec, const FieldFunction& u);
SparseMatrix assemble_jacobian(const ProblemSpec& spec, const FieldFunction& u);

struct NewtonOptions {
  double tol = 1e-10;       // absolute residual 2-norm
  double rel_tol = 1e-12;   // relative to the residual at the start of each load step
  int max_iter = 60;
  double damping = 1.0;     // step length min(1, damping * k) at iteration k
  int load_steps = 1;
};

struct NewtonReport {
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> history;  // residual norms, last load step
};

// Solves form(load k / N)(u) = 0 for k = 1..N starting from `initial`. `form_at`
// returns the form for a load factor. Throws SolverError(stage) with the load
// step and last residual on failure.
using FormFactory = std::function<std::unique_ptr<FluxForm>(double load_factor)>;
FieldFunction solve_newton(const FormFactory& form_at, FieldFunction initial, const NewtonOptions& options,
                           const std::string& stage, NewtonReport* report = nullptr);

// Solves form(u0 + w) - offset = 0 for w (offset = residual of a reference problem).
FieldFunction solve_newton_offset(const FluxForm& form, const FieldFunction& base, const Eigen::VectorXd& offset,
                                  const NewtonOptions& options, const std::string& stage,
                                  NewtonReport* report = nullptr);

// State with the spec's Dirichlet boundary, regions from the mesh.
FieldFunction solve_state(const ProblemSpec& spec, std::shared_ptr<const Mesh> mesh, const NewtonOptions& options,
                          NewtonReport* report = nullptr);
FieldFunction solve_state(const ProblemSpec& spec, std::shared_ptr<const Mesh> mesh, const std::vector<Region>& regions,
                          const NewtonOptions& options, const FieldFunction* initial = nullptr,
                          NewtonReport* report = nullptr);

// Cost contributions per triangle plus the Neumann boundary total.
struct CostBreakdown {
  std::vector<double> per_triangle;
  double boundary = 0.0;
  double total() const;
};
CostBreakdown evaluate_cost(const ProblemSpec& spec, const FieldFunction& u, const std::vector<Region>& regions);
double evaluate_cost(const ProblemSpec& spec, const FieldFunction& u);

// Gradient of the cost with respect to the dofs (constrained entries zero).
Eigen::VectorXd cost_gradient(const ProblemSpec& spec, const FieldFunction& u, const std::vector<Region>& regions);

// J'(u0)^T p = -dJ/du (linearized state operator transposed).
FieldFunction solve_adjoint(const ProblemSpec& spec, const FieldFunction& u0);
FieldFunction solve_adjoint(const ProblemSpec& spec, const FieldFunction& u0, const std::vector<Region>& regions);

}  // namespace topoforge
