#include "topoforge/linear_solver.hpp"

#include <atomic>
#include <cmath>

#include <Eigen/CholmodSupport>
#include <Eigen/UmfPackSupport>

#include "topoforge/error.hpp"

namespace topoforge {

namespace {

std::atomic<std::uint64_t> solve_counter{0};

bool is_symmetric(const Eigen::SparseMatrix<double>& a) {
  const Eigen::SparseMatrix<double> t = a.transpose();
  const Eigen::SparseMatrix<double> diff = a - t;
  double scale = 0.0, asym = 0.0;
  for (int k = 0; k < a.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  for (int k = 0; k < diff.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it) asym = std::max(asym, std::abs(it.value()));
  return asym <= 1e-13 * scale;
}

double max_abs(const Eigen::SparseMatrix<double>& a) {
  double s = 0.0;
  for (int k = 0; k < a.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) s = std::max(s, std::abs(it.value()));
  return s;
}

}  // namespace

struct SparseFactorization::Impl {
  Eigen::SparseMatrix<double> matrix;
  std::string stage;
  std::unique_ptr<Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>, Eigen::Lower>> llt;
  std::unique_ptr<Eigen::UmfPackLU<Eigen::SparseMatrix<double>>> lu;
  double norm_inf = 0.0;

  Eigen::VectorXd raw_solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = llt ? Eigen::VectorXd(llt->solve(b)) : Eigen::VectorXd(lu->solve(b));
    if (!x.allFinite()) throw SolverError(stage, "linear solve produced non-finite values");
    return x;
  }
};

SparseFactorization::SparseFactorization(const Eigen::SparseMatrix<double>& matrix, std::string stage)
    : impl_(std::make_unique<Impl>()) {
  impl_->matrix = matrix;
  impl_->matrix.makeCompressed();
  impl_->stage = std::move(stage);
  if (matrix.rows() != matrix.cols()) throw SolverError(impl_->stage, "matrix is not square");
  if (matrix.rows() == 0) return;
  impl_->norm_inf = max_abs(impl_->matrix);
  if (is_symmetric(impl_->matrix)) {
    auto llt = std::make_unique<Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>, Eigen::Lower>>();
    llt->cholmod().print = 0;  // indefinite matrices fall back to LU silently
    llt->compute(impl_->matrix);
    if (llt->info() == Eigen::Success) impl_->llt = std::move(llt);
  }
  if (!impl_->llt) {
    auto lu = std::make_unique<Eigen::UmfPackLU<Eigen::SparseMatrix<double>>>();
    lu->compute(impl_->matrix);
    if (lu->info() != Eigen::Success) throw SolverError(impl_->stage, "sparse LU factorization failed (singular matrix)");
    impl_->lu = std::move(lu);
  }
}

SparseFactorization::~SparseFactorization() = default;

bool SparseFactorization::used_cholesky() const { return static_cast<bool>(impl_->llt); }

Eigen::VectorXd SparseFactorization::solve(const Eigen::VectorXd& rhs) const {
  ++solve_counter;
  const auto& a = impl_->matrix;
  if (rhs.size() != a.rows()) throw SolverError(impl_->stage, "right-hand side has wrong length");
  if (a.rows() == 0) return Eigen::VectorXd();
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) return Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd x = impl_->raw_solve(rhs);
  Eigen::VectorXd r = rhs - a * x;
  for (int pass = 0; pass < 4 && r.norm() > 1e-10 * bnorm; ++pass) {
    x += impl_->raw_solve(r);
    r = rhs - a * x;
  }
  const double rel = r.norm() / bnorm;
  if (rel > 1e-10) {
    // Accept only when the residual is at the level of rounding in A x.
    const double backward = r.lpNorm<Eigen::Infinity>() /
                            (impl_->norm_inf * x.lpNorm<Eigen::Infinity>() + rhs.lpNorm<Eigen::Infinity>());
    if (!(backward <= 1e-13))
      throw SolverError(impl_->stage, "linear solve stalled at relative residual " + std::to_string(rel));
  }
  return x;
}

Eigen::VectorXd solve_linear(const Eigen::SparseMatrix<double>& matrix, const Eigen::VectorXd& rhs,
                             const std::string& stage) {
  return SparseFactorization(matrix, stage).solve(rhs);
}

std::uint64_t linear_solve_count() { return solve_counter.load(); }

}  // namespace topoforge
