#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Sparse>

namespace topoforge {

// Sparse direct factorization: supernodal Cholesky when the matrix is
// symmetric positive definite, LU otherwise. Every solve is refined until
// the relative residual is <= 1e-10 (or at backward-error level).
class SparseFactorization {
 public:
  SparseFactorization(const Eigen::SparseMatrix<double>& matrix, std::string stage);
  ~SparseFactorization();
  SparseFactorization(const SparseFactorization&) = delete;
  SparseFactorization& operator=(const SparseFactorization&) = delete;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  bool used_cholesky() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Eigen::VectorXd solve_linear(const Eigen::SparseMatrix<double>& matrix, const Eigen::VectorXd& rhs,
                             const std::string& stage = "linear solve");

// Number of linear solves performed by this process (all threads).
std::uint64_t linear_solve_count();

}  // namespace topoforge
