#pragma once

#include <functional>

#include <Eigen/Dense>

namespace lambda_lab::linalg {

using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using Op = std::function<Vec(const Vec&)>;
using COp = std::function<CVec(const CVec&)>;

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Preconditioned conjugate gradients for a symmetric positive semidefinite
/// operator. An optional projector restricts the iteration to a subspace on
/// which the operator is definite (e.g. the complement of a known kernel);
/// the preconditioner should be symmetric positive definite.
Vec pcg(const Op& A, const Op& M, const Vec& b, Vec x0, double rtol, int max_iter,
        SolveReport* report = nullptr, const Op& projector = {});

/// Restarted GMRES with right preconditioning for complex systems.
CVec gmres(const COp& A, const COp& M, const CVec& b, double rtol, int restart, int max_iter,
           SolveReport* report = nullptr);

struct EigenResult {
  Vec values;    // ascending
  Mat vectors;   // orthonormal columns
  Vec residuals; // ||A x - lambda x|| per returned pair
  int iterations = 0;
  bool converged = false;
};

struct LobpcgOptions {
  int nev = 1;            // pairs that must converge
  double tol = 1e-10;     // residual <= tol * max(1, |lambda|)
  int max_iter = 500;
  double drop = 1e-10;    // relative Gram eigenvalue below which directions are dropped
};

/// Locally optimal block preconditioned conjugate gradients for the lowest
/// eigenpairs of a symmetric operator (standard Euclidean problem). The block
/// width is the number of columns of X0; columns beyond nev act as guards.
/// With a projector, the iteration runs inside its range and the result may
/// hold fewer pairs than requested if that range is smaller.
EigenResult lobpcg(const Op& A, const Op& T, Mat X0, const LobpcgOptions& opts,
                   const Op& projector = {});

/// Orthonormalize columns by the scaled Gram eigendecomposition, dropping
/// numerically dependent directions.
Mat svqb(const Mat& S, double drop);

/// Dense matrix of a linear operator, built column by column.
Mat dense_matrix(const Op& A, Eigen::Index n);

}  // namespace lambda_lab::linalg
