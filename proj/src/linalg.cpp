#include "lambda_lab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace lambda_lab::linalg {

// ==== conjugate gradients ====

Vec pcg(const Op& A, const Op& M, const Vec& b, Vec x, double rtol, int max_iter,
        SolveReport* report, const Op& projector) {
  auto proj = [&](Vec v) { return projector ? projector(v) : v; };
  const Vec bp = proj(b);
  const double bnorm = bp.norm();
  SolveReport rep;
  if (bnorm == 0.0) {
    x.setZero();
    rep.converged = true;
    if (report) *report = rep;
    return x;
  }
  x = proj(x);
  Vec r = proj(bp - A(x));
  Vec z = proj(M ? M(r) : r);
  Vec p = z;
  double rz = r.dot(z);
  for (int it = 0; it < max_iter; ++it) {
    rep.iterations = it;
    rep.relative_residual = r.norm() / bnorm;
    if (rep.relative_residual <= rtol) {
      rep.converged = true;
      break;
    }
    const Vec Ap = proj(A(p));
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) break;
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    // recompute the true residual now and then to avoid drift
    if ((it + 1) % 50 == 0) r = proj(bp - A(x));
    z = proj(M ? M(r) : r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  if (!rep.converged) {
    rep.relative_residual = proj(bp - A(x)).norm() / bnorm;
    rep.converged = rep.relative_residual <= rtol;
  }
  if (report) *report = rep;
  return x;
}

// ==== GMRES ====

CVec gmres(const COp& A, const COp& M, const CVec& b, double rtol, int restart, int max_iter,
           SolveReport* report) {
  using C = std::complex<double>;
  const Eigen::Index n = b.size();
  const double bnorm = b.norm();
  CVec x = CVec::Zero(n);
  SolveReport rep;
  if (bnorm == 0.0) {
    rep.converged = true;
    if (report) *report = rep;
    return x;
  }
  int total = 0;
  while (total < max_iter) {
    CVec r = b - A(x);
    double beta = r.norm();
    rep.relative_residual = beta / bnorm;
    if (rep.relative_residual <= rtol) {
      rep.converged = true;
      break;
    }
    std::vector<CVec> V;
    std::vector<CVec> Z;
    V.push_back(r / beta);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(restart + 1, restart);
    std::vector<C> cs(restart), sn(restart);
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(restart + 1);
    g(0) = beta;
    int j = 0;
    for (; j < restart && total < max_iter; ++j, ++total) {
      Z.push_back(M ? M(V[j]) : V[j]);
      CVec w = A(Z[j]);
      // modified Gram-Schmidt, applied twice
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= j; ++i) {
          const C h = V[i].dot(w);  // conjugates V[i]
          H(i, j) += h;
          w -= h * V[i];
        }
      const double hn = w.norm();
      H(j + 1, j) = hn;
      for (int i = 0; i < j; ++i) {
        const C t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -std::conj(sn[i]) * H(i, j) + std::conj(cs[i]) * H(i + 1, j);
        H(i, j) = t;
      }
      const C a = H(j, j), bb = H(j + 1, j);
      const double denom = std::sqrt(std::norm(a) + std::norm(bb));
      cs[j] = denom == 0.0 ? C(1.0) : a / denom;
      sn[j] = denom == 0.0 ? C(0.0) : bb / denom;
      // rotation [c s; -conj(s) conj(c)] acting on (a, b) gives (denom, 0) with c = conj(a)/d
      cs[j] = std::conj(cs[j]);
      sn[j] = std::conj(sn[j]);
      H(j, j) = cs[j] * a + sn[j] * bb;
      H(j + 1, j) = 0.0;
      g(j + 1) = -std::conj(sn[j]) * g(j);
      g(j) = cs[j] * g(j);
      rep.relative_residual = std::abs(g(j + 1)) / bnorm;
      if (hn == 0.0 || rep.relative_residual <= rtol) {
        ++j;
        ++total;
        break;
      }
      V.push_back(w / hn);
    }
    // back substitution on the j x j upper triangle
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(j);
    for (int i = j - 1; i >= 0; --i) {
      C s = g(i);
      for (int k = i + 1; k < j; ++k) s -= H(i, k) * y(k);
      y(i) = s / H(i, i);
    }
    for (int i = 0; i < j; ++i) x += y(i) * Z[i];
    rep.iterations = total;
  }
  rep.relative_residual = (b - A(x)).norm() / bnorm;
  rep.converged = rep.relative_residual <= rtol;
  rep.iterations = total;
  if (report) *report = rep;
  return x;
}

// ==== LOBPCG ====

Mat svqb(const Mat& S, double drop) {
  if (S.cols() == 0) return S;
  Vec d = S.colwise().norm().transpose();
  const double dmax = d.maxCoeff();
  if (dmax == 0.0) return Mat(S.rows(), 0);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d(i) > dmax * 1e-14) keep.push_back(i);
  Mat Sk(S.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) Sk.col(i) = S.col(keep[i]) / d(keep[i]);
  const Mat G = Sk.transpose() * Sk;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (G + G.transpose()));
  const Vec ev = es.eigenvalues();
  const double emax = ev.maxCoeff();
  std::vector<Eigen::Index> good;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > drop * emax) good.push_back(i);
  Mat T(Sk.cols(), static_cast<Eigen::Index>(good.size()));
  for (std::size_t i = 0; i < good.size(); ++i)
    T.col(i) = es.eigenvectors().col(good[i]) / std::sqrt(ev(good[i]));
  Mat Q = Sk * T;
  // one cleanup pass of classical Gram-Schmidt for accuracy
  for (Eigen::Index i = 0; i < Q.cols(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) Q.col(i) -= Q.col(j).dot(Q.col(i)) * Q.col(j);
    Q.col(i).normalize();
  }
  return Q;
}

namespace {

Mat apply_cols(const Op& A, const Mat& X) {
  Mat Y(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) Y.col(j) = A(X.col(j));
  return Y;
}

Mat project_cols(const Op& P, Mat X) {
  if (!P) return X;
  for (Eigen::Index j = 0; j < X.cols(); ++j) X.col(j) = P(X.col(j));
  return X;
}

}  // namespace

EigenResult lobpcg(const Op& A, const Op& T, Mat X0, const LobpcgOptions& opts, const Op& projector) {
  EigenResult out;
  Mat X = svqb(project_cols(projector, std::move(X0)), 1e-16);
  if (X.cols() == 0) {
    out.converged = true;
    return out;
  }
  Mat AX = apply_cols(A, X);
  Vec lam;
  auto rayleigh_ritz = [&](const Mat& S, const Mat& AS, Eigen::Index m, Mat& Xn, Mat& AXn) {
    Mat G = S.transpose() * AS;
    G = 0.5 * (G + G.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    const Mat C = es.eigenvectors().leftCols(m);
    lam = es.eigenvalues().head(m);
    Xn = S * C;
    AXn = AS * C;
  };
  {
    Mat Xn, AXn;
    rayleigh_ritz(X, AX, X.cols(), Xn, AXn);
    X = Xn;
    AX = AXn;
  }
  const Eigen::Index m = X.cols();
  const Eigen::Index nev = std::min<Eigen::Index>(opts.nev, m);
  Mat P(X.rows(), 0);
  Vec res(m);
  bool exact = true;  // whether AX was just computed directly

  for (int it = 0; it < opts.max_iter; ++it) {
    out.iterations = it;
    Mat R = project_cols(projector, AX - X * lam.asDiagonal());
    for (Eigen::Index j = 0; j < m; ++j) res(j) = R.col(j).norm();
    bool done = true;
    for (Eigen::Index j = 0; j < nev; ++j)
      if (res(j) > opts.tol * std::max(1.0, std::abs(lam(j)))) done = false;
    if (done) {
      if (exact) {
        out.converged = true;
        break;
      }
      AX = apply_cols(A, X);
      exact = true;
      continue;
    }
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < m; ++j)
      if (res(j) > opts.tol * std::max(1.0, std::abs(lam(j)))) active.push_back(j);
    Mat W(X.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i) {
      Vec r = R.col(active[i]);
      W.col(i) = T ? T(r) : r;
    }
    W = project_cols(projector, std::move(W));

    // Q spans [W P] orthogonally to X
    Mat WP(X.rows(), W.cols() + P.cols());
    WP << W, P;
    for (int pass = 0; pass < 2; ++pass) WP -= X * (X.transpose() * WP);
    const Mat Q = svqb(WP, opts.drop);
    if (Q.cols() == 0) break;
    const Mat AQ = apply_cols(A, Q);
    Mat S(X.rows(), m + Q.cols()), AS(X.rows(), m + Q.cols());
    S << X, Q;
    AS << AX, AQ;
    Mat Xn, AXn;
    rayleigh_ritz(S, AS, m, Xn, AXn);
    const Mat coupling = X.transpose() * Xn;
    P = Xn - X * coupling;
    X = Xn;
    AX = AXn;
    exact = false;
    // periodic exact refresh keeps the implicit products honest
    if (it % 20 == 19) {
      X = svqb(X, 1e-14);
      AX = apply_cols(A, X);
      Mat Xr, AXr;
      rayleigh_ritz(X, AX, X.cols(), Xr, AXr);
      X = Xr;
      AX = AXr;
      exact = true;
    }
  }
  out.values = lam;
  out.vectors = X;
  out.residuals = project_cols(projector, apply_cols(A, X) - X * lam.asDiagonal()).colwise().norm().transpose();
  if (out.converged) {
    for (Eigen::Index j = 0; j < nev; ++j)
      if (out.residuals(j) > opts.tol * std::max(1.0, std::abs(lam(j)))) out.converged = false;
  }
  return out;
}

Mat dense_matrix(const Op& A, Eigen::Index n) {
  Mat M(n, n);
  Vec e = Vec::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    e(j) = 1.0;
    M.col(j) = A(e);
    e(j) = 0.0;
  }
  return M;
}

}  // namespace lambda_lab::linalg
