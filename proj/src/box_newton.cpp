#include "box_newton.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace riskmpc::detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd reduced_gradient(const VectorXd& z, const VectorXd& g, const VectorXd& lo,
                          const VectorXd& hi) {
  VectorXd r = g;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if ((z[i] <= lo[i] && g[i] > 0.0) || (z[i] >= hi[i] && g[i] < 0.0)) r[i] = 0.0;
  }
  return r;
}

NewtonResult minimize_box_newton(const NewtonObjective& f, VectorXd& z, const VectorXd& lo,
                                 const VectorXd& hi, int max_iter, double tol) {
  const Eigen::Index n = z.size();
  VectorXd g(n), z_new(n);
  MatrixXd h(n, n);
  double fz = f(z, &g, &h);
  double damping = 1e-8;

  NewtonResult res;
  int stalls = 0;
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    const VectorXd rg = reduced_gradient(z, g, lo, hi);
    res.reduced_grad_norm = rg.lpNorm<Eigen::Infinity>();
    if (res.reduced_grad_norm <= tol * (1.0 + std::abs(fz))) {
      res.converged = true;
      break;
    }

    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (rg[i] != 0.0 || (z[i] > lo[i] && z[i] < hi[i])) free.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(free.size());
    MatrixXd hf(m, m);
    VectorXd gf(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      gf[a] = g[free[a]];
      for (Eigen::Index b = 0; b < m; ++b) hf(a, b) = h(free[a], free[b]);
    }
    const double diag_scale = 1.0 + hf.diagonal().cwiseAbs().maxCoeff();

    // Damped Newton direction; grows the damping until it is a descent
    // direction, degrading toward scaled steepest descent.
    VectorXd df;
    for (int attempt = 0;; ++attempt) {
      MatrixXd damped = hf;
      damped.diagonal().array() += damping * diag_scale;
      Eigen::LDLT<MatrixXd> ldlt(damped);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        df = ldlt.solve(-gf);
        if (df.allFinite() && gf.dot(df) < 0.0) break;
      }
      damping *= 10.0;
      if (attempt >= 12) {
        df = -gf / diag_scale;
        break;
      }
    }
    VectorXd d = VectorXd::Zero(n);
    for (Eigen::Index a = 0; a < m; ++a) d[free[a]] = df[a];

    double step = 1.0;
    bool accepted = false;
    double f_new = fz;
    for (int ls = 0; ls < 30; ++ls) {
      z_new = (z + step * d).cwiseMax(lo).cwiseMin(hi);
      f_new = f(z_new, nullptr, nullptr);
      if (f_new <= fz + 1e-4 * g.dot(z_new - z)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (damping > 1e6) break;
      damping *= 100.0;
      continue;
    }
    damping = step == 1.0 ? std::max(damping * 0.1, 1e-10) : damping * 4.0;

    const double improvement = fz - f_new;
    z = z_new;
    fz = f(z, &g, &h);
    stalls = improvement <= 1e-15 * (1.0 + std::abs(fz)) ? stalls + 1 : 0;
    if (stalls >= 3) break;
  }
  res.value = fz;
  res.reduced_grad_norm = reduced_gradient(z, g, lo, hi).lpNorm<Eigen::Infinity>();
  res.converged = res.converged || res.reduced_grad_norm <= tol * (1.0 + std::abs(fz));
  return res;
}

}  // namespace riskmpc::detail
