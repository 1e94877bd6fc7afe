#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "inmargin/dataset.hpp"
#include "inmargin/error.hpp"
#include "inmargin/kernel.hpp"
#include "inmargin/metric.hpp"
#include "inmargin/model.hpp"

namespace inmargin
{

enum class ProjectionStatus { converged, not_converged, degenerate };

inline const char * to_string(ProjectionStatus s)
{
  switch (s) {
    case ProjectionStatus::converged: return "converged";
    case ProjectionStatus::not_converged: return "not_converged";
    case ProjectionStatus::degenerate: return "degenerate";
  }
  return "unknown";
}

/// Estimated foot point of one sample on f(x) = 0.
struct ProjectionResult
{
  Vector xhat;
  Vector d;
  double dist = 0.0;      // |d|_G
  double residual = 0.0;  // f(xhat)
  ProjectionStatus status = ProjectionStatus::not_converged;
  std::size_t iterations = 0;
  /// Collinearity coefficient grad f = lambda G d and tangential curvatures,
  /// set when the safeguard ran.
  std::optional<double> lambda_est;
  std::vector<double> curvatures;

  bool converged() const noexcept {return status == ProjectionStatus::converged;}
};

struct ProjectionOptions
{
  std::size_t iters = 10;
  bool safeguard = false;
  double tol_f = 1e-8;
  /// Step length (in the metric) below which the iterate counts as settled,
  /// relative to 1 + |d|_G.
  double tol_x = 1e-6;
};

namespace detail
{

inline double gradient_floor(const DiscriminantModel & model)
{
  return 1e-12 * std::max(model.coefficient_scale(), std::numeric_limits<double>::min());
}

// Lower Cholesky factor L of G (G = L L'), identity for Euclidean.
inline Matrix metric_factor(const LocalMetric & metric, Eigen::Index m)
{
  if (metric.is_identity()) {return Matrix::Identity(m, m);}
  return Eigen::LLT<Matrix>(metric.matrix(m)).matrixL();
}

// Shrinks the movement of one projection step along tangential axes where
// the iteration is locally unstable around a distance minimum. Works in
// whitened coordinates z = L'x, where the update is metric-free.
inline Vector safeguard_step(
  const DiscriminantModel & model, const VectorRef & xhat, const VectorRef & target,
  const VectorRef & d, const VectorRef & grad, const LocalMetric & metric,
  ProjectionResult & diag)
{
  const auto m = xhat.size();
  if (m < 2 || d.norm() == 0.0) {return target;}
  const Matrix L = metric_factor(metric, m);
  const auto Lt = L.transpose();
  const Vector dz = Lt * d;
  const Vector gz = L.triangularView<Eigen::Lower>().solve(grad);
  Matrix Hz = L.triangularView<Eigen::Lower>().solve(eval_hess_f(model, xhat));
  Hz = Lt.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(Hz);
  Hz = 0.5 * (Hz + Hz.transpose());

  double lambda = gz.dot(dz) / dz.squaredNorm();
  diag.lambda_est = lambda;
  // Orient f so that its gradient points along d.
  if (lambda < 0.0) {
    lambda = -lambda;
    Hz = -Hz;
  }

  // Orthonormal basis of the complement of dz.
  const Matrix Qfull = Eigen::HouseholderQR<Matrix>(dz).householderQ();
  const Matrix B = Qfull.rightCols(m - 1);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(B.transpose() * Hz * B);
  const Vector c = eig.eigenvalues();
  diag.curvatures.assign(c.data(), c.data() + c.size());

  if ((c.array() >= lambda).any() || lambda == 0.0) {
    return target;  // saddle or maximum: let it escape
  }
  Vector move = Lt * (target - xhat);
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    if (c[j] < -lambda) {
      const double e = 0.5 * lambda / std::abs(c[j]);
      const Vector axis = B * eig.eigenvectors().col(j);
      move -= (1.0 - e) * axis.dot(move) * axis;
    }
  }
  return xhat + Lt.triangularView<Eigen::Upper>().solve(move);
}

}  // namespace detail

/// Linearized distance from x_i to the boundary seen from xhat:
///   |d|_G = |f(xhat) - grad f(xhat)'(xhat - x_i)| / |grad f(xhat)|_{G^-1}
inline double approx_distance(
  const DiscriminantModel & model, const VectorRef & x_i, const VectorRef & xhat,
  const LocalMetric & metric)
{
  const Vector q = eval_grad_f(model, xhat);
  const double qn = std::sqrt(metric.inv_norm_sq(q));
  if (!(qn > detail::gradient_floor(model))) {
    throw Error(ErrorKind::degenerate_gradient, "gradient vanishes at the projection estimate");
  }
  const double num = eval_f(model, xhat) - (xhat - x_i).dot(q);
  return std::abs(num) / qn;
}

inline double approx_distance(
  const DiscriminantModel & model, const VectorRef & x_i, const VectorRef & xhat,
  const Matrix & G)
{
  return approx_distance(model, x_i, xhat, LocalMetric::from_matrix(G));
}

/// Iterates
///   xhat <- x_i - G^-1 q (f(xhat) - (xhat - x_i)'q) / |q|^2_{G^-1},  q = grad f(xhat)
/// from xhat0, holding the model (bases and f0) fixed.
inline ProjectionResult project_point(
  const DiscriminantModel & model, const VectorRef & x_i, const VectorRef & xhat0,
  const LocalMetric & metric, const ProjectionOptions & options = {})
{
  detail::check_point(model, x_i);
  detail::check_point(model, xhat0);
  const double floor = detail::gradient_floor(model);
  ProjectionResult res;
  Vector xhat = xhat0;
  double last_move = std::numeric_limits<double>::infinity();
  bool degenerate = false;
  for (std::size_t l = 0; l < options.iters; ++l) {
    const double f = eval_f(model, xhat);
    const Vector q = eval_grad_f(model, xhat);
    const double qn2 = metric.inv_norm_sq(q);
    if (!(std::sqrt(qn2) > floor)) {
      degenerate = true;
      break;
    }
    const Vector d = xhat - x_i;
    Vector next = x_i - metric.apply_inverse(q) * ((f - d.dot(q)) / qn2);
    if (options.safeguard) {
      next = detail::safeguard_step(model, xhat, next, d, q, metric, res);
    }
    if (!next.allFinite()) {
      degenerate = true;
      break;
    }
    last_move = std::sqrt(metric.norm_sq(next - xhat));
    xhat = next;
    res.iterations = l + 1;
  }

  res.xhat = xhat;
  res.d = xhat - x_i;
  res.dist = std::sqrt(metric.norm_sq(res.d));
  res.residual = eval_f(model, xhat);
  if (degenerate) {
    res.status = ProjectionStatus::degenerate;
    return res;
  }
  const double grad_norm = eval_grad_f(model, xhat).norm();
  const bool on_surface = std::abs(res.residual) <= options.tol_f * (1.0 + grad_norm * res.d.norm());
  const bool settled = options.iters == 0 || last_move <= options.tol_x * (1.0 + res.dist);
  res.status = (on_surface && settled) ? ProjectionStatus::converged : ProjectionStatus::not_converged;
  return res;
}

inline ProjectionResult project_point(
  const DiscriminantModel & model, const VectorRef & x_i, const VectorRef & xhat0,
  const Matrix & G, std::size_t iters, bool safeguard)
{
  ProjectionOptions options;
  options.iters = iters;
  options.safeguard = safeguard;
  return project_point(model, x_i, xhat0, LocalMetric::from_matrix(G), options);
}

/// Stacks the fit set {x_i, xhat_i old, xhat_i new} row-wise.
inline Matrix hyperplane_fit_set(const Matrix & x, const Matrix & xhat_old, const Matrix & xhat_new)
{
  Matrix out(x.rows() + xhat_old.rows() + xhat_new.rows(), x.cols());
  out << x, xhat_old, xhat_new;
  return out;
}

/// Re-expresses the model on new centers: least-squares fit of
/// (a, b, f0) so that f_new matches f_old on the rows of `fit_points`.
/// The system is regularized toward the old coefficients with weight
/// ridge * (largest design column norm)^2, so unchanged centers reproduce
/// the old model exactly.
inline DiscriminantModel project_hyperplane(
  const DiscriminantModel & old_model, const Matrix & new_centers, const Matrix & fit_points,
  double ridge)
{
  old_model.check();
  const auto s = old_model.size();
  const auto m = old_model.dim();
  if (new_centers.rows() != s || new_centers.cols() != m || fit_points.cols() != m) {
    throw Error(ErrorKind::invalid_argument, "new centers do not match the model");
  }
  const auto n_coef = s * (1 + m) + 1;
  const auto n_pts = fit_points.rows();

  Matrix A(n_pts, n_coef);
  Vector target(n_pts);
  for (Eigen::Index row = 0; row < n_pts; ++row) {
    const Vector z = fit_points.row(row).transpose();
    target[row] = eval_f(old_model, z);
    for (Eigen::Index j = 0; j < s; ++j) {
      const Vector c = new_centers.row(j).transpose();
      A(row, j) = eval_k(old_model.kernel, c, z);
      A.block(row, s + j * m, 1, m) = eval_kx(old_model.kernel, c, z).transpose();
    }
    A(row, n_coef - 1) = 1.0;
  }
  Vector theta_old(n_coef);
  theta_old.head(s) = old_model.a;
  for (Eigen::Index j = 0; j < s; ++j) {
    theta_old.segment(s + j * m, m) = old_model.b.row(j).transpose();
  }
  theta_old[n_coef - 1] = old_model.f0;

  const double col_max = A.colwise().norm().maxCoeff();
  const double rho = std::sqrt(ridge) * col_max;
  Matrix stacked(n_pts + n_coef, n_coef);
  stacked << A, rho * Matrix::Identity(n_coef, n_coef);
  Vector rhs(n_pts + n_coef);
  rhs << target, rho * theta_old;
  // Solve for the correction so the regularized problem is well scaled.
  const Vector delta = stacked.colPivHouseholderQr().solve(rhs - stacked * theta_old);
  const Vector theta = theta_old + delta;
  if (!theta.allFinite()) {
    throw Error(ErrorKind::projection_failure, "hyperplane projection produced non-finite coefficients");
  }

  DiscriminantModel out = old_model;
  out.centers = new_centers;
  out.a = theta.head(s);
  for (Eigen::Index j = 0; j < s; ++j) {
    out.b.row(j) = theta.segment(s + j * m, m).transpose();
  }
  out.f0 = theta[n_coef - 1];
  return out;
}

struct MarginEstimate
{
  /// min_i dist_i; 0 when any training sample is misclassified.
  double margin = 0.0;
  std::vector<ProjectionResult> results;
  std::vector<std::size_t> misclassified;
  /// Some projections did not converge or were degenerate.
  bool partial = false;
};

/// Input-space margin of `model` on `data`: each sample is projected from
/// its own position. A converged projection contributes |d|_G; an
/// unconverged one the linearized distance at its last iterate; degenerate
/// ones are skipped.
inline MarginEstimate estimate_margin(
  const DiscriminantModel & model, const Dataset & data, const MetricField & metric,
  const ProjectionOptions & options = {})
{
  MarginEstimate out;
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector xi = data.point(i);
    if (data.label(i) * eval_f(model, xi) <= 0.0) {out.misclassified.push_back(i);}
    const auto & Gi = metric.at(i);
    ProjectionResult res = project_point(model, xi, xi, Gi, options);
    switch (res.status) {
      case ProjectionStatus::converged:
        margin = std::min(margin, res.dist);
        break;
      case ProjectionStatus::not_converged:
        out.partial = true;
        try {
          margin = std::min(margin, approx_distance(model, xi, res.xhat, Gi));
        } catch (const Error &) {
          margin = std::min(margin, res.dist);
        }
        break;
      case ProjectionStatus::degenerate:
        out.partial = true;
        break;
    }
    out.results.push_back(std::move(res));
  }
  if (!out.misclassified.empty() || !std::isfinite(margin)) {
    out.margin = 0.0;
  } else {
    out.margin = margin;
  }
  return out;
}

}  // namespace inmargin
