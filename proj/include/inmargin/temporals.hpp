#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "inmargin/dataset.hpp"
#include "inmargin/error.hpp"
#include "inmargin/kernel.hpp"
#include "inmargin/metric.hpp"
#include "inmargin/model.hpp"
#include "inmargin/svm.hpp"

namespace inmargin
{

/// Floor on g_i below which the distance linearization is rejected.
inline constexpr double kDegenerateG = 1e-12;

/// Inner products of the reference weight w (the model's expansion) with
/// the features at a set of points:
///   p_i = <w, phi(x_i)>,  q_i = <w, psi(x_i)> (row i),  r = <w, w>.
struct PQR
{
  Vector p;
  Matrix q;
  double r = 0.0;
};

inline PQR compute_pqr(const DiscriminantModel & model, const Matrix & points)
{
  model.check();
  if (model.size() == 0) {
    throw Error(ErrorKind::degenerate_solution, "reference model has no centers");
  }
  PQR out;
  const auto n = points.rows();
  out.p.resize(n);
  out.q.resize(n, model.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector xi = points.row(i).transpose();
    out.p[i] = eval_expansion(model, xi);
    out.q.row(i) = eval_grad_f(model, xi).transpose();
  }
  // r = sum_j (a_j p(c_j) + b_j' q(c_j)) over the model's own centers.
  double r = 0.0;
  for (Eigen::Index j = 0; j < model.size(); ++j) {
    const Vector c = model.centers.row(j).transpose();
    r += model.a[j] * eval_expansion(model, c);
    r += model.b.row(j).dot(eval_grad_f(model, c).transpose());
  }
  out.r = r;
  return out;
}

/// Per-step temporal variables over all n training samples.
///
/// s_ij = <h_i, h_j>, t_ij = <eta_i, h_j>, u_ij = <eta_i, eta_j> with
/// h_i = phi(xh_i) - psi(xh_i)' d_i and eta_i the gradient of the
/// normalized-distance constraint; eta_i itself is never formed.
struct TemporalVariables
{
  Matrix xhat;   // n x m
  Matrix d;      // n x m, xhat - x
  Vector p;
  Matrix q;      // n x m
  double r = 0.0;
  Vector g;
  Vector qnorm;  // |q_i|_{G_i^-1}
  Matrix s;
  Matrix t;
  Matrix u;
  /// Rows whose g fell below kDegenerateG, held at the plain-SVM values
  /// (g = 1, eta = 0) for this step.
  std::vector<bool> frozen;

  std::size_t size() const noexcept {return static_cast<std::size_t>(p.size());}
};

/// Fills xhat, d, p, q, r, g and qnorm. s, t and u are left empty.
inline TemporalVariables begin_temporals(
  const DiscriminantModel & reference, const Matrix & x, const Matrix & xhat,
  const MetricField & metric)
{
  if (x.rows() != xhat.rows() || x.cols() != xhat.cols() || x.cols() != reference.dim()) {
    throw Error(ErrorKind::invalid_argument, "sample and projection arrays disagree");
  }
  TemporalVariables tv;
  tv.xhat = xhat;
  tv.d = xhat - x;
  PQR pqr = compute_pqr(reference, xhat);
  if (!(pqr.r > 0.0)) {
    throw Error(ErrorKind::degenerate_solution, "reference weight has non-positive norm");
  }
  tv.p = std::move(pqr.p);
  tv.q = std::move(pqr.q);
  tv.r = pqr.r;
  const auto n = x.rows();
  tv.qnorm.resize(n);
  tv.g.resize(n);
  const double sqrt_r = std::sqrt(tv.r);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto & Gi = metric.at(static_cast<std::size_t>(i));
    tv.qnorm[i] = std::sqrt(Gi.inv_norm_sq(tv.q.row(i).transpose()));
    tv.g[i] = tv.qnorm[i] / sqrt_r;
  }
  tv.frozen.assign(static_cast<std::size_t>(n), false);
  return tv;
}

/// Fills s, t and u from the kernel-form expressions. Any g_i below
/// kDegenerateG that is not marked frozen raises degenerate_gradient.
inline void compute_stu(
  const DiscriminantModel & reference, TemporalVariables & tv, const MetricField & metric)
{
  const auto n = tv.xhat.rows();
  const KernelSpec & kernel = reference.kernel;
  const double r = tv.r;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!tv.frozen[static_cast<std::size_t>(i)] && !(tv.g[i] >= kDegenerateG)) {
      throw Error(
              ErrorKind::degenerate_gradient,
              "gradient vanishes at the projection of sample " + std::to_string(i),
              static_cast<std::size_t>(i));
    }
  }

  // G_i^-1 q_i, zero for frozen rows.
  Matrix gq(n, tv.q.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (tv.frozen[static_cast<std::size_t>(i)]) {
      gq.row(i).setZero();
      tv.g[i] = 1.0;
    } else {
      gq.row(i) = metric.at(static_cast<std::size_t>(i)).apply_inverse(tv.q.row(i).transpose()).transpose();
    }
  }

  tv.s.resize(n, n);
  tv.t.resize(n, n);
  tv.u.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector xi = tv.xhat.row(i).transpose();
    const Vector di = tv.d.row(i).transpose();
    const bool frozen_i = tv.frozen[static_cast<std::size_t>(i)];
    const double qn2_i = tv.qnorm[i] * tv.qnorm[i];
    for (Eigen::Index j = 0; j < n; ++j) {
      const Vector xj = tv.xhat.row(j).transpose();
      const Vector dj = tv.d.row(j).transpose();
      const Vector kx_ij = eval_kx(kernel, xi, xj);
      const Matrix kxy_ij = eval_kxy(kernel, xi, xj);
      const Vector kxy_dj = kxy_ij * dj;
      if (j >= i) {
        const Vector kx_ji = eval_kx(kernel, xj, xi);
        tv.s(i, j) = eval_k(kernel, xi, xj) + di.dot(kxy_dj) - di.dot(kx_ij) - dj.dot(kx_ji);
        tv.s(j, i) = tv.s(i, j);
        const bool frozen_j = tv.frozen[static_cast<std::size_t>(j)];
        if (frozen_i || frozen_j) {
          tv.u(i, j) = 0.0;
        } else {
          const double qn2_j = tv.qnorm[j] * tv.qnorm[j];
          tv.u(i, j) = (gq.row(i).dot((kxy_ij * gq.row(j).transpose()).transpose()) -
            qn2_i * qn2_j / r) / (tv.g[i] * tv.g[j] * r * r);
        }
        tv.u(j, i) = tv.u(i, j);
      }
      if (frozen_i) {
        tv.t(i, j) = 0.0;
      } else {
        const double hj = tv.p[j] - dj.dot(tv.q.row(j).transpose());
        tv.t(i, j) = (gq.row(i).dot((kx_ij - kxy_dj).transpose()) - qn2_i / r * hj) /
          (tv.g[i] * r);
      }
    }
  }
}

/// Q_ij = y_i y_j s_ij - y_j t_ij - y_i t_ji + u_ij, linear_i = g_i.
inline DualProblem build_dual(const TemporalVariables & tv, const Vector & y, double C)
{
  const auto n = static_cast<Eigen::Index>(tv.size());
  if (y.size() != n || tv.s.rows() != n || tv.t.rows() != n || tv.u.rows() != n) {
    throw Error(ErrorKind::invalid_argument, "temporal variables are incomplete");
  }
  DualProblem problem;
  problem.linear = tv.g;
  problem.y = y;
  problem.C = C;
  problem.Q.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      problem.Q(i, j) = y[i] * y[j] * tv.s(i, j) - y[j] * tv.t(i, j) - y[i] * tv.t(j, i) + tv.u(i, j);
      problem.Q(j, i) = problem.Q(i, j);
    }
  }
  return problem;
}

/// Rescales the reference (a, b, f0) so that its tightest linearized
/// constraint holds with equality: min_i y_i (p_i + f0 - d_i'q_i) / g_i = 1.
/// Returns the factor applied. g is invariant; p and q scale with c, r with
/// c^2. Leaves everything unchanged when no constraint value is positive.
inline double normalize_reference(
  DiscriminantModel & reference, TemporalVariables & tv, const Vector & y)
{
  double min_ratio = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < tv.p.size(); ++i) {
    if (tv.frozen[static_cast<std::size_t>(i)]) {continue;}
    const double lin = tv.p[i] + reference.f0 - tv.d.row(i).dot(tv.q.row(i));
    const double ratio = y[i] * lin / tv.g[i];
    if (ratio > 0.0) {min_ratio = std::min(min_ratio, ratio);}
  }
  if (!std::isfinite(min_ratio)) {return 1.0;}
  const double c = 1.0 / min_ratio;
  reference = reference.scaled(c);
  tv.p *= c;
  tv.q *= c;
  tv.qnorm *= c;
  tv.r *= c * c;
  return c;
}

/// Linearized dual for one outer step: the (normalized) reference, its
/// temporal variables and the QP.
struct Linearization
{
  DiscriminantModel reference;
  TemporalVariables tv;
  DualProblem problem;
  double scale = 1.0;
};

/// Assembles the QP around `reference`, whose centers must be the rows of
/// `xhat` at `reference.sv_index`. Rows with g_i below kDegenerateG are
/// frozen at their SVM special-case values.
inline Linearization linearize(
  const DiscriminantModel & reference, const Dataset & data, const Matrix & xhat,
  const MetricField & metric, double C)
{
  Linearization out;
  out.reference = reference;
  out.tv = begin_temporals(reference, data.x, xhat, metric);
  for (Eigen::Index i = 0; i < out.tv.g.size(); ++i) {
    out.tv.frozen[static_cast<std::size_t>(i)] = !(out.tv.g[i] >= kDegenerateG);
  }
  out.scale = normalize_reference(out.reference, out.tv, data.y);
  compute_stu(out.reference, out.tv, metric);
  out.problem = build_dual(out.tv, data.y, C);
  return out;
}

/// New expansion from the dual solution:
///   a_i = alpha_i y_i + beta a~_i
///   b_i = -alpha_i (y_i d_i + G_i^-1 q_i / (g_i r)) + beta b~_i
///   beta = sum_j alpha_j |q_j|^2_{G_j^-1} / (g_j r^2)
/// with f0 averaged over the KKT equality rows of unbounded active samples.
/// Centers are the current projections of every sample with a nonzero
/// multiplier or a reference coefficient.
inline DiscriminantModel update_coefficients(
  const DualSolution & solution, const TemporalVariables & tv, const Vector & y,
  const MetricField & metric, const DiscriminantModel & reference, double C)
{
  const auto n = static_cast<Eigen::Index>(tv.size());
  const auto m = tv.xhat.cols();
  const Vector & alpha = solution.alpha;
  if (alpha.size() != n || y.size() != n) {
    throw Error(ErrorKind::invalid_argument, "dual solution does not match temporal variables");
  }
  if (solution.active_set.empty()) {
    throw Error(ErrorKind::degenerate_solution, "dual solution has no active multipliers");
  }
  const double box = std::isinf(C) ? kHardMarginC : C;
  const double r = tv.r;

  double beta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (tv.frozen[static_cast<std::size_t>(j)] || alpha[j] == 0.0) {continue;}
    beta += alpha[j] * tv.qnorm[j] * tv.qnorm[j] / (tv.g[j] * r * r);
  }

  Vector a_full = Vector::Zero(n);
  Matrix b_full = Matrix::Zero(n, m);
  std::vector<bool> keep(static_cast<std::size_t>(n), false);
  for (std::size_t row = 0; row < reference.sv_index.size(); ++row) {
    const auto i = static_cast<Eigen::Index>(reference.sv_index[row]);
    if (i >= n) {throw Error(ErrorKind::invalid_argument, "reference sv_index out of range");}
    const auto rr = static_cast<Eigen::Index>(row);
    if ((reference.centers.row(rr) - tv.xhat.row(i)).cwiseAbs().maxCoeff() > 0.0) {
      throw Error(ErrorKind::invalid_argument, "reference centers must coincide with projections");
    }
    a_full[i] = beta * reference.a[rr];
    b_full.row(i) = beta * reference.b.row(rr);
    keep[static_cast<std::size_t>(i)] = true;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (alpha[i] == 0.0) {continue;}
    keep[static_cast<std::size_t>(i)] = true;
    a_full[i] += alpha[i] * y[i];
    Vector bi = y[i] * tv.d.row(i).transpose();
    if (!tv.frozen[static_cast<std::size_t>(i)]) {
      bi += metric.at(static_cast<std::size_t>(i)).apply_inverse(tv.q.row(i).transpose()) /
        (tv.g[i] * r);
    }
    b_full.row(i) -= alpha[i] * bi.transpose();
  }

  // f0 = y_i (g_i - (Q alpha)_i) on each equality row.
  const DualProblem problem = build_dual(tv, y, C);
  const Vector q_alpha = problem.Q * alpha;
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (alpha[i] > 0.0 && alpha[i] < box) {
      sum += y[i] * (tv.g[i] - q_alpha[i]);
      ++count;
    }
  }
  const double f0 = count > 0 ? sum / static_cast<double>(count) : solution.bias;

  DiscriminantModel out = DiscriminantModel::constant(reference.kernel, m, f0);
  std::vector<std::size_t> idx;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (keep[static_cast<std::size_t>(i)]) {idx.push_back(static_cast<std::size_t>(i));}
  }
  const auto s = static_cast<Eigen::Index>(idx.size());
  out.centers.resize(s, m);
  out.a.resize(s);
  out.b.resize(s, m);
  for (Eigen::Index row = 0; row < s; ++row) {
    const auto i = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(row)]);
    out.centers.row(row) = tv.xhat.row(i);
    out.a[row] = a_full[i];
    out.b.row(row) = b_full.row(i);
  }
  out.sv_index = std::move(idx);
  return out;
}

}  // namespace inmargin
