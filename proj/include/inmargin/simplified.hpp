#pragma once

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
#include "inmargin/projection.hpp"
#include "inmargin/svm.hpp"
#include "inmargin/temporals.hpp"
#include "inmargin/trainer.hpp"

namespace inmargin
{

struct SimplifiedState
{
  Vector g;
  DiscriminantModel model;
  std::size_t step = 0;
};

namespace detail
{

// g_i = |sum_j a_j k_x(x_i, c_j)|_{G_i^-1} / sqrt(a'K a) without the
// positivity check.
inline Vector simplified_g_raw(
  const DiscriminantModel & model, const Dataset & data, const MetricField & metric)
{
  model.check();
  if (model.b.size() > 0 && model.b.cwiseAbs().maxCoeff() != 0.0) {
    throw Error(ErrorKind::invalid_argument, "simplified scale factors need b = 0");
  }
  if (model.dim() != data.dim()) {
    throw Error(ErrorKind::invalid_argument, "model and data dimensions disagree");
  }
  const double norm_sq = model.a.dot(kernel_matrix(model.kernel, model.centers) * model.a);
  if (!(norm_sq > 0.0)) {
    throw Error(ErrorKind::degenerate_solution, "expansion has zero norm");
  }
  const double norm = std::sqrt(norm_sq);
  const auto n = static_cast<Eigen::Index>(data.size());
  Vector g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector xi = data.x.row(i).transpose();
    Vector q = Vector::Zero(data.dim());
    for (Eigen::Index j = 0; j < model.size(); ++j) {
      q += model.a[j] * eval_kx(model.kernel, xi, model.centers.row(j).transpose());
    }
    g[i] = std::sqrt(metric.at(static_cast<std::size_t>(i)).inv_norm_sq(q)) / norm;
  }
  return g;
}

// f0 maximizing min_i y_i (F_i + f0) / g_i. The positive-class terms
// increase with f0 and the negative-class terms decrease, so the optimum is
// where the two minima meet.
inline double balanced_bias(const Vector & F, const Vector & y, const Vector & g)
{
  auto gap = [&](double f0) {
      double pos = std::numeric_limits<double>::infinity();
      double neg = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < F.size(); ++i) {
        const double v = y[i] * (F[i] + f0) / g[i];
        if (y[i] > 0) {pos = std::min(pos, v);} else {neg = std::min(neg, v);}
      }
      return pos - neg;
    };
  double width = 1.0 + F.cwiseAbs().maxCoeff();
  double lo = -width;
  double hi = width;
  while (gap(lo) > 0.0) {lo -= (width *= 2.0);}
  while (gap(hi) < 0.0) {hi += (width *= 2.0);}
  for (int it = 0; it < 200 && lo < hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) {break;}
    if (gap(mid) < 0.0) {lo = mid;} else {hi = mid;}
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Per-sample scale factors of a b = 0 expansion evaluated at the samples.
inline Vector simplified_g(
  const DiscriminantModel & model, const Dataset & data, const MetricField & metric_in)
{
  const MetricField metric = validate(metric_in, data.size(), data.dim());
  const Vector g = detail::simplified_g_raw(model, data, metric);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!(g[i] >= kDegenerateG)) {
      throw Error(
              ErrorKind::degenerate_gradient,
              "gradient vanishes at sample " + std::to_string(i), static_cast<std::size_t>(i));
    }
  }
  return g;
}

/// One rescaled step. The SVM over features phi(x_i) / g_i with the bias
/// rescaled alike is, in alpha_i = alpha~_i / g_i,
///   maximize sum_i g_i alpha_i - 1/2 sum_ij alpha_i alpha_j y_i y_j k(x_i, x_j)
/// under sum_i y_i alpha_i = 0, 0 <= alpha_i <= C, and yields
/// f(x) = sum_i alpha_i y_i k(x_i, x) + f0 with y_i f(x_i) = g_i on the
/// unbounded support vectors. With `literal` the bias stays unscaled: the
/// SVM runs on K_ij / (g_i g_j) itself, a_i = alpha~_i y_i / g_i, and f0
/// maximizes min_i y_i f(x_i) / g_i.
inline SvmFit fit_rescaled(
  const Dataset & data, const KernelSpec & kernel, const Matrix & K, const Vector & g, double C,
  const SolverOptions & options, bool literal = false)
{
  SvmFit fit;
  DualProblem problem = svm_dual(literal ? Matrix(K.cwiseQuotient(g * g.transpose())) : K, data.y, C);
  if (!literal) {problem.linear = g;}
  fit.solution = solve_dual(problem, options);
  if (fit.solution.status == SolveStatus::max_iter) {
    throw Error(ErrorKind::nonconverged, "rescaled SVM did not converge");
  }
  const DualSolution & sol = fit.solution;
  Vector a_full = sol.alpha.cwiseProduct(data.y);
  double f0 = sol.bias;
  if (literal) {
    a_full = a_full.cwiseQuotient(g);
    f0 = detail::balanced_bias(K * a_full, data.y, g);
  }

  DiscriminantModel model = DiscriminantModel::constant(kernel, data.dim(), f0);
  const auto s = static_cast<Eigen::Index>(sol.active_set.size());
  model.centers.resize(s, data.dim());
  model.a.resize(s);
  model.b = Matrix::Zero(s, data.dim());
  for (Eigen::Index r = 0; r < s; ++r) {
    const auto i = static_cast<Eigen::Index>(sol.active_set[static_cast<std::size_t>(r)]);
    model.centers.row(r) = data.x.row(i);
    model.a[r] = a_full[i];
  }
  model.sv_index = sol.active_set;
  fit.model = std::move(model);
  return fit;
}

/// Kernel-rescaling variant: alternates g from the current expansion with
/// an SVM on the rescaled Gram matrix, keeping the best-scoring iterate.
/// Samples whose g vanishes keep the scale 1.
inline TrainResult train_simplified(
  const Dataset & data, const KernelSpec & kernel, const MetricField & metric_in,
  const TrainConfig & config = {})
{
  config.validate();
  check_training_data(data);
  kernel.validate();
  const MetricField metric = validate(metric_in, data.size(), data.dim());
  const ProjectionOptions scoring = config.projection(config.estimate_iters);
  SolverOptions qp;
  qp.tol = config.qp_tol;

  const Matrix K = kernel_matrix(kernel, data.x);
  SimplifiedState state;
  state.g = Vector::Ones(static_cast<Eigen::Index>(data.size()));
  SvmFit fit = train_svm(data, kernel, config.C, qp);
  state.model = fit.model;
  const DiscriminantModel initial = fit.model;

  TrainTrace trace;
  detail::BestOf best;
  double previous_margin = 0.0;
  for (std::size_t k = 0; k <= config.outer_steps; ++k) {
    StepRecord rec;
    rec.step = k;
    if (k > 0) {
      try {
        state.g = detail::simplified_g_raw(state.model, data, metric);
      } catch (const Error & e) {
        if (e.kind() != ErrorKind::degenerate_solution) {throw;}
        rec.status = "degenerate";
        trace.steps.push_back(rec);
        break;
      }
      for (Eigen::Index i = 0; i < state.g.size(); ++i) {
        if (!(state.g[i] >= kDegenerateG)) {state.g[i] = 1.0;}
      }
      try {
        fit = fit_rescaled(data, kernel, K, state.g, config.C, qp, config.literal_rescaling);
      } catch (const Error & e) {
        if (e.kind() != ErrorKind::nonconverged) {throw;}
        rec.status = "qp_max_iter";
        trace.steps.push_back(rec);
        continue;
      }
      state.model = fit.model;
      state.step = k;
    }
    best.add_active(fit.solution.active_set);
    const MarginEstimate est = estimate_margin(state.model, data, metric, scoring);
    rec.margin = est.margin;
    rec.partial = est.partial;
    rec.qp_objective = fit.solution.objective;
    rec.n_sv = static_cast<std::size_t>(state.model.size());
    rec.active_set = fit.solution.active_set;
    if (!est.misclassified.empty()) {rec.status = "misclassified";}
    trace.steps.push_back(rec);
    best.offer(state.model, est.margin, k);

    if (k > 0 && est.margin > 0.0 && std::abs(est.margin - previous_margin) < config.margin_stop) {
      break;
    }
    previous_margin = est.margin;
  }
  return best.finish(std::move(trace), initial);
}

}  // namespace inmargin
