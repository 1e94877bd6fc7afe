#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <set>
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

namespace inmargin
{

struct TrainConfig
{
  std::size_t outer_steps = 5;
  /// Projection iterations per outer step; 0 keeps xhat = x.
  std::size_t proj_iters = 10;
  /// Projection iterations used when scoring an iterate.
  std::size_t estimate_iters = 10;
  double C = kHardMarginC;
  bool safeguard = false;
  double tol_f = 1e-8;
  double qp_tol = 1e-6;
  double projection_ridge = 1e-8;
  /// Stop early once the estimated margin changes by less than this.
  double margin_stop = 1e-6;
  /// Simplified trainer only: leave the bias out of the kernel rescaling.
  bool literal_rescaling = false;
  std::uint64_t seed = 0;

  void validate() const
  {
    if (outer_steps < 1 || estimate_iters < 1) {
      throw Error(ErrorKind::invalid_argument, "outer_steps and estimate_iters must be >= 1");
    }
    if (!(tol_f > 0.0) || !(qp_tol > 0.0) || !(projection_ridge > 0.0)) {
      throw Error(ErrorKind::invalid_argument, "tolerances must be positive");
    }
    if (!(C > 0.0)) {throw Error(ErrorKind::invalid_argument, "C must be positive");}
  }

  ProjectionOptions projection(std::size_t iters) const
  {
    ProjectionOptions out;
    out.iters = iters;
    out.safeguard = safeguard;
    out.tol_f = tol_f;
    return out;
  }
};

struct StepRecord
{
  std::size_t step = 0;
  /// NaN when the step produced no candidate.
  double margin = std::numeric_limits<double>::quiet_NaN();
  double qp_objective = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_sv = 0;
  std::string status = "ok";
  bool partial = false;
  std::vector<std::size_t> active_set;
};

struct TrainTrace
{
  std::vector<StepRecord> steps;
  std::size_t best_step = 0;
  /// J_0 u ... u J_best, sorted.
  std::vector<std::size_t> active_union;
};

struct TrainResult
{
  DiscriminantModel model;
  TrainTrace trace;
  double margin = 0.0;
  /// The step-0 SVM.
  DiscriminantModel initial;
};

namespace detail
{

// Best-of selection bookkeeping shared by both trainers.
class BestOf
{
public:
  void offer(const DiscriminantModel & model, double margin, std::size_t step)
  {
    if (!has_ || margin > margin_) {
      has_ = true;
      model_ = model;
      margin_ = margin;
      step_ = step;
      best_union_.assign(union_.begin(), union_.end());
    }
  }

  void add_active(const std::vector<std::size_t> & active)
  {
    union_.insert(active.begin(), active.end());
  }

  TrainResult finish(TrainTrace trace, DiscriminantModel initial) const
  {
    TrainResult out;
    out.initial = std::move(initial);
    out.model = model_;
    out.margin = margin_;
    trace.best_step = step_;
    trace.active_union = best_union_;
    out.trace = std::move(trace);
    return out;
  }

private:
  bool has_ = false;
  DiscriminantModel model_;
  double margin_ = 0.0;
  std::size_t step_ = 0;
  std::set<std::size_t> union_;
  std::vector<std::size_t> best_union_;
};

}  // namespace detail

/// Input-space margin maximization, initialized from the standard SVM.
///
/// Each outer step: move every projection estimate with proj_iters
/// projection iterations, re-express the model on the moved centers, solve
/// the linearized QP and update (a, b, f0). Every iterate, the SVM included,
/// is scored with estimate_margin and the best one is returned.
inline TrainResult train_input_margin(
  const Dataset & data, const KernelSpec & kernel, const MetricField & metric_in,
  const TrainConfig & config = {})
{
  config.validate();
  check_training_data(data);
  kernel.validate();
  const MetricField metric = validate(metric_in, data.size(), data.dim());
  const ProjectionOptions proj = config.projection(config.proj_iters);
  const ProjectionOptions scoring = config.projection(config.estimate_iters);
  SolverOptions qp;
  qp.tol = config.qp_tol;

  const SvmFit svm = train_svm(data, kernel, config.C, qp);
  DiscriminantModel model = svm.model;
  Matrix xhat = data.x;

  TrainTrace trace;
  detail::BestOf best;
  best.add_active(svm.solution.active_set);
  {
    const MarginEstimate est = estimate_margin(model, data, metric, scoring);
    StepRecord rec;
    rec.step = 0;
    rec.margin = est.margin;
    rec.qp_objective = svm.solution.objective;
    rec.n_sv = static_cast<std::size_t>(model.size());
    rec.partial = est.partial;
    rec.active_set = svm.solution.active_set;
    trace.steps.push_back(rec);
    best.offer(model, est.margin, 0);
  }
  double previous_margin = trace.steps.front().margin;

  for (std::size_t k = 1; k <= config.outer_steps; ++k) {
    StepRecord rec;
    rec.step = k;

    Matrix xhat_new(xhat.rows(), xhat.cols());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const ProjectionResult res =
        project_point(model, data.point(i), xhat.row(row).transpose(), metric.at(i), proj);
      xhat_new.row(row) = res.xhat.transpose();
    }

    Matrix new_centers(model.size(), model.dim());
    for (Eigen::Index j = 0; j < model.size(); ++j) {
      new_centers.row(j) = xhat_new.row(static_cast<Eigen::Index>(model.sv_index[static_cast<std::size_t>(j)]));
    }
    DiscriminantModel reference;
    try {
      reference = project_hyperplane(
        model, new_centers, hyperplane_fit_set(data.x, xhat, xhat_new), config.projection_ridge);
    } catch (const Error & e) {
      if (e.kind() != ErrorKind::projection_failure) {throw;}
      reference = model;
      for (Eigen::Index j = 0; j < model.size(); ++j) {
        xhat_new.row(static_cast<Eigen::Index>(model.sv_index[static_cast<std::size_t>(j)])) =
          model.centers.row(j);
      }
      rec.status = "projection_failed";
    }

    DualSolution sol;
    Linearization lin;
    try {
      lin = linearize(reference, data, xhat_new, metric, config.C);
      sol = solve_dual(lin.problem, qp);
    } catch (const Error & e) {
      if (e.kind() != ErrorKind::degenerate_gradient && e.kind() != ErrorKind::degenerate_solution) {
        throw;
      }
      rec.status = "degenerate";
      trace.steps.push_back(rec);
      model = reference;
      xhat = xhat_new;
      continue;
    }
    if (!sol.converged()) {
      rec.status = std::string("qp_") + to_string(sol.status);
      rec.qp_objective = sol.objective;
      trace.steps.push_back(rec);
      model = reference;
      xhat = xhat_new;
      continue;
    }

    try {
      model = update_coefficients(sol, lin.tv, data.y, metric, lin.reference, config.C);
    } catch (const Error & e) {
      if (e.kind() != ErrorKind::degenerate_solution) {throw;}
      rec.status = "degenerate";
      trace.steps.push_back(rec);
      model = reference;
      xhat = xhat_new;
      continue;
    }
    xhat = xhat_new;
    best.add_active(sol.active_set);

    const MarginEstimate est = estimate_margin(model, data, metric, scoring);
    rec.margin = est.margin;
    rec.partial = est.partial;
    rec.qp_objective = sol.objective;
    rec.n_sv = static_cast<std::size_t>(model.size());
    rec.active_set = sol.active_set;
    if (!est.misclassified.empty()) {rec.status = "misclassified";}
    trace.steps.push_back(rec);
    best.offer(model, est.margin, k);

    const bool stalled = est.margin > 0.0 &&
      std::abs(est.margin - previous_margin) < config.margin_stop;
    previous_margin = est.margin;
    if (stalled) {break;}
  }
  return best.finish(std::move(trace), svm.model);
}

}  // namespace inmargin
