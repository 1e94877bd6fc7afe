#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "inmargin/dataset.hpp"
#include "inmargin/error.hpp"
#include "inmargin/kernel.hpp"
#include "inmargin/model.hpp"

namespace inmargin
{

/// Box bound standing in for C = infinity (hard margin).
inline constexpr double kHardMarginC = 1e12;

/// maximize  sum_i linear_i alpha_i - 1/2 alpha' Q alpha
/// s.t.      0 <= alpha_i <= C,  sum_i y_i alpha_i = 0
struct DualProblem
{
  Vector linear;
  Matrix Q;
  Vector y;
  double C = kHardMarginC;

  std::size_t size() const noexcept {return static_cast<std::size_t>(linear.size());}

  double box() const {return std::isinf(C) ? kHardMarginC : C;}

  bool has_both_labels() const
  {
    return (y.array() > 0).any() && (y.array() < 0).any();
  }

  void check() const
  {
    const auto n = linear.size();
    if (Q.rows() != n || Q.cols() != n || y.size() != n) {
      throw Error(ErrorKind::invalid_argument, "dual problem dimensions disagree");
    }
    if (!(C > 0.0)) {throw Error(ErrorKind::invalid_argument, "box bound C must be positive");}
    if (!Q.allFinite() || !linear.allFinite()) {
      throw Error(ErrorKind::invalid_argument, "dual problem has non-finite entries");
    }
    const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw Error(ErrorKind::invalid_argument, "Q is not symmetric");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (y[i] != 1.0 && y[i] != -1.0) {
        throw Error(ErrorKind::invalid_argument, "labels must be +1 or -1", static_cast<std::size_t>(i));
      }
    }
  }
};

enum class SolveStatus { converged, max_iter, infeasible };

inline const char * to_string(SolveStatus s)
{
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

struct DualSolution
{
  Vector alpha;
  double objective = 0.0;
  double kkt_violation = 0.0;
  std::vector<std::size_t> active_set;
  /// Bias from the KKT equality rows, averaged over unbounded multipliers.
  double bias = 0.0;
  std::size_t iterations = 0;
  /// Diagonal shift applied when Q failed the Cholesky probe.
  double jitter = 0.0;
  SolveStatus status = SolveStatus::converged;

  bool converged() const noexcept {return status == SolveStatus::converged;}
};

struct SolverOptions
{
  double tol = 1e-6;
  /// 0 selects a size-dependent default.
  std::size_t max_iter = 0;
  /// Feasible starting point.
  std::optional<Vector> alpha0;
  /// Problems up to this size use the dense active-set method, larger ones
  /// the two-variable working-set method.
  std::size_t dense_limit = 200;
};

namespace detail
{

inline double dual_objective(const Vector & linear, const Matrix & Q, const Vector & alpha)
{
  return linear.dot(alpha) - 0.5 * alpha.dot(Q * alpha);
}

inline bool in_up(double y, double alpha, double C)
{
  return (y > 0 && alpha < C) || (y < 0 && alpha > 0);
}

inline bool in_low(double y, double alpha, double C)
{
  return (y > 0 && alpha > 0) || (y < 0 && alpha < C);
}

// Maximal KKT violation max_{up} -y_t G_t - min_{low} -y_t G_t, with the
// lowest-index maximizing pair.
inline double max_violation(
  const Vector & G, const Vector & y, const Vector & alpha, double C,
  Eigen::Index & i, Eigen::Index & j)
{
  double gmax = -std::numeric_limits<double>::infinity();
  double gmin = std::numeric_limits<double>::infinity();
  i = -1;
  j = -1;
  for (Eigen::Index t = 0; t < G.size(); ++t) {
    const double v = -y[t] * G[t];
    if (in_up(y[t], alpha[t], C) && v > gmax) {gmax = v; i = t;}
    if (in_low(y[t], alpha[t], C) && v < gmin) {gmin = v; j = t;}
  }
  return (i < 0 || j < 0) ? 0.0 : std::max(gmax - gmin, 0.0);
}

// Rounding level of G = Q alpha - linear. Stopping tests never ask for
// more than this, since badly conditioned problems drive alpha up to 1e10.
inline double gradient_noise(double q_rowsum, const Vector & alpha, const Vector & linear)
{
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double amax = alpha.size() > 0 ? alpha.cwiseAbs().maxCoeff() : 0.0;
  const double lmax = linear.size() > 0 ? linear.cwiseAbs().maxCoeff() : 0.0;
  return 64.0 * eps * (q_rowsum * amax + lmax);
}

// Two-variable working-set method with second-order pair selection.
inline bool solve_smo(
  const Matrix & Q, const Vector & linear, const Vector & y, double C, double tol,
  std::size_t max_iter, Vector & alpha, std::size_t & iterations)
{
  const auto n = Q.rows();
  constexpr double tau = 1e-12;
  const double rowsum = Q.cwiseAbs().rowwise().sum().maxCoeff();
  Vector G = Q * alpha - linear;

  // i maximizes the violation; j maximizes the second-order gain of (i, j).
  auto select = [&](Eigen::Index & i, Eigen::Index & j) {
      double gmax = -std::numeric_limits<double>::infinity();
      double gmin = std::numeric_limits<double>::infinity();
      i = -1;
      j = -1;
      for (Eigen::Index t = 0; t < n; ++t) {
        const double v = -y[t] * G[t];
        if (in_up(y[t], alpha[t], C) && v > gmax) {gmax = v; i = t;}
      }
      if (i < 0) {return 0.0;}
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index t = 0; t < n; ++t) {
        if (!in_low(y[t], alpha[t], C)) {continue;}
        const double v = -y[t] * G[t];
        gmin = std::min(gmin, v);
        const double b = gmax - v;
        if (b <= 0.0) {continue;}
        double a = Q(i, i) + Q(t, t) - 2.0 * y[i] * y[t] * Q(i, t);
        if (a <= 0.0) {a = tau;}
        const double gain = -(b * b) / a;
        if (gain < best) {best = gain; j = t;}
      }
      return j < 0 ? 0.0 : gmax - gmin;
    };

  std::size_t iter = 0;
  while (true) {
    Eigen::Index i = -1;
    Eigen::Index j = -1;
    double gap = select(i, j);
    if (gap <= std::max(tol, gradient_noise(rowsum, alpha, linear))) {
      // Confirm against a freshly computed gradient before stopping.
      G = Q * alpha - linear;
      gap = select(i, j);
      if (gap <= std::max(tol, gradient_noise(rowsum, alpha, linear))) {
        iterations = iter;
        return true;
      }
    }
    if (iter >= max_iter) {
      iterations = iter;
      return false;
    }
    ++iter;

    const double old_i = alpha[i];
    const double old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
      if (quad <= 0.0) {quad = tau;}
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {alpha[j] = 0.0; alpha[i] = diff;}
      } else {
        if (alpha[i] < 0.0) {alpha[i] = 0.0; alpha[j] = -diff;}
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {alpha[i] = C; alpha[j] = C - diff;}
      } else {
        if (alpha[j] > C) {alpha[j] = C; alpha[i] = C + diff;}
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
      if (quad <= 0.0) {quad = tau;}
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {alpha[i] = C; alpha[j] = sum - C;}
      } else {
        if (alpha[j] < 0.0) {alpha[j] = 0.0; alpha[i] = sum;}
      }
      if (sum > C) {
        if (alpha[j] > C) {alpha[j] = C; alpha[i] = sum - C;}
      } else {
        if (alpha[i] < 0.0) {alpha[i] = 0.0; alpha[j] = sum;}
      }
    }
    G.noalias() += Q.col(i) * (alpha[i] - old_i) + Q.col(j) * (alpha[j] - old_j);
  }
}

// Primal active-set method: each step minimizes over the free variables
// with the bound ones fixed, stopping at the first blocking bound; a bound
// whose multiplier has the wrong sign is released once the face is
// stationary.
inline bool solve_active_set(
  const Matrix & Q, const Vector & linear, const Vector & y, double C, double tol,
  std::size_t max_iter, Vector & alpha, std::size_t & iterations)
{
  enum State : char { lower, free_, upper };
  const auto n = Q.rows();
  const double rowsum = Q.cwiseAbs().rowwise().sum().maxCoeff();
  std::vector<State> state(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) {
    auto & st = state[static_cast<std::size_t>(t)];
    if (alpha[t] <= 0.0) {
      alpha[t] = 0.0;
      st = lower;
    } else if (alpha[t] >= C) {
      alpha[t] = C;
      st = upper;
    } else {
      st = free_;
    }
  }

  std::size_t iter = 0;
  while (iter < max_iter) {
    ++iter;
    const Vector g = Q * alpha - linear;
    const double floor = std::max(tol, gradient_noise(rowsum, alpha, linear));
    std::vector<Eigen::Index> F;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (state[static_cast<std::size_t>(t)] == free_) {F.push_back(t);}
    }
    const auto f = static_cast<Eigen::Index>(F.size());

    double nu = 0.0;
    if (f > 0) {
      double sum = 0.0;
      for (const auto t : F) {sum += y[t] * g[t];}
      nu = -sum / static_cast<double>(f);
      double resid = 0.0;
      for (const auto t : F) {resid = std::max(resid, std::abs(g[t] + nu * y[t]));}
      if (resid > 0.5 * floor) {
        Matrix K = Matrix::Zero(f + 1, f + 1);
        Vector rhs = Vector::Zero(f + 1);
        for (Eigen::Index r = 0; r < f; ++r) {
          for (Eigen::Index c = 0; c < f; ++c) {K(r, c) = Q(F[r], F[c]);}
          K(r, f) = y[F[r]];
          K(f, r) = y[F[r]];
          rhs[r] = -g[F[r]];
        }
        Eigen::FullPivLU<Matrix> lu(K);
        if (!lu.isInvertible()) {
          const double shift = 1e-12 * std::max(1.0, K.topLeftCorner(f, f).diagonal().cwiseAbs().maxCoeff());
          K.topLeftCorner(f, f).diagonal().array() += shift;
          lu.compute(K);
        }
        const Vector p = lu.solve(rhs).head(f);
        double step = 1.0;
        Eigen::Index block = -1;
        for (Eigen::Index r = 0; r < f; ++r) {
          const auto t = F[r];
          double room = std::numeric_limits<double>::infinity();
          if (p[r] < 0.0) {room = -alpha[t] / p[r];}
          if (p[r] > 0.0) {room = (C - alpha[t]) / p[r];}
          if (room < step) {step = room; block = r;}
        }
        for (Eigen::Index r = 0; r < f; ++r) {
          const auto t = F[r];
          alpha[t] = std::clamp(alpha[t] + step * p[r], 0.0, C);
        }
        if (block >= 0) {
          const auto t = F[block];
          const bool to_upper = p[block] > 0.0;
          alpha[t] = to_upper ? C : 0.0;
          state[static_cast<std::size_t>(t)] = to_upper ? upper : lower;
        }
        continue;
      }
    } else {
      // No free variable pins nu; any value in the interval allowed by the
      // bound multipliers certifies optimality.
      double lo = -std::numeric_limits<double>::infinity();
      double hi = std::numeric_limits<double>::infinity();
      for (Eigen::Index t = 0; t < n; ++t) {
        const bool at_lower = state[static_cast<std::size_t>(t)] == lower;
        // lower: g + nu y >= 0, upper: g + nu y <= 0
        if ((y[t] > 0) == at_lower) {lo = std::max(lo, -g[t] * y[t]);} else {hi = std::min(hi, -g[t] * y[t]);}
      }
      if (lo <= hi + floor) {
        iterations = iter;
        return true;
      }
      Eigen::Index i = -1;
      Eigen::Index j = -1;
      max_violation(g, y, alpha, C, i, j);
      state[static_cast<std::size_t>(i)] = free_;
      state[static_cast<std::size_t>(j)] = free_;
      continue;
    }

    double worst = -floor;
    Eigen::Index release = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      const State st = state[static_cast<std::size_t>(t)];
      if (st == free_) {continue;}
      const double mu = st == lower ? g[t] + nu * y[t] : -(g[t] + nu * y[t]);
      if (mu < worst) {worst = mu; release = t;}
    }
    if (release < 0) {
      iterations = iter;
      return true;
    }
    state[static_cast<std::size_t>(release)] = free_;
  }
  iterations = iter;
  return false;
}

}  // namespace detail

/// Solves the box- and equality-constrained dual. Small problems use a
/// dense active-set method, which terminates at an exact vertex of the
/// active-set pattern; large ones use the two-variable working-set method.
/// The KKT tolerance is floored at the rounding level of the gradient.
inline DualSolution solve_dual(const DualProblem & problem, const SolverOptions & options = {})
{
  problem.check();
  const auto n = static_cast<Eigen::Index>(problem.size());
  const double C = problem.box();
  const Vector & y = problem.y;
  DualSolution sol;
  sol.alpha = Vector::Zero(n);

  if (!problem.has_both_labels()) {
    sol.status = SolveStatus::infeasible;
    return sol;
  }

  Matrix Q = problem.Q;
  {
    Eigen::LLT<Matrix> probe(Q);
    if (probe.info() != Eigen::Success) {
      sol.jitter = 1e-10 * Q.trace() / static_cast<double>(n);
      Q.diagonal().array() += sol.jitter;
    }
  }

  Vector alpha = Vector::Zero(n);
  if (options.alpha0) {
    alpha = *options.alpha0;
    if (alpha.size() != n || (alpha.array() < 0.0).any() || (alpha.array() > C).any() ||
      std::abs(y.dot(alpha)) > 1e-9 * (1.0 + alpha.sum()))
    {
      throw Error(ErrorKind::invalid_argument, "warm start is not feasible");
    }
  }

  const bool dense = problem.size() <= options.dense_limit;
  const auto un = static_cast<std::size_t>(n);
  std::size_t max_iter = options.max_iter;
  if (max_iter == 0) {max_iter = dense ? 100 * un + 100 : 100000 * un;}
  const bool converged = dense ?
    detail::solve_active_set(Q, problem.linear, y, C, options.tol, max_iter, alpha, sol.iterations) :
    detail::solve_smo(Q, problem.linear, y, C, options.tol, max_iter, alpha, sol.iterations);

  const Vector G = Q * alpha - problem.linear;
  Eigen::Index vi = -1;
  Eigen::Index vj = -1;
  sol.kkt_violation = detail::max_violation(G, y, alpha, C, vi, vj);
  sol.alpha = alpha;
  sol.status = converged ? SolveStatus::converged : SolveStatus::max_iter;
  sol.objective = detail::dual_objective(problem.linear, Q, alpha);
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {sol.active_set.push_back(static_cast<std::size_t>(t));}
  }

  // Bias: f0 = -y_i G_i on free multipliers; midpoint of the feasible
  // interval when every multiplier sits at a bound.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (alpha[t] >= C) {
      if (y[t] < 0) {ub = std::min(ub, yg);} else {lb = std::max(lb, yg);}
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) {ub = std::min(ub, yg);} else {lb = std::max(lb, yg);}
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  double rho = 0.0;
  if (n_free > 0) {
    rho = sum_free / static_cast<double>(n_free);
  } else if (std::isfinite(ub) && std::isfinite(lb)) {
    rho = 0.5 * (ub + lb);
  }
  sol.bias = -rho;
  return sol;
}

/// Gram matrix K_ij = k(x_i, x_j) over the rows of X, exactly symmetric.
inline Matrix kernel_matrix(const KernelSpec & spec, const Matrix & X)
{
  const auto n = X.rows();
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector xi = X.row(i).transpose();
    for (Eigen::Index j = i; j < n; ++j) {
      K(i, j) = eval_k(spec, xi, X.row(j).transpose());
      K(j, i) = K(i, j);
    }
  }
  return K;
}

/// Dual of the standard SVM for a precomputed Gram matrix.
inline DualProblem svm_dual(const Matrix & K, const Vector & y, double C)
{
  DualProblem p;
  p.linear = Vector::Ones(y.size());
  p.Q = (y * y.transpose()).cwiseProduct(K);
  p.y = y;
  p.C = C;
  return p;
}

struct SvmFit
{
  DiscriminantModel model;
  DualSolution solution;
};

/// Builds the expansion a_i = alpha_i y_i, b_i = 0, centers x_i over the
/// active multipliers.
inline DiscriminantModel svm_model_from_dual(
  const Dataset & data, const KernelSpec & kernel, const DualSolution & sol)
{
  DiscriminantModel model = DiscriminantModel::constant(kernel, data.dim(), sol.bias);
  const auto s = static_cast<Eigen::Index>(sol.active_set.size());
  model.centers.resize(s, data.dim());
  model.a.resize(s);
  model.b = Matrix::Zero(s, data.dim());
  for (Eigen::Index r = 0; r < s; ++r) {
    const auto i = static_cast<Eigen::Index>(sol.active_set[static_cast<std::size_t>(r)]);
    model.centers.row(r) = data.x.row(i);
    model.a[r] = sol.alpha[i] * data.y[i];
  }
  model.sv_index = sol.active_set;
  return model;
}

inline void check_training_data(const Dataset & data)
{
  data.check();
  if (!data.has_both_labels()) {
    throw Error(ErrorKind::infeasible, "training data needs both labels");
  }
}

/// Standard soft/hard-margin SVM. C = infinity (or kHardMarginC) is hard
/// margin.
inline SvmFit train_svm(
  const Dataset & data, const KernelSpec & kernel, double C = kHardMarginC,
  const SolverOptions & options = {})
{
  check_training_data(data);
  kernel.validate();
  const DualProblem problem = svm_dual(kernel_matrix(kernel, data.x), data.y, C);
  SvmFit fit;
  fit.solution = solve_dual(problem, options);
  if (fit.solution.status == SolveStatus::max_iter) {
    throw Error(
            ErrorKind::nonconverged,
            "SVM solver stopped after " + std::to_string(fit.solution.iterations) +
            " iterations with KKT violation " + std::to_string(fit.solution.kkt_violation));
  }
  fit.model = svm_model_from_dual(data, kernel, fit.solution);
  return fit;
}

}  // namespace inmargin
