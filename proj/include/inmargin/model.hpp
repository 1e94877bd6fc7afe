#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "inmargin/error.hpp"
#include "inmargin/kernel.hpp"

namespace inmargin
{

/// Sparse kernel expansion
///
///   f(x) = sum_i { a_i k(c_i, x) + b_i' k_x(c_i, x) } + f0
///
/// over centers c_i (rows of `centers`), which during input-margin training
/// are the estimated boundary projections of the support vectors. `b` holds
/// one m-vector per row; `sv_index` maps each row to its training sample.
struct DiscriminantModel
{
  KernelSpec kernel;
  Matrix centers;  // s x m
  Vector a;        // s
  Matrix b;        // s x m
  double f0 = 0.0;
  std::vector<std::size_t> sv_index;

  Eigen::Index size() const noexcept {return centers.rows();}
  Eigen::Index dim() const noexcept {return centers.cols();}

  /// Empty expansion of dimension m, f(x) = f0.
  static DiscriminantModel constant(const KernelSpec & kernel, Eigen::Index m, double f0)
  {
    DiscriminantModel out;
    out.kernel = kernel;
    out.centers = Matrix::Zero(0, m);
    out.a = Vector::Zero(0);
    out.b = Matrix::Zero(0, m);
    out.f0 = f0;
    return out;
  }

  void check() const
  {
    kernel.validate();
    const auto s = centers.rows();
    if (a.size() != s || b.rows() != s || b.cols() != centers.cols() ||
      sv_index.size() != static_cast<std::size_t>(s))
    {
      throw Error(ErrorKind::invalid_argument, "model arrays have inconsistent sizes");
    }
  }

  /// Multiplies (a, b, f0) by c.
  DiscriminantModel scaled(double c) const
  {
    DiscriminantModel out = *this;
    out.a *= c;
    out.b *= c;
    out.f0 *= c;
    return out;
  }

  /// Sum of absolute coefficients, used to make degeneracy thresholds
  /// invariant to the overall scale of f.
  double coefficient_scale() const
  {
    return a.cwiseAbs().sum() + b.cwiseAbs().sum() + std::abs(f0);
  }
};

namespace detail
{

inline void check_point(const DiscriminantModel & model, const VectorRef & x)
{
  if (x.size() != model.dim()) {
    throw Error(
            ErrorKind::invalid_argument,
            "point has dimension " + std::to_string(x.size()) + ", model expects " +
            std::to_string(model.dim()));
  }
}

}  // namespace detail

/// f(x) - f0, i.e. <w, phi(x)>.
inline double eval_expansion(const DiscriminantModel & model, const VectorRef & x)
{
  detail::check_point(model, x);
  double out = 0.0;
  for (Eigen::Index j = 0; j < model.size(); ++j) {
    const Vector c = model.centers.row(j).transpose();
    out += model.a[j] * eval_k(model.kernel, c, x);
    out += model.b.row(j).dot(eval_kx(model.kernel, c, x).transpose());
  }
  return out;
}

inline double eval_f(const DiscriminantModel & model, const VectorRef & x)
{
  return eval_expansion(model, x) + model.f0;
}

/// Gradient of f, sum_j { a_j k_x(x, c_j) + K_xy(x, c_j) b_j }.
inline Vector eval_grad_f(const DiscriminantModel & model, const VectorRef & x)
{
  detail::check_point(model, x);
  Vector out = Vector::Zero(model.dim());
  for (Eigen::Index j = 0; j < model.size(); ++j) {
    const Vector c = model.centers.row(j).transpose();
    out += model.a[j] * eval_kx(model.kernel, x, c);
    out += eval_kxy(model.kernel, x, c) * model.b.row(j).transpose();
  }
  return out;
}

/// Hessian of f by central differences of the analytic gradient, step
/// 1e-4 (1 + |x|), symmetrized.
inline Matrix eval_hess_f(const DiscriminantModel & model, const VectorRef & x)
{
  detail::check_point(model, x);
  const auto m = model.dim();
  const double h = 1e-4 * (1.0 + x.norm());
  Matrix H(m, m);
  Vector xp = x;
  Vector xm = x;
  for (Eigen::Index c = 0; c < m; ++c) {
    xp[c] = x[c] + h;
    xm[c] = x[c] - h;
    H.col(c) = (eval_grad_f(model, xp) - eval_grad_f(model, xm)) / (2.0 * h);
    xp[c] = x[c];
    xm[c] = x[c];
  }
  return 0.5 * (H + H.transpose());
}

}  // namespace inmargin
