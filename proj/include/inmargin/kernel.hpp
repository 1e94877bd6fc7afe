#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "inmargin/error.hpp"

namespace inmargin
{

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Vector>;

enum class KernelFamily { gaussian_rbf, linear, polynomial };

inline const char * to_string(KernelFamily family)
{
  switch (family) {
    case KernelFamily::gaussian_rbf: return "gaussian_rbf";
    case KernelFamily::linear: return "linear";
    case KernelFamily::polynomial: return "polynomial";
  }
  return "unknown";
}

inline KernelFamily kernel_family_from_string(const std::string & name)
{
  if (name == "gaussian_rbf" || name == "rbf") {return KernelFamily::gaussian_rbf;}
  if (name == "linear") {return KernelFamily::linear;}
  if (name == "polynomial" || name == "poly") {return KernelFamily::polynomial;}
  throw Error(ErrorKind::invalid_argument, "unknown kernel family '" + name + "'");
}

/// Differentiable Mercer kernel.
///
/// The Gaussian kernel uses k(x, y) = exp(-|x - y|^2 / (2 sigma_sq)). The
/// convention exp(-|x - y|^2 / s) is obtained with sigma_sq = s / 2.
/// Polynomial: k(x, y) = (x'y + offset)^degree. `degree` and `offset` are
/// ignored by the other families, `sigma_sq` by all but the Gaussian.
struct KernelSpec
{
  KernelFamily family = KernelFamily::gaussian_rbf;
  double sigma_sq = 1.0;
  int degree = 2;
  double offset = 0.0;

  static KernelSpec rbf(double sigma_sq) {return {KernelFamily::gaussian_rbf, sigma_sq, 2, 0.0};}
  static KernelSpec linear() {return {KernelFamily::linear, 1.0, 1, 0.0};}
  static KernelSpec polynomial(int degree, double offset = 0.0)
  {
    return {KernelFamily::polynomial, 1.0, degree, offset};
  }

  void validate() const
  {
    if (family == KernelFamily::gaussian_rbf && !(sigma_sq > 0.0 && std::isfinite(sigma_sq))) {
      throw Error(ErrorKind::invalid_argument, "sigma_sq must be positive");
    }
    if (family == KernelFamily::polynomial) {
      if (degree < 1) {throw Error(ErrorKind::invalid_argument, "polynomial degree must be >= 1");}
      if (!(offset >= 0.0)) {throw Error(ErrorKind::invalid_argument, "polynomial offset must be >= 0");}
    }
  }

  bool operator==(const KernelSpec &) const = default;
};

namespace detail
{

inline void check_same_dim(const VectorRef & x, const VectorRef & y)
{
  if (x.size() != y.size() || x.size() < 1) {
    throw Error(
            ErrorKind::invalid_argument,
            "kernel arguments have dimensions " + std::to_string(x.size()) + " and " +
            std::to_string(y.size()));
  }
}

}  // namespace detail

/// k(x, y)
inline double eval_k(const KernelSpec & spec, const VectorRef & x, const VectorRef & y)
{
  detail::check_same_dim(x, y);
  switch (spec.family) {
    case KernelFamily::gaussian_rbf:
      return std::exp(-(x - y).squaredNorm() / (2.0 * spec.sigma_sq));
    case KernelFamily::linear:
      return x.dot(y);
    case KernelFamily::polynomial:
      return std::pow(x.dot(y) + spec.offset, spec.degree);
  }
  return 0.0;
}

/// dk(x, y)/dx
inline Vector eval_kx(const KernelSpec & spec, const VectorRef & x, const VectorRef & y)
{
  detail::check_same_dim(x, y);
  switch (spec.family) {
    case KernelFamily::gaussian_rbf: {
        const Vector diff = x - y;
        const double k = std::exp(-diff.squaredNorm() / (2.0 * spec.sigma_sq));
        return (-k / spec.sigma_sq) * diff;
      }
    case KernelFamily::linear:
      return y;
    case KernelFamily::polynomial: {
        const double s = x.dot(y) + spec.offset;
        return (spec.degree * std::pow(s, spec.degree - 1)) * y;
      }
  }
  return Vector::Zero(x.size());
}

/// d^2 k(x, y) / dx dy'; entry (r, c) is d^2 k / dx_r dy_c.
inline Matrix eval_kxy(const KernelSpec & spec, const VectorRef & x, const VectorRef & y)
{
  detail::check_same_dim(x, y);
  const auto m = x.size();
  switch (spec.family) {
    case KernelFamily::gaussian_rbf: {
        const Vector diff = x - y;
        const double k = std::exp(-diff.squaredNorm() / (2.0 * spec.sigma_sq));
        Matrix out = Matrix::Identity(m, m) / spec.sigma_sq;
        out.noalias() -= diff * diff.transpose() / (spec.sigma_sq * spec.sigma_sq);
        return k * out;
      }
    case KernelFamily::linear:
      return Matrix::Identity(m, m);
    case KernelFamily::polynomial: {
        const double s = x.dot(y) + spec.offset;
        const int d = spec.degree;
        Matrix out = (d * std::pow(s, d - 1)) * Matrix::Identity(m, m);
        if (d >= 2) {
          out.noalias() += (d * (d - 1) * std::pow(s, d - 2)) * (y * x.transpose());
        }
        return out;
      }
  }
  return Matrix::Zero(m, m);
}

namespace detail
{

// Multi-indices (k_1, ..., k_m, k_c) summing to `degree`; the last entry is
// the power of the offset term. Ordered with k_1 descending first.
inline void enumerate_monomials(
  int remaining, std::size_t pos, std::vector<int> & current,
  std::vector<std::vector<int>> & out)
{
  if (pos + 1 == current.size()) {
    current[pos] = remaining;
    out.push_back(current);
    return;
  }
  for (int k = remaining; k >= 0; --k) {
    current[pos] = k;
    enumerate_monomials(remaining - k, pos + 1, current, out);
  }
}

inline double factorial(int k)
{
  double out = 1.0;
  for (int i = 2; i <= k; ++i) {out *= i;}
  return out;
}

struct Monomial
{
  double weight;           // sqrt(multinomial * offset^k0)
  std::vector<int> powers; // powers of x_1..x_m
};

inline std::vector<Monomial> polynomial_monomials(const KernelSpec & spec, Eigen::Index m)
{
  std::vector<int> current(static_cast<std::size_t>(m) + 1, 0);
  std::vector<std::vector<int>> raw;
  enumerate_monomials(spec.degree, 0, current, raw);
  std::vector<Monomial> out;
  for (const auto & idx : raw) {
    const int k0 = idx.back();
    if (k0 > 0 && spec.offset == 0.0) {continue;}
    double coef = factorial(spec.degree);
    for (int k : idx) {coef /= factorial(k);}
    coef *= std::pow(spec.offset, k0);
    out.push_back({std::sqrt(coef), std::vector<int>(idx.begin(), idx.end() - 1)});
  }
  return out;
}

}  // namespace detail

/// Explicit finite-dimensional feature map phi with phi(x)'phi(y) = k(x, y).
/// Only exists for the linear and polynomial families.
inline Vector explicit_feature_map(const KernelSpec & spec, const VectorRef & x)
{
  switch (spec.family) {
    case KernelFamily::gaussian_rbf:
      throw Error(ErrorKind::unsupported_kernel, "gaussian_rbf has no finite feature map");
    case KernelFamily::linear:
      return x;
    case KernelFamily::polynomial: {
        const auto monos = detail::polynomial_monomials(spec, x.size());
        Vector out(static_cast<Eigen::Index>(monos.size()));
        for (std::size_t f = 0; f < monos.size(); ++f) {
          double v = monos[f].weight;
          for (Eigen::Index r = 0; r < x.size(); ++r) {
            v *= std::pow(x[r], monos[f].powers[static_cast<std::size_t>(r)]);
          }
          out[static_cast<Eigen::Index>(f)] = v;
        }
        return out;
      }
  }
  return x;
}

/// Jacobian (D x m) of explicit_feature_map; column r is psi_r(x).
inline Matrix explicit_feature_jacobian(const KernelSpec & spec, const VectorRef & x)
{
  const auto m = x.size();
  switch (spec.family) {
    case KernelFamily::gaussian_rbf:
      throw Error(ErrorKind::unsupported_kernel, "gaussian_rbf has no finite feature map");
    case KernelFamily::linear:
      return Matrix::Identity(m, m);
    case KernelFamily::polynomial: {
        const auto monos = detail::polynomial_monomials(spec, m);
        Matrix out = Matrix::Zero(static_cast<Eigen::Index>(monos.size()), m);
        for (std::size_t f = 0; f < monos.size(); ++f) {
          const auto & pw = monos[f].powers;
          for (Eigen::Index r = 0; r < m; ++r) {
            const int pr = pw[static_cast<std::size_t>(r)];
            if (pr == 0) {continue;}
            double v = monos[f].weight * pr * std::pow(x[r], pr - 1);
            for (Eigen::Index c = 0; c < m; ++c) {
              if (c != r) {v *= std::pow(x[c], pw[static_cast<std::size_t>(c)]);}
            }
            out(static_cast<Eigen::Index>(f), r) = v;
          }
        }
        return out;
      }
  }
  return Matrix::Identity(m, m);
}

}  // namespace inmargin
