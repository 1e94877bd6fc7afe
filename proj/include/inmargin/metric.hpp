#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "inmargin/error.hpp"
#include "inmargin/kernel.hpp"

namespace inmargin
{

namespace detail
{

inline bool is_symmetric(const Matrix & M)
{
  const double scale = M.cwiseAbs().maxCoeff();
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

// Returns the inverse of a symmetric positive definite matrix, or nullopt
// when M is not SPD.
inline std::optional<Matrix> spd_inverse(const Matrix & M)
{
  if (M.rows() != M.cols() || M.rows() == 0 || !M.allFinite() || !is_symmetric(M)) {
    return std::nullopt;
  }
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) {return std::nullopt;}
  // LLT only checks pivots for positivity, not relative size.
  const Vector diag = llt.matrixL().toDenseMatrix().diagonal();
  if (diag.minCoeff() <= 1e-12 * diag.maxCoeff()) {return std::nullopt;}
  Matrix inv = llt.solve(Matrix::Identity(M.rows(), M.cols()));
  return Matrix(0.5 * (inv + inv.transpose()));
}

}  // namespace detail

/// v' M v for an SPD matrix M.
inline double quad_norm_sq(const VectorRef & v, const Matrix & M)
{
  if (M.rows() != v.size() || M.cols() != v.size()) {
    throw Error(ErrorKind::invalid_argument, "metric and vector dimensions disagree");
  }
  if (!detail::spd_inverse(M)) {
    throw Error(ErrorKind::invalid_metric, "matrix is not symmetric positive definite");
  }
  return v.dot(M * v);
}

/// Metric G_i at one training sample together with its inverse. An empty
/// matrix stands for the identity.
class LocalMetric
{
public:
  LocalMetric() = default;

  static LocalMetric identity() {return LocalMetric();}

  static LocalMetric from_matrix(const Matrix & G)
  {
    auto inv = detail::spd_inverse(G);
    if (!inv) {throw Error(ErrorKind::invalid_metric, "matrix is not symmetric positive definite");}
    LocalMetric out;
    out.G_ = G;
    out.G_inv_ = std::move(*inv);
    return out;
  }

  bool is_identity() const noexcept {return G_.size() == 0;}

  /// |v|_G^2
  double norm_sq(const VectorRef & v) const
  {
    return is_identity() ? v.squaredNorm() : v.dot(G_ * v);
  }

  /// |v|_{G^-1}^2
  double inv_norm_sq(const VectorRef & v) const
  {
    return is_identity() ? v.squaredNorm() : v.dot(G_inv_ * v);
  }

  /// G^-1 v
  Vector apply_inverse(const VectorRef & v) const
  {
    return is_identity() ? Vector(v) : Vector(G_inv_ * v);
  }

  Matrix matrix(Eigen::Index m) const {return is_identity() ? Matrix::Identity(m, m) : G_;}
  Matrix inverse(Eigen::Index m) const {return is_identity() ? Matrix::Identity(m, m) : G_inv_;}

private:
  Matrix G_;
  Matrix G_inv_;
};

enum class MetricKind { euclidean, per_point };

/// Per-sample quadratic metrics G_i, held constant at each training sample.
class MetricField
{
public:
  static MetricField euclidean() {return MetricField();}

  static MetricField per_point(std::vector<Matrix> matrices)
  {
    MetricField out;
    out.kind_ = MetricKind::per_point;
    out.raw_ = std::move(matrices);
    return out;
  }

  MetricKind kind() const noexcept {return kind_;}
  bool validated() const noexcept {return validated_;}
  const std::vector<Matrix> & matrices() const noexcept {return raw_;}

  /// Metric of sample i. Requires a validated field for per_point kind.
  const LocalMetric & at(std::size_t i) const
  {
    if (kind_ == MetricKind::euclidean) {return identity_;}
    if (!validated_) {throw Error(ErrorKind::invalid_argument, "metric field used before validate()");}
    return local_.at(i);
  }

  friend MetricField validate(MetricField field, std::size_t n, Eigen::Index m);

private:
  MetricKind kind_ = MetricKind::euclidean;
  bool validated_ = false;
  std::vector<Matrix> raw_;
  std::vector<LocalMetric> local_;
  LocalMetric identity_;
};

/// Checks count, dimensions and SPD-ness, and caches the inverses.
inline MetricField validate(MetricField field, std::size_t n, Eigen::Index m)
{
  if (field.kind_ == MetricKind::euclidean) {
    field.validated_ = true;
    return field;
  }
  if (field.raw_.size() != n) {
    throw Error(
            ErrorKind::invalid_argument,
            "expected " + std::to_string(n) + " metric matrices, got " +
            std::to_string(field.raw_.size()));
  }
  field.local_.clear();
  field.local_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix & G = field.raw_[i];
    if (G.rows() != m || G.cols() != m) {
      throw Error(ErrorKind::invalid_argument, "metric matrix has wrong dimension", i);
    }
    if (!detail::spd_inverse(G)) {
      throw Error(
              ErrorKind::invalid_metric,
              "metric matrix " + std::to_string(i) + " is not symmetric positive definite", i);
    }
    field.local_.push_back(LocalMetric::from_matrix(G));
  }
  field.validated_ = true;
  return field;
}

}  // namespace inmargin
