#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "inmargin/inmargin.hpp"

namespace testing_support
{

using inmargin::Matrix;
using inmargin::Vector;

class Draw
{
public:
  explicit Draw(std::uint64_t seed)
  : rng_(seed) {}

  double uniform(double lo, double hi) {return lo + (hi - lo) * inmargin_uniform();}

  Vector vector(Eigen::Index m, double lo = -1.0, double hi = 1.0)
  {
    Vector v(m);
    for (Eigen::Index i = 0; i < m; ++i) {v[i] = uniform(lo, hi);}
    return v;
  }

  Matrix matrix(Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0)
  {
    Matrix M(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) {M(i, j) = uniform(lo, hi);}
    }
    return M;
  }

  // SPD with eigenvalues roughly in [0.3, 3].
  Matrix spd(Eigen::Index m)
  {
    const Matrix A = matrix(m, m);
    const Eigen::HouseholderQR<Matrix> qr(A);
    const Matrix Qm = qr.householderQ();
    Vector ev(m);
    for (Eigen::Index i = 0; i < m; ++i) {ev[i] = uniform(0.3, 3.0);}
    Matrix G = Qm * ev.asDiagonal() * Qm.transpose();
    return 0.5 * (G + G.transpose());
  }

  inmargin::MetricField metric_field(std::size_t n, Eigen::Index m)
  {
    std::vector<Matrix> mats;
    for (std::size_t i = 0; i < n; ++i) {mats.push_back(spd(m));}
    return inmargin::validate(inmargin::MetricField::per_point(std::move(mats)), n, m);
  }

  inmargin::DiscriminantModel model(
    const inmargin::KernelSpec & kernel, Eigen::Index s, Eigen::Index m, bool with_b = true)
  {
    auto out = inmargin::DiscriminantModel::constant(kernel, m, uniform(-0.5, 0.5));
    out.centers = matrix(s, m);
    out.a = vector(s);
    out.b = with_b ? matrix(s, m, -0.5, 0.5) : Matrix::Zero(s, m);
    for (Eigen::Index j = 0; j < s; ++j) {out.sv_index.push_back(static_cast<std::size_t>(j));}
    return out;
  }

  inmargin::Dataset labeled(std::size_t n, Eigen::Index m)
  {
    inmargin::Dataset d;
    d.x = matrix(static_cast<Eigen::Index>(n), m);
    d.y.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {d.y[static_cast<Eigen::Index>(i)] = i % 2 ? -1.0 : 1.0;}
    return d;
  }

  std::mt19937_64 & engine() {return rng_;}

private:
  double inmargin_uniform() {return static_cast<double>(rng_() >> 11) * 0x1.0p-53;}

  std::mt19937_64 rng_;
};

// A benchmark-protocol mixture instance.
inline inmargin::MixtureSample mixture(std::uint64_t seed, std::size_t n_test = 1000)
{
  inmargin::MixtureSpec spec;
  spec.seed = seed;
  spec.n_test = n_test;
  return inmargin::gen_mixture(spec);
}

// f(x) = |x|^2 - rho^2 through the homogeneous quadratic kernel.
inline inmargin::DiscriminantModel circle_model(double rho)
{
  auto model = inmargin::DiscriminantModel::constant(inmargin::KernelSpec::polynomial(2), 2, -rho * rho);
  model.centers = Matrix::Identity(2, 2);
  model.a = Vector::Ones(2);
  model.b = Matrix::Zero(2, 2);
  model.sv_index = {0, 1};
  return model;
}

// f(x) = w'x + f0 through the linear kernel.
inline inmargin::DiscriminantModel linear_model(const Vector & w, double f0)
{
  auto model = inmargin::DiscriminantModel::constant(inmargin::KernelSpec::linear(), w.size(), f0);
  model.centers = w.transpose();
  model.a = Vector::Ones(1);
  model.b = Matrix::Zero(1, w.size());
  model.sv_index = {0};
  return model;
}

}  // namespace testing_support
