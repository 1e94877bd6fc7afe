#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "inmargin/inmargin.hpp"
#include "oracles/qp_enumeration.hpp"
#include "support.hpp"

using namespace inmargin;
using testing_support::Draw;

namespace
{

Dataset two_points()
{
  Dataset d;
  d.x.resize(2, 2);
  d.x << 1, 0, -1, 0;
  d.y.resize(2);
  d.y << 1, -1;
  return d;
}

DualProblem random_problem(Draw & draw, Eigen::Index n, double C)
{
  const Matrix A = draw.matrix(n + 2, n);
  DualProblem p;
  p.Q = A.transpose() * A;
  p.Q = 0.5 * (p.Q + p.Q.transpose());
  p.linear = draw.vector(n, 0.2, 2.0);
  p.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {p.y[i] = i % 2 ? -1.0 : 1.0;}
  p.C = C;
  return p;
}

void expect_feasible(const DualProblem & p, const DualSolution & s)
{
  const double C = p.box();
  EXPECT_GE(s.alpha.minCoeff(), 0.0);
  EXPECT_LE(s.alpha.maxCoeff(), C + 1e-12);
  EXPECT_LE(std::abs(p.y.dot(s.alpha)), 1e-9 * (1.0 + s.alpha.sum()));
}

}  // namespace

TEST(SolveDual, TwoPointProblem)
{
  const Dataset d = two_points();
  const DualProblem p = svm_dual(kernel_matrix(KernelSpec::linear(), d.x), d.y, std::numeric_limits<double>::infinity());
  const DualSolution s = solve_dual(p);
  ASSERT_TRUE(s.converged());
  // Q is rank one here, so the solver's diagonal jitter shows up near 1e-11.
  EXPECT_GT(s.jitter, 0.0);
  EXPECT_NEAR(s.alpha[0], 0.5, 1e-9);
  EXPECT_NEAR(s.alpha[1], 0.5, 1e-9);
  EXPECT_NEAR(s.objective, 0.5, 1e-9);
  EXPECT_NEAR(s.bias, 0.0, 1e-9);
}

TEST(SolveDual, SingleSampleIsInfeasible)
{
  DualProblem p;
  p.Q = Matrix::Ones(1, 1);
  p.linear = Vector::Ones(1);
  p.y = Vector::Ones(1);
  const DualSolution s = solve_dual(p);
  EXPECT_EQ(s.status, SolveStatus::infeasible);
  EXPECT_EQ(s.alpha[0], 0.0);
}

TEST(SolveDual, MatchesEnumerationOracle)
{
  Draw draw(21);
  for (int trial = 0; trial < 30; ++trial) {
    const double C = trial % 2 ? std::numeric_limits<double>::infinity() : draw.uniform(0.1, 2.0);
    const DualProblem p = random_problem(draw, 6, C);
    const DualSolution s = solve_dual(p);
    const auto ref = oracle::enumerate_qp(p.Q, p.linear, p.y, C);
    ASSERT_TRUE(ref.has_value());
    ASSERT_TRUE(s.converged());
    EXPECT_NEAR(s.objective, ref->objective, 1e-8 * std::max(1.0, std::abs(ref->objective)));
    expect_feasible(p, s);
    EXPECT_LE(s.kkt_violation, 1e-6);
  }
}

TEST(SolveDual, WorkingSetPathMatchesDensePath)
{
  Draw draw(22);
  for (int trial = 0; trial < 10; ++trial) {
    const DualProblem p = random_problem(draw, 12, trial % 2 ? 1.0 : kHardMarginC);
    SolverOptions dense;
    SolverOptions smo;
    smo.dense_limit = 0;
    smo.tol = 1e-10;
    const DualSolution a = solve_dual(p, dense);
    const DualSolution b = solve_dual(p, smo);
    ASSERT_TRUE(a.converged());
    ASSERT_TRUE(b.converged());
    EXPECT_NEAR(a.objective, b.objective, 1e-7 * std::max(1.0, std::abs(a.objective)));
    expect_feasible(p, b);
  }
}

TEST(SolveDual, WarmStartReachesSameOptimum)
{
  Draw draw(23);
  const DualProblem p = random_problem(draw, 8, 2.0);
  const DualSolution cold = solve_dual(p);
  SolverOptions warm;
  Vector a0 = Vector::Zero(8);
  a0[0] = 0.5;
  a0[1] = 0.5;
  warm.alpha0 = a0;
  const DualSolution w = solve_dual(p, warm);
  EXPECT_NEAR(w.objective, cold.objective, 1e-10);
  Vector bad = Vector::Zero(8);
  bad[0] = 1.0;
  warm.alpha0 = bad;
  EXPECT_THROW(solve_dual(p, warm), Error);
}

TEST(SolveDual, IterationCapReportsMaxIter)
{
  Draw draw(24);
  const DualProblem p = random_problem(draw, 30, kHardMarginC);
  SolverOptions opts;
  opts.max_iter = 1;
  opts.dense_limit = 0;
  const DualSolution s = solve_dual(p, opts);
  EXPECT_EQ(s.status, SolveStatus::max_iter);
  expect_feasible(p, s);
}

TEST(SolveDual, RejectsMalformedProblems)
{
  DualProblem p;
  p.Q = Matrix::Identity(2, 2);
  p.linear = Vector::Ones(2);
  p.y = Vector::Ones(3);
  EXPECT_THROW(solve_dual(p), Error);
  p.y = Eigen::Vector2d(1, 0);
  EXPECT_THROW(solve_dual(p), Error);
  p.y = Eigen::Vector2d(1, -1);
  p.Q(0, 1) = 1.0;
  EXPECT_THROW(solve_dual(p), Error);
  p.Q(0, 1) = 0.0;
  p.C = 0.0;
  EXPECT_THROW(solve_dual(p), Error);
}

TEST(SolveDual, IndefiniteQGetsJitter)
{
  DualProblem p;
  p.Q = Matrix::Ones(2, 2);  // singular
  p.linear = Vector::Ones(2);
  p.y = Eigen::Vector2d(1, -1);
  p.C = 1.0;
  const DualSolution s = solve_dual(p);
  EXPECT_TRUE(s.converged());
  expect_feasible(p, s);
}

TEST(TrainSvm, TwoPointsLinear)
{
  const SvmFit fit = train_svm(two_points(), KernelSpec::linear());
  ASSERT_EQ(fit.model.size(), 2);
  EXPECT_NEAR(fit.model.a[0], 0.5, 1e-9);
  EXPECT_NEAR(fit.model.a[1], -0.5, 1e-9);
  EXPECT_NEAR(fit.model.f0, 0.0, 1e-9);
  // f(x) = x1, feature-space margin 1 / |w| = 1.
  EXPECT_NEAR(eval_f(fit.model, Eigen::Vector2d(0.3, 9.0)), 0.3, 1e-9);
}

TEST(TrainSvm, XorPointsAreAllSupportVectors)
{
  Dataset d;
  d.x.resize(4, 2);
  d.x << 0, 0, 1, 1, 0, 1, 1, 0;
  d.y.resize(4);
  d.y << 1, 1, -1, -1;
  const SvmFit fit = train_svm(d, KernelSpec::rbf(1.0));
  EXPECT_EQ(fit.model.size(), 4);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(d.label(i) * eval_f(fit.model, d.point(i)), 1.0, 1e-6);
  }
}

TEST(TrainSvm, MixtureHardMarginSeparates)
{
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset train = testing_support::mixture(seed, 10).train;
    const SvmFit fit = train_svm(train, KernelSpec::rbf(1.0));
    EXPECT_LE(fit.solution.kkt_violation, 1e-6 * std::max(1.0, fit.solution.alpha.maxCoeff()));
    for (std::size_t i = 0; i < train.size(); ++i) {
      EXPECT_GE(train.label(i) * eval_f(fit.model, train.point(i)), 1.0 - 1e-6) << "seed " << seed;
    }
  }
}

TEST(TrainSvm, SoftMarginBoxAndEquality)
{
  for (const double C : {0.1, 1.0, 10.0}) {
    const Dataset train = testing_support::mixture(5, 10).train;
    const SvmFit fit = train_svm(train, KernelSpec::rbf(1.0), C);
    const DualProblem p = svm_dual(kernel_matrix(KernelSpec::rbf(1.0), train.x), train.y, C);
    expect_feasible(p, fit.solution);
    EXPECT_LE(fit.solution.kkt_violation, 1e-6);
  }
}

TEST(TrainSvm, SingleClassIsInfeasible)
{
  Dataset d = two_points();
  d.y << 1, 1;
  try {
    train_svm(d, KernelSpec::linear());
    FAIL();
  } catch (const Error & e) {
    EXPECT_EQ(e.kind(), ErrorKind::infeasible);
  }
}

TEST(Mixture, BalancedTrainingSplit)
{
  const auto s = testing_support::mixture(31);
  EXPECT_EQ(s.train.size(), 20u);
  EXPECT_EQ((s.train.y.array() > 0).count(), 10);
  EXPECT_EQ((s.train.y.array() < 0).count(), 10);
  EXPECT_EQ(s.test.size(), 1000u);
}

TEST(Mixture, SeededDeterminism)
{
  const auto a = testing_support::mixture(32);
  const auto b = testing_support::mixture(32);
  const auto c = testing_support::mixture(33);
  EXPECT_EQ(a.train.x, b.train.x);
  EXPECT_EQ(a.test.x, b.test.x);
  EXPECT_EQ(a.train.y, b.train.y);
  EXPECT_NE(a.train.x, c.train.x);
}

TEST(Mixture, ZeroNoiseSitsOnCenters)
{
  MixtureSpec spec;
  spec.sigma = 0.0;
  spec.seed = 34;
  const auto s = gen_mixture(spec);
  for (std::size_t i = 0; i < s.train.size(); ++i) {
    const Matrix & centers = s.train.label(i) > 0 ? s.positive_centers : s.negative_centers;
    const Vector x = s.train.point(i);
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {best = std::min(best, (centers.row(c).transpose() - x).norm());}
    EXPECT_EQ(best, 0.0);
  }
}

TEST(Mixture, LargeSampleMean)
{
  MixtureSpec spec;
  spec.seed = 35;
  spec.n_train = 200000;
  spec.n_test = 0;
  const auto s = gen_mixture(spec);
  const auto N = static_cast<double>(spec.n_train / 2);
  const Matrix & centers = s.positive_centers;
  const Vector mu = centers.colwise().mean().transpose();
  Vector sum = Vector::Zero(2);
  for (std::size_t i = 0; i < s.train.size(); i += 2) {sum += s.train.point(i);}
  const Vector mean = sum / N;
  for (Eigen::Index d = 0; d < 2; ++d) {
    // Sampling noise plus the spread of the uniformly chosen component.
    const double spread = (centers.col(d).array() - mu[d]).square().mean();
    const double tol = 3.0 * std::sqrt((spec.sigma * spec.sigma + spread) / N);
    EXPECT_LT(std::abs(mean[d] - mu[d]), tol);
  }
}

TEST(Mixture, RngStreamIsPinned)
{
  Rng rng(0);
  // First draw of mt19937_64 seeded with 0, top 53 bits.
  EXPECT_EQ(rng.uniform(), static_cast<double>(std::mt19937_64(0)() >> 11) * 0x1.0p-53);
  double sum = 0.0;
  double sq = 0.0;
  Rng normals(1);
  for (int i = 0; i < 100000; ++i) {
    const double z = normals.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / 1e5, 0.0, 0.02);
  EXPECT_NEAR(sq / 1e5, 1.0, 0.02);
}

TEST(Evaluate, ConstantAndPerfectModels)
{
  const auto s = testing_support::mixture(36, 200);
  EXPECT_DOUBLE_EQ(evaluate(DiscriminantModel::constant(KernelSpec::rbf(1.0), 2, 1.0), s.test), 0.5);
  // Perfect on its own training set: the hard-margin SVM separates it.
  const SvmFit fit = train_svm(s.train, KernelSpec::rbf(1.0));
  EXPECT_DOUBLE_EQ(evaluate(fit.model, s.train), 0.0);
  const double err = evaluate(fit.model, s.test);
  EXPECT_GE(err, 0.0);
  EXPECT_LT(err, 0.5);
  EXPECT_THROW(evaluate(DiscriminantModel::constant(KernelSpec::rbf(1.0), 3, 1.0), s.test), Error);
}

TEST(Csv, RoundTrip)
{
  const auto s = testing_support::mixture(37, 50);
  std::stringstream ss;
  write_csv(s.test, ss);
  const Dataset back = read_csv(ss);
  EXPECT_EQ(back.x, s.test.x);
  EXPECT_EQ(back.y, s.test.y);
}

TEST(Csv, DimensionFromHeader)
{
  std::stringstream ss("x1,x2,x3,y\n1,2,3,1\n4,5,6,-1\n");
  const Dataset d = read_csv(ss);
  EXPECT_EQ(d.dim(), 3);
  EXPECT_EQ(d.size(), 2u);
}

TEST(Csv, RejectsBadRowsWithLineNumber)
{
  auto expect_line = [](const std::string & text, std::size_t line) {
      std::stringstream ss(text);
      try {
        read_csv(ss);
        FAIL() << text;
      } catch (const Error & e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse_error);
        ASSERT_TRUE(e.index().has_value());
        EXPECT_EQ(*e.index(), line);
      }
    };
  expect_line("x1,x2,y\n1,2,1\n3,4,0\n", 3);
  expect_line("x1,x2,y\n1,2\n", 2);
  expect_line("x1,x2,y\n1,abc,1\n", 2);
  expect_line("x1,x2,y\n1,nan,1\n", 2);
  expect_line("a,b\n", 1);
}

TEST(Json, ModelRoundTrip)
{
  Draw draw(38);
  const auto model = draw.model(KernelSpec::polynomial(3, 0.5), 4, 2);
  const DiscriminantModel back = model_from_json(Json::parse(to_json(model).dump()));
  EXPECT_EQ(back.kernel, model.kernel);
  EXPECT_EQ(back.centers, model.centers);
  EXPECT_EQ(back.a, model.a);
  EXPECT_EQ(back.b, model.b);
  EXPECT_EQ(back.f0, model.f0);
  EXPECT_EQ(back.sv_index, model.sv_index);
}

TEST(Json, ModelRejectsUnknownAndMissingFields)
{
  Draw draw(39);
  Json j = to_json(draw.model(KernelSpec::rbf(1.0), 2, 2));
  Json extra = j;
  extra["colour"] = 1;
  EXPECT_THROW(model_from_json(extra), Error);
  Json missing = j;
  missing.erase("f0");
  EXPECT_THROW(model_from_json(missing), Error);
  Json bad_kernel = j;
  bad_kernel["kernel"]["sigma_sq"] = -1.0;
  EXPECT_THROW(model_from_json(bad_kernel), Error);
  Json ragged = j;
  ragged["a"] = Json::array({1.0});
  EXPECT_THROW(model_from_json(ragged), Error);
}

TEST(Json, MetricForms)
{
  EXPECT_EQ(metric_from_json(Json::parse(R"({"kind":"euclidean"})"), 3, 2).kind(), MetricKind::euclidean);
  const MetricField shared = metric_from_json(Json::parse(R"({"matrix":[[2,0],[0,1]]})"), 3, 2);
  EXPECT_DOUBLE_EQ(shared.at(2).norm_sq(Eigen::Vector2d(1, 1)), 3.0);
  const MetricField flat = metric_from_json(Json::parse(R"({"matrices":[[1,0,0,1],[4,0,0,4]]})"), 2, 2);
  EXPECT_DOUBLE_EQ(flat.at(1).norm_sq(Eigen::Vector2d(1, 0)), 4.0);
  EXPECT_THROW(metric_from_json(Json::parse(R"({"matrices":[[1,0,0,1]]})"), 2, 2), Error);
  EXPECT_THROW(metric_from_json(Json::parse(R"({"matrix":[[1,2],[2,1]]})"), 2, 2), Error);
  EXPECT_THROW(metric_from_json(Json::parse(R"({"kind":"hyperbolic"})"), 2, 2), Error);
}
