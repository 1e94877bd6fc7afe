#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "inmargin/dataset.hpp"
#include "inmargin/error.hpp"
#include "inmargin/io.hpp"
#include "inmargin/kernel.hpp"
#include "inmargin/metric.hpp"
#include "inmargin/simplified.hpp"
#include "inmargin/trainer.hpp"

namespace inmargin
{

struct BenchmarkConfig
{
  std::size_t runs = 100;
  std::uint64_t base_seed = 0;
  std::size_t jobs = 1;
  bool simplified = false;
  MixtureSpec mixture;
  KernelSpec kernel = KernelSpec::rbf(1.0);
  TrainConfig train;
};

struct AlgorithmOutcome
{
  double margin = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double err = std::numeric_limits<double>::quiet_NaN();
  double err_ratio = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_step = 0;
  /// Nonzero-coefficient centers all lie in the union of active sets.
  bool sparse = true;
};

struct RunRecord
{
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double svm_margin = std::numeric_limits<double>::quiet_NaN();
  double svm_err = std::numeric_limits<double>::quiet_NaN();
  AlgorithmOutcome im;
  std::optional<AlgorithmOutcome> simplified;
};

struct RatioSummary
{
  std::size_t improved = 0;       // ratio > 1.001
  std::size_t non_improving = 0;
  std::size_t below_one = 0;      // ratio < 1
  double min_ratio = std::numeric_limits<double>::quiet_NaN();
  double max_ratio = std::numeric_limits<double>::quiet_NaN();
  double median_ratio = std::numeric_limits<double>::quiet_NaN();
  double mean_err_ratio = std::numeric_limits<double>::quiet_NaN();
  double min_err_ratio = std::numeric_limits<double>::quiet_NaN();
  double max_err_ratio = std::numeric_limits<double>::quiet_NaN();
  std::size_t sparsity_violations = 0;
};

struct BenchmarkReport
{
  std::vector<RunRecord> runs;
  std::size_t completed = 0;
  std::size_t skipped = 0;
  RatioSummary im;
  std::optional<RatioSummary> simplified;
};

inline constexpr double kImprovementThreshold = 1.001;

namespace detail
{

inline double safe_ratio(double num, double den)
{
  if (den > 0.0) {return num / den;}
  if (num == den) {return 1.0;}
  return std::numeric_limits<double>::infinity();
}

inline bool within_active_union(const DiscriminantModel & model, const std::vector<std::size_t> & active)
{
  for (Eigen::Index r = 0; r < model.size(); ++r) {
    const bool nonzero = model.a[r] != 0.0 || (model.b.cols() > 0 && model.b.row(r).cwiseAbs().maxCoeff() != 0.0);
    if (!nonzero) {continue;}
    const std::size_t idx = model.sv_index[static_cast<std::size_t>(r)];
    if (!std::binary_search(active.begin(), active.end(), idx)) {return false;}
  }
  return true;
}

inline AlgorithmOutcome outcome(const TrainResult & res, const Dataset & test, double svm_margin, double svm_err)
{
  AlgorithmOutcome out;
  out.margin = res.margin;
  out.ratio = safe_ratio(res.margin, svm_margin);
  out.err = evaluate(res.model, test);
  out.err_ratio = safe_ratio(out.err, svm_err);
  out.best_step = res.trace.best_step;
  out.sparse = within_active_union(res.model, res.trace.active_union);
  return out;
}

inline RatioSummary summarize(const std::vector<const AlgorithmOutcome *> & items)
{
  RatioSummary s;
  if (items.empty()) {return s;}
  std::vector<double> ratios;
  double err_sum = 0.0;
  std::size_t err_count = 0;
  s.min_err_ratio = std::numeric_limits<double>::infinity();
  s.max_err_ratio = -std::numeric_limits<double>::infinity();
  for (const auto * o : items) {
    ratios.push_back(o->ratio);
    if (o->ratio > kImprovementThreshold) {++s.improved;} else {++s.non_improving;}
    if (o->ratio < 1.0) {++s.below_one;}
    if (!o->sparse) {++s.sparsity_violations;}
    if (std::isfinite(o->err_ratio)) {
      err_sum += o->err_ratio;
      ++err_count;
      s.min_err_ratio = std::min(s.min_err_ratio, o->err_ratio);
      s.max_err_ratio = std::max(s.max_err_ratio, o->err_ratio);
    }
  }
  std::sort(ratios.begin(), ratios.end());
  s.min_ratio = ratios.front();
  s.max_ratio = ratios.back();
  const std::size_t k = ratios.size();
  s.median_ratio = k % 2 ? ratios[k / 2] : 0.5 * (ratios[k / 2 - 1] + ratios[k / 2]);
  if (err_count > 0) {
    s.mean_err_ratio = err_sum / static_cast<double>(err_count);
  } else {
    s.min_err_ratio = s.max_err_ratio = std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

}  // namespace detail

/// One benchmark run: fresh mixture from `seed`, SVM versus input-margin
/// (and optionally the simplified variant), each scored by the same margin
/// estimator and by test error.
inline RunRecord run_once(const BenchmarkConfig & config, std::size_t run_id)
{
  RunRecord rec;
  rec.run_id = run_id;
  rec.seed = config.base_seed + run_id;
  try {
    MixtureSpec mix = config.mixture;
    mix.seed = rec.seed;
    const MixtureSample sample = gen_mixture(mix);
    const MetricField metric = MetricField::euclidean();
    const TrainResult im = train_input_margin(sample.train, config.kernel, metric, config.train);
    rec.svm_margin = im.trace.steps.front().margin;
    rec.svm_err = evaluate(im.initial, sample.test);
    rec.im = detail::outcome(im, sample.test, rec.svm_margin, rec.svm_err);
    if (config.simplified) {
      const TrainResult simp = train_simplified(sample.train, config.kernel, metric, config.train);
      rec.simplified = detail::outcome(simp, sample.test, rec.svm_margin, rec.svm_err);
    }
    rec.ok = true;
  } catch (const Error & e) {
    rec.error = e.what();
  }
  return rec;
}

/// Runs are independent and results land in run order, so the report does
/// not depend on `jobs`.
inline BenchmarkReport run_benchmark(const BenchmarkConfig & config)
{
  if (config.runs < 1) {throw Error(ErrorKind::invalid_argument, "runs must be >= 1");}
  config.train.validate();
  config.kernel.validate();
  BenchmarkReport report;
  report.runs.resize(config.runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
      for (std::size_t id = next++; id < config.runs; id = next++) {
        report.runs[id] = run_once(config, id);
      }
    };
  const std::size_t jobs = std::clamp<std::size_t>(config.jobs, 1, config.runs);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) {pool.emplace_back(worker);}
  worker();
  for (auto & th : pool) {th.join();}

  std::vector<const AlgorithmOutcome *> im;
  std::vector<const AlgorithmOutcome *> simp;
  for (const auto & r : report.runs) {
    if (!r.ok) {
      ++report.skipped;
      continue;
    }
    ++report.completed;
    im.push_back(&r.im);
    if (r.simplified) {simp.push_back(&*r.simplified);}
  }
  report.im = detail::summarize(im);
  if (config.simplified) {report.simplified = detail::summarize(simp);}
  return report;
}

inline void write_report_csv(const BenchmarkReport & report, std::ostream & os)
{
  const bool simp = report.simplified.has_value();
  os << "run_id,svm_margin,im_margin,ratio,svm_err,im_err,err_ratio";
  if (simp) {os << ",simp_margin,simp_ratio,simp_err,simp_err_ratio";}
  os << ",seed,status\n";
  for (const auto & r : report.runs) {
    os << r.run_id << ',' << format_double(r.svm_margin) << ',' << format_double(r.im.margin) << ','
       << format_double(r.im.ratio) << ',' << format_double(r.svm_err) << ','
       << format_double(r.im.err) << ',' << format_double(r.im.err_ratio);
    if (simp) {
      const AlgorithmOutcome o = r.simplified.value_or(AlgorithmOutcome{});
      os << ',' << format_double(o.margin) << ',' << format_double(o.ratio) << ','
         << format_double(o.err) << ',' << format_double(o.err_ratio);
    }
    os << ',' << r.seed << ',' << (r.ok ? "ok" : "skipped") << '\n';
  }
}

inline Json to_json(const RatioSummary & s)
{
  Json j;
  j["improved"] = s.improved;
  j["non_improving"] = s.non_improving;
  j["below_one"] = s.below_one;
  j["min_ratio"] = detail::number(s.min_ratio);
  j["max_ratio"] = detail::number(s.max_ratio);
  j["median_ratio"] = detail::number(s.median_ratio);
  j["mean_err_ratio"] = detail::number(s.mean_err_ratio);
  j["min_err_ratio"] = detail::number(s.min_err_ratio);
  j["max_err_ratio"] = detail::number(s.max_err_ratio);
  j["sparsity_violations"] = s.sparsity_violations;
  return j;
}

inline Json summary_json(const BenchmarkReport & report)
{
  Json j;
  j["runs"] = report.runs.size();
  j["completed"] = report.completed;
  j["skipped"] = report.skipped;
  j["input_margin"] = to_json(report.im);
  if (report.simplified) {j["simplified"] = to_json(*report.simplified);}
  Json errors = Json::array();
  for (const auto & r : report.runs) {
    if (!r.ok) {errors.push_back({{"run_id", r.run_id}, {"error", r.error}});}
  }
  j["errors"] = std::move(errors);
  return j;
}

}  // namespace inmargin
