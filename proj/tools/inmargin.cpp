// Command-line front end: data generation, training, evaluation, projection
// tables, the mixture benchmark and decision-function grids.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "inmargin/inmargin.hpp"

namespace
{

using namespace inmargin;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitConvergence = 4;

// JSON config: top-level keys are global options or subcommand names whose
// objects hold that subcommand's options, e.g. {"train": {"steps": 5}}.
class JsonConfig : public CLI::Config
{
public:
  std::string to_config(const CLI::App *, bool, bool, std::string) const override
  {
    return "{}";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream & input) const override
  {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception & e) {
      throw CLI::FileError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {throw CLI::FileError("config must be a JSON object");}
    std::vector<CLI::ConfigItem> out;
    collect(j, {}, out);
    return out;
  }

private:
  static void collect(
    const nlohmann::json & j, const std::vector<std::string> & parents,
    std::vector<CLI::ConfigItem> & out)
  {
    for (const auto & item : j.items()) {
      const auto & v = item.value();
      if (v.is_object()) {
        auto sub = parents;
        sub.push_back(item.key());
        collect(v, sub, out);
        continue;
      }
      CLI::ConfigItem ci;
      ci.parents = parents;
      ci.name = item.key();
      auto scalar = [](const nlohmann::json & s) -> std::string {
          if (s.is_string()) {return s.get<std::string>();}
          if (s.is_boolean()) {return s.get<bool>() ? "true" : "false";}
          if (s.is_number()) {return s.dump();}
          throw CLI::ConversionError("unsupported config value " + s.dump());
        };
      if (v.is_array()) {
        for (const auto & e : v) {ci.inputs.push_back(scalar(e));}
      } else {
        ci.inputs.push_back(scalar(v));
      }
      out.push_back(std::move(ci));
    }
  }
};

struct KernelFlags
{
  std::string family = "rbf";
  double sigma_sq = 1.0;
  int degree = 2;
  double offset = 0.0;

  void add(CLI::App * cmd)
  {
    cmd->add_option("--kernel", family, "rbf | linear | polynomial")->capture_default_str();
    cmd->add_option("--sigma-sq", sigma_sq, "Gaussian width: exp(-|x-y|^2 / (2 sigma_sq))")
    ->capture_default_str();
    cmd->add_option("--degree", degree, "polynomial degree")->capture_default_str();
    cmd->add_option("--offset", offset, "polynomial offset")->capture_default_str();
  }

  KernelSpec spec() const
  {
    KernelSpec k;
    k.family = kernel_family_from_string(family);
    k.sigma_sq = sigma_sq;
    k.degree = degree;
    k.offset = offset;
    k.validate();
    return k;
  }
};

struct TrainFlags
{
  TrainConfig config;
  double C = std::numeric_limits<double>::infinity();

  void add(CLI::App * cmd)
  {
    cmd->add_option("--C", C, "box bound; inf for hard margin")->capture_default_str();
    cmd->add_option("--steps", config.outer_steps, "outer steps")->capture_default_str();
    cmd->add_option("--proj-iters", config.proj_iters, "projection iterations per step")
    ->capture_default_str();
    cmd->add_option("--estimate-iters", config.estimate_iters, "projection iterations when scoring")
    ->capture_default_str();
    cmd->add_flag("--safeguard", config.safeguard, "damp unstable projection steps");
    cmd->add_flag("--literal-rescaling", config.literal_rescaling,
      "simplified: rescale the kernel but not the bias");
    cmd->add_option("--qp-tol", config.qp_tol, "dual solver KKT tolerance")->capture_default_str();
  }

  TrainConfig get() const
  {
    TrainConfig out = config;
    out.C = std::isinf(C) ? kHardMarginC : C;
    return out;
  }
};

MetricField load_metric(const std::string & spec, const Dataset & data)
{
  if (spec.empty() || spec == "euclidean") {return MetricField::euclidean();}
  return metric_from_json(read_json_file(spec), data.size(), data.dim());
}

std::ostream & open_out(const std::string & path, std::ofstream & file)
{
  if (path.empty() || path == "-") {return std::cout;}
  file.open(path);
  if (!file) {throw Error(ErrorKind::io_error, "cannot open '" + path + "' for writing");}
  return file;
}

int exit_code(const Error & e)
{
  switch (e.kind()) {
    case ErrorKind::nonconverged:
    case ErrorKind::degenerate_gradient:
    case ErrorKind::degenerate_solution:
    case ErrorKind::projection_failure:
      return kExitConvergence;
    default:
      return kExitData;
  }
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Input-space margin classifiers"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file supplying any flag; command-line flags win");

  // gen-data
  auto * gen = app.add_subcommand("gen-data", "sample a two-class Gaussian mixture");
  MixtureSpec mix;
  std::string out_prefix = "mixture";
  gen->add_option("--seed", mix.seed)->capture_default_str();
  gen->add_option("--n-train", mix.n_train)->capture_default_str();
  gen->add_option("--n-test", mix.n_test)->capture_default_str();
  gen->add_option("--sigma", mix.sigma, "noise standard deviation")->capture_default_str();
  gen->add_option("--components", mix.components_per_class)->capture_default_str();
  gen->add_option("--dim", mix.dim)->capture_default_str();
  gen->add_option("--out-prefix", out_prefix, "writes <prefix>_train.csv and <prefix>_test.csv")
  ->capture_default_str();

  // train
  auto * train = app.add_subcommand("train", "fit a model and report its input-space margin");
  std::string algorithm = "input-margin";
  std::string data_path;
  std::string metric_spec = "euclidean";
  std::string model_out;
  std::string trace_out;
  KernelFlags train_kernel;
  TrainFlags train_flags;
  train->add_option("--data", data_path, "training CSV")->required();
  train->add_option("--algorithm", algorithm)
  ->check(CLI::IsMember({"svm", "input-margin", "simplified"}))->capture_default_str();
  train_kernel.add(train);
  train_flags.add(train);
  train->add_option("--metric", metric_spec, "euclidean or a metric JSON file")->capture_default_str();
  train->add_option("--model-out", model_out, "model JSON");
  train->add_option("--trace-out", trace_out, "per-step trace JSON");

  // eval
  auto * eval = app.add_subcommand("eval", "test error of a model");
  std::string model_path;
  std::string eval_data;
  eval->add_option("--model", model_path)->required();
  eval->add_option("--data", eval_data)->required();

  // project
  auto * project = app.add_subcommand("project", "per-sample boundary projections");
  std::string proj_model;
  std::string proj_data;
  std::string proj_metric = "euclidean";
  std::string proj_out;
  ProjectionOptions proj_opts;
  project->add_option("--model", proj_model)->required();
  project->add_option("--data", proj_data)->required();
  project->add_option("--iters", proj_opts.iters)->capture_default_str();
  project->add_flag("--safeguard", proj_opts.safeguard);
  project->add_option("--metric", proj_metric)->capture_default_str();
  project->add_option("--out", proj_out, "CSV path, stdout by default");

  // benchmark
  auto * bench = app.add_subcommand("benchmark", "SVM versus input-margin over repeated mixtures");
  BenchmarkConfig bench_cfg;
  KernelFlags bench_kernel;
  TrainFlags bench_flags;
  std::string report_path = "benchmark.csv";
  std::string summary_path;
  bench->add_option("--runs", bench_cfg.runs)->capture_default_str();
  bench->add_option("--base-seed", bench_cfg.base_seed)->capture_default_str();
  bench->add_option("--jobs", bench_cfg.jobs, "worker threads")->envname("INMARGIN_JOBS")
  ->capture_default_str();
  bench->add_flag("--simplified", bench_cfg.simplified, "also run the simplified variant");
  bench->add_option("--n-train", bench_cfg.mixture.n_train)->capture_default_str();
  bench->add_option("--n-test", bench_cfg.mixture.n_test)->capture_default_str();
  bench->add_option("--sigma", bench_cfg.mixture.sigma, "mixture noise standard deviation")
  ->capture_default_str();
  bench_kernel.add(bench);
  bench_flags.add(bench);
  bench->add_option("--report", report_path, "per-run CSV")->capture_default_str();
  bench->add_option("--summary", summary_path, "summary JSON, stdout by default");

  // grid
  auto * grid = app.add_subcommand("grid", "f on a regular 2-D grid");
  std::string grid_model;
  std::string grid_out;
  double xmin = 0.0;
  double xmax = 1.0;
  double ymin = 0.0;
  double ymax = 1.0;
  std::size_t resolution = 100;
  grid->add_option("--model", grid_model)->required();
  grid->add_option("--xmin", xmin)->capture_default_str();
  grid->add_option("--xmax", xmax)->capture_default_str();
  grid->add_option("--ymin", ymin)->capture_default_str();
  grid->add_option("--ymax", ymax)->capture_default_str();
  grid->add_option("--resolution", resolution)->check(CLI::PositiveNumber)->capture_default_str();
  grid->add_option("--out", grid_out, "CSV path, stdout by default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) {
      const MixtureSample s = gen_mixture(mix);
      write_csv(s.train, out_prefix + "_train.csv");
      write_csv(s.test, out_prefix + "_test.csv");
      std::cout << out_prefix << "_train.csv " << s.train.size() << " samples\n"
                << out_prefix << "_test.csv " << s.test.size() << " samples\n";
    } else if (*train) {
      const Dataset data = read_csv(data_path);
      check_training_data(data);
      const KernelSpec kernel = train_kernel.spec();
      const MetricField metric = validate(load_metric(metric_spec, data), data.size(), data.dim());
      const TrainConfig cfg = train_flags.get();
      TrainResult res;
      try {
        if (algorithm == "svm") {
          SolverOptions qp;
          qp.tol = cfg.qp_tol;
          const SvmFit fit = train_svm(data, kernel, cfg.C, qp);
          const MarginEstimate est =
            estimate_margin(fit.model, data, metric, cfg.projection(cfg.estimate_iters));
          res.model = fit.model;
          res.initial = fit.model;
          res.margin = est.margin;
          StepRecord rec;
          rec.margin = est.margin;
          rec.qp_objective = fit.solution.objective;
          rec.n_sv = static_cast<std::size_t>(fit.model.size());
          rec.partial = est.partial;
          rec.active_set = fit.solution.active_set;
          res.trace.steps.push_back(rec);
          res.trace.active_union = fit.solution.active_set;
        } else if (algorithm == "input-margin") {
          res = train_input_margin(data, kernel, metric, cfg);
        } else {
          res = train_simplified(data, kernel, metric, cfg);
        }
      } catch (const Error & e) {
        if (!trace_out.empty()) {
          Json j = to_json(TrainTrace{});
          j["error"] = e.what();
          write_json_file(j, trace_out);
        }
        throw;
      }
      if (!model_out.empty()) {write_model(res.model, model_out);}
      if (!trace_out.empty()) {write_json_file(to_json(res.trace), trace_out);}
      std::printf("margin %.12g\n", res.margin);
    } else if (*eval) {
      const DiscriminantModel model = read_model(model_path);
      const Dataset data = read_csv(eval_data);
      data.check();
      std::printf("%.6f\n", evaluate(model, data));
    } else if (*project) {
      const DiscriminantModel model = read_model(proj_model);
      const Dataset data = read_csv(proj_data);
      data.check();
      if (data.dim() != model.dim()) {
        throw Error(ErrorKind::invalid_argument, "model and data dimensions disagree");
      }
      const MetricField metric = validate(load_metric(proj_metric, data), data.size(), data.dim());
      std::ofstream file;
      std::ostream & os = open_out(proj_out, file);
      os << "i";
      for (Eigen::Index d = 0; d < data.dim(); ++d) {os << ",xhat" << (d + 1);}
      os << ",dist,residual,iterations,status\n";
      for (std::size_t i = 0; i < data.size(); ++i) {
        const ProjectionResult r =
          project_point(model, data.point(i), data.point(i), metric.at(i), proj_opts);
        os << i;
        for (Eigen::Index d = 0; d < data.dim(); ++d) {os << ',' << format_double(r.xhat[d]);}
        os << ',' << format_double(r.dist) << ',' << format_double(r.residual) << ','
           << r.iterations << ',' << to_string(r.status) << '\n';
      }
    } else if (*bench) {
      bench_cfg.kernel = bench_kernel.spec();
      bench_cfg.train = bench_flags.get();
      const BenchmarkReport report = run_benchmark(bench_cfg);
      std::ofstream csv(report_path);
      if (!csv) {throw Error(ErrorKind::io_error, "cannot open '" + report_path + "' for writing");}
      write_report_csv(report, csv);
      const Json summary = summary_json(report);
      if (summary_path.empty()) {
        std::cout << summary.dump(2) << '\n';
      } else {
        write_json_file(summary, summary_path);
      }
    } else if (*grid) {
      const DiscriminantModel model = read_model(grid_model);
      if (model.dim() != 2) {
        throw Error(ErrorKind::invalid_argument, "grid output needs a 2-D model");
      }
      std::ofstream file;
      std::ostream & os = open_out(grid_out, file);
      os << "x,y,f\n";
      const double steps = resolution > 1 ? static_cast<double>(resolution - 1) : 1.0;
      Vector pt(2);
      for (std::size_t r = 0; r < resolution; ++r) {
        pt[1] = ymin + (ymax - ymin) * static_cast<double>(r) / steps;
        for (std::size_t c = 0; c < resolution; ++c) {
          pt[0] = xmin + (xmax - xmin) * static_cast<double>(c) / steps;
          os << format_double(pt[0]) << ',' << format_double(pt[1]) << ','
             << format_double(eval_f(model, pt)) << '\n';
        }
      }
    }
  } catch (const Error & e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e);
  }
  return 0;
}
