#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "inmargin/error.hpp"
#include "inmargin/kernel.hpp"
#include "inmargin/model.hpp"

namespace inmargin
{

/// Labelled samples; row i of `x` is sample i, y_i in {-1, +1}.
struct Dataset
{
  Matrix x;  // n x m
  Vector y;  // n

  std::size_t size() const noexcept {return static_cast<std::size_t>(x.rows());}
  Eigen::Index dim() const noexcept {return x.cols();}
  Vector point(std::size_t i) const {return x.row(static_cast<Eigen::Index>(i)).transpose();}
  double label(std::size_t i) const {return y[static_cast<Eigen::Index>(i)];}

  void check() const
  {
    if (y.size() != x.rows()) {
      throw Error(ErrorKind::invalid_argument, "label count does not match sample count");
    }
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y[i] != 1.0 && y[i] != -1.0) {
        throw Error(ErrorKind::invalid_argument, "labels must be +1 or -1", static_cast<std::size_t>(i));
      }
      if (!x.row(i).allFinite()) {
        throw Error(ErrorKind::invalid_argument, "sample has non-finite coordinates", static_cast<std::size_t>(i));
      }
    }
  }

  bool has_both_labels() const
  {
    return (y.array() > 0).any() && (y.array() < 0).any();
  }
};

/// Portable random stream: std::mt19937_64 (bit-exact across standard
/// libraries), uniforms from the top 53 bits, normals by the Marsaglia polar
/// method. Library distributions are avoided because their output differs
/// between implementations.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
  : engine_(seed) {}

  double uniform() {return static_cast<double>(engine_() >> 11) * 0x1.0p-53;}

  std::size_t uniform_index(std::size_t count)
  {
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(count));
    return k < count ? k : count - 1;
  }

  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Two-class Gaussian mixture: each class has `components_per_class` centers
/// drawn uniformly in [center_low, center_high)^dim, samples pick a component
/// uniformly and add isotropic noise with standard deviation `sigma`.
struct MixtureSpec
{
  std::size_t components_per_class = 3;
  double center_low = 0.0;
  double center_high = 1.0;
  double sigma = 0.2;
  std::size_t dim = 2;
  std::size_t n_train = 20;
  std::size_t n_test = 1000;
  std::uint64_t seed = 0;

  void validate() const
  {
    if (!(sigma >= 0.0)) {throw Error(ErrorKind::invalid_argument, "sigma must be >= 0");}
    if (components_per_class < 1 || dim < 1 || n_train < 1) {
      throw Error(ErrorKind::invalid_argument, "mixture counts must be >= 1");
    }
    if (!(center_high > center_low)) {
      throw Error(ErrorKind::invalid_argument, "center range is empty");
    }
  }
};

struct MixtureSample
{
  Dataset train;
  Dataset test;
  Matrix positive_centers;  // components x dim
  Matrix negative_centers;
};

/// Draws one mixture per seed and samples train and test sets from it.
/// Labels alternate +1, -1, +1, ... so classes are balanced within one.
inline MixtureSample gen_mixture(const MixtureSpec & spec)
{
  spec.validate();
  Rng rng(spec.seed);
  const auto k = static_cast<Eigen::Index>(spec.components_per_class);
  const auto m = static_cast<Eigen::Index>(spec.dim);
  MixtureSample out;
  auto draw_centers = [&](Matrix & centers) {
      centers.resize(k, m);
      for (Eigen::Index c = 0; c < k; ++c) {
        for (Eigen::Index d = 0; d < m; ++d) {
          centers(c, d) = spec.center_low + (spec.center_high - spec.center_low) * rng.uniform();
        }
      }
    };
  draw_centers(out.positive_centers);
  draw_centers(out.negative_centers);

  auto draw_set = [&](std::size_t n) {
      Dataset set;
      set.x.resize(static_cast<Eigen::Index>(n), m);
      set.y.resize(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const bool positive = (i % 2 == 0);
        const Matrix & centers = positive ? out.positive_centers : out.negative_centers;
        const auto comp = static_cast<Eigen::Index>(rng.uniform_index(spec.components_per_class));
        for (Eigen::Index d = 0; d < m; ++d) {
          set.x(row, d) = centers(comp, d) + spec.sigma * rng.normal();
        }
        set.y[row] = positive ? 1.0 : -1.0;
      }
      return set;
    };
  out.train = draw_set(spec.n_train);
  out.test = draw_set(spec.n_test);
  return out;
}

/// Fraction of samples with y_i f(x_i) <= 0.
inline double evaluate(const DiscriminantModel & model, const Dataset & test)
{
  if (test.size() == 0) {return 0.0;}
  if (test.dim() != model.dim()) {
    throw Error(ErrorKind::invalid_argument, "model and data dimensions disagree");
  }
  std::size_t errors = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.label(i) * eval_f(model, test.point(i)) <= 0.0) {++errors;}
  }
  return static_cast<double>(errors) / static_cast<double>(test.size());
}

// CSV with header "x1,...,xm,y", 17 significant digits.

inline std::string format_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(const Dataset & data, std::ostream & os)
{
  for (Eigen::Index d = 0; d < data.dim(); ++d) {os << 'x' << (d + 1) << ',';}
  os << "y\n";
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    for (Eigen::Index d = 0; d < data.dim(); ++d) {os << format_double(data.x(i, d)) << ',';}
    os << (data.y[i] > 0 ? "1" : "-1") << '\n';
  }
}

inline void write_csv(const Dataset & data, const std::string & path)
{
  std::ofstream os(path);
  if (!os) {throw Error(ErrorKind::io_error, "cannot open '" + path + "' for writing");}
  write_csv(data, os);
  if (!os) {throw Error(ErrorKind::io_error, "write to '" + path + "' failed");}
}

namespace detail
{

inline std::vector<std::string_view> split_commas(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) {break;}
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {s.remove_prefix(1);}
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {s.remove_suffix(1);}
  return s;
}

inline double parse_double(std::string_view field, std::size_t line_no)
{
  field = trim(field);
  double v = 0.0;
  const auto * end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw Error(
            ErrorKind::parse_error,
            "line " + std::to_string(line_no) + ": cannot parse '" + std::string(field) + "'",
            line_no);
  }
  return v;
}

}  // namespace detail

inline Dataset read_csv(std::istream & is)
{
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line)) {throw Error(ErrorKind::parse_error, "empty file", line_no);}
  const auto header = detail::split_commas(detail::trim(line));
  if (header.size() < 2 || detail::trim(header.back()) != "y") {
    throw Error(ErrorKind::parse_error, "line 1: header must be x1,...,xm,y", line_no);
  }
  const auto m = static_cast<Eigen::Index>(header.size() - 1);
  std::vector<double> coords;
  std::vector<double> labels;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim(line).empty()) {continue;}
    const auto fields = detail::split_commas(line);
    if (fields.size() != header.size()) {
      throw Error(
              ErrorKind::parse_error,
              "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
              " fields, got " + std::to_string(fields.size()), line_no);
    }
    for (Eigen::Index d = 0; d < m; ++d) {
      const double v = detail::parse_double(fields[static_cast<std::size_t>(d)], line_no);
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::parse_error, "line " + std::to_string(line_no) + ": non-finite value", line_no);
      }
      coords.push_back(v);
    }
    const double label = detail::parse_double(fields.back(), line_no);
    if (label != 1.0 && label != -1.0) {
      throw Error(
              ErrorKind::parse_error,
              "line " + std::to_string(line_no) + ": label must be +1 or -1", line_no);
    }
    labels.push_back(label);
  }
  Dataset out;
  const auto n = static_cast<Eigen::Index>(labels.size());
  out.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
    coords.data(), n, m);
  out.y = Eigen::Map<const Vector>(labels.data(), n);
  return out;
}

inline Dataset read_csv(const std::string & path)
{
  std::ifstream is(path);
  if (!is) {throw Error(ErrorKind::io_error, "cannot open '" + path + "'");}
  return read_csv(is);
}

}  // namespace inmargin
