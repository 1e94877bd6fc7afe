#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "inmargin/dataset.hpp"
#include "inmargin/error.hpp"
#include "inmargin/kernel.hpp"
#include "inmargin/metric.hpp"
#include "inmargin/model.hpp"
#include "inmargin/temporals.hpp"
#include "inmargin/trainer.hpp"

namespace inmargin
{

using Json = nlohmann::ordered_json;

namespace detail
{

inline void reject_unknown(const Json & j, const std::set<std::string> & allowed, const char * what)
{
  if (!j.is_object()) {throw Error(ErrorKind::parse_error, std::string(what) + " must be a JSON object");}
  for (const auto & item : j.items()) {
    if (!allowed.count(item.key())) {
      throw Error(ErrorKind::parse_error, std::string(what) + ": unknown field '" + item.key() + "'");
    }
  }
}

template<typename T>
T get_field(const Json & j, const char * key, const char * what)
{
  if (!j.contains(key)) {
    throw Error(ErrorKind::parse_error, std::string(what) + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception & e) {
    throw Error(ErrorKind::parse_error, std::string(what) + "." + key + ": " + e.what());
  }
}

// JSON null stands in for non-finite values, which JSON cannot carry.
inline Json number(double v)
{
  return std::isfinite(v) ? Json(v) : Json(nullptr);
}

inline Json rows_to_json(const Matrix & M)
{
  Json out = Json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) {row.push_back(M(r, c));}
    out.push_back(std::move(row));
  }
  return out;
}

inline Json vector_to_json(const Vector & v)
{
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {out.push_back(v[i]);}
  return out;
}

inline Vector vector_from_json(const Json & j, const char * what)
{
  if (!j.is_array()) {throw Error(ErrorKind::parse_error, std::string(what) + " must be an array");}
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {throw Error(ErrorKind::parse_error, std::string(what) + " must hold numbers");}
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

// Accepts [[...], ...] or a flat row-major array with the column count
// given.
inline Matrix matrix_from_json(const Json & j, Eigen::Index cols, const char * what)
{
  if (!j.is_array()) {throw Error(ErrorKind::parse_error, std::string(what) + " must be an array");}
  if (j.empty()) {return Matrix(0, cols > 0 ? cols : 0);}
  if (j.front().is_array()) {
    const auto c = static_cast<Eigen::Index>(j.front().size());
    Matrix M(static_cast<Eigen::Index>(j.size()), c);
    for (std::size_t r = 0; r < j.size(); ++r) {
      if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != c) {
        throw Error(ErrorKind::parse_error, std::string(what) + " has ragged rows");
      }
      M.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r], what).transpose();
    }
    return M;
  }
  const Vector flat = vector_from_json(j, what);
  if (cols <= 0 || flat.size() % cols != 0) {
    throw Error(ErrorKind::parse_error, std::string(what) + " has a size that does not fit the dimension");
  }
  Matrix M(flat.size() / cols, cols);
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {M(r, c) = flat[r * cols + c];}
  }
  return M;
}

}  // namespace detail

inline Json to_json(const KernelSpec & k)
{
  Json j;
  j["family"] = to_string(k.family);
  j["sigma_sq"] = k.sigma_sq;
  j["degree"] = k.degree;
  j["offset"] = k.offset;
  return j;
}

inline KernelSpec kernel_from_json(const Json & j)
{
  detail::reject_unknown(j, {"family", "sigma_sq", "degree", "offset"}, "kernel");
  KernelSpec k;
  k.family = kernel_family_from_string(detail::get_field<std::string>(j, "family", "kernel"));
  if (j.contains("sigma_sq")) {k.sigma_sq = detail::get_field<double>(j, "sigma_sq", "kernel");}
  if (j.contains("degree")) {k.degree = detail::get_field<int>(j, "degree", "kernel");}
  if (j.contains("offset")) {k.offset = detail::get_field<double>(j, "offset", "kernel");}
  try {
    k.validate();
  } catch (const Error & e) {
    throw Error(ErrorKind::parse_error, e.what());
  }
  return k;
}

inline Json to_json(const DiscriminantModel & model)
{
  Json j;
  j["kernel"] = to_json(model.kernel);
  j["f0"] = model.f0;
  j["dim"] = model.dim();
  j["centers"] = detail::rows_to_json(model.centers);
  j["a"] = detail::vector_to_json(model.a);
  j["b"] = detail::rows_to_json(model.b);
  j["sv_index"] = model.sv_index;
  return j;
}

inline DiscriminantModel model_from_json(const Json & j)
{
  detail::reject_unknown(j, {"kernel", "f0", "dim", "centers", "a", "b", "sv_index"}, "model");
  DiscriminantModel model;
  model.kernel = kernel_from_json(j.at("kernel"));
  model.f0 = detail::get_field<double>(j, "f0", "model");
  const auto m = static_cast<Eigen::Index>(detail::get_field<long long>(j, "dim", "model"));
  if (m < 1) {throw Error(ErrorKind::parse_error, "model.dim must be >= 1");}
  model.centers = detail::matrix_from_json(j.at("centers"), m, "model.centers");
  model.a = detail::vector_from_json(j.at("a"), "model.a");
  model.b = detail::matrix_from_json(j.at("b"), m, "model.b");
  model.sv_index = detail::get_field<std::vector<std::size_t>>(j, "sv_index", "model");
  if (model.centers.cols() != m || model.b.cols() != m) {
    throw Error(ErrorKind::parse_error, "model arrays do not match model.dim");
  }
  if (!std::isfinite(model.f0) || !model.centers.allFinite() || !model.a.allFinite() || !model.b.allFinite()) {
    throw Error(ErrorKind::parse_error, "model holds non-finite values");
  }
  try {
    model.check();
  } catch (const Error & e) {
    throw Error(ErrorKind::parse_error, e.what());
  }
  return model;
}

/// Metric file: {"kind": "euclidean"}, {"matrix": M} shared by all samples,
/// or {"matrices": [M_1, ..., M_n]}. Each M is nested rows or a flat
/// row-major array.
inline MetricField metric_from_json(const Json & j, std::size_t n, Eigen::Index m)
{
  detail::reject_unknown(j, {"kind", "matrix", "matrices"}, "metric");
  if (j.contains("kind")) {
    const auto kind = detail::get_field<std::string>(j, "kind", "metric");
    if (kind == "euclidean") {
      if (j.contains("matrix") || j.contains("matrices")) {
        throw Error(ErrorKind::parse_error, "euclidean metric takes no matrices");
      }
      return MetricField::euclidean();
    }
    if (kind != "per_point") {throw Error(ErrorKind::parse_error, "unknown metric kind '" + kind + "'");}
  }
  std::vector<Matrix> mats;
  if (j.contains("matrix") == j.contains("matrices")) {
    throw Error(ErrorKind::parse_error, "metric needs exactly one of 'matrix' or 'matrices'");
  }
  if (j.contains("matrix")) {
    mats.assign(n, detail::matrix_from_json(j.at("matrix"), m, "metric.matrix"));
  } else {
    const Json & list = j.at("matrices");
    if (!list.is_array()) {throw Error(ErrorKind::parse_error, "metric.matrices must be an array");}
    for (const auto & item : list) {mats.push_back(detail::matrix_from_json(item, m, "metric.matrices"));}
  }
  return validate(MetricField::per_point(std::move(mats)), n, m);
}

inline Json to_json(const TrainTrace & trace)
{
  Json steps = Json::array();
  for (const auto & s : trace.steps) {
    Json j;
    j["step"] = s.step;
    j["margin"] = detail::number(s.margin);
    j["qp_objective"] = detail::number(s.qp_objective);
    j["n_sv"] = s.n_sv;
    j["step_status"] = s.status;
    j["partial"] = s.partial;
    j["active_set"] = s.active_set;
    steps.push_back(std::move(j));
  }
  Json out;
  out["steps"] = std::move(steps);
  out["best_step"] = trace.best_step;
  out["active_union"] = trace.active_union;
  return out;
}

/// Debug dump of one linearization.
inline Json to_json(const TemporalVariables & tv)
{
  Json j;
  j["r"] = tv.r;
  j["xhat"] = detail::rows_to_json(tv.xhat);
  j["d"] = detail::rows_to_json(tv.d);
  j["p"] = detail::vector_to_json(tv.p);
  j["q"] = detail::rows_to_json(tv.q);
  j["g"] = detail::vector_to_json(tv.g);
  j["s"] = detail::rows_to_json(tv.s);
  j["t"] = detail::rows_to_json(tv.t);
  j["u"] = detail::rows_to_json(tv.u);
  std::vector<bool> frozen(tv.frozen.begin(), tv.frozen.end());
  j["frozen"] = frozen;
  return j;
}

inline Json read_json_file(const std::string & path)
{
  std::ifstream is(path);
  if (!is) {throw Error(ErrorKind::io_error, "cannot open '" + path + "'");}
  try {
    return Json::parse(is);
  } catch (const nlohmann::json::parse_error & e) {
    throw Error(ErrorKind::parse_error, path + ": " + e.what());
  }
}

inline void write_json_file(const Json & j, const std::string & path)
{
  std::ofstream os(path);
  if (!os) {throw Error(ErrorKind::io_error, "cannot open '" + path + "' for writing");}
  os << j.dump(2) << '\n';
  if (!os) {throw Error(ErrorKind::io_error, "write to '" + path + "' failed");}
}

inline DiscriminantModel read_model(const std::string & path)
{
  return model_from_json(read_json_file(path));
}

inline void write_model(const DiscriminantModel & model, const std::string & path)
{
  write_json_file(to_json(model), path);
}

}  // namespace inmargin
