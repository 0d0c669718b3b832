#include "mazeadapt/param_vector.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "mazeadapt/error.hpp"
#include "mazeadapt/kernels.hpp"

namespace mazeadapt {

using nlohmann::json;

void ParamVector::add(std::string name, std::vector<std::size_t> shape) {
  if (has_segment(name)) throw ContractError("duplicate parameter segment '" + name + "'");
  ParamSegment seg;
  seg.name = std::move(name);
  seg.size = shape_numel(shape);
  seg.shape = std::move(shape);
  seg.offset = data_.size();
  data_.resize(data_.size() + seg.size, 0.0);
  segments_.push_back(std::move(seg));
}

const ParamSegment& ParamVector::segment(std::size_t i) const {
  if (i >= segments_.size()) throw ContractError("segment index out of range");
  return segments_[i];
}

const ParamSegment& ParamVector::segment(std::string_view name) const {
  for (const auto& s : segments_) {
    if (s.name == name) return s;
  }
  throw ContractError("no parameter segment named '" + std::string(name) + "'");
}

bool ParamVector::has_segment(std::string_view name) const {
  return std::any_of(segments_.begin(), segments_.end(),
                     [&](const ParamSegment& s) { return s.name == name; });
}

std::span<double> ParamVector::segment_values(std::string_view name) {
  const ParamSegment& s = segment(name);
  return {data_.data() + s.offset, s.size};
}

std::span<const double> ParamVector::segment_values(std::string_view name) const {
  const ParamSegment& s = segment(name);
  return {data_.data() + s.offset, s.size};
}

Tensor ParamVector::tensor(std::string_view name) const {
  const ParamSegment& s = segment(name);
  return Tensor(s.shape, std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(s.offset),
                                             data_.begin() +
                                                 static_cast<std::ptrdiff_t>(s.offset + s.size)));
}

void ParamVector::set_tensor(std::string_view name, const Tensor& t) {
  const ParamSegment& s = segment(name);
  if (t.shape != s.shape) {
    throw ShapeError("segment '" + std::string(name) + "' has shape " + shape_to_string(s.shape) +
                     ", got " + t.shape_str());
  }
  std::copy(t.data.begin(), t.data.end(), data_.begin() + static_cast<std::ptrdiff_t>(s.offset));
}

Tensor ParamVector::flat() const { return Tensor({data_.size()}, data_); }

void ParamVector::set_flat(std::span<const double> values) {
  if (values.size() != data_.size()) {
    throw ContractError("flat value count " + std::to_string(values.size()) +
                        " does not match parameter count " + std::to_string(data_.size()));
  }
  std::copy(values.begin(), values.end(), data_.begin());
}

bool ParamVector::same_layout(const ParamVector& other) const {
  if (segments_.size() != other.segments_.size()) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& a = segments_[i];
    const auto& b = other.segments_[i];
    if (a.name != b.name || a.shape != b.shape || a.offset != b.offset) return false;
  }
  return true;
}

ParamVector ParamVector::zeros_like() const {
  ParamVector out = *this;
  std::fill(out.data_.begin(), out.data_.end(), 0.0);
  return out;
}

std::string ParamVector::to_json() const {
  json j;
  j["segments"] = json::array();
  for (const auto& s : segments_) {
    j["segments"].push_back({{"name", s.name}, {"shape", s.shape}});
  }
  j["data"] = data_;
  return j.dump();
}

ParamVector ParamVector::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("parameter checkpoint: ") + e.what());
  }
  ParamVector out;
  try {
    for (const auto& s : j.at("segments")) {
      out.add(s.at("name").get<std::string>(), s.at("shape").get<std::vector<std::size_t>>());
    }
    const auto data = j.at("data").get<std::vector<double>>();
    out.set_flat(data);
  } catch (const json::exception& e) {
    throw ParseError(std::string("parameter checkpoint: ") + e.what());
  }
  return out;
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grads, double lr) {
  if (!params.same_layout(grads)) {
    throw ContractError("sgd_step: parameter and gradient layouts differ");
  }
  if (!(lr >= 0.0)) throw ContractError("sgd_step: learning rate must be non-negative");
  ParamVector out = params;
  kernels::axpy(-lr, grads.values().data(), out.values().data(), out.size());
  return out;
}

void SgdOptimizer::step(ParamVector& params, const ParamVector& grads) {
  if (!params.same_layout(grads)) {
    throw ContractError("SgdOptimizer::step: parameter and gradient layouts differ");
  }
  if (momentum_ == 0.0) {
    kernels::axpy(-lr_, grads.values().data(), params.values().data(), params.size());
    return;
  }
  if (velocity_.size() != params.size()) velocity_.assign(params.size(), 0.0);
  auto g = grads.values();
  auto p = params.values();
  for (std::size_t i = 0; i < velocity_.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + g[i];
    p[i] -= lr_ * velocity_[i];
  }
}

}  // namespace mazeadapt
