#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "icmlp/errors.hpp"

namespace icmlp {

/// Scalar activation function shared by every hidden neuron of a network.
///
/// Built-ins dispatch through a switch so that tight evaluation loops stay
/// inlinable; user supplied functions go through std::function.
///
/// Safe ranges: relu, identity, affine and softplus are finite for every finite
/// input whose image is representable; tanh and sigmoid saturate and are total
/// on all finite inputs.
class Activation {
 public:
  enum class Kind { relu, tanh, sigmoid, identity, affine, softplus, custom };

  static Activation relu() { return Activation(Kind::relu, "relu", {}); }
  static Activation tanh() { return Activation(Kind::tanh, "tanh", {}); }
  static Activation sigmoid() { return Activation(Kind::sigmoid, "sigmoid", {}); }
  static Activation softplus() { return Activation(Kind::softplus, "softplus", {}); }
  static Activation identity() { return Activation(Kind::identity, "identity", {}); }
  static Activation affine(double slope, double intercept) {
    return Activation(Kind::affine, "affine", {slope, intercept});
  }

  /// Wraps an arbitrary function. Pass `affine_coefficients` only if the function is
  /// exactly t -> A*t + B; the claim is checked on a probe set.
  static Activation custom(std::string name, std::function<double(double)> eval,
                           std::function<double(double)> deriv = {},
                           std::optional<std::pair<double, double>> affine_coefficients = {}) {
    if (!eval) throw StructuralError("custom activation '" + name + "' has no evaluation function");
    Activation act(Kind::custom, std::move(name), {});
    act.eval_ = std::move(eval);
    act.deriv_ = std::move(deriv);
    if (affine_coefficients) {
      act.affine_ = true;
      act.slope_ = affine_coefficients->first;
      act.intercept_ = affine_coefficients->second;
      for (double t : {-7.5, -1.0, -0.25, 0.0, 0.5, 1.0, 3.0, 11.0}) {
        if (act(t) != act.slope_ * t + act.intercept_) {
          throw StructuralError("custom activation '" + act.name_ +
                                "' is flagged affine but deviates from A*t+B");
        }
      }
    }
    return act;
  }

  /// Rebuilds a built-in from its serialized name and parameters.
  static Activation from_name(std::string_view name, std::span<const double> params = {}) {
    auto expect = [&](std::size_t count) {
      if (params.size() != count) {
        throw StructuralError("activation '" + std::string(name) + "' takes " +
                              std::to_string(count) + " parameter(s)");
      }
    };
    if (name == "affine") {
      expect(2);
      return affine(params[0], params[1]);
    }
    static const std::pair<std::string_view, Activation (*)()> plain[] = {
        {"relu", &relu}, {"tanh", &tanh}, {"sigmoid", &sigmoid},
        {"softplus", &softplus}, {"identity", &identity}};
    for (const auto& [known, make] : plain) {
      if (name == known) {
        expect(0);
        return make();
      }
    }
    throw StructuralError("unknown activation '" + std::string(name) + "'");
  }

  /// Parses "relu", "tanh", ... or "affine:A,B".
  static Activation parse(std::string_view spec) {
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos) return from_name(spec);
    std::vector<double> params;
    std::stringstream in{std::string(spec.substr(colon + 1))};
    std::string item;
    while (std::getline(in, item, ',')) {
      try {
        std::size_t used = 0;
        params.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw StructuralError("bad activation parameter '" + item + "'");
      }
    }
    return from_name(spec.substr(0, colon), params);
  }

  double operator()(double t) const {
    switch (kind_) {
      case Kind::relu: return t > 0.0 ? t : 0.0;
      case Kind::tanh: return std::tanh(t);
      case Kind::sigmoid: return logistic(t);
      case Kind::identity: return t;
      case Kind::affine: return slope_ * t + intercept_;
      case Kind::softplus: return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
      case Kind::custom: return eval_(t);
    }
    return 0.0;
  }

  bool has_derivative() const noexcept { return kind_ != Kind::custom || static_cast<bool>(deriv_); }

  double derivative(double t) const {
    switch (kind_) {
      case Kind::relu: return t > 0.0 ? 1.0 : 0.0;
      case Kind::tanh: {
        const double y = std::tanh(t);
        return 1.0 - y * y;
      }
      case Kind::sigmoid: {
        const double y = logistic(t);
        return y * (1.0 - y);
      }
      case Kind::identity: return 1.0;
      case Kind::affine: return slope_;
      case Kind::softplus: return logistic(t);
      case Kind::custom:
        if (!deriv_) throw UnsupportedActivationError("activation '" + name_ + "' has no derivative");
        return deriv_(t);
    }
    return 0.0;
  }

  /// Applies the activation in place to a whole layer.
  void apply(std::span<double> values) const {
    switch (kind_) {
      case Kind::relu:
        for (double& z : values) z = z > 0.0 ? z : 0.0;
        return;
      case Kind::tanh:
        for (double& z : values) z = std::tanh(z);
        return;
      case Kind::identity: return;
      default:
        for (double& z : values) z = (*this)(z);
    }
  }

  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  const std::vector<double>& params() const noexcept { return params_; }
  bool is_custom() const noexcept { return kind_ == Kind::custom; }

  bool is_affine() const noexcept { return affine_; }
  /// A in sigma(t) = A t + B; meaningful only when is_affine().
  double slope() const noexcept { return slope_; }
  double intercept() const noexcept { return intercept_; }

  /// Kinks of a piecewise-linear activation. Between consecutive breakpoints the
  /// activation is exactly affine. Empty for smooth activations.
  std::span<const double> breakpoints() const noexcept {
    static constexpr double relu_kinks[] = {0.0};
    if (kind_ == Kind::relu) return relu_kinks;
    return {};
  }
  bool is_piecewise_linear() const noexcept { return kind_ == Kind::relu || affine_; }

  std::string to_string() const {
    if (params_.empty()) return name_;
    std::ostringstream out;
    out.precision(17);
    out << name_ << ':';
    for (std::size_t i = 0; i < params_.size(); ++i) out << (i ? "," : "") << params_[i];
    return out.str();
  }

  friend bool operator==(const Activation& lhs, const Activation& rhs) {
    return lhs.kind_ == rhs.kind_ && lhs.name_ == rhs.name_ && lhs.params_ == rhs.params_;
  }

 private:
  Activation(Kind kind, std::string name, std::vector<double> params)
      : kind_(kind), name_(std::move(name)), params_(std::move(params)) {
    if (kind_ == Kind::identity) {
      affine_ = true;
      slope_ = 1.0;
      intercept_ = 0.0;
    } else if (kind_ == Kind::affine) {
      affine_ = true;
      slope_ = params_[0];
      intercept_ = params_[1];
      if (!std::isfinite(slope_) || !std::isfinite(intercept_)) {
        throw StructuralError("affine activation needs finite coefficients");
      }
    }
  }

  static double logistic(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
  }

  Kind kind_;
  std::string name_;
  std::vector<double> params_;
  bool affine_ = false;
  double slope_ = 0.0;
  double intercept_ = 0.0;
  std::function<double(double)> eval_;
  std::function<double(double)> deriv_;
};

}  // namespace icmlp
