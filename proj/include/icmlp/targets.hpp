#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "icmlp/approximate.hpp"
#include "icmlp/errors.hpp"
#include "icmlp/grid.hpp"

namespace icmlp {

struct NamedTarget {
  std::string name;
  Target function;
  Box domain;  // default domain
};

inline const std::vector<std::string_view>& target_names() {
  static const std::vector<std::string_view> names = {"sin3x", "abs", "runge", "sincosxy"};
  return names;
}

/// sin3x = sin(3x), abs = |x|, runge = 1/(1+25x^2) on [-1, 1]; sincosxy = sin(x)cos(y) on [-1, 1]^2.
inline NamedTarget named_target(std::string_view name) {
  const Box unit{{{-1.0, 1.0}}};
  const Box square{{{-1.0, 1.0}, {-1.0, 1.0}}};
  if (name == "sin3x") return {"sin3x", [](std::span<const double> x) { return std::sin(3.0 * x[0]); }, unit};
  if (name == "abs") return {"abs", [](std::span<const double> x) { return std::abs(x[0]); }, unit};
  if (name == "runge") {
    return {"runge", [](std::span<const double> x) { return 1.0 / (1.0 + 25.0 * x[0] * x[0]); }, unit};
  }
  if (name == "sincosxy") {
    return {"sincosxy", [](std::span<const double> x) { return std::sin(x[0]) * std::cos(x[1]); }, square};
  }
  std::string known;
  for (auto n : target_names()) known += (known.empty() ? "" : ", ") + std::string(n);
  throw StructuralError("unknown target '" + std::string(name) + "'; known targets: " + known);
}

/// Piecewise-linear interpolant through (x, y) samples, constant beyond the ends.
inline NamedTarget table_target(std::vector<std::pair<double, double>> samples) {
  if (samples.size() < 2) throw StructuralError("a table target needs at least two samples");
  std::sort(samples.begin(), samples.end());
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].first > samples[i - 1].first)) throw StructuralError("table target has repeated x values");
  }
  auto data = std::make_shared<const std::vector<std::pair<double, double>>>(std::move(samples));
  Target f = [data](std::span<const double> x) {
    const auto& s = *data;
    const double t = x[0];
    if (t <= s.front().first) return s.front().second;
    if (t >= s.back().first) return s.back().second;
    const auto hi = std::upper_bound(s.begin(), s.end(), t, [](double v, const auto& p) { return v < p.first; });
    const auto lo = hi - 1;
    const double w = (t - lo->first) / (hi->first - lo->first);
    return (1.0 - w) * lo->second + w * hi->second;
  };
  return {"table", std::move(f), Box{{{data->front().first, data->back().first}}}};
}

}  // namespace icmlp
