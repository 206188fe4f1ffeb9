#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "icmlp/errors.hpp"

namespace icmlp {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Axis-aligned box; a 1-D box is an interval.
struct Box {
  std::vector<Interval> axes;

  std::size_t dim() const noexcept { return axes.size(); }

  void validate() const {
    if (axes.empty()) throw StructuralError("domain box has no axes");
    for (const auto& axis : axes) {
      if (!(std::isfinite(axis.lo) && std::isfinite(axis.hi) && axis.lo < axis.hi)) {
        throw StructuralError("domain axis must satisfy lo < hi with finite bounds");
      }
    }
  }
};

/// n equally spaced points from lo to hi inclusive (n >= 2), or the midpoint when n == 1.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {0.5 * (lo + hi)};
  std::vector<double> out(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

/// Tensor-product grid over a box, points enumerated with the last axis fastest.
class BoxGrid {
 public:
  BoxGrid(const Box& box, std::size_t points_per_axis)
      : BoxGrid(box, std::vector<std::size_t>(box.dim(), points_per_axis)) {}

  BoxGrid(const Box& box, const std::vector<std::size_t>& points) {
    box.validate();
    if (points.size() != box.dim()) throw StructuralError("grid needs one point count per axis");
    for (std::size_t k = 0; k < box.dim(); ++k) {
      if (points[k] == 0) throw StructuralError("grid axes need at least one point");
      ticks_.push_back(linspace(box.axes[k].lo, box.axes[k].hi, points[k]));
    }
  }

  std::size_t dim() const noexcept { return ticks_.size(); }
  std::size_t size() const noexcept {
    std::size_t total = 1;
    for (const auto& t : ticks_) total *= t.size();
    return total;
  }
  const std::vector<double>& ticks(std::size_t axis) const { return ticks_[axis]; }

  void point(std::size_t index, std::span<double> out) const {
    for (std::size_t k = ticks_.size(); k-- > 0;) {
      const std::size_t count = ticks_[k].size();
      out[k] = ticks_[k][index % count];
      index /= count;
    }
  }

 private:
  std::vector<std::vector<double>> ticks_;
};

/// Runs body(begin, end, chunk) over [0, count) split into fixed chunks on up
/// to `threads` workers. Chunk boundaries do not depend on the thread count.
inline void parallel_chunks(std::size_t count, std::size_t threads,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& body,
                            std::size_t chunk_size = 256) {
  const std::size_t chunks = (count + chunk_size - 1) / chunk_size;
  auto run = [&](std::size_t worker, std::size_t workers) {
    for (std::size_t c = worker; c < chunks; c += workers) {
      body(c * chunk_size, std::min(count, (c + 1) * chunk_size), c);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, chunks));
  if (threads == 1) {
    run(0, 1);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run, t, threads);
  for (auto& th : pool) th.join();
}

/// Largest |f(x)| over the grid. Max-reduction is exact, so the result is
/// independent of the thread count.
inline double grid_sup(const BoxGrid& grid, const std::function<double(std::span<const double>)>& f,
                       std::size_t threads = 1) {
  const std::size_t chunk = 256;
  std::vector<double> partial((grid.size() + chunk - 1) / chunk, 0.0);
  parallel_chunks(
      grid.size(), threads,
      [&](std::size_t begin, std::size_t end, std::size_t c) {
        std::vector<double> x(grid.dim());
        double best = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
          grid.point(i, x);
          const double value = std::abs(f(x));
          if (!(value <= best)) best = value;  // propagates NaN
        }
        partial[c] = best;
      },
      chunk);
  double best = 0.0;
  for (double p : partial) {
    if (!(p <= best)) best = p;
  }
  return best;
}

}  // namespace icmlp
