// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#include "cliqueparcel/tradeoff.hpp"

#include <algorithm>
#include <cmath>

#include "cliqueparcel/error.hpp"

namespace cliqueparcel::tradeoff {
namespace {

template <typename Get, typename Set>
void min_max(std::vector<ObjectivePoint>& pts, Get get, Set set) {
  auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(),
                                      [&](const ObjectivePoint& a, const ObjectivePoint& b) { return get(a) < get(b); });
  const double min = get(*lo);
  const double range = get(*hi) - min;
  for (auto& p : pts) set(p, range > 0.0 ? (get(p) - min) / range : 1.0);
}

}  // namespace

std::vector<ObjectivePoint> normalize_objectives(std::span<const ObjectivePoint> points) {
  std::vector<ObjectivePoint> out(points.begin(), points.end());
  if (out.empty()) return out;
  min_max(
      out, [](const ObjectivePoint& p) { return p.efficiency_raw; },
      [](ObjectivePoint& p, double v) { p.efficiency_norm = v; });
  min_max(
      out, [](const ObjectivePoint& p) { return p.faithfulness_raw; },
      [](ObjectivePoint& p, double v) { p.faithfulness_norm = v; });
  for (auto& p : out) p.normalized = true;
  return out;
}

double owa_score(double x, double y, OwaWeights weights) {
  if (!(weights.w >= 0.0 && weights.w <= 1.0)) throw Error(Errc::kInvalidConfig, "OWA weight must lie in [0, 1]");
  const double hi = std::max(x, y);
  const double lo = std::min(x, y);
  return weights.w * hi + (1.0 - weights.w) * lo;
}

Selection select_method(std::span<const ObjectivePoint> normalized, OwaWeights weights) {
  if (normalized.empty()) throw Error(Errc::kInvalidConfig, "no methods to select from");
  Selection sel;
  bool first = true;
  double best = 0.0;
  for (const auto& p : normalized) {
    const double s = owa_score(p.efficiency_norm, p.faithfulness_norm, weights);
    sel.scores[p.method] = s;
    if (first || s > best ||
        (s == best && clique::method_tag(p.method) < clique::method_tag(sel.method))) {
      best = s;
      sel.method = p.method;
      first = false;
    }
  }
  return sel;
}

std::vector<double> weight_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo || lo < 0.0 || hi > 1.0) {
    throw Error(Errc::kInvalidConfig, "OWA weight grid must satisfy 0 <= lo <= hi <= 1 and step > 0");
  }
  std::vector<double> grid;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) {
    // Round to 12 decimals so 0.1 steps print as 0.3, not 0.30000000000000004.
    grid.push_back(std::round((lo + step * static_cast<double>(i)) * 1e12) / 1e12);
  }
  return grid;
}

}  // namespace cliqueparcel::tradeoff
