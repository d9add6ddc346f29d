// Copyright 2026 The cliqueparcel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <vector>

#include "cliqueparcel/clique.hpp"

namespace cliqueparcel::tradeoff {

struct ObjectivePoint {
  clique::CliqueMethod method = clique::CliqueMethod::kSeparate;
  double efficiency_raw = 0.0;
  double faithfulness_raw = 0.0;
  double efficiency_norm = 0.0;
  double faithfulness_norm = 0.0;
  bool normalized = false;
};

// Weight on the larger of the two sorted objectives; 1 - w goes to the
// smaller one.
struct OwaWeights {
  double w = 0.5;
};

// Per-objective min-max scaling across methods. An objective on which every
// method ties maps to 1.0 for all of them.
std::vector<ObjectivePoint> normalize_objectives(std::span<const ObjectivePoint> points);

// Throws kInvalidConfig unless 0 <= w <= 1.
double owa_score(double x, double y, OwaWeights weights);

struct Selection {
  clique::CliqueMethod method = clique::CliqueMethod::kSeparate;
  std::map<clique::CliqueMethod, double> scores;
};

// argmax of the OWA score; ties go to the lexicographically smallest tag.
Selection select_method(std::span<const ObjectivePoint> normalized, OwaWeights weights);

// Inclusive lo:hi:step grid, e.g. 0.0:1.0:0.1 -> 11 weights.
std::vector<double> weight_grid(double lo, double hi, double step);

}  // namespace cliqueparcel::tradeoff
