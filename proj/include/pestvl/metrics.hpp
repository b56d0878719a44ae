#pragma once

// Classification metrics from a confusion matrix (rows = true class,
// columns = predicted class). Undefined per-class ratios degrade to zero
// with an explanatory warning instead of NaN.

#include "pestvl/types.hpp"

#include <string>
#include <vector>

namespace pestvl::metrics {

struct Report {
  double accuracy = 0.0;
  double macroPrecision = 0.0;
  double macroF1 = 0.0;
  double geometricMean = 0.0;
  double weightedPrecision = 0.0;
  std::vector<std::string> warnings;
};

Matrixd confusion(const std::vector<int>& labels,
                  const std::vector<int>& predictions, int classCount);

Report summarize(const Matrixd& confusion);

// Geometric mean of recall values, zero if any entry is zero.
double geometricMean(const std::vector<double>& recalls);

}  // namespace pestvl::metrics
