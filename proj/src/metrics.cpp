#include "pestvl/metrics.hpp"
#include "pestvl/errors.hpp"


#include <cmath>

namespace pestvl::metrics {

Matrixd confusion(const std::vector<int>& labels,
                  const std::vector<int>& predictions, int classCount) {
  if (labels.size() != predictions.size()) {
    throw DataError("confusion: one prediction per label required");
  }
  Matrixd m = Matrixd::Zero(classCount, classCount);
  for (size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || y >= classCount || p < 0 || p >= classCount) {
      throw DataError("confusion: class index out of range");
    }
    m(y, p) += 1.0;
  }
  return m;
}

double geometricMean(const std::vector<double>& recalls) {
  if (recalls.empty()) return 0.0;
  double product = 1.0;
  for (double r : recalls) {
    if (r <= 0.0) return 0.0;
    product *= r;
  }
  return std::pow(product, 1.0 / double(recalls.size()));
}

Report summarize(const Matrixd& m) {
  if (m.rows() != m.cols() || m.rows() < 1 || m.minCoeff() < 0.0) {
    throw DataError("summarize: square nonnegative matrix required");
  }
  const Index K = m.rows();
  const double total = m.sum();
  if (total <= 0.0) {
    throw DataError("summarize: empty confusion matrix");
  }

  Report rep;
  rep.accuracy = m.trace() / total;

  std::vector<double> presentRecalls;
  double precisionSum = 0.0, f1Sum = 0.0, weightedSum = 0.0;
  for (Index c = 0; c < K; ++c) {
    const double tp = m(c, c);
    const double support = m.row(c).sum();
    const double predicted = m.col(c).sum();

    double precision = 0.0;
    if (predicted > 0.0) {
      precision = tp / predicted;
    } else {
      rep.warnings.push_back("class " + std::to_string(c) +
                             " never predicted; precision counted as 0");
    }
    const double recall = support > 0.0 ? tp / support : 0.0;
    const double f1 = (precision + recall) > 0.0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    precisionSum += precision;
    f1Sum += f1;
    weightedSum += (support / total) * precision;
    if (support > 0.0) {
      presentRecalls.push_back(recall);
    } else {
      rep.warnings.push_back("class " + std::to_string(c) +
                             " absent from labels; excluded from GM");
    }
  }
  rep.macroPrecision = precisionSum / double(K);
  rep.macroF1 = f1Sum / double(K);
  rep.weightedPrecision = weightedSum;
  rep.geometricMean = geometricMean(presentRecalls);
  return rep;
}

}  // namespace pestvl::metrics
