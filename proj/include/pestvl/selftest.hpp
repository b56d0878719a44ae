#pragma once

// Embedded oracle suites runnable from the installed binary (no test
// framework): each suite re-derives its expected values from first
// principles at small sizes and reports the worst observed error.

#include <string>
#include <vector>

namespace pestvl::selftest {

struct SuiteResult {
  std::string name;
  bool passed = false;
  double maxError = 0.0;
  double tolerance = 0.0;
  std::string note;
};

SuiteResult runDft();
SuiteResult runSaliency();
SuiteResult runWkv();
SuiteResult runAttention();
SuiteResult runGradients();

std::vector<SuiteResult> runAll();

}  // namespace pestvl::selftest
