#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightrdl/relational_store.hpp"

namespace lightrdl {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mean absolute error. Throws MetricError on empty or mismatched input.
double mae(std::span<const double> preds, std::span<const double> labels);

/// Area under the ROC curve as the Mann-Whitney statistic: (wins + ties / 2) / (n+ n-).
/// Labels must be 0/1 with both classes present.
double rocauc(std::span<const double> scores, std::span<const double> labels);

struct MetricReport {
  std::string metric;
  double value = 0.0;
  std::size_t n = 0;
  std::vector<Timestamp> seed_times;
};

}  // namespace lightrdl
