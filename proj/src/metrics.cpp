#include "lightrdl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace lightrdl {

double mae(std::span<const double> preds, std::span<const double> labels) {
  if (preds.size() != labels.size()) throw MetricError("mae: length mismatch");
  if (preds.empty()) throw MetricError("mae: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += std::abs(preds[i] - labels[i]);
  return sum / static_cast<double>(preds.size());
}

double rocauc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw MetricError("rocauc: length mismatch");
  std::size_t n_pos = 0;
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw MetricError("rocauc: labels must be 0 or 1");
    if (y == 1.0) ++n_pos;
  }
  for (double s : scores)
    if (!std::isfinite(s)) throw MetricError("rocauc: non-finite score");
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw MetricError("rocauc: undefined for single-class input");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sweep groups of tied scores: each positive beats all negatives seen before its group
  // and ties with the negatives inside it. Counts stay integral (doubled) until the end.
  std::uint64_t twice_wins = 0;
  std::uint64_t neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1.0) ++pos; else ++neg;
      ++j;
    }
    twice_wins += pos * (2 * neg_below + neg);
    neg_below += neg;
    i = j;
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace lightrdl
