#include "hibehrt/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace hibehrt {

namespace {

void check_sizes(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeMismatch("metrics: scores/labels length mismatch");
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_sizes(scores, labels);
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) pos += (y != 0);
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw SingleClass();

  // Midrank Mann-Whitney: rank all scores ascending, average within ties.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) rank_sum_pos += midrank;
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(pos) * (static_cast<double>(pos) + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_sizes(scores, labels);
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) pos += (y != 0);
  if (pos == 0) throw NoPositives();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Stable descending sort: equal scores keep input order.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0;
  std::size_t tp = 0;
  for (std::size_t rank = 1; rank <= n; ++rank) {
    if (labels[order[rank - 1]] != 0) {
      ++tp;
      sum += static_cast<double>(tp) / static_cast<double>(rank);
    }
  }
  return sum / static_cast<double>(pos);
}

MetricsReport compute_report(const std::string& stratum, const std::vector<double>& scores,
                             const std::vector<int>& labels) {
  MetricsReport r;
  r.stratum = stratum;
  r.n = scores.size();
  for (int y : labels) r.positives += (y != 0);
  try {
    r.auroc = auroc(scores, labels);
    r.auprc = auprc(scores, labels);
    r.defined = true;
  } catch (const NumericError& e) {
    r.defined = false;
    r.note = e.what();
  }
  return r;
}

}  // namespace hibehrt
