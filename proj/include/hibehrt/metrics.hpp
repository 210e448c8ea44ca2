#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hibehrt/error.hpp"

namespace hibehrt {

// Probability that a random positive outscores a random negative, ties
// counted 1/2 (Mann-Whitney form; equals trapezoidal ROC area).
// Requires at least one sample of each class.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Average precision: mean over positives, ranked by descending score, of
// precision at that rank. Ties in score keep stable input order.
// Requires at least one positive.
double auprc(const std::vector<double>& scores, const std::vector<int>& labels);

struct MetricsReport {
  std::string stratum;
  std::size_t n = 0;
  std::size_t positives = 0;
  double auroc = 0;
  double auprc = 0;
  bool defined = false;     // false when a class is absent in the stratum
  std::string note;         // reason when !defined
};

MetricsReport compute_report(const std::string& stratum, const std::vector<double>& scores,
                             const std::vector<int>& labels);

}  // namespace hibehrt
