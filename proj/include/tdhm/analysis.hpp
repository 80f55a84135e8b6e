#pragma once

#include "tdhm/inference.hpp"
#include "tdhm/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tdhm {

// Count of joint appearances per node pair; diagonal holds appearance counts.
Eigen::MatrixXi co_occurrence(const GroupedData& g);

// H_ij = 2 * co-occurrences / (appearances_i + appearances_j), the standard
// association index; pairs of never-appearing nodes are defined as 0.
Matrix half_weight_index(const GroupedData& g);

// Intersection over union of two groups. Throws if both are empty.
double jaccard(const BinaryVector& g1, const BinaryVector& g2);

// One observation event: a time tag and one or more simultaneously recorded
// candidate groups.
struct RawEvent {
  double time = 0.0;
  std::vector<BinaryVector> candidates;
};

struct RawRecords {
  std::vector<RawEvent> events;
  std::vector<std::string> node_labels;
};

struct PreprocessReport {
  std::vector<std::string> removed_labels;   // nodes absent from every kept group
  std::vector<int> retained_candidate;       // chosen candidate index per event
};

// Resolves simultaneous observations by keeping the candidate with the
// largest Jaccard overlap against the previously kept group (first event:
// the largest candidate); ties go to the larger group, then first listed.
// Never-appearing nodes are dropped from the output.
GroupedData preprocess(const RawRecords& raw, PreprocessReport* report = nullptr);

// Root mean squared error over the n(n-1)/2 off-diagonal pairs i < j.
double rmse(const Matrix& a_hat, const Matrix& a_true);

// Mean off-diagonal link probability (weighted graph density).
double graph_density(const Matrix& a_hat);

struct BootstrapResult {
  Matrix estimates;        // completed replicates x 3 (alpha, beta, gamma)
  Eigen::Vector3d point;   // estimates from the original fit
  Eigen::Vector3d ci_lower;
  Eigen::Vector3d ci_upper;
  double level = 0.95;
  int requested = 0;
  int failures = 0;
};

// Parametric bootstrap: resimulates length-T data from the fitted model,
// refits each replicate, and reports percentile confidence intervals
// (interpolated type-7 quantiles) for the adjustment factors. Replicates use
// independent seed-derived streams; jobs > 1 runs them concurrently with
// results identical to the sequential order. Failed refits are excluded;
// more than 10% failures is an error.
BootstrapResult parametric_bootstrap(const FitResult& fit, int T, int B,
                                     double level, const FitConfig& cfg,
                                     std::uint64_t seed, int jobs = 1);

// Linear-interpolation (type-7) empirical quantile of a sample.
double quantile_type7(std::vector<double> values, double p);

}  // namespace tdhm
