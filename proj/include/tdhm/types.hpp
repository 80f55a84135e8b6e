#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tdhm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BinaryMatrix = Eigen::MatrixXi;  // entries are 0 or 1
using BinaryVector = Eigen::VectorXi;

// Natural-parameter bound: logistic(30) is within 1e-13 of 1, so clamping
// keeps link probabilities strictly inside (0,1) while allowing effectively
// deterministic links.
inline constexpr double kThetaMax = 30.0;

// Observed data made the forward recursion collapse to an all-zero row.
class ImpossibleDataError : public std::runtime_error {
 public:
  ImpossibleDataError(int t_one_based, const std::string& what)
      : std::runtime_error(what), t_(t_one_based) {}
  // 1-based index of the offending group.
  int t() const { return t_; }

 private:
  int t_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Natural parameters of the temporal-dependent hub model. The diagonal of
// theta is a +infinity sentinel (self-links are certain); off-diagonal
// entries are clamped to [-kThetaMax, kThetaMax]. Immutable by convention
// after create().
struct ModelParams {
  Vector u;      // leader propensities, length n
  Matrix theta;  // symmetric link parameters, n x n
  double alpha = 0.0;  // leader-persistence adjustment
  double beta = 0.0;   // member-stay adjustment
  double gamma = 0.0;  // member-join adjustment
  int n = 0;

  // Validates, mirrors the upper triangle of theta, clamps off-diagonal
  // entries and installs the diagonal sentinel.
  static ModelParams create(Vector u, Matrix theta, double alpha, double beta,
                            double gamma);
};

// Probability-scale view of ModelParams: rho = softmax(u), A/B/C are the
// link matrices with unit diagonals, Phi is the column-stochastic leader
// transition matrix, Phi(i,j) = P(z^t = i | z^{t-1} = j).
struct LinkedProbs {
  Vector rho;
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix Phi;
};

// A time series of observed groups: T x n binary membership matrix.
struct GroupedData {
  BinaryMatrix groups;
  std::vector<std::string> node_labels;
  std::optional<std::vector<double>> timestamps;  // nondecreasing when present

  int T() const { return static_cast<int>(groups.rows()); }
  int n() const { return static_cast<int>(groups.cols()); }

  // Validates 0/1 entries, nonempty rows, label/timestamp sizes. Empty
  // labels are replaced by v1..vn.
  static GroupedData create(BinaryMatrix groups,
                            std::vector<std::string> node_labels = {},
                            std::optional<std::vector<double>> timestamps = std::nullopt);
};

// Latent leader index (0-based) for each group.
struct LeaderSequence {
  std::vector<int> z;

  int T() const { return static_cast<int>(z.size()); }
};

}  // namespace tdhm
