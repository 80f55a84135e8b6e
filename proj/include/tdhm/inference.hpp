#pragma once

#include "tdhm/types.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace tdhm {

// Posterior quantities from one E-step. Pairwise transition posteriors are
// aggregated into V on the fly; xi holds the T-1 per-step matrices only when
// materialization was requested (consistency tests, debugging).
struct Posteriors {
  Matrix R;  // T x n, R(t,i) = P(leader at t is i | G); rows sum to 1
  Matrix V;  // n x n, V(i,j) = sum_{t>=2} P(z^t=i, z^{t-1}=j | G)
  std::optional<std::vector<Matrix>> xi;  // xi[t-1](i,j) for t = 2..T
  double log_marginal = 0.0;              // log P(G)
};

struct FbOptions {
  bool materialize_xi = false;
};

// Exact O(T n^2) posterior computation via the scaled three-recursion
// forward-backward algorithm. Throws ImpossibleDataError if a forward
// normalizer vanishes.
Posteriors forward_backward(const GroupedData& g, const ModelParams& params,
                            const FbOptions& opts = {});

// Aggregates consumed by the M-step. The six D matrices partition the
// posterior leader mass by membership regime: d1/d2 count joins/stays-out
// under A (fresh leader), d3/d4 stays/leaves under B, d5/d6 joins/stays-out
// under C.
struct SufficientStats {
  Vector r1;  // leader posterior at t = 1
  Matrix v;   // aggregated pairwise transition posteriors
  Matrix d1, d2, d3, d4, d5, d6;
};

SufficientStats sufficient_stats(const Posteriors& post, const GroupedData& g);

// Expected complete-data log-likelihood of params under the given stats.
double q_value(const ModelParams& params, const SufficientStats& stats);

// One free coordinate of the model: alpha, beta, gamma, u_r, or the
// symmetric pair theta_ij (i < j).
struct ParamSelector {
  enum class Kind { Alpha, Beta, Gamma, U, Theta };
  Kind kind = Kind::Alpha;
  int i = -1;
  int j = -1;

  static ParamSelector alpha() { return {Kind::Alpha, -1, -1}; }
  static ParamSelector beta() { return {Kind::Beta, -1, -1}; }
  static ParamSelector gamma() { return {Kind::Gamma, -1, -1}; }
  static ParamSelector u(int r) { return {Kind::U, r, -1}; }
  static ParamSelector theta(int i, int j) { return {Kind::Theta, i, j}; }
};

struct Derivatives {
  double first = 0.0;
  double second = 0.0;
};

// Analytic dQ/dphi and d^2Q/dphi^2 for the selected coordinate. The second
// derivative is always <= 0 (Q is concave coordinate-wise).
Derivatives q_derivatives(const ParamSelector& sel, const ModelParams& params,
                          const SufficientStats& stats);

struct FitConfig {
  int max_em_iters = 500;
  double em_tol = 1e-7;       // absolute log-marginal improvement threshold
  double mstep_tol = 1e-8;    // Q improvement per coordinate cycle
  int mstep_max_cycles = 100;
  int newton_max_steps = 25;  // Newton iterations per coordinate
  int newton_damping = 20;    // step-halving limit
  bool constrain_independent = false;  // classical hub model: alpha=beta=gamma=0
  double theta_max = kThetaMax;
  // Optional multi-start: each seed perturbs the deterministic initializer
  // by N(0, restart_sd^2) on u and theta; the best final log-marginal wins.
  std::vector<std::uint64_t> restart_seeds;
  double restart_sd = 0.25;

  void validate() const;
};

// Coordinate-ascent M-step: cycles alpha, u_1..u_n, beta, gamma, theta_ij
// (i<j), each coordinate maximized by damped Newton; never decreases Q.
ModelParams m_step(const SufficientStats& stats, const ModelParams& start,
                   const FitConfig& cfg);

// Half-weight-index / appearance-frequency initializer with zero adjustment
// factors.
ModelParams initialize(const GroupedData& g, const FitConfig& cfg);

struct FitResult {
  ModelParams params;
  LinkedProbs linked;
  Posteriors posteriors;
  std::vector<double> loglik_trace;  // log P(G) per EM iteration
  int iterations = 0;
  bool converged = false;
};

// Full EM fit. With cfg.constrain_independent the adjustment factors stay at
// zero and the result is the classical hub model MLE. The second overload
// warm-starts from the given parameters instead of the initializer.
FitResult fit_em(const GroupedData& g, const FitConfig& cfg = {});
FitResult fit_em(const GroupedData& g, const FitConfig& cfg, const ModelParams& init);

// Posterior-mode leaders and the segment partition: a new segment starts
// wherever the decoded leader was not a member of the previous group.
struct DecodedLeaders {
  std::vector<int> leaders;                      // argmax_i R(t,i), ties to lowest i
  std::vector<std::pair<int, int>> segments;     // inclusive 0-based [start, end]
};

DecodedLeaders decode_leaders(const FitResult& result, const GroupedData& g);

}  // namespace tdhm
