#include "tdhm/model.hpp"

#include "tdhm/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tdhm {

ModelParams ModelParams::create(Vector u, Matrix theta, double alpha,
                                double beta, double gamma) {
  const int n = static_cast<int>(u.size());
  if (n < 1) {
    throw std::invalid_argument("ModelParams: u must be nonempty");
  }
  if (theta.rows() != n || theta.cols() != n) {
    throw std::invalid_argument("ModelParams: theta must be n x n");
  }
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(u[i])) {
      throw std::invalid_argument("ModelParams: non-finite u[" + std::to_string(i) + "]");
    }
  }
  if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma)) {
    throw std::invalid_argument("ModelParams: non-finite adjustment factor");
  }

  ModelParams p;
  p.u = std::move(u);
  p.theta = Matrix(n, n);
  // Upper triangle is authoritative; mirror and clamp. +-inf inputs land on
  // the clamp bounds.
  for (int i = 0; i < n; ++i) {
    p.theta(i, i) = pos_inf();
    for (int j = i + 1; j < n; ++j) {
      double v = theta(i, j);
      if (std::isnan(v)) {
        throw std::invalid_argument("ModelParams: NaN theta(" + std::to_string(i) +
                                    "," + std::to_string(j) + ")");
      }
      v = std::clamp(v, -kThetaMax, kThetaMax);
      p.theta(i, j) = v;
      p.theta(j, i) = v;
    }
  }
  p.alpha = alpha;
  p.beta = beta;
  p.gamma = gamma;
  p.n = n;
  return p;
}

GroupedData GroupedData::create(BinaryMatrix groups,
                                std::vector<std::string> node_labels,
                                std::optional<std::vector<double>> timestamps) {
  const int T = static_cast<int>(groups.rows());
  const int n = static_cast<int>(groups.cols());
  if (T < 1 || n < 1) {
    throw std::invalid_argument("GroupedData: empty matrix");
  }
  for (int t = 0; t < T; ++t) {
    int row_sum = 0;
    for (int j = 0; j < n; ++j) {
      const int v = groups(t, j);
      if (v != 0 && v != 1) {
        throw std::invalid_argument("GroupedData: entry at (" + std::to_string(t) +
                                    "," + std::to_string(j) + ") is not 0/1");
      }
      row_sum += v;
    }
    if (row_sum == 0) {
      throw std::invalid_argument("GroupedData: group " + std::to_string(t + 1) +
                                  " is empty");
    }
  }
  if (node_labels.empty()) {
    node_labels.reserve(n);
    for (int j = 0; j < n; ++j) {
      node_labels.push_back("v" + std::to_string(j + 1));
    }
  } else if (static_cast<int>(node_labels.size()) != n) {
    throw std::invalid_argument("GroupedData: label count does not match columns");
  }
  if (timestamps) {
    if (static_cast<int>(timestamps->size()) != T) {
      throw std::invalid_argument("GroupedData: timestamp count does not match rows");
    }
    for (int t = 1; t < T; ++t) {
      if ((*timestamps)[t] < (*timestamps)[t - 1]) {
        throw std::invalid_argument("GroupedData: timestamps not monotone at row " +
                                    std::to_string(t + 1));
      }
    }
  }

  GroupedData g;
  g.groups = std::move(groups);
  g.node_labels = std::move(node_labels);
  g.timestamps = std::move(timestamps);
  return g;
}

LinkedProbs link_probabilities(const ModelParams& params) {
  const int n = params.n;
  LinkedProbs lp;
  lp.rho = softmax(params.u);

  lp.A = Matrix(n, n);
  lp.B = Matrix(n, n);
  lp.C = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    lp.A(i, i) = 1.0;
    lp.B(i, i) = 1.0;
    lp.C(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double th = params.theta(i, j);
      const double a = logistic(th);
      const double b = logistic(th + params.beta);
      const double c = logistic(th + params.gamma);
      lp.A(i, j) = a;
      lp.A(j, i) = a;
      lp.B(i, j) = b;
      lp.B(j, i) = b;
      lp.C(i, j) = c;
      lp.C(j, i) = c;
    }
  }

  lp.Phi = Matrix(n, n);
  Vector w(n);
  for (int j = 0; j < n; ++j) {
    w = params.u;
    w[j] += params.alpha;
    lp.Phi.col(j) = softmax(w);
  }
  return lp;
}

namespace {

// Sum of log membership factors over j != leader, choosing the stay/leave
// log-probability per entry. Diagonal is skipped so the unit self-link
// never contributes log(0).
double membership_log_prob(const BinaryVector& g_t,
                           const std::optional<BinaryVector>& g_prev,
                           int leader, const LinkedProbs& probs) {
  const int n = static_cast<int>(g_t.size());
  const bool fresh = !g_prev || (*g_prev)[leader] == 0;
  double ll = 0.0;
  for (int j = 0; j < n; ++j) {
    if (j == leader) continue;
    double p;
    if (fresh) {
      p = probs.A(leader, j);
    } else {
      p = ((*g_prev)[j] == 1) ? probs.B(leader, j) : probs.C(leader, j);
    }
    ll += (g_t[j] == 1) ? std::log(p) : std::log1p(-p);
  }
  return ll;
}

}  // namespace

double emission_log_prob(const BinaryVector& g_t,
                         const std::optional<BinaryVector>& g_prev, int leader,
                         const LinkedProbs& probs) {
  const int n = static_cast<int>(probs.rho.size());
  if (g_t.size() != n || (g_prev && g_prev->size() != n)) {
    throw std::invalid_argument("emission_log_prob: dimension mismatch");
  }
  if (leader < 0 || leader >= n) {
    throw std::invalid_argument("emission_log_prob: leader index out of range");
  }
  if (g_t[leader] == 0) {
    return neg_inf();
  }
  return membership_log_prob(g_t, g_prev, leader, probs);
}

double complete_log_likelihood(const LeaderSequence& s, const GroupedData& g,
                               const ModelParams& params) {
  const int T = g.T();
  const int n = g.n();
  if (s.T() != T) {
    throw std::invalid_argument("complete_log_likelihood: S and G disagree on T");
  }
  for (int t = 0; t < T; ++t) {
    if (s.z[t] < 0 || s.z[t] >= n) {
      throw std::invalid_argument("complete_log_likelihood: leader index out of range");
    }
  }
  const LinkedProbs lp = link_probabilities(params);

  // Leader-chain term.
  double ll = std::log(lp.rho[s.z[0]]);
  for (int t = 1; t < T; ++t) {
    ll += std::log(lp.Phi(s.z[t], s.z[t - 1]));
  }

  // Membership terms, including the leader's own unit-diagonal factor: a
  // leader outside its group yields log(1 - 1) = -inf rather than an error.
  for (int t = 0; t < T; ++t) {
    const int i = s.z[t];
    if (g.groups(t, i) == 0) {
      return neg_inf();
    }
    const bool fresh = (t == 0) || g.groups(t - 1, i) == 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double p;
      if (fresh) {
        p = lp.A(i, j);
      } else {
        p = (g.groups(t - 1, j) == 1) ? lp.B(i, j) : lp.C(i, j);
      }
      ll += (g.groups(t, j) == 1) ? std::log(p) : std::log1p(-p);
    }
  }
  return ll;
}

}  // namespace tdhm
