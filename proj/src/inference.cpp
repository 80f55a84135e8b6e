#include "tdhm/inference.hpp"

#include "tdhm/analysis.hpp"
#include "tdhm/model.hpp"
#include "tdhm/numeric.hpp"
#include "tdhm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tdhm {

namespace {

// Log-scale link tables with zeroed diagonals, so sums over all j never pick
// up the log(0) of a unit self-link; leader membership is enforced
// separately.
struct EmissionTables {
  Matrix log_a, log_1ma;
  Matrix log_b, log_1mb;
  Matrix log_c, log_1mc;
};

EmissionTables make_tables(const ModelParams& params) {
  const int n = params.n;
  EmissionTables t;
  t.log_a = Matrix::Zero(n, n);
  t.log_1ma = Matrix::Zero(n, n);
  t.log_b = Matrix::Zero(n, n);
  t.log_1mb = Matrix::Zero(n, n);
  t.log_c = Matrix::Zero(n, n);
  t.log_1mc = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double th = params.theta(i, j);
      const double la = log_logistic(th), l1a = log_logistic(-th);
      const double lb = log_logistic(th + params.beta),
                   l1b = log_logistic(-th - params.beta);
      const double lc = log_logistic(th + params.gamma),
                   l1c = log_logistic(-th - params.gamma);
      t.log_a(i, j) = t.log_a(j, i) = la;
      t.log_1ma(i, j) = t.log_1ma(j, i) = l1a;
      t.log_b(i, j) = t.log_b(j, i) = lb;
      t.log_1mb(i, j) = t.log_1mb(j, i) = l1b;
      t.log_c(i, j) = t.log_c(j, i) = lc;
      t.log_1mc(i, j) = t.log_1mc(j, i) = l1c;
    }
  }
  return t;
}

std::vector<std::vector<int>> member_lists(const GroupedData& g) {
  std::vector<std::vector<int>> members(g.T());
  for (int t = 0; t < g.T(); ++t) {
    for (int j = 0; j < g.n(); ++j) {
      if (g.groups(t, j) == 1) members[t].push_back(j);
    }
  }
  return members;
}

// log P(G^t | z^t = i, G^{t-1}) for every candidate leader i in G^t;
// -infinity elsewhere. Row sums over the link tables are reduced to member
// sums via precomputed full-row baselines.
Matrix emission_log_table(const GroupedData& g, const EmissionTables& tab,
                          const std::vector<std::vector<int>>& members) {
  const int T = g.T();
  const int n = g.n();

  const Vector base_a = tab.log_1ma.rowwise().sum();
  const Vector base_c = tab.log_1mc.rowwise().sum();
  const Matrix delta_a = tab.log_a - tab.log_1ma;
  const Matrix delta_b = tab.log_b - tab.log_1mb;
  const Matrix delta_c = tab.log_c - tab.log_1mc;
  const Matrix delta_bc = tab.log_1mb - tab.log_1mc;

  Matrix log_e = Matrix::Constant(T, n, neg_inf());
  for (int t = 0; t < T; ++t) {
    for (int i : members[t]) {
      const bool fresh = (t == 0) || g.groups(t - 1, i) == 0;
      double ll;
      if (fresh) {
        ll = base_a[i];
        for (int j : members[t]) ll += delta_a(i, j);
      } else {
        ll = base_c[i];
        for (int j : members[t - 1]) ll += delta_bc(i, j);
        for (int j : members[t]) {
          ll += (g.groups(t - 1, j) == 1) ? delta_b(i, j) : delta_c(i, j);
        }
      }
      log_e(t, i) = ll;
    }
  }
  return log_e;
}

[[noreturn]] void throw_impossible(int t_zero_based) {
  const int t = t_zero_based + 1;
  throw ImpossibleDataError(
      t, "forward normalizer vanished at t = " + std::to_string(t) +
             ": data impossible under these parameters");
}

}  // namespace

Posteriors forward_backward(const GroupedData& g, const ModelParams& params,
                            const FbOptions& opts) {
  const int T = g.T();
  const int n = g.n();
  if (params.n != n) {
    throw std::invalid_argument("forward_backward: params/data size mismatch");
  }
  const LinkedProbs lp = link_probabilities(params);
  const EmissionTables tab = make_tables(params);
  const auto members = member_lists(g);
  const Matrix log_e = emission_log_table(g, tab, members);

  // Per-row max of the emission table; exp(log_e - shift) stays in (0, 1].
  Vector shift(T);
  for (int t = 0; t < T; ++t) {
    shift[t] = log_e.row(t).maxCoeff();
    if (!std::isfinite(shift[t])) throw_impossible(t);
  }

  Posteriors post;
  post.R = Matrix::Zero(T, n);
  post.V = Matrix::Zero(n, n);
  if (opts.materialize_xi) {
    post.xi.emplace(std::max(0, T - 1), Matrix::Zero(n, n));
  }

  // Forward pass: rows renormalized to sum to one; log P(G) accumulates the
  // normalizers.
  Matrix a = Matrix::Zero(T, n);
  double log_marginal = 0.0;
  {
    double s = 0.0;
    for (int i : members[0]) {
      const double v = lp.rho[i] * std::exp(log_e(0, i) - shift[0]);
      a(0, i) = v;
      s += v;
    }
    if (!(s > 0.0)) throw_impossible(0);
    a.row(0) /= s;
    log_marginal += std::log(s) + shift[0];
  }
  for (int t = 1; t < T; ++t) {
    double s = 0.0;
    for (int i : members[t]) {
      double pred = 0.0;
      for (int k : members[t - 1]) pred += lp.Phi(i, k) * a(t - 1, k);
      const double v = pred * std::exp(log_e(t, i) - shift[t]);
      a(t, i) = v;
      s += v;
    }
    if (!(s > 0.0)) throw_impossible(t);
    a.row(t) /= s;
    log_marginal += std::log(s) + shift[t];
  }
  post.log_marginal = log_marginal;

  // Backward pass for single marginals: R(t,.) ~ a(t,.) .* b(t,.) with b
  // renormalized each step. b at T is uniform, so R(T,.) = a(T,.).
  {
    Vector b = Vector::Constant(n, 1.0 / n);
    post.R.row(T - 1) = a.row(T - 1);
    for (int t = T - 2; t >= 0; --t) {
      Vector w = Vector::Zero(n);
      for (int k : members[t + 1]) {
        w[k] = b[k] * std::exp(log_e(t + 1, k) - shift[t + 1]);
      }
      Vector b_next = Vector::Zero(n);
      double bs = 0.0;
      for (int i : members[t]) {
        double acc = 0.0;
        for (int k : members[t + 1]) acc += lp.Phi(k, i) * w[k];
        b_next[i] = acc;
        bs += acc;
      }
      if (!(bs > 0.0)) throw_impossible(t);
      b = b_next / bs;

      double rs = 0.0;
      for (int i : members[t]) {
        const double v = a(t, i) * b[i];
        post.R(t, i) = v;
        rs += v;
      }
      if (!(rs > 0.0)) throw_impossible(t);
      post.R.row(t) /= rs;
    }
  }

  // Third recursion: c_i^t = P(G^{t:T} | z^t = i, G^{t-1}) up to scale,
  // computed down to t = 2; its first row is never needed. Pairwise
  // posteriors xi[t](i,j) ~ a(t-1,j) Phi(i,j) c(t,i) are aggregated into V.
  if (T >= 2) {
    Vector c = Vector::Zero(n);
    {
      double cs = 0.0;
      for (int i : members[T - 1]) {
        c[i] = std::exp(log_e(T - 1, i) - shift[T - 1]);
        cs += c[i];
      }
      c /= cs;
    }
    for (int t = T - 1; t >= 1; --t) {
      double total = 0.0;
      for (int i : members[t]) {
        for (int j : members[t - 1]) {
          total += a(t - 1, j) * lp.Phi(i, j) * c[i];
        }
      }
      if (!(total > 0.0)) throw_impossible(t);
      for (int i : members[t]) {
        for (int j : members[t - 1]) {
          const double x = a(t - 1, j) * lp.Phi(i, j) * c[i] / total;
          post.V(i, j) += x;
          if (post.xi) (*post.xi)[t - 1](i, j) = x;
        }
      }
      if (t >= 2) {
        Vector c_next = Vector::Zero(n);
        double cs = 0.0;
        for (int i : members[t - 1]) {
          double acc = 0.0;
          for (int k : members[t]) acc += lp.Phi(k, i) * c[k];
          c_next[i] = acc * std::exp(log_e(t - 1, i) - shift[t - 1]);
          cs += c_next[i];
        }
        if (!(cs > 0.0)) throw_impossible(t - 1);
        c = c_next / cs;
      }
    }
  }
  return post;
}

SufficientStats sufficient_stats(const Posteriors& post, const GroupedData& g) {
  const int T = g.T();
  const int n = g.n();
  if (post.R.rows() != T || post.R.cols() != n) {
    throw std::invalid_argument("sufficient_stats: posterior/data size mismatch");
  }
  SufficientStats st;
  st.r1 = post.R.row(0);
  st.v = post.V;
  st.d1 = Matrix::Zero(n, n);
  st.d2 = Matrix::Zero(n, n);
  st.d3 = Matrix::Zero(n, n);
  st.d4 = Matrix::Zero(n, n);
  st.d5 = Matrix::Zero(n, n);
  st.d6 = Matrix::Zero(n, n);

  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < n; ++i) {
      const double r = post.R(t, i);
      if (r == 0.0) continue;
      const bool fresh = (t == 0) || g.groups(t - 1, i) == 0;
      if (fresh) {
        for (int j = 0; j < n; ++j) {
          (g.groups(t, j) == 1 ? st.d1 : st.d2)(i, j) += r;
        }
      } else {
        for (int j = 0; j < n; ++j) {
          if (g.groups(t - 1, j) == 1) {
            (g.groups(t, j) == 1 ? st.d3 : st.d4)(i, j) += r;
          } else {
            (g.groups(t, j) == 1 ? st.d5 : st.d6)(i, j) += r;
          }
        }
      }
    }
  }
  return st;
}

namespace {

// Chain block of Q: sum_i r1_i log rho_i + sum_ij v_ij log Phi_ij, written
// with explicit log-sum-exp normalizers. Kept general in sum(r1) so the
// finite-difference oracle holds for arbitrary nonnegative stats.
double chain_q(const Vector& u, double alpha, const SufficientStats& st) {
  const int n = static_cast<int>(u.size());
  const double lse_u = log_sum_exp(u);
  double q = st.r1.dot(u) - st.r1.sum() * lse_u;

  const Vector v_row = st.v.rowwise().sum();
  q += v_row.dot(u);
  Vector w(n);
  for (int j = 0; j < n; ++j) {
    const double vc = st.v.col(j).sum();
    q += alpha * st.v(j, j);
    if (vc == 0.0) continue;
    w = u;
    w[j] += alpha;
    q -= vc * log_sum_exp(w);
  }
  return q;
}

// Membership block of Q for one unordered pair, with s* = D*_ij + D*_ji.
double pair_q(double theta, double beta, double gamma, double s1, double s2,
              double s3, double s4, double s5, double s6) {
  double q = 0.0;
  if (s1 != 0.0) q += s1 * log_logistic(theta);
  if (s2 != 0.0) q += s2 * log_logistic(-theta);
  if (s3 != 0.0) q += s3 * log_logistic(theta + beta);
  if (s4 != 0.0) q += s4 * log_logistic(-theta - beta);
  if (s5 != 0.0) q += s5 * log_logistic(theta + gamma);
  if (s6 != 0.0) q += s6 * log_logistic(-theta - gamma);
  return q;
}

struct PairStats {
  Matrix s1, s2, s3, s4, s5, s6;  // D + D^T

  explicit PairStats(const SufficientStats& st)
      : s1(st.d1 + st.d1.transpose()),
        s2(st.d2 + st.d2.transpose()),
        s3(st.d3 + st.d3.transpose()),
        s4(st.d4 + st.d4.transpose()),
        s5(st.d5 + st.d5.transpose()),
        s6(st.d6 + st.d6.transpose()) {}
};

double emission_q(const Matrix& theta, double beta, double gamma,
                  const PairStats& ps) {
  const int n = static_cast<int>(theta.rows());
  double q = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      q += pair_q(theta(i, j), beta, gamma, ps.s1(i, j), ps.s2(i, j), ps.s3(i, j),
                  ps.s4(i, j), ps.s5(i, j), ps.s6(i, j));
    }
  }
  return q;
}

}  // namespace

double q_value(const ModelParams& params, const SufficientStats& stats) {
  const PairStats ps(stats);
  return chain_q(params.u, params.alpha, stats) +
         emission_q(params.theta, params.beta, params.gamma, ps);
}

namespace {

Derivatives alpha_derivatives(const Vector& u, double alpha,
                              const SufficientStats& st) {
  const int n = static_cast<int>(u.size());
  Derivatives d;
  Vector w(n);
  for (int j = 0; j < n; ++j) {
    const double vc = st.v.col(j).sum();
    if (vc == 0.0 && st.v(j, j) == 0.0) continue;
    w = u;
    w[j] += alpha;
    const double phi_jj = std::exp(u[j] + alpha - log_sum_exp(w));
    d.first += st.v(j, j) - vc * phi_jj;
    d.second -= vc * phi_jj * (1.0 - phi_jj);
  }
  return d;
}

Derivatives u_derivatives(int r, const Vector& u, double alpha,
                          const SufficientStats& st) {
  const int n = static_cast<int>(u.size());
  const double sum_r1 = st.r1.sum();
  const double rho_r = std::exp(u[r] - log_sum_exp(u));
  Derivatives d;
  d.first = st.r1[r] - sum_r1 * rho_r;
  d.second = -sum_r1 * rho_r * (1.0 - rho_r);
  Vector w(n);
  for (int j = 0; j < n; ++j) {
    const double vc = st.v.col(j).sum();
    if (vc == 0.0 && st.v(r, j) == 0.0) continue;
    w = u;
    w[j] += alpha;
    const double phi_rj = std::exp(u[r] + (r == j ? alpha : 0.0) - log_sum_exp(w));
    d.first += st.v(r, j) - vc * phi_rj;
    d.second -= vc * phi_rj * (1.0 - phi_rj);
  }
  return d;
}

Derivatives beta_derivatives(const Matrix& theta, double beta,
                             const PairStats& ps) {
  const int n = static_cast<int>(theta.rows());
  Derivatives d;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double s3 = ps.s3(i, j), s4 = ps.s4(i, j);
      if (s3 == 0.0 && s4 == 0.0) continue;
      const double b = logistic(theta(i, j) + beta);
      d.first += s3 * (1.0 - b) - s4 * b;
      d.second -= (s3 + s4) * b * (1.0 - b);
    }
  }
  return d;
}

Derivatives gamma_derivatives(const Matrix& theta, double gamma,
                              const PairStats& ps) {
  const int n = static_cast<int>(theta.rows());
  Derivatives d;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double s5 = ps.s5(i, j), s6 = ps.s6(i, j);
      if (s5 == 0.0 && s6 == 0.0) continue;
      const double c = logistic(theta(i, j) + gamma);
      d.first += s5 * (1.0 - c) - s6 * c;
      d.second -= (s5 + s6) * c * (1.0 - c);
    }
  }
  return d;
}

Derivatives theta_derivatives(int i, int j, double theta_ij, double beta,
                              double gamma, const PairStats& ps) {
  const double s1 = ps.s1(i, j), s2 = ps.s2(i, j), s3 = ps.s3(i, j),
               s4 = ps.s4(i, j), s5 = ps.s5(i, j), s6 = ps.s6(i, j);
  const double a = logistic(theta_ij);
  const double b = logistic(theta_ij + beta);
  const double c = logistic(theta_ij + gamma);
  Derivatives d;
  d.first = s1 * (1.0 - a) - s2 * a + s3 * (1.0 - b) - s4 * b + s5 * (1.0 - c) -
            s6 * c;
  d.second = -(s1 + s2) * a * (1.0 - a) - (s3 + s4) * b * (1.0 - b) -
             (s5 + s6) * c * (1.0 - c);
  return d;
}

}  // namespace

Derivatives q_derivatives(const ParamSelector& sel, const ModelParams& params,
                          const SufficientStats& stats) {
  const int n = params.n;
  switch (sel.kind) {
    case ParamSelector::Kind::Alpha:
      return alpha_derivatives(params.u, params.alpha, stats);
    case ParamSelector::Kind::Beta:
      return beta_derivatives(params.theta, params.beta, PairStats(stats));
    case ParamSelector::Kind::Gamma:
      return gamma_derivatives(params.theta, params.gamma, PairStats(stats));
    case ParamSelector::Kind::U:
      if (sel.i < 0 || sel.i >= n) {
        throw std::out_of_range("q_derivatives: u index out of range");
      }
      return u_derivatives(sel.i, params.u, params.alpha, stats);
    case ParamSelector::Kind::Theta:
      if (sel.i < 0 || sel.j <= sel.i || sel.j >= n) {
        throw std::out_of_range("q_derivatives: theta selector requires 0 <= i < j < n");
      }
      return theta_derivatives(sel.i, sel.j, params.theta(sel.i, sel.j),
                               params.beta, params.gamma, PairStats(stats));
  }
  throw std::invalid_argument("q_derivatives: bad selector");
}

void FitConfig::validate() const {
  if (max_em_iters < 1 || mstep_max_cycles < 1 || newton_max_steps < 1 ||
      newton_damping < 0) {
    throw std::invalid_argument("FitConfig: iteration limits must be positive");
  }
  if (!(em_tol > 0.0) || !(mstep_tol > 0.0) || !(theta_max > 0.0)) {
    throw std::invalid_argument("FitConfig: tolerances must be > 0");
  }
  if (!(restart_sd > 0.0)) {
    throw std::invalid_argument("FitConfig: restart_sd must be > 0");
  }
}

namespace {

// Damped Newton ascent of a concave 1-D slice of Q. Candidate steps are
// halved until the objective does not decrease; the box [lo, hi] clamps the
// coordinate. Returns the maximizing value.
template <typename Objective, typename Deriv>
double maximize_coordinate(double x0, Objective&& f, Deriv&& deriv,
                           const FitConfig& cfg, double lo, double hi,
                           const char* name) {
  double x = x0;
  double fx = f(x);
  if (!std::isfinite(fx)) {
    throw std::runtime_error(std::string("m_step: non-finite Q while updating ") +
                             name);
  }
  for (int step = 0; step < cfg.newton_max_steps; ++step) {
    const Derivatives d = deriv(x);
    if (d.second == 0.0) break;  // structurally constant coordinate
    if (std::abs(d.first) < 1e-12 * (1.0 + std::abs(d.second))) break;
    double delta = -d.first / d.second;
    if (!std::isfinite(delta)) {
      throw std::runtime_error(std::string("m_step: non-finite step for ") + name);
    }
    bool accepted = false;
    double xc = x, fc = fx;
    for (int halving = 0; halving <= cfg.newton_damping; ++halving) {
      xc = std::clamp(x + delta, lo, hi);
      if (xc == x) break;
      fc = f(xc);
      if (std::isfinite(fc) && fc >= fx) {
        accepted = true;
        break;
      }
      delta *= 0.5;
    }
    if (!accepted) break;
    const double moved = std::abs(xc - x);
    x = xc;
    fx = fc;
    if (moved < 1e-14 * (1.0 + std::abs(x))) break;
  }
  return x;
}

}  // namespace

ModelParams m_step(const SufficientStats& stats, const ModelParams& start,
                   const FitConfig& cfg) {
  cfg.validate();
  const int n = start.n;
  const PairStats ps(stats);

  Vector u = start.u;
  Matrix theta = start.theta;  // diagonal sentinel untouched
  double alpha = start.alpha;
  double beta = start.beta;
  double gamma = start.gamma;

  const double no_bound = pos_inf();
  double q_prev = chain_q(u, alpha, stats) + emission_q(theta, beta, gamma, ps);

  // Largest gradient over coordinates that are free to move (skips clamped
  // theta entries pushing outward and structurally constant coordinates).
  auto max_free_gradient = [&]() {
    double g = 0.0;
    if (!cfg.constrain_independent) {
      g = std::max(g, std::abs(alpha_derivatives(u, alpha, stats).first));
      g = std::max(g, std::abs(beta_derivatives(theta, beta, ps).first));
      g = std::max(g, std::abs(gamma_derivatives(theta, gamma, ps).first));
    }
    for (int r = 0; r < n; ++r) {
      const Derivatives d = u_derivatives(r, u, alpha, stats);
      if (d.second != 0.0) g = std::max(g, std::abs(d.first));
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const Derivatives d = theta_derivatives(i, j, theta(i, j), beta, gamma, ps);
        if (d.second == 0.0) continue;
        if (theta(i, j) >= cfg.theta_max && d.first > 0.0) continue;
        if (theta(i, j) <= -cfg.theta_max && d.first < 0.0) continue;
        g = std::max(g, std::abs(d.first));
      }
    }
    return g;
  };

  // Coordinate updates interact, so a cycle whose Q gain is below mstep_tol
  // can still leave visible gradients; polish with further cycles until the
  // gradient is small or stops shrinking (the float plateau).
  double prev_grad = pos_inf();

  for (int cycle = 0; cycle < cfg.mstep_max_cycles; ++cycle) {
    if (!cfg.constrain_independent) {
      alpha = maximize_coordinate(
          alpha, [&](double a) { return chain_q(u, a, stats); },
          [&](double a) { return alpha_derivatives(u, a, stats); }, cfg,
          -no_bound, no_bound, "alpha");
    }
    for (int r = 0; r < n; ++r) {
      u[r] = maximize_coordinate(
          u[r],
          [&](double x) {
            const double saved = u[r];
            u[r] = x;
            const double q = chain_q(u, alpha, stats);
            u[r] = saved;
            return q;
          },
          [&](double x) {
            const double saved = u[r];
            u[r] = x;
            const Derivatives d = u_derivatives(r, u, alpha, stats);
            u[r] = saved;
            return d;
          },
          cfg, -no_bound, no_bound, "u");
    }
    if (!cfg.constrain_independent) {
      beta = maximize_coordinate(
          beta, [&](double b) { return emission_q(theta, b, gamma, ps); },
          [&](double b) { return beta_derivatives(theta, b, ps); }, cfg,
          -no_bound, no_bound, "beta");
      gamma = maximize_coordinate(
          gamma, [&](double c) { return emission_q(theta, beta, c, ps); },
          [&](double c) { return gamma_derivatives(theta, c, ps); }, cfg,
          -no_bound, no_bound, "gamma");
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double th = maximize_coordinate(
            theta(i, j),
            [&](double x) {
              return pair_q(x, beta, gamma, ps.s1(i, j), ps.s2(i, j), ps.s3(i, j),
                            ps.s4(i, j), ps.s5(i, j), ps.s6(i, j));
            },
            [&](double x) {
              return theta_derivatives(i, j, x, beta, gamma, ps);
            },
            cfg, -cfg.theta_max, cfg.theta_max, "theta");
        theta(i, j) = th;
        theta(j, i) = th;
      }
    }

    const double q_now = chain_q(u, alpha, stats) + emission_q(theta, beta, gamma, ps);
    if (!std::isfinite(q_now)) {
      throw std::runtime_error("m_step: non-finite Q after coordinate cycle");
    }
    if (q_now - q_prev < cfg.mstep_tol) {
      const double grad = max_free_gradient();
      if (grad <= 1e-6 || grad >= 0.7 * prev_grad) break;
      prev_grad = grad;
    }
    q_prev = q_now;
  }
  return ModelParams::create(std::move(u), std::move(theta), alpha, beta, gamma);
}

ModelParams initialize(const GroupedData& g, const FitConfig& cfg) {
  cfg.validate();
  const int T = g.T();
  const int n = g.n();

  // rho^0 from appearance frequencies; never-appearing nodes get the floor
  // 1/(2T). Mean-centering fixes the shift degree of freedom.
  Vector u(n);
  const double eps = 1.0 / (2.0 * T);
  for (int i = 0; i < n; ++i) {
    double freq = 0.0;
    for (int t = 0; t < T; ++t) freq += g.groups(t, i);
    freq /= T;
    u[i] = std::log(std::max(freq, eps));
  }
  u.array() -= u.mean();

  const Matrix h = half_weight_index(g);
  Matrix theta = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      theta(i, j) = std::clamp(logit(h(i, j)), -cfg.theta_max, cfg.theta_max);
    }
  }
  return ModelParams::create(std::move(u), std::move(theta), 0.0, 0.0, 0.0);
}

namespace {

FitResult run_em(const GroupedData& g, ModelParams params, const FitConfig& cfg) {
  FitResult res;
  res.loglik_trace.reserve(cfg.max_em_iters);
  std::optional<Posteriors> final_post;
  double prev_ll = neg_inf();
  int m_steps = 0;

  for (int iter = 0; iter < cfg.max_em_iters; ++iter) {
    Posteriors post = forward_backward(g, params);
    res.loglik_trace.push_back(post.log_marginal);
    if (iter > 0 && post.log_marginal - prev_ll < cfg.em_tol) {
      res.converged = true;
      final_post = std::move(post);
      break;
    }
    prev_ll = post.log_marginal;
    const SufficientStats stats = sufficient_stats(post, g);
    params = m_step(stats, params, cfg);
    ++m_steps;
  }
  if (!final_post) {
    // Budget exhausted after an M-step: report posteriors at the returned
    // parameters.
    final_post = forward_backward(g, params);
    res.loglik_trace.push_back(final_post->log_marginal);
  }
  res.params = std::move(params);
  res.linked = link_probabilities(res.params);
  res.posteriors = std::move(*final_post);
  res.iterations = m_steps;
  return res;
}

}  // namespace

FitResult fit_em(const GroupedData& g, const FitConfig& cfg) {
  return fit_em(g, cfg, initialize(g, cfg));
}

FitResult fit_em(const GroupedData& g, const FitConfig& cfg, const ModelParams& init) {
  cfg.validate();
  const ModelParams& base = init;
  FitResult best = run_em(g, base, cfg);

  for (std::size_t k = 0; k < cfg.restart_seeds.size(); ++k) {
    Rng rng = make_rng(cfg.restart_seeds[k]);
    std::normal_distribution<double> noise(0.0, cfg.restart_sd);
    Vector u = base.u;
    Matrix theta = base.theta;
    for (int i = 0; i < base.n; ++i) u[i] += noise(rng);
    for (int i = 0; i < base.n; ++i) {
      for (int j = i + 1; j < base.n; ++j) {
        const double v = theta(i, j) + noise(rng);
        theta(i, j) = v;
        theta(j, i) = v;
      }
    }
    ModelParams perturbed = ModelParams::create(std::move(u), std::move(theta),
                                                base.alpha, base.beta, base.gamma);
    FitResult candidate = run_em(g, std::move(perturbed), cfg);
    if (candidate.posteriors.log_marginal > best.posteriors.log_marginal) {
      best = std::move(candidate);
    }
  }
  return best;
}

DecodedLeaders decode_leaders(const FitResult& result, const GroupedData& g) {
  const int T = g.T();
  const int n = g.n();
  if (result.posteriors.R.rows() != T || result.posteriors.R.cols() != n) {
    throw std::invalid_argument("decode_leaders: result does not match data");
  }
  DecodedLeaders out;
  out.leaders.resize(T);
  for (int t = 0; t < T; ++t) {
    int best = 0;
    double best_p = result.posteriors.R(t, 0);
    for (int i = 1; i < n; ++i) {
      if (result.posteriors.R(t, i) > best_p) {
        best_p = result.posteriors.R(t, i);
        best = i;
      }
    }
    out.leaders[t] = best;
  }
  int seg_start = 0;
  for (int t = 1; t < T; ++t) {
    if (g.groups(t - 1, out.leaders[t]) == 0) {
      out.segments.emplace_back(seg_start, t - 1);
      seg_start = t;
    }
  }
  out.segments.emplace_back(seg_start, T - 1);
  return out;
}

}  // namespace tdhm
