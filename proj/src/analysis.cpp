#include "tdhm/analysis.hpp"

#include "tdhm/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <stdexcept>
#include <string>

namespace tdhm {

Eigen::MatrixXi co_occurrence(const GroupedData& g) {
  return g.groups.transpose() * g.groups;
}

Matrix half_weight_index(const GroupedData& g) {
  const int n = g.n();
  const Eigen::MatrixXi co = co_occurrence(g);
  Matrix h = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double denom = co(i, i) + co(j, j);
      h(i, j) = (denom > 0.0) ? 2.0 * co(i, j) / denom : 0.0;
    }
  }
  return h;
}

double jaccard(const BinaryVector& g1, const BinaryVector& g2) {
  if (g1.size() != g2.size()) {
    throw std::invalid_argument("jaccard: length mismatch");
  }
  int inter = 0, uni = 0;
  for (int j = 0; j < g1.size(); ++j) {
    const bool a = g1[j] != 0, b = g2[j] != 0;
    inter += (a && b);
    uni += (a || b);
  }
  if (uni == 0) {
    throw std::invalid_argument("jaccard: both groups are empty");
  }
  return static_cast<double>(inter) / uni;
}

GroupedData preprocess(const RawRecords& raw, PreprocessReport* report) {
  if (raw.events.empty()) {
    throw std::invalid_argument("preprocess: no events");
  }
  const int n_events = static_cast<int>(raw.events.size());
  const int n = static_cast<int>(raw.node_labels.size());
  for (int e = 0; e < n_events; ++e) {
    for (const auto& cand : raw.events[e].candidates) {
      if (cand.size() != n) {
        throw std::invalid_argument("preprocess: candidate width mismatch at event " +
                                    std::to_string(e + 1));
      }
      if (cand.sum() == 0) {
        throw std::invalid_argument("preprocess: empty candidate group at event " +
                                    std::to_string(e + 1));
      }
    }
  }

  std::vector<int> retained(n_events, 0);
  BinaryMatrix kept(n_events, n);
  for (int e = 0; e < n_events; ++e) {
    const auto& cands = raw.events[e].candidates;
    if (cands.empty()) {
      throw std::invalid_argument("preprocess: event " + std::to_string(e + 1) +
                                  " has no candidate groups");
    }
    int best = 0;
    if (e == 0) {
      // No history yet: keep the largest candidate, first listed on ties.
      for (int k = 1; k < static_cast<int>(cands.size()); ++k) {
        if (cands[k].sum() > cands[best].sum()) best = k;
      }
    } else {
      const BinaryVector prev = kept.row(e - 1);
      double best_j = jaccard(cands[0], prev);
      for (int k = 1; k < static_cast<int>(cands.size()); ++k) {
        const double jk = jaccard(cands[k], prev);
        if (jk > best_j || (jk == best_j && cands[k].sum() > cands[best].sum())) {
          best = k;
          best_j = jk;
        }
      }
    }
    retained[e] = best;
    kept.row(e) = cands[best];
  }

  // Drop nodes that never appear in a kept group.
  std::vector<int> keep_cols;
  std::vector<std::string> removed;
  for (int j = 0; j < n; ++j) {
    if (kept.col(j).sum() > 0) {
      keep_cols.push_back(j);
    } else {
      removed.push_back(raw.node_labels[j]);
    }
  }
  BinaryMatrix out(n_events, static_cast<int>(keep_cols.size()));
  std::vector<std::string> labels;
  labels.reserve(keep_cols.size());
  for (std::size_t c = 0; c < keep_cols.size(); ++c) {
    out.col(static_cast<int>(c)) = kept.col(keep_cols[c]);
    labels.push_back(raw.node_labels[keep_cols[c]]);
  }
  std::vector<double> times;
  times.reserve(n_events);
  for (const auto& ev : raw.events) times.push_back(ev.time);

  if (report) {
    report->removed_labels = std::move(removed);
    report->retained_candidate = std::move(retained);
  }
  return GroupedData::create(std::move(out), std::move(labels), std::move(times));
}

double rmse(const Matrix& a_hat, const Matrix& a_true) {
  const int n = static_cast<int>(a_hat.rows());
  if (a_hat.cols() != n || a_true.rows() != n || a_true.cols() != n) {
    throw std::invalid_argument("rmse: shape mismatch");
  }
  if (n < 2) {
    throw std::invalid_argument("rmse: need at least two nodes");
  }
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = a_hat(i, j) - a_true(i, j);
      ss += d * d;
    }
  }
  return std::sqrt(ss / (0.5 * n * (n - 1)));
}

double graph_density(const Matrix& a_hat) {
  const int n = static_cast<int>(a_hat.rows());
  if (a_hat.cols() != n || n < 2) {
    throw std::invalid_argument("graph_density: need a square matrix, n >= 2");
  }
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) s += a_hat(i, j);
  }
  return s / (0.5 * n * (n - 1));
}

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) {
    throw std::invalid_argument("quantile_type7: empty sample");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("quantile_type7: p outside [0,1]");
  }
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - lo) * (values[lo + 1] - values[lo]);
}

BootstrapResult parametric_bootstrap(const FitResult& fit, int T, int B,
                                     double level, const FitConfig& cfg,
                                     std::uint64_t seed, int jobs) {
  if (B < 2) throw std::invalid_argument("parametric_bootstrap: B must be >= 2");
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("parametric_bootstrap: level outside (0,1)");
  }
  if (T < 1) throw std::invalid_argument("parametric_bootstrap: T must be >= 1");
  jobs = std::max(1, jobs);

  struct Replicate {
    bool ok = false;
    double alpha = 0.0, beta = 0.0, gamma = 0.0;
  };
  std::vector<Replicate> reps(B);

  auto run_one = [&](int r) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    Replicate out;
    try {
      auto [s, g] = simulate_trajectory(fit.params, T, rng);
      (void)s;
      const FitResult refit = fit_em(g, cfg);
      out.ok = true;
      out.alpha = refit.params.alpha;
      out.beta = refit.params.beta;
      out.gamma = refit.params.gamma;
    } catch (const std::exception&) {
      out.ok = false;
    }
    return out;
  };

  if (jobs == 1) {
    for (int r = 0; r < B; ++r) reps[r] = run_one(r);
  } else {
    // Replicates land in their own slots, so the result is independent of
    // scheduling.
    std::vector<std::future<void>> workers;
    std::atomic<int> next{0};
    for (int w = 0; w < jobs; ++w) {
      workers.push_back(std::async(std::launch::async, [&]() {
        for (int r = next.fetch_add(1); r < B; r = next.fetch_add(1)) {
          reps[r] = run_one(r);
        }
      }));
    }
    for (auto& f : workers) f.get();
  }

  std::vector<double> alphas, betas, gammas;
  int failures = 0;
  for (const auto& rep : reps) {
    if (!rep.ok) {
      ++failures;
      continue;
    }
    alphas.push_back(rep.alpha);
    betas.push_back(rep.beta);
    gammas.push_back(rep.gamma);
  }
  if (failures * 10 > B) {
    throw std::runtime_error("parametric_bootstrap: more than 10% of replicates failed (" +
                             std::to_string(failures) + "/" + std::to_string(B) + ")");
  }

  BootstrapResult res;
  res.requested = B;
  res.failures = failures;
  res.level = level;
  res.point = {fit.params.alpha, fit.params.beta, fit.params.gamma};
  const int kept = static_cast<int>(alphas.size());
  res.estimates = Matrix(kept, 3);
  for (int r = 0; r < kept; ++r) {
    res.estimates(r, 0) = alphas[r];
    res.estimates(r, 1) = betas[r];
    res.estimates(r, 2) = gammas[r];
  }
  const double p_lo = (1.0 - level) / 2.0;
  const double p_hi = 1.0 - p_lo;
  res.ci_lower = {quantile_type7(alphas, p_lo), quantile_type7(betas, p_lo),
                  quantile_type7(gammas, p_lo)};
  res.ci_upper = {quantile_type7(alphas, p_hi), quantile_type7(betas, p_hi),
                  quantile_type7(gammas, p_hi)};
  return res;
}

}  // namespace tdhm
