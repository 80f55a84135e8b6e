#include "tdhm/simulate.hpp"

#include "tdhm/model.hpp"
#include "tdhm/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace tdhm {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 applied to master + golden-ratio stride per index.
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void SimConfig::validate() const {
  if (n < 2) throw std::invalid_argument("SimConfig: n must be >= 2");
  if (T < 1) throw std::invalid_argument("SimConfig: T must be >= 1");
  if (!(u_sd > 0.0) || !(theta_sd > 0.0)) {
    throw std::invalid_argument("SimConfig: sd parameters must be > 0");
  }
}

ModelParams sample_parameters(const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  std::normal_distribution<double> u_dist(cfg.u_mean, cfg.u_sd);
  std::normal_distribution<double> theta_dist(cfg.theta_mean, cfg.theta_sd);

  Vector u(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    u[i] = u_dist(rng);
  }
  Matrix theta = Matrix::Zero(cfg.n, cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    for (int j = i + 1; j < cfg.n; ++j) {
      theta(i, j) = theta_dist(rng);
    }
  }
  return ModelParams::create(std::move(u), std::move(theta), cfg.alpha, cfg.beta,
                             cfg.gamma);
}

namespace {

// Inverse-CDF draw from a probability column; falls back to the last index
// against rounding in the cumulative sum.
int sample_index(const Eigen::Ref<const Vector>& probs, double uniform01) {
  double acc = 0.0;
  const int n = static_cast<int>(probs.size());
  for (int i = 0; i < n; ++i) {
    acc += probs[i];
    if (uniform01 < acc) return i;
  }
  return n - 1;
}

}  // namespace

std::pair<LeaderSequence, GroupedData> simulate_trajectory(const ModelParams& params,
                                                           int T, Rng& rng) {
  if (T < 1) throw std::invalid_argument("simulate_trajectory: T must be >= 1");
  const int n = params.n;
  const LinkedProbs lp = link_probabilities(params);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  LeaderSequence s;
  s.z.resize(T);
  BinaryMatrix g(T, n);

  for (int t = 0; t < T; ++t) {
    const int leader = (t == 0) ? sample_index(lp.rho, unif(rng))
                                : sample_index(lp.Phi.col(s.z[t - 1]), unif(rng));
    s.z[t] = leader;
    const bool fresh = (t == 0) || g(t - 1, leader) == 0;
    for (int j = 0; j < n; ++j) {
      double p;
      if (fresh) {
        p = lp.A(leader, j);
      } else {
        p = (g(t - 1, j) == 1) ? lp.B(leader, j) : lp.C(leader, j);
      }
      g(t, j) = (unif(rng) < p) ? 1 : 0;
    }
  }
  return {std::move(s), GroupedData::create(std::move(g))};
}

}  // namespace tdhm
