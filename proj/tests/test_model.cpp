#include "tdhm/model.hpp"

#include "tdhm/numeric.hpp"
#include "tdhm/simulate.hpp"

#include <doctest.h>

#include "oracles.hpp"

#include <cmath>

using namespace tdhm;

namespace {

ModelParams toy_params(int n, double alpha, double beta, double gamma,
                       double theta_off, Vector u = {}) {
  if (u.size() == 0) u = Vector::Zero(n);
  Matrix theta = Matrix::Constant(n, n, theta_off);
  return ModelParams::create(std::move(u), std::move(theta), alpha, beta, gamma);
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("uniform u gives uniform rho") {
  const auto p = toy_params(3, 0.5, 1.0, -1.0, -2.0);
  const LinkedProbs lp = link_probabilities(p);
  for (int i = 0; i < 3; ++i) CHECK(lp.rho[i] == doctest::Approx(1.0 / 3).epsilon(1e-14));
}

TEST_CASE("alpha zero collapses Phi columns to rho") {
  Vector u(4);
  u << 0.3, -1.2, 0.7, 2.0;
  const auto p = toy_params(4, 0.0, 0.0, 0.0, -1.0, u);
  const LinkedProbs lp = link_probabilities(p);
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 4; ++i) {
      CHECK(lp.Phi(i, j) == doctest::Approx(lp.rho[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("B applies the stay adjustment to theta") {
  const auto p = toy_params(2, 0.0, 3.0, 0.0, -2.0);
  const LinkedProbs lp = link_probabilities(p);
  CHECK(lp.B(0, 1) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
}

TEST_CASE("linked probability invariants hold for random parameters") {
  Rng rng = make_rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    SimConfig cfg;
    cfg.n = 6;
    cfg.alpha = (rep % 3 - 1) * 1.5;
    cfg.beta = (rep % 5 - 2) * 1.2;
    cfg.gamma = (rep % 4 - 2) * 0.8;
    const ModelParams p = sample_parameters(cfg, rng);
    const LinkedProbs lp = link_probabilities(p);

    CHECK(std::abs(lp.rho.sum() - 1.0) < 1e-12);
    for (int j = 0; j < cfg.n; ++j) {
      CHECK(std::abs(lp.Phi.col(j).sum() - 1.0) < 1e-12);
    }
    for (int i = 0; i < cfg.n; ++i) {
      CHECK(lp.A(i, i) == 1.0);
      CHECK(lp.B(i, i) == 1.0);
      CHECK(lp.C(i, i) == 1.0);
      for (int j = i + 1; j < cfg.n; ++j) {
        CHECK(lp.A(i, j) == lp.A(j, i));
        // Monotone in the adjustment factors.
        if (cfg.beta >= 0) CHECK(lp.A(i, j) <= lp.B(i, j));
        if (cfg.beta <= 0) CHECK(lp.A(i, j) >= lp.B(i, j));
        if (cfg.gamma <= 0) CHECK(lp.A(i, j) >= lp.C(i, j));
        if (cfg.gamma >= 0) CHECK(lp.A(i, j) <= lp.C(i, j));
      }
    }
  }
}

TEST_CASE("zero adjustments make B and C equal A exactly") {
  Rng rng = make_rng(12);
  SimConfig cfg;
  cfg.n = 5;
  const ModelParams p = sample_parameters(cfg, rng);
  const LinkedProbs lp = link_probabilities(p);
  CHECK((lp.A - lp.B).cwiseAbs().maxCoeff() == 0.0);
  CHECK((lp.A - lp.C).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-finite u is rejected") {
  Vector u(2);
  u << 0.0, pos_inf();
  CHECK_THROWS_AS(ModelParams::create(u, Matrix::Zero(2, 2), 0, 0, 0),
                  std::invalid_argument);
}

TEST_CASE("theta is clamped and the diagonal is the infinity sentinel") {
  Matrix theta(2, 2);
  theta << 0, 100, 100, 0;
  const auto p = ModelParams::create(Vector::Zero(2), theta, 0, 0, 0);
  CHECK(p.theta(0, 1) == kThetaMax);
  CHECK(std::isinf(p.theta(0, 0)));
  CHECK(std::isinf(p.theta(1, 1)));
}

TEST_CASE("emission is -inf when the leader is outside the group") {
  const auto p = toy_params(3, 0, 0, 0, 0.0);
  const LinkedProbs lp = link_probabilities(p);
  BinaryVector g_t(3);
  g_t << 0, 1, 1;
  CHECK(emission_log_prob(g_t, std::nullopt, 0, lp) == neg_inf());
}

TEST_CASE("single off-diagonal Bernoulli factor") {
  const auto p = toy_params(2, 0, 0, 0, 0.0);  // A_12 = 0.5
  const LinkedProbs lp = link_probabilities(p);
  BinaryVector g_t(2);
  g_t << 1, 1;
  CHECK(emission_log_prob(g_t, std::nullopt, 0, lp) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-14));
}

TEST_CASE("in-and-out regime mixes B and C factors") {
  // theta_12 = 0, beta = logit(0.8) makes B_12 = 0.8; theta_13 = logit(0.1),
  // gamma = 0 makes C_13 = 0.1.
  Matrix theta = Matrix::Zero(3, 3);
  theta(0, 2) = logit(0.1);
  theta(2, 0) = theta(0, 2);
  const auto p = ModelParams::create(Vector::Zero(3), theta, 0.0, logit(0.8), 0.0);
  const LinkedProbs lp = link_probabilities(p);
  CHECK(lp.B(0, 1) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(lp.C(0, 2) == doctest::Approx(0.1).epsilon(1e-14));

  BinaryVector g_prev(3), g_t(3);
  g_prev << 1, 1, 0;
  g_t << 1, 0, 1;
  const double expected = std::log(0.2) + std::log(0.1);
  CHECK(emission_log_prob(g_t, g_prev, 0, lp) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("emission rejects dimension mismatches") {
  const auto p = toy_params(3, 0, 0, 0, 0.0);
  const LinkedProbs lp = link_probabilities(p);
  BinaryVector short_g(2);
  short_g << 1, 1;
  CHECK_THROWS_AS(emission_log_prob(short_g, std::nullopt, 0, lp), std::invalid_argument);
  BinaryVector g_t(3);
  g_t << 1, 1, 1;
  CHECK_THROWS_AS(emission_log_prob(g_t, std::nullopt, 5, lp), std::invalid_argument);
}

TEST_CASE("hand-evaluated joint log-likelihood, n=2, T=2") {
  const auto p = toy_params(2, 0, 0, 0, 0.0);
  BinaryMatrix g(2, 2);
  g << 1, 1, 1, 0;
  const GroupedData data = GroupedData::create(g);
  const LeaderSequence s{{0, 0}};
  CHECK(complete_log_likelihood(s, data, p) ==
        doctest::Approx(-4.0 * std::log(2.0)).epsilon(1e-13));
}

TEST_CASE("leader outside its group gives -inf, not an error") {
  const auto p = toy_params(2, 0, 0, 0, 0.0);
  BinaryMatrix g(1, 2);
  g << 0, 1;
  const GroupedData data = GroupedData::create(g);
  CHECK(complete_log_likelihood(LeaderSequence{{0}}, data, p) == neg_inf());
}

TEST_CASE("T=1 reduces to the classical hub likelihood") {
  Rng rng = make_rng(21);
  SimConfig cfg;
  cfg.n = 4;
  cfg.T = 1;
  cfg.beta = 2.0;
  cfg.gamma = -1.0;
  const ModelParams p = sample_parameters(cfg, rng);
  const LinkedProbs lp = link_probabilities(p);
  auto [s, data] = simulate_trajectory(p, 1, rng);

  for (int i = 0; i < cfg.n; ++i) {
    if (data.groups(0, i) == 0) continue;
    double expected = std::log(lp.rho[i]);
    for (int j = 0; j < cfg.n; ++j) {
      if (j == i) continue;
      expected += data.groups(0, j) ? std::log(lp.A(i, j)) : std::log1p(-lp.A(i, j));
    }
    CHECK(complete_log_likelihood(LeaderSequence{{i}}, data, p) ==
          doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("joint log-likelihood factors into transition and emission terms") {
  Rng rng = make_rng(22);
  for (int rep = 0; rep < 25; ++rep) {
    SimConfig cfg;
    cfg.n = 5;
    cfg.T = 8;
    cfg.alpha = 1.0;
    cfg.beta = 2.0;
    cfg.gamma = -0.7;
    const ModelParams p = sample_parameters(cfg, rng);
    auto [s, data] = simulate_trajectory(p, cfg.T, rng);
    const LinkedProbs lp = link_probabilities(p);

    double factored = std::log(lp.rho[s.z[0]]);
    for (int t = 1; t < cfg.T; ++t) factored += std::log(lp.Phi(s.z[t], s.z[t - 1]));
    for (int t = 0; t < cfg.T; ++t) {
      const BinaryVector g_t = data.groups.row(t);
      std::optional<BinaryVector> g_prev;
      if (t > 0) g_prev = BinaryVector(data.groups.row(t - 1));
      factored += emission_log_prob(g_t, g_prev, s.z[t], lp);
    }
    CHECK(std::abs(complete_log_likelihood(s, data, p) - factored) < 1e-12);
  }
}

TEST_CASE("shift invariance of rho, Phi and the joint likelihood") {
  Rng rng = make_rng(23);
  SimConfig cfg;
  cfg.n = 4;
  cfg.T = 6;
  cfg.alpha = 0.8;
  cfg.beta = 1.5;
  cfg.gamma = -0.5;
  const ModelParams p = sample_parameters(cfg, rng);
  auto [s, data] = simulate_trajectory(p, cfg.T, rng);

  for (const double delta : {-3.0, 0.73, 12.0}) {
    Matrix theta_copy = p.theta;
    const ModelParams shifted = ModelParams::create(
        p.u.array() + delta, std::move(theta_copy), p.alpha, p.beta, p.gamma);
    const LinkedProbs lp0 = link_probabilities(p);
    const LinkedProbs lp1 = link_probabilities(shifted);
    CHECK((lp0.rho - lp1.rho).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((lp0.Phi - lp1.Phi).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(complete_log_likelihood(s, data, p) -
                   complete_log_likelihood(s, data, shifted)) < 1e-10);
  }
}

TEST_CASE("joint distribution over all sequences and matrices is normalized") {
  const int n = 2, T = 2;
  Vector u(2);
  u << 0.4, -0.3;
  Matrix theta(2, 2);
  theta << 0, -0.8, -0.8, 0;
  const auto params = ModelParams::create(u, theta, 0.9, 1.4, -0.6);

  double total = 0.0;
  for (int z0 = 0; z0 < n; ++z0) {
    for (int z1 = 0; z1 < n; ++z1) {
      for (int mask = 0; mask < (1 << (n * T)); ++mask) {
        BinaryMatrix g(T, n);
        for (int t = 0; t < T; ++t) {
          for (int j = 0; j < n; ++j) g(t, j) = (mask >> (t * n + j)) & 1;
        }
        // Rows with no members have zero probability; skip instead of
        // constructing invalid data.
        if (g.row(0).sum() == 0 || g.row(1).sum() == 0) continue;
        const GroupedData data = GroupedData::create(g);
        const double ll =
            complete_log_likelihood(LeaderSequence{{z0, z1}}, data, params);
        if (std::isfinite(ll)) total += std::exp(ll);
      }
    }
  }
  CHECK(std::abs(total - 1.0) < 1e-10);
}

TEST_CASE("grouped data validation") {
  BinaryMatrix g(2, 2);
  g << 1, 0, 0, 0;
  CHECK_THROWS_AS(GroupedData::create(g), std::invalid_argument);
  g << 1, 2, 0, 1;
  CHECK_THROWS_AS(GroupedData::create(g), std::invalid_argument);
  g << 1, 0, 0, 1;
  const GroupedData ok = GroupedData::create(g);
  CHECK(ok.node_labels == std::vector<std::string>{"v1", "v2"});
  CHECK_THROWS_AS(GroupedData::create(g, {}, std::vector<double>{2.0, 1.0}),
                  std::invalid_argument);
}

}  // TEST_SUITE
