#pragma once

#include "tdhm/types.hpp"

#include <optional>

namespace tdhm {

// Maps natural parameters to probability scale:
//   rho_i   = exp(u_i) / sum_k exp(u_k)
//   A_ij    = logistic(theta_ij),  B_ij = logistic(theta_ij + beta),
//   C_ij    = logistic(theta_ij + gamma), unit diagonals
//   Phi(i,j) = exp(u_i + alpha*[i==j]) / sum_k exp(u_k + alpha*[k==j])
LinkedProbs link_probabilities(const ModelParams& params);

// log P(G^t | z^t = leader, G^{t-1}). Pass g_prev = nullopt for t = 1.
// When the leader was outside the previous group (or there is none) every
// other node joins with A; otherwise previous members stay with B and
// outsiders join with C. Returns -infinity when the leader is not in g_t.
double emission_log_prob(const BinaryVector& g_t,
                         const std::optional<BinaryVector>& g_prev, int leader,
                         const LinkedProbs& probs);

// Joint log P(S, G) of a leader sequence and the observed groups: the
// leader-chain term plus per-step membership terms, with B/C used only when
// the leader belonged to the previous group. Returns -infinity for leader
// sequences that place a leader outside its own group.
double complete_log_likelihood(const LeaderSequence& s, const GroupedData& g,
                               const ModelParams& params);

}  // namespace tdhm
