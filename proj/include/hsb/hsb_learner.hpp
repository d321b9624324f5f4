#pragma once

// Mixture over every partition-to-arm mapping representable by a
// hierarchical structure, run in time proportional to the number of nodes
// containing the current context.
//
// Per node i the learner keeps log alpha[i][m] (arm weights) and log w[i]
// (total weight of all experts defined under i):
//
//   w_i = sum_m alpha_{m,i} / ((|Phi_i|+1) M)
//       + sum_{phi in Phi_i} prod_{j in phi} w_j / (|Phi_i|+1)
//
// For a context in cell c, gamma[i][m] (weight of experts under i choosing
// m at c) follows the same recursion with, in each group, the member
// holding c contributing gamma instead of w. The arm simplex is
// gamma[root][m] / w[root]. After the draw, the chosen arm's weight is
// discounted by eta * loss / p on every node holding c, and w is recomputed
// bottom-up on exactly those nodes. Everything is kept in natural logs.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "hsb/hierarchy.hpp"
#include "hsb/policy.hpp"
#include "hsb/rng.hpp"

namespace hsb {

// Fault injection for the verification suite. Anything but kExact breaks
// the oracle equivalences on purpose.
enum class RecursionVariant {
  kExact,
  // Every member of a group contributes gamma; members not holding the
  // context use w/M in its place.
  kGammaAllMembers,
  // Omits the 1/(|Phi_i|+1) prior split in both recursions.
  kDropPriorSplit,
};

class HsbLearner final : public ContextualPolicy {
 public:
  HsbLearner(std::shared_ptr<const Structure> structure, std::size_t arms,
             double eta, RecursionVariant variant = RecursionVariant::kExact);

  std::string name() const override { return "hsb"; }
  std::size_t arms() const override { return arms_; }
  double eta() const { return eta_; }
  std::uint64_t rounds() const { return guard_.rounds(); }
  const Structure& structure() const { return *structure_; }

  ArmDecision select(std::span<const double> context, Rng& rng) override;
  ArmDecision select_cell(CellIndex cell, Rng& rng);
  void update(const ArmDecision& decision, double loss) override;

  // Arm simplex at `cell` without drawing or touching the protocol state.
  std::vector<double> simplex(CellIndex cell);
  // log gamma at the root for every arm, for the given cell.
  std::vector<double> log_gamma_root(CellIndex cell);

  double log_w(NodeId node) const { return log_w_[node]; }
  std::span<const double> log_alpha(NodeId node) const {
    return {log_alpha_.data() + std::size_t{node} * arms_, arms_};
  }

  // Instrumentation: (node, arm) gamma evaluations in the last select and
  // nodes rewritten by the last update.
  std::size_t last_select_touches() const { return select_touches_; }
  std::size_t last_update_touches() const { return update_touches_; }

  // Versioned little-endian binary blob; see README for the layout.
  std::vector<std::uint8_t> snapshot() const;
  static HsbLearner restore(std::span<const std::uint8_t> bytes,
                            std::shared_ptr<const Structure> structure);

 private:
  void compute_gamma(CellIndex cell);
  double recompute_log_w(NodeId node) const;
  double prior_split(std::size_t groups) const;

  std::shared_ptr<const Structure> structure_;
  std::size_t arms_;
  double eta_;
  RecursionVariant variant_;
  std::vector<double> log_alpha_;  // node-major, arms_ per node
  std::vector<double> log_w_;
  ProtocolGuard guard_;

  // Per-call scratch.
  ContainmentQuery query_;
  std::vector<NodeId> path_;
  CellIndex path_cell_ = 0;
  std::vector<std::uint32_t> slot_of_;  // node -> row in gamma_
  std::vector<double> gamma_;           // path-major, arms_ per row
  std::vector<std::uint32_t> group_child_slot_;
  std::vector<double> group_sibling_log_w_;
  std::vector<double> terms_;
  std::size_t select_touches_ = 0;
  std::size_t update_touches_ = 0;
};

// Learning rate minimising the regret bound for a horizon of T rounds:
// sqrt(2 psi (A_R+1) ln((H_S+1) M) / (M T)).
double optimal_eta(double psi, double hs, double a_r, std::size_t arms,
                   double horizon);

// psi (A_R+1) ln((H_S+1) M) / eta + M T eta / 2.
double regret_bound(double psi, double hs, double a_r, std::size_t arms,
                    double horizon, double eta);

// Closed form sqrt(psi M T (A_R+1) ln((H_S+1) M) / 2). regret_bound at
// optimal_eta evaluates to exactly twice this value.
double tuned_regret_bound(double psi, double hs, double a_r, std::size_t arms,
                          double horizon);

// optimal_eta for a structure, with A_R evaluated at `regions` (default 2
// when the caller has no estimate).
double structure_eta(const Structure& structure, std::size_t arms,
                     double horizon, std::size_t regions = 2);

}  // namespace hsb
