#pragma once

// Brute-force expert enumeration and the flat exponential-weights mixture
// over it. This is the reference the hierarchical learner is checked
// against, and with uniform priors over all M^N mappings it doubles as the
// EXP4-style baseline.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "hsb/hierarchy.hpp"
#include "hsb/policy.hpp"

namespace hsb {

// A cell -> arm mapping restricted to one node's region, plus its prior.
struct WeightedExpert {
  double log_prior = 0.0;
  std::vector<std::uint16_t> mapping;  // indexed by position in region cells

  double prior() const;
};

// The expert multiset of one node together with the node's cell list.
struct ExpertSet {
  NodeId node = 0;
  std::vector<CellIndex> cells;  // sorted region cells
  std::vector<WeightedExpert> experts;

  // Position of `cell` in `cells`, or npos when outside the region.
  std::size_t position(CellIndex cell) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

inline constexpr std::size_t kExpertCap = 100000;

// Number of experts under every node (saturating at cap + 1).
std::vector<std::size_t> count_experts(const Structure& structure,
                                       std::size_t arms,
                                       std::size_t cap = kExpertCap);

// Recursively enumerates the experts defined over `node`:
//   * M constant experts, prior 1/((|Phi|+1) M);
//   * per group, the cross product of the members' experts, prior
//     (1/(|Phi|+1)) times the product of member priors, mapping stitched
//     from the members.
// Equal mappings reached through different groups stay separate entries.
// Throws CapacityError when the count exceeds `cap`.
ExpertSet enumerate_weighted_experts(const Structure& structure, NodeId node,
                                     std::size_t arms,
                                     std::size_t cap = kExpertCap);

// One round of estimated losses: the cell and the full estimated-loss
// vector (nonzero only at the chosen arm).
struct EstimatedLossRound {
  CellIndex cell = 0;
  std::vector<double> estimated_loss;
};

// log sum_k prior_k exp(-eta * sum over rounds inside the region of
// estimated_loss[g_k(cell)]).
double log_total_weight(const ExpertSet& set,
                        std::span<const EstimatedLossRound> history,
                        double eta);

// Same, restricted to experts choosing `arm` at `cell` (cell must lie in
// the region).
double log_arm_weight(const ExpertSet& set,
                      std::span<const EstimatedLossRound> history, double eta,
                      CellIndex cell, std::size_t arm);

// Exponentially weighted mixture over a fixed expert set (all experts over
// the root, i.e. over every cell).
class FlatMixture final : public ContextualPolicy {
 public:
  // `experts` must be defined over every cell of `grid`.
  FlatMixture(ExpertSet experts, CellGrid grid, std::size_t arms, double eta);

  // Uniform priors over all M^N cell -> arm mappings (CapacityError above
  // the cap).
  static FlatMixture uniform_all_mappings(const CellGrid& grid,
                                          std::size_t arms, double eta,
                                          std::size_t cap = kExpertCap);

  std::string name() const override { return "exp4-flat"; }
  std::size_t arms() const override { return arms_; }
  double eta() const { return eta_; }
  const ExpertSet& experts() const { return set_; }
  std::span<const double> log_weights() const { return log_weights_; }
  const CellGrid& grid() const { return grid_; }

  // Normalised arm probabilities at `cell`.
  std::vector<double> flat_simplex(CellIndex cell) const;

  // Discounts every expert choosing `arm` at `cell` by eta * loss / p.
  void flat_update(CellIndex cell, std::size_t arm, double p_chosen,
                   double loss);

  ArmDecision select(std::span<const double> context, Rng& rng) override;
  ArmDecision select_cell(CellIndex cell, Rng& rng);
  void update(const ArmDecision& decision, double loss) override;

 private:
  ExpertSet set_;
  std::size_t arms_;
  double eta_;
  CellGrid grid_;
  std::vector<double> log_weights_;
  ProtocolGuard guard_;
};

// CSV dump: header "prior,cell_0,...,cell_{n-1}", one row per expert.
void write_experts_csv(const ExpertSet& set, std::ostream& out);

// Flat mixture over the root experts of a structure.
FlatMixture flat_mixture_for(const Structure& structure, std::size_t arms,
                             double eta, std::size_t cap = kExpertCap);

}  // namespace hsb
