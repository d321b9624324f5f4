#pragma once

// Regret oracles, bound checks, quantization-gap measurement and curve
// aggregation.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "hsb/environments.hpp"
#include "hsb/expert_oracle.hpp"
#include "hsb/hierarchy.hpp"
#include "hsb/policy.hpp"

namespace hsb {

struct BestMapping {
  double loss = 0.0;
  std::vector<std::size_t> mapping;  // arm per cell
};

// Best assignment of arms to cells in hindsight. Cells decouple, so each
// cell independently takes the arm with the least cumulative loss (ties to
// the lowest arm). DomainError on an empty history.
BestMapping best_mapping_loss(std::span<const FullInfoRound> history,
                              const CellGrid& grid);

struct RegretReport {
  double algorithm_loss = 0.0;
  double best_mapping_loss = 0.0;
  double regret = 0.0;
  double bound = 0.0;
  std::vector<double> curve;  // running average of the incurred loss
};

RegretReport make_regret_report(std::span<const double> incurred,
                                std::span<const FullInfoRound> history,
                                const CellGrid& grid, double bound);

struct BoundCheck {
  bool pass = false;
  double bound = 0.0;
  double mean_regret = 0.0;
  double margin = 0.0;  // bound - mean_regret
};

// Compares a mean empirical regret with
//   psi (A_R+1) ln((H_S+1) M) / eta + M T eta / 2.
// T = 0 is a vacuous pass with bound 0.
BoundCheck check_regret_bound(double mean_regret, double psi, double hs,
                              double a_r, std::size_t arms,
                              std::size_t horizon, double eta);

// ln(1/beta) / eta + M T eta / 2 for an expert with normalised prior beta.
double mixture_regret_bound(double log_inv_prior, double eta,
                            std::size_t arms, std::size_t horizon);

// Cumulative true loss of every expert of a root expert set.
std::vector<double> expert_cumulative_losses(
    const ExpertSet& set, std::span<const FullInfoRound> history,
    const CellGrid& grid);

// Deterministic per-arm loss functions on [0,1]^n, Lipschitz with constant
// `lipschitz`.
struct LipschitzFamily {
  std::size_t dims = 1;
  std::size_t arms = 1;
  double lipschitz = 0.0;
  std::function<double(std::size_t arm, std::span<const double> x)> loss;
};

struct QuantizationGapReport {
  std::size_t cells = 0;  // N
  std::size_t dims = 0;   // n
  double lipschitz = 0.0;
  double gap = 0.0;
  double bound = 0.0;  // 2 c sqrt(n) / N^(1/n)
};

// For each N: (average loss of the best cell -> arm mapping) minus (average
// of the pointwise minimum), both on a tensor midpoint grid with `points`
// per dimension. `points` must be a multiple of every split count; 0
// selects 2^20 for n = 1 and 2^10 for n = 2 (2^(20/n) in general).
std::vector<QuantizationGapReport> quantization_gap(
    const LipschitzFamily& family, std::span<const std::size_t> cell_counts,
    std::size_t points = 0);

// Mean losses of the stationary sinusoidal model with c = pi.
LipschitzFamily sinusoidal_family();

// Per-round mean over runs of (cumulative loss / t). ShapeError when the
// runs differ in length.
std::vector<double> aggregate_runs(
    std::span<const std::vector<double>> per_round_losses);

// "t,cell,arm,loss,p_1,...,p_M" with t 1-based and cell/arm 0-based.
void write_round_records(std::span<const RoundRecord> records,
                         std::size_t arms, std::ostream& out);

}  // namespace hsb
