#pragma once

// Non-hierarchical competitors: EXP3 on losses with uniform exploration
// mixing, and S-EXP3, an independent EXP3 per quantization cell.

#include <cstddef>
#include <span>
#include <vector>

#include "hsb/hierarchy.hpp"
#include "hsb/policy.hpp"
#include "hsb/rng.hpp"

namespace hsb {

struct Exp3Params {
  double gamma = 0.0;  // uniform exploration share
  double eta = 0.0;    // learning rate on importance-weighted losses

  // gamma = min(1, sqrt(M ln M / ((e-1) T))), eta = gamma / M.
  static Exp3Params for_horizon(std::size_t arms, double horizon);
};

// p = (1 - gamma) w / sum(w) + gamma / M; after the draw the chosen arm's
// log weight drops by eta * loss / p.
class Exp3State {
 public:
  Exp3State(std::size_t arms, Exp3Params params);

  std::size_t arms() const { return log_w_.size(); }
  const Exp3Params& params() const { return params_; }
  std::span<const double> log_weights() const { return log_w_; }
  std::uint64_t updates() const { return updates_; }

  std::vector<double> simplex() const;
  void apply(std::size_t arm, double p_arm, double loss);

 private:
  Exp3Params params_;
  std::vector<double> log_w_;
  std::uint64_t updates_ = 0;
};

class Exp3 final : public ContextualPolicy {
 public:
  Exp3(std::size_t arms, Exp3Params params);
  Exp3(std::size_t arms, double horizon)
      : Exp3(arms, Exp3Params::for_horizon(arms, horizon)) {}

  std::string name() const override { return "exp3"; }
  std::size_t arms() const override { return state_.arms(); }
  const Exp3State& state() const { return state_; }

  // The context is ignored; decisions report cell 0.
  ArmDecision select(std::span<const double> context, Rng& rng) override;
  void update(const ArmDecision& decision, double loss) override;

 private:
  Exp3State state_;
  ProtocolGuard guard_;
};

// One EXP3 per cell of the grid. All cells share the caller's generator.
class SExp3 final : public ContextualPolicy {
 public:
  SExp3(CellGrid grid, std::size_t arms, Exp3Params params);
  // Each cell is tuned for ceil(T / N) rounds, its expected share of the
  // horizon under uniformly spread contexts.
  SExp3(CellGrid grid, std::size_t arms, double horizon);

  std::string name() const override { return "sexp3"; }
  std::size_t arms() const override { return arms_; }
  const CellGrid& grid() const { return grid_; }
  const Exp3State& cell_state(CellIndex cell) const { return cells_.at(cell); }

  ArmDecision select(std::span<const double> context, Rng& rng) override;
  ArmDecision select_cell(CellIndex cell, Rng& rng);
  void update(const ArmDecision& decision, double loss) override;

 private:
  CellGrid grid_;
  std::size_t arms_;
  std::vector<Exp3State> cells_;
  ProtocolGuard guard_;
};

}  // namespace hsb
