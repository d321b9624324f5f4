#include "hsb/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hsb/errors.hpp"
#include "hsb/logmath.hpp"

namespace hsb {

Exp3Params Exp3Params::for_horizon(std::size_t arms, double horizon) {
  if (arms == 0) throw ConfigError("EXP3 needs at least one arm");
  if (!(horizon >= 1.0)) throw DomainError("EXP3 horizon must be >= 1");
  const double m = static_cast<double>(arms);
  Exp3Params p;
  p.gamma = std::min(
      1.0, std::sqrt(m * std::log(m) / ((std::numbers::e - 1.0) * horizon)));
  p.eta = p.gamma / m;
  return p;
}

Exp3State::Exp3State(std::size_t arms, Exp3Params params)
    : params_(params), log_w_(arms, 0.0) {
  if (arms == 0) throw ConfigError("EXP3 needs at least one arm");
  if (!(params_.gamma >= 0.0 && params_.gamma <= 1.0))
    throw DomainError("EXP3 exploration share must lie in [0,1]");
  if (!(params_.eta >= 0.0)) throw DomainError("EXP3 eta must be >= 0");
}

std::vector<double> Exp3State::simplex() const {
  const double total = log_sum_exp(log_w_);
  const double m = static_cast<double>(log_w_.size());
  std::vector<double> p(log_w_.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = (1.0 - params_.gamma) * std::exp(log_w_[i] - total) +
           params_.gamma / m;
  return p;
}

void Exp3State::apply(std::size_t arm, double p_arm, double loss) {
  if (arm >= log_w_.size()) throw DomainError("arm out of range");
  if (!(p_arm > 0.0)) throw DomainError("chosen arm has zero probability");
  check_loss(loss);
  log_w_[arm] -= params_.eta * (loss / p_arm);
  ++updates_;
}

Exp3::Exp3(std::size_t arms, Exp3Params params) : state_(arms, params) {}

ArmDecision Exp3::select(std::span<const double>, Rng& rng) {
  ArmDecision d;
  d.simplex = state_.simplex();
  d.arm = sample_index(d.simplex, rng);
  guard_.begin_select(d);
  return d;
}

void Exp3::update(const ArmDecision& decision, double loss) {
  guard_.begin_update(decision);
  state_.apply(decision.arm, decision.chosen_probability(), loss);
  guard_.finish_update();
}

SExp3::SExp3(CellGrid grid, std::size_t arms, Exp3Params params)
    : grid_(std::move(grid)),
      arms_(arms),
      cells_(grid_.total_cells(), Exp3State(arms, params)) {}

SExp3::SExp3(CellGrid grid, std::size_t arms, double horizon)
    : SExp3(grid, arms,
            Exp3Params::for_horizon(
                arms, std::max(1.0, std::ceil(horizon / static_cast<double>(
                                                            grid.total_cells()))))) {}

ArmDecision SExp3::select(std::span<const double> context, Rng& rng) {
  return select_cell(grid_.quantize(context), rng);
}

ArmDecision SExp3::select_cell(CellIndex cell, Rng& rng) {
  ArmDecision d;
  d.simplex = cells_.at(cell).simplex();
  d.cell = cell;
  d.arm = sample_index(d.simplex, rng);
  guard_.begin_select(d);
  return d;
}

void SExp3::update(const ArmDecision& decision, double loss) {
  guard_.begin_update(decision);
  cells_.at(decision.cell).apply(decision.arm, decision.chosen_probability(),
                                 loss);
  guard_.finish_update();
}

}  // namespace hsb
