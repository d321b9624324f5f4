#include "hsb/expert_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "hsb/errors.hpp"
#include "hsb/logmath.hpp"

namespace hsb {

double WeightedExpert::prior() const { return std::exp(log_prior); }

std::size_t ExpertSet::position(CellIndex cell) const {
  auto it = std::lower_bound(cells.begin(), cells.end(), cell);
  if (it == cells.end() || *it != cell) return npos;
  return static_cast<std::size_t>(it - cells.begin());
}

std::vector<std::size_t> count_experts(const Structure& s, std::size_t arms,
                                       std::size_t cap) {
  const std::size_t limit = cap + 1;
  std::vector<std::size_t> count(s.size(), 0);
  for (NodeId node : s.bottom_up_order()) {
    std::size_t total = std::min(arms, limit);
    for (std::size_t g = 0; g < s.group_count(node) && total < limit; ++g) {
      std::size_t product = 1;
      for (NodeId j : s.group(node, g)) {
        product = count[j] == 0 ? 0
                  : product > limit / count[j] ? limit
                                               : product * count[j];
      }
      total = std::min(limit, total + product);
    }
    count[node] = total;
  }
  return count;
}

namespace {

class Enumerator {
 public:
  Enumerator(const Structure& s, std::size_t arms) : s_(s), arms_(arms) {}

  const ExpertSet& get(NodeId node) {
    if (auto it = memo_.find(node); it != memo_.end()) return it->second;
    ExpertSet set;
    set.node = node;
    set.cells = s_.region_cells(node);
    const std::size_t groups = s_.group_count(node);
    const double split = std::log(static_cast<double>(groups + 1));
    const double log_m = std::log(static_cast<double>(arms_));

    for (std::size_t m = 0; m < arms_; ++m) {
      WeightedExpert e;
      e.log_prior = -split - log_m;
      e.mapping.assign(set.cells.size(), static_cast<std::uint16_t>(m));
      set.experts.push_back(std::move(e));
    }

    for (std::size_t g = 0; g < groups; ++g) {
      const auto members = s_.group(node, g);
      std::vector<const ExpertSet*> parts;
      for (NodeId j : members) parts.push_back(&get(j));
      // Where each parent cell lives among the members.
      std::vector<std::pair<std::size_t, std::size_t>> source(set.cells.size());
      for (std::size_t p = 0; p < set.cells.size(); ++p) {
        bool found = false;
        for (std::size_t k = 0; k < parts.size() && !found; ++k) {
          const auto pos = parts[k]->position(set.cells[p]);
          if (pos != ExpertSet::npos) {
            source[p] = {k, pos};
            found = true;
          }
        }
        if (!found) throw ConfigError("group does not cover parent region");
      }
      std::vector<std::size_t> pick(parts.size(), 0);
      for (;;) {
        WeightedExpert e;
        e.log_prior = -split;
        for (std::size_t k = 0; k < parts.size(); ++k)
          e.log_prior += parts[k]->experts[pick[k]].log_prior;
        e.mapping.resize(set.cells.size());
        for (std::size_t p = 0; p < set.cells.size(); ++p) {
          const auto [k, pos] = source[p];
          e.mapping[p] = parts[k]->experts[pick[k]].mapping[pos];
        }
        set.experts.push_back(std::move(e));
        std::size_t k = parts.size();
        while (k-- > 0) {
          if (++pick[k] < parts[k]->experts.size()) break;
          pick[k] = 0;
        }
        if (k == static_cast<std::size_t>(-1)) break;
      }
    }
    return memo_.emplace(node, std::move(set)).first->second;
  }

 private:
  const Structure& s_;
  std::size_t arms_;
  std::map<NodeId, ExpertSet> memo_;
};

}  // namespace

ExpertSet enumerate_weighted_experts(const Structure& s, NodeId node,
                                     std::size_t arms, std::size_t cap) {
  if (arms == 0 || arms > 65535) throw ConfigError("unsupported arm count");
  if (node >= s.size()) throw ConfigError("node id out of range");
  const auto counts = count_experts(s, arms, cap);
  if (counts[node] > cap)
    throw CapacityError("node " + std::to_string(node) + " has more than " +
                        std::to_string(cap) + " experts");
  Enumerator e(s, arms);
  return e.get(node);
}

namespace {

// Per-expert cumulative estimated loss over the rounds inside the region.
std::vector<double> cumulative_losses(
    const ExpertSet& set, std::span<const EstimatedLossRound> history) {
  std::vector<double> total(set.experts.size(), 0.0);
  for (const auto& round : history) {
    const auto pos = set.position(round.cell);
    if (pos == ExpertSet::npos) continue;
    for (std::size_t k = 0; k < set.experts.size(); ++k)
      total[k] += round.estimated_loss.at(set.experts[k].mapping[pos]);
  }
  return total;
}

}  // namespace

double log_total_weight(const ExpertSet& set,
                        std::span<const EstimatedLossRound> history,
                        double eta) {
  const auto losses = cumulative_losses(set, history);
  std::vector<double> terms(set.experts.size());
  for (std::size_t k = 0; k < terms.size(); ++k)
    terms[k] = set.experts[k].log_prior - eta * losses[k];
  return log_sum_exp(terms);
}

double log_arm_weight(const ExpertSet& set,
                      std::span<const EstimatedLossRound> history, double eta,
                      CellIndex cell, std::size_t arm) {
  const auto pos = set.position(cell);
  if (pos == ExpertSet::npos) throw DomainError("cell outside the region");
  const auto losses = cumulative_losses(set, history);
  std::vector<double> terms;
  for (std::size_t k = 0; k < set.experts.size(); ++k)
    if (set.experts[k].mapping[pos] == arm)
      terms.push_back(set.experts[k].log_prior - eta * losses[k]);
  return log_sum_exp(terms);
}

void write_experts_csv(const ExpertSet& set, std::ostream& out) {
  out << "prior";
  for (CellIndex c : set.cells) out << ",cell_" << c;
  out << '\n';
  for (const auto& e : set.experts) {
    out << fmt::format("{}", e.prior());
    for (auto arm : e.mapping) out << ',' << arm;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

FlatMixture::FlatMixture(ExpertSet experts, CellGrid grid, std::size_t arms,
                         double eta)
    : set_(std::move(experts)), arms_(arms), eta_(eta), grid_(std::move(grid)) {
  if (arms_ == 0) throw ConfigError("mixture needs at least one arm");
  if (!(eta_ > 0.0)) throw DomainError("learning rate must be positive");
  if (set_.experts.empty()) throw ConfigError("mixture needs experts");
  if (set_.cells.size() != grid_.total_cells())
    throw ConfigError("mixture experts must cover every cell");
  for (std::size_t c = 0; c < set_.cells.size(); ++c)
    if (set_.cells[c] != c)
      throw ConfigError("mixture experts must cover every cell");
  log_weights_.reserve(set_.experts.size());
  for (const auto& e : set_.experts) {
    for (auto a : e.mapping)
      if (a >= arms_) throw ConfigError("expert maps to a nonexistent arm");
    log_weights_.push_back(e.log_prior);
  }
}

FlatMixture FlatMixture::uniform_all_mappings(const CellGrid& grid,
                                              std::size_t arms, double eta,
                                              std::size_t cap) {
  const std::size_t n = grid.total_cells();
  std::size_t count = 1;
  for (std::size_t c = 0; c < n; ++c) {
    if (count > cap / arms)
      throw CapacityError("M^N exceeds the expert cap of " +
                          std::to_string(cap));
    count *= arms;
  }
  ExpertSet set;
  set.node = 0;
  for (std::size_t c = 0; c < n; ++c)
    set.cells.push_back(static_cast<CellIndex>(c));
  const double log_prior = -std::log(static_cast<double>(count));
  for (std::size_t k = 0; k < count; ++k) {
    WeightedExpert e;
    e.log_prior = log_prior;
    e.mapping.resize(n);
    std::size_t rest = k;
    for (std::size_t c = n; c-- > 0;) {
      e.mapping[c] = static_cast<std::uint16_t>(rest % arms);
      rest /= arms;
    }
    set.experts.push_back(std::move(e));
  }
  return FlatMixture(std::move(set), grid, arms, eta);
}

std::vector<double> FlatMixture::flat_simplex(CellIndex cell) const {
  if (cell >= set_.cells.size()) throw DomainError("cell out of range");
  std::vector<double> per_arm(arms_, kNegInf);
  for (std::size_t k = 0; k < log_weights_.size(); ++k) {
    auto& slot = per_arm[set_.experts[k].mapping[cell]];
    slot = log_add(slot, log_weights_[k]);
  }
  const double total = log_sum_exp(per_arm);
  for (double& v : per_arm) v = std::exp(v - total);
  return per_arm;
}

void FlatMixture::flat_update(CellIndex cell, std::size_t arm,
                              double p_chosen, double loss) {
  if (!(p_chosen > 0.0))
    throw DomainError("probability of the chosen arm must be positive");
  check_loss(loss);
  if (cell >= set_.cells.size()) throw DomainError("cell out of range");
  const double discount = eta_ * (loss / p_chosen);
  if (discount == 0.0) return;
  for (std::size_t k = 0; k < log_weights_.size(); ++k)
    if (set_.experts[k].mapping[cell] == arm) log_weights_[k] -= discount;
}

ArmDecision FlatMixture::select(std::span<const double> context, Rng& rng) {
  return select_cell(grid_.quantize(context), rng);
}

ArmDecision FlatMixture::select_cell(CellIndex cell, Rng& rng) {
  ArmDecision d;
  d.simplex = flat_simplex(cell);
  d.cell = cell;
  d.arm = sample_index(d.simplex, rng);
  guard_.begin_select(d);
  return d;
}

void FlatMixture::update(const ArmDecision& decision, double loss) {
  guard_.begin_update(decision);
  flat_update(decision.cell, decision.arm, decision.chosen_probability(),
              loss);
  guard_.finish_update();
}

FlatMixture flat_mixture_for(const Structure& structure, std::size_t arms,
                             double eta, std::size_t cap) {
  return FlatMixture(
      enumerate_weighted_experts(structure, structure.root(), arms, cap),
      structure.grid(), arms, eta);
}

}  // namespace hsb
