#include "hsb/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <fmt/format.h>

#include "hsb/errors.hpp"
#include "hsb/hsb_learner.hpp"

namespace hsb {

BestMapping best_mapping_loss(std::span<const FullInfoRound> history,
                              const CellGrid& grid) {
  if (history.empty()) throw DomainError("best mapping of an empty history");
  const std::size_t arms = history[0].losses.size();
  if (arms == 0) throw ShapeError("rounds carry no losses");
  std::vector<double> totals(grid.total_cells() * arms, 0.0);
  for (const auto& r : history) {
    if (r.losses.size() != arms) throw ShapeError("ragged loss vectors");
    const auto cell = grid.quantize(r.context);
    for (std::size_t m = 0; m < arms; ++m)
      totals[std::size_t{cell} * arms + m] += r.losses[m];
  }
  BestMapping best;
  best.mapping.resize(grid.total_cells());
  for (std::size_t c = 0; c < grid.total_cells(); ++c) {
    const auto* row = totals.data() + c * arms;
    const auto arm = static_cast<std::size_t>(
        std::min_element(row, row + arms) - row);
    best.mapping[c] = arm;
    best.loss += row[arm];
  }
  return best;
}

RegretReport make_regret_report(std::span<const double> incurred,
                                std::span<const FullInfoRound> history,
                                const CellGrid& grid, double bound) {
  if (incurred.size() != history.size())
    throw ShapeError("incurred losses and history differ in length");
  RegretReport r;
  r.curve.reserve(incurred.size());
  for (std::size_t t = 0; t < incurred.size(); ++t) {
    r.algorithm_loss += incurred[t];
    r.curve.push_back(r.algorithm_loss / static_cast<double>(t + 1));
  }
  r.best_mapping_loss = best_mapping_loss(history, grid).loss;
  r.regret = r.algorithm_loss - r.best_mapping_loss;
  r.bound = bound;
  return r;
}

BoundCheck check_regret_bound(double mean_regret, double psi, double hs,
                              double a_r, std::size_t arms,
                              std::size_t horizon, double eta) {
  BoundCheck c;
  c.mean_regret = mean_regret;
  if (horizon == 0) {
    c.bound = 0.0;
    c.margin = -mean_regret;
    c.pass = true;
    return c;
  }
  c.bound = regret_bound(psi, hs, a_r, arms, static_cast<double>(horizon), eta);
  c.margin = c.bound - mean_regret;
  c.pass = mean_regret <= c.bound;
  return c;
}

double mixture_regret_bound(double log_inv_prior, double eta, std::size_t arms,
                            std::size_t horizon) {
  if (!(eta > 0.0)) throw DomainError("eta must be positive");
  return log_inv_prior / eta +
         static_cast<double>(arms) * static_cast<double>(horizon) * eta / 2.0;
}

std::vector<double> expert_cumulative_losses(
    const ExpertSet& set, std::span<const FullInfoRound> history,
    const CellGrid& grid) {
  std::vector<double> out(set.experts.size(), 0.0);
  for (const auto& r : history) {
    const auto pos = set.position(grid.quantize(r.context));
    if (pos == ExpertSet::npos) continue;
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] += r.losses.at(set.experts[k].mapping[pos]);
  }
  return out;
}

std::vector<QuantizationGapReport> quantization_gap(
    const LipschitzFamily& family, std::span<const std::size_t> cell_counts,
    std::size_t points) {
  const std::size_t n = family.dims;
  if (n == 0 || family.arms == 0 || !family.loss)
    throw ConfigError("incomplete Lipschitz family");
  if (points == 0) points = std::size_t{1} << (20 / n);
  std::size_t total = 1;
  for (std::size_t d = 0; d < n; ++d) {
    if (total > (std::size_t{1} << 26) / points)
      throw ConfigError("integration grid too large");
    total *= points;
  }

  // Loss values at every midpoint, and the pointwise-optimal average.
  std::vector<double> values(total * family.arms);
  std::vector<std::size_t> idx(n, 0);
  std::vector<double> x(n);
  double pointwise = 0.0;
  for (std::size_t p = 0; p < total; ++p) {
    for (std::size_t d = 0; d < n; ++d)
      x[d] = (static_cast<double>(idx[d]) + 0.5) / static_cast<double>(points);
    double best = 0.0;
    for (std::size_t m = 0; m < family.arms; ++m) {
      const double v = family.loss(m, x);
      values[p * family.arms + m] = v;
      best = m == 0 ? v : std::min(best, v);
    }
    pointwise += best;
    for (std::size_t d = n; d-- > 0;) {
      if (++idx[d] < points) break;
      idx[d] = 0;
    }
  }
  pointwise /= static_cast<double>(total);

  std::vector<QuantizationGapReport> out;
  for (std::size_t cells : cell_counts) {
    const CellGrid grid = CellGrid::uniform(n, cells);
    for (std::size_t s : grid.splits())
      if (points % s != 0)
        throw ConfigError("integration points must be a multiple of every "
                          "split count");
    std::vector<double> sums(cells * family.arms, 0.0);
    std::fill(idx.begin(), idx.end(), 0);
    std::vector<std::size_t> coords(n);
    for (std::size_t p = 0; p < total; ++p) {
      for (std::size_t d = 0; d < n; ++d)
        coords[d] = idx[d] * grid.splits()[d] / points;
      const std::size_t cell = grid.cell_at(coords);
      for (std::size_t m = 0; m < family.arms; ++m)
        sums[cell * family.arms + m] += values[p * family.arms + m];
      for (std::size_t d = n; d-- > 0;) {
        if (++idx[d] < points) break;
        idx[d] = 0;
      }
    }
    double mapped = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      const auto* row = sums.data() + c * family.arms;
      mapped += *std::min_element(row, row + family.arms);
    }
    mapped /= static_cast<double>(total);

    QuantizationGapReport r;
    r.cells = cells;
    r.dims = n;
    r.lipschitz = family.lipschitz;
    r.gap = mapped - pointwise;
    r.bound = 2.0 * family.lipschitz * std::sqrt(static_cast<double>(n)) /
              std::pow(static_cast<double>(cells), 1.0 / static_cast<double>(n));
    out.push_back(r);
  }
  return out;
}

LipschitzFamily sinusoidal_family() {
  LipschitzFamily f;
  f.dims = 1;
  f.arms = SinusoidalBernoulliEnv::kArms;
  // |d/ds| is pi for the first two arms and 1 for the third.
  f.lipschitz = std::numbers::pi;
  f.loss = [](std::size_t arm, std::span<const double> x) {
    return SinusoidalBernoulliEnv::mean_losses(x[0], false)[arm];
  };
  return f;
}

std::vector<double> aggregate_runs(
    std::span<const std::vector<double>> runs) {
  if (runs.empty()) return {};
  const std::size_t len = runs[0].size();
  for (const auto& r : runs)
    if (r.size() != len) throw ShapeError("runs differ in length");
  std::vector<double> curve(len, 0.0);
  for (const auto& r : runs) {
    double cum = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      cum += r[t];
      curve[t] += cum / static_cast<double>(t + 1);
    }
  }
  for (double& v : curve) v /= static_cast<double>(runs.size());
  return curve;
}

void write_round_records(std::span<const RoundRecord> records,
                         std::size_t arms, std::ostream& out) {
  out << "t,cell,arm,loss";
  for (std::size_t m = 0; m < arms; ++m) out << ",p_" << m + 1;
  out << '\n';
  for (const auto& r : records) {
    out << fmt::format("{},{},{},{}", r.t, r.cell, r.arm, r.loss);
    for (double p : r.simplex) out << fmt::format(",{}", p);
    out << '\n';
  }
}

}  // namespace hsb
