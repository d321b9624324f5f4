#include "hsb/verify.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hsb/errors.hpp"
#include "hsb/evaluation.hpp"
#include "hsb/expert_oracle.hpp"
#include "hsb/logmath.hpp"
#include "hsb/rng.hpp"

namespace hsb {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::shared_ptr<const Structure> share(Structure s) {
  return std::make_shared<const Structure>(std::move(s));
}

// Incremental brute force: every node keeps its enumerated experts and
// their cumulative estimated losses.
class EnumeratedWeights {
 public:
  EnumeratedWeights(const Structure& s, std::size_t arms, double eta)
      : eta_(eta) {
    for (NodeId i = 0; i < s.size(); ++i) {
      sets_.push_back(enumerate_weighted_experts(s, i, arms));
      cum_.emplace_back(sets_.back().experts.size(), 0.0);
    }
  }

  void observe(CellIndex cell, std::size_t arm, double estimated_loss) {
    for (std::size_t i = 0; i < sets_.size(); ++i) {
      const auto pos = sets_[i].position(cell);
      if (pos == ExpertSet::npos) continue;
      const auto& experts = sets_[i].experts;
      for (std::size_t k = 0; k < experts.size(); ++k)
        if (experts[k].mapping[pos] == arm) cum_[i][k] += estimated_loss;
    }
  }

  double log_w(NodeId node) const {
    const auto& experts = sets_[node].experts;
    std::vector<double> terms(experts.size());
    for (std::size_t k = 0; k < experts.size(); ++k)
      terms[k] = experts[k].log_prior - eta_ * cum_[node][k];
    return log_sum_exp(terms);
  }

  std::size_t nodes() const { return sets_.size(); }

 private:
  double eta_;
  std::vector<ExpertSet> sets_;
  std::vector<std::vector<double>> cum_;
};

double random_eta(Rng& rng) { return 0.05 + 0.95 * rng.uniform(); }

// Losses are drawn from {0, 1, U[0,1]} so both endpoints show up.
double random_loss(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.2) return 0.0;
  if (u < 0.4) return 1.0;
  return rng.uniform();
}

std::string instance_list(const std::vector<OracleInstance>& instances) {
  std::string s;
  for (const auto& inst : instances) {
    if (!s.empty()) s += ", ";
    s += inst.label;
  }
  return s;
}

}  // namespace

bool VerifyReport::pass() const {
  return std::all_of(suites.begin(), suites.end(),
                     [](const SuiteResult& s) { return s.pass; });
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json j;
  j["command"] = "verify";
  j["pass"] = pass();
  j["suites"] = nlohmann::json::array();
  for (const auto& s : suites)
    j["suites"].push_back({{"name", s.name},
                           {"pass", s.pass},
                           {"max_error", s.max_error},
                           {"detail", s.detail}});
  return j;
}

std::vector<OracleInstance> oracle_instances() {
  const CellGrid n2({2}), n3({3}), n4({4});
  std::vector<OracleInstance> v;
  v.push_back({"binary-tree N=4 M=2", share(build_binary_tree(n4)), 2});
  v.push_back({"binary-tree N=2 M=3", share(build_binary_tree(n2)), 3});
  v.push_back({"kary-tree K=3 N=3 M=2", share(build_kary_tree(n3, 3)), 2});
  v.push_back({"kary-tree K=3 N=3 M=3", share(build_kary_tree(n3, 3)), 3});
  v.push_back({"lexicographic N=3 M=2", share(build_lexicographic_graph(n3)), 2});
  v.push_back({"lexicographic N=2 M=3", share(build_lexicographic_graph(n2)), 3});
  v.push_back({"kgroup K=2 N=3 M=2",
               share(build_kgroup_lexicographic(n3, 2)), 2});
  v.push_back({"kgroup K=3 N=3 M=3",
               share(build_kgroup_lexicographic(n3, 3)), 3});
  v.push_back({"arbitrary-splitting N=3 M=2",
               share(build_arbitrary_splitting(n3)), 2});
  v.push_back({"arbitrary-splitting N=2 M=3",
               share(build_arbitrary_splitting(n2)), 3});
  v.push_back({"position-splitting d=1 N=4 M=2",
               share(build_arbitrary_position_splitting(1, 2)), 2});
  v.push_back({"position-splitting d=2 N=2 M=3",
               share(build_arbitrary_position_splitting(2, 1)), 3});
  v.push_back({"position-splitting d=2 N=4 M=2",
               share(build_arbitrary_position_splitting(2, 2)), 2});
  return v;
}

SuiteResult check_initialization(RecursionVariant variant) {
  const auto start = Clock::now();
  SuiteResult r;
  r.name = "initialization";
  auto instances = oracle_instances();
  instances.push_back({"binary-tree N=1024 M=4",
                       share(build_binary_tree(CellGrid::uniform(1, 1024))), 4});
  instances.push_back({"kary-tree K=3 N=27 M=3",
                       share(build_kary_tree(CellGrid({27}), 3)), 3});
  instances.push_back({"lexicographic N=12 M=3",
                       share(build_lexicographic_graph(CellGrid({12}))), 3});
  instances.push_back({"kgroup K=3 N=12 M=3",
                       share(build_kgroup_lexicographic(CellGrid({12}), 3)), 3});
  instances.push_back({"arbitrary-splitting N=8 M=3",
                       share(build_arbitrary_splitting(CellGrid({8}))), 3});
  instances.push_back({"position-splitting d=2 N=256 M=3",
                       share(build_arbitrary_position_splitting(2, 8)), 3});

  double worst_w = 0.0;
  double worst_prior = 0.0;
  std::size_t enumerated = 0;
  for (const auto& inst : instances) {
    HsbLearner learner(inst.structure, inst.arms, 0.1, variant);
    for (NodeId i = 0; i < inst.structure->size(); ++i)
      worst_w = std::max(worst_w, std::abs(std::expm1(learner.log_w(i))));
    const auto counts = count_experts(*inst.structure, inst.arms);
    for (NodeId i = 0; i < inst.structure->size(); ++i) {
      if (counts[i] > 20000) continue;
      const auto set = enumerate_weighted_experts(*inst.structure, i, inst.arms);
      double sum = 0.0;
      for (const auto& e : set.experts) sum += e.prior();
      worst_prior = std::max(worst_prior, std::abs(sum - 1.0));
      ++enumerated;
    }
  }
  r.max_error = std::max(worst_w, worst_prior);
  r.pass = worst_w <= 1e-12 && worst_prior <= 1e-12;
  r.detail = fmt::format(
      "{} structures; max |w_1 - 1| = {:.3g}; max |sum of priors - 1| = "
      "{:.3g} over {} enumerated nodes",
      instances.size(), worst_w, worst_prior, enumerated);
  r.seconds = seconds_since(start);
  return r;
}

SuiteResult check_node_weights(const EquivalenceOptions& options) {
  const auto start = Clock::now();
  SuiteResult r;
  r.name = "node-weight equivalence";
  const auto instances = oracle_instances();
  double worst = 0.0;
  std::string worst_where;
  for (std::size_t n = 0; n < instances.size(); ++n) {
    const auto& inst = instances[n];
    const std::size_t cells = inst.structure->grid().total_cells();
    for (std::size_t seed = 0; seed < options.seeds; ++seed) {
      Rng rng(derive_seed(0x5052'4f50'31ULL, n, seed));
      const double eta = random_eta(rng);
      HsbLearner learner(inst.structure, inst.arms, eta, options.variant);
      EnumeratedWeights oracle(*inst.structure, inst.arms, eta);
      for (std::size_t t = 0; t < options.rounds; ++t) {
        const auto cell = static_cast<CellIndex>(rng.index(cells));
        const auto d = learner.select_cell(cell, rng);
        const double loss = random_loss(rng);
        learner.update(d, loss);
        oracle.observe(cell, d.arm, loss / d.chosen_probability());
        for (NodeId i = 0; i < oracle.nodes(); ++i) {
          const double err =
              std::abs(std::expm1(learner.log_w(i) - oracle.log_w(i)));
          if (!(err <= worst)) {
            if (std::isnan(err)) {
              worst = std::numeric_limits<double>::infinity();
            } else {
              worst = err;
            }
            worst_where = fmt::format("{} seed {} round {} node {}",
                                      inst.label, seed, t + 1, i);
          }
        }
      }
    }
  }
  r.max_error = worst;
  r.pass = worst <= options.tolerance;
  r.detail = fmt::format(
      "{} instances x {} seeds x {} rounds; max relative error {:.3g}{}; "
      "instances: {}",
      instances.size(), options.seeds, options.rounds, worst,
      worst_where.empty() ? "" : " at " + worst_where, instance_list(instances));
  r.seconds = seconds_since(start);
  return r;
}

SuiteResult check_simplex(const EquivalenceOptions& options) {
  const auto start = Clock::now();
  SuiteResult r;
  r.name = "simplex equivalence";
  const auto instances = oracle_instances();
  double worst = 0.0;
  std::string worst_where;
  for (std::size_t n = 0; n < instances.size(); ++n) {
    const auto& inst = instances[n];
    const std::size_t cells = inst.structure->grid().total_cells();
    for (std::size_t seed = 0; seed < options.seeds; ++seed) {
      Rng rng(derive_seed(0x5052'4f50'32ULL, n, seed));
      const double eta = random_eta(rng);
      HsbLearner learner(inst.structure, inst.arms, eta, options.variant);
      FlatMixture flat = flat_mixture_for(*inst.structure, inst.arms, eta);
      for (std::size_t t = 0; t < options.rounds; ++t) {
        const auto cell = static_cast<CellIndex>(rng.index(cells));
        const auto p_flat = flat.flat_simplex(cell);
        const auto d = learner.select_cell(cell, rng);
        for (std::size_t m = 0; m < inst.arms; ++m) {
          const double err = std::abs(d.simplex[m] - p_flat[m]);
          if (!(err <= worst)) {
            worst = std::isnan(err) ? std::numeric_limits<double>::infinity()
                                    : err;
            worst_where = fmt::format("{} seed {} round {}", inst.label, seed,
                                      t + 1);
          }
        }
        const double loss = random_loss(rng);
        learner.update(d, loss);
        flat.flat_update(cell, d.arm, d.chosen_probability(), loss);
      }
    }
  }
  r.max_error = worst;
  r.pass = worst <= options.tolerance;
  r.detail = fmt::format(
      "{} instances x {} seeds x {} rounds; max |p_hsb - p_flat| = {:.3g}{}",
      instances.size(), options.seeds, options.rounds, worst,
      worst_where.empty() ? "" : " at " + worst_where);
  r.seconds = seconds_since(start);
  return r;
}

SuiteResult check_mixture_bound(std::size_t seeds, std::size_t horizon) {
  const auto start = Clock::now();
  SuiteResult r;
  r.name = "mixture regret bound";
  if (seeds == 0 || horizon == 0) throw DomainError("empty bound check");
  constexpr std::size_t kArms = 2;
  const auto tree = share(build_binary_tree(CellGrid({2})));
  const ExpertSet experts = enumerate_weighted_experts(*tree, 0, kArms);
  double max_log_inv_prior = 0.0;
  for (const auto& e : experts.experts)
    max_log_inv_prior = std::max(max_log_inv_prior, -e.log_prior);
  const double eta = std::sqrt(2.0 * max_log_inv_prior /
                               (kArms * static_cast<double>(horizon)));

  std::vector<double> regret(experts.experts.size(), 0.0);
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    Rng rng(derive_seed(0x5448'4d31ULL, seed, 0));
    FlatMixture flat(experts, tree->grid(), kArms, eta);
    // Oblivious switching adversary: in blocks of 200..1000 rounds each cell
    // favours one arm (loss rate 0.2 vs 0.8).
    std::array<std::size_t, 2> good{};
    std::size_t block_left = 0;
    double alg = 0.0;
    std::vector<double> expert_loss(experts.experts.size(), 0.0);
    for (std::size_t t = 0; t < horizon; ++t) {
      if (block_left == 0) {
        block_left = 200 + rng.index(801);
        good = {rng.index(kArms), rng.index(kArms)};
      }
      --block_left;
      const auto cell = static_cast<CellIndex>(rng.index(2));
      std::array<double, kArms> losses{};
      for (std::size_t m = 0; m < kArms; ++m)
        losses[m] = rng.bernoulli(m == good[cell] ? 0.2 : 0.8) ? 1.0 : 0.0;
      const auto d = flat.select_cell(cell, rng);
      alg += losses[d.arm];
      flat.update(d, losses[d.arm]);
      const auto pos = experts.position(cell);
      for (std::size_t k = 0; k < experts.experts.size(); ++k)
        expert_loss[k] += losses[experts.experts[k].mapping[pos]];
    }
    for (std::size_t k = 0; k < regret.size(); ++k)
      regret[k] += (alg - expert_loss[k]) / static_cast<double>(seeds);
  }

  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t worst = 0;
  r.pass = true;
  for (std::size_t k = 0; k < regret.size(); ++k) {
    const double bound = mixture_regret_bound(-experts.experts[k].log_prior,
                                              eta, kArms, horizon);
    if (regret[k] > bound) r.pass = false;
    if (bound - regret[k] < worst_margin) {
      worst_margin = bound - regret[k];
      worst = k;
    }
  }
  r.max_error = -worst_margin;
  r.detail = fmt::format(
      "{} experts, {} seeds, T = {}, eta = {:.5g}; tightest: expert {} mean "
      "regret {:.4g} vs bound {:.4g}",
      regret.size(), seeds, horizon, eta, worst, regret[worst],
      regret[worst] + worst_margin);
  r.seconds = seconds_since(start);
  return r;
}

SuiteResult check_quantization_bound() {
  const auto start = Clock::now();
  SuiteResult r;
  r.name = "quantization gap bound";
  const std::array<std::size_t, 4> cells{4, 16, 64, 256};
  const auto reports = quantization_gap(sinusoidal_family(), cells);
  r.pass = true;
  std::string detail;
  for (const auto& q : reports) {
    if (!(q.gap <= q.bound)) r.pass = false;
    r.max_error = std::max(r.max_error, q.gap - q.bound);
    if (!detail.empty()) detail += "; ";
    detail += fmt::format("N={}: gap {:.4g} <= {:.4g}", q.cells, q.gap, q.bound);
  }
  if (!(reports.back().gap < reports.front().gap)) r.pass = false;
  r.detail = detail;
  r.seconds = seconds_since(start);
  return r;
}

VerifyReport verify(RecursionVariant variant) {
  VerifyReport report;
  EquivalenceOptions options;
  options.variant = variant;
  report.suites.push_back(check_initialization(variant));
  report.suites.push_back(check_node_weights(options));
  report.suites.push_back(check_simplex(options));
  report.suites.push_back(check_mixture_bound());
  report.suites.push_back(check_quantization_bound());
  return report;
}

}  // namespace hsb
