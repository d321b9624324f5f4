#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hsb/environments.hpp"
#include "hsb/errors.hpp"
#include "hsb/evaluation.hpp"
#include "hsb/hsb_learner.hpp"

using namespace hsb;

namespace {

// Exhaustive minimum over all M^N mappings.
double brute_force(std::span<const FullInfoRound> history, const CellGrid& grid,
                   std::size_t arms) {
  const std::size_t n = grid.total_cells();
  std::size_t count = 1;
  for (std::size_t c = 0; c < n; ++c) count *= arms;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t code = 0; code < count; ++code) {
    std::vector<std::size_t> map(n);
    for (std::size_t c = 0, k = code; c < n; ++c, k /= arms) map[c] = k % arms;
    double total = 0.0;
    for (const auto& r : history) total += r.losses[map[grid.quantize(r.context)]];
    best = std::min(best, total);
  }
  return best;
}

}  // namespace

TEST_CASE("best mapping: single cell") {
  const std::vector<FullInfoRound> h = {{{0.2}, {1.0, 0.0}}, {{0.7}, {1.0, 1.0}}};
  const auto b = best_mapping_loss(h, CellGrid({1}));
  CHECK(b.loss == 2.0 - 1.0);
  CHECK(b.mapping == std::vector<std::size_t>{1});
  // Ties go to the lowest arm.
  const std::vector<FullInfoRound> tie = {{{0.2}, {0.5, 0.5}}};
  CHECK(best_mapping_loss(tie, CellGrid({1})).mapping[0] == 0);
  CHECK_THROWS_AS(best_mapping_loss({}, CellGrid({1})), DomainError);
}

TEST_CASE("best mapping equals brute force on small instances") {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t cells = 1 + rng.index(3);
    const std::size_t arms = 1 + rng.index(3);
    const std::size_t T = 1 + rng.index(6);
    std::vector<FullInfoRound> h(T);
    for (auto& r : h) {
      r.context = {rng.uniform()};
      for (std::size_t m = 0; m < arms; ++m)
        r.losses.push_back(rng.bernoulli(0.3) ? rng.uniform() : double(rng.index(2)));
    }
    const CellGrid grid({cells});
    const auto b = best_mapping_loss(h, grid);
    CHECK(b.loss == doctest::Approx(brute_force(h, grid, arms)).epsilon(1e-12));
    double replayed = 0.0;
    for (const auto& r : h) replayed += r.losses[b.mapping[grid.quantize(r.context)]];
    CHECK(replayed == doctest::Approx(b.loss).epsilon(1e-12));
  }
}

TEST_CASE("best mapping on a fine grid recovers the optimal regions") {
  SinusoidalBernoulliEnv env(SinusoidalBernoulliEnv::Phase::kStationary, 200000, 3);
  const auto h = env.generate();
  const CellGrid grid({64});
  const auto b = best_mapping_loss(h, grid);
  for (std::size_t c = 0; c < 64; ++c) {
    const double lo = c / 64.0, hi = (c + 1) / 64.0;
    // Skip the cells next to a boundary, where the arms are nearly tied.
    auto near = [&](double x) { return lo - 1.0 / 64 <= x && x <= hi + 1.0 / 64; };
    if (near(0.5) || near(0.9182)) continue;
    CAPTURE(c);
    const std::size_t expect = hi <= 0.5 ? 2 : hi <= 0.9182 ? 0 : 1;
    CHECK(b.mapping[c] == expect);
  }
}

TEST_CASE("regret report") {
  const std::vector<FullInfoRound> h = {{{0.1}, {1.0, 0.0}}, {{0.9}, {0.0, 1.0}}};
  const std::vector<double> incurred = {1.0, 1.0};
  const auto r = make_regret_report(incurred, h, CellGrid({2}), 5.0);
  CHECK(r.algorithm_loss == 2.0);
  CHECK(r.best_mapping_loss == 0.0);
  CHECK(r.regret == 2.0);
  CHECK(r.curve == std::vector<double>{1.0, 1.0});
  CHECK(r.bound == 5.0);
  CHECK_THROWS_AS(make_regret_report(std::vector<double>{1.0}, h, CellGrid({2}), 0),
                  ShapeError);
}

TEST_CASE("bound checks") {
  const auto zero = check_regret_bound(3.0, 2, 1, 10, 2, 0, 0.1);
  CHECK(zero.pass);
  CHECK(zero.bound == 0.0);

  // Binary tree N=32, M=2, R=3, T=1e5 at the tuned rate.
  const double eta = optimal_eta(2, 1, 10, 2, 1e5);
  const auto c = check_regret_bound(1000.0, 2, 1, 10, 2, 100000, eta);
  CHECK(c.bound == doctest::Approx(3492.7625710682136).epsilon(1e-12));
  CHECK(c.pass);
  CHECK(c.margin == doctest::Approx(c.bound - 1000.0));
  CHECK_FALSE(check_regret_bound(4000.0, 2, 1, 10, 2, 100000, eta).pass);

  CHECK(mixture_regret_bound(std::log(8.0), 0.5, 2, 10) ==
        doctest::Approx(std::log(8.0) / 0.5 + 5.0));
  CHECK_THROWS_AS(mixture_regret_bound(1.0, 0.0, 2, 10), DomainError);
}

TEST_CASE("expert cumulative losses") {
  const auto s = build_binary_tree(CellGrid({2}));
  const auto set = enumerate_weighted_experts(s, 0, 2);
  const std::vector<FullInfoRound> h = {{{0.1}, {1.0, 0.0}}, {{0.9}, {1.0, 0.5}}};
  const auto losses = expert_cumulative_losses(set, h, CellGrid({2}));
  REQUIRE(losses.size() == set.experts.size());
  for (std::size_t k = 0; k < losses.size(); ++k) {
    const auto& m = set.experts[k].mapping;
    CHECK(losses[k] == h[0].losses[m[0]] + h[1].losses[m[1]]);
  }
}

TEST_CASE("quantization bound arithmetic and degenerate family") {
  LipschitzFamily flat;
  flat.dims = 2;
  flat.arms = 2;
  flat.lipschitz = 1.0;
  flat.loss = [](std::size_t, std::span<const double> x) { return 0.5 * (x[0] + x[1]); };
  const std::size_t counts[] = {4, 16, 64};
  const auto r = quantization_gap(flat, counts, 64);
  REQUIRE(r.size() == 3);
  CHECK(r[1].bound == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-15));
  for (const auto& q : r) CHECK(std::abs(q.gap) < 1e-12);

  LipschitzFamily bad;
  CHECK_THROWS_AS(quantization_gap(bad, counts), ConfigError);
  const std::size_t odd[] = {3};
  CHECK_THROWS_AS(quantization_gap(flat, odd, 64), ConfigError);
}

TEST_CASE("quantization gap on the sinusoidal means") {
  const auto family = sinusoidal_family();
  const std::size_t counts[] = {4, 16, 64, 256};
  const auto r = quantization_gap(family, counts);
  // Independent oracle: per-cell integrals by a finer midpoint rule.
  for (std::size_t i = 0; i < r.size(); ++i) {
    const std::size_t n = counts[i];
    const std::size_t sub = 4000000 / n;
    double mapped = 0.0, pointwise = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      double sums[3] = {};
      for (std::size_t k = 0; k < sub; ++k) {
        const double s = (c + (k + 0.5) / sub) / n;
        const auto p = SinusoidalBernoulliEnv::mean_losses(s, false);
        for (int m = 0; m < 3; ++m) sums[m] += p[m];
        pointwise += *std::min_element(p.begin(), p.end());
      }
      mapped += *std::min_element(sums, sums + 3);
    }
    const double gap = (mapped - pointwise) / (n * sub);
    CAPTURE(n);
    CHECK(std::abs(r[i].gap - gap) < 1e-8);
    CHECK(r[i].gap <= r[i].bound);
    if (i > 0) CHECK(r[i].gap < r[i - 1].gap);
  }
}

TEST_CASE("aggregate runs") {
  const std::vector<std::vector<double>> one = {{1.0, 0.0, 1.0}};
  const auto a = aggregate_runs(one);
  CHECK(a[0] == 1.0);
  CHECK(a[1] == 0.5);
  CHECK(a[2] == doctest::Approx(2.0 / 3));
  const std::vector<std::vector<double>> two = {{0.3, 0.3}, {0.7, 0.7}};
  for (double v : aggregate_runs(two)) CHECK(v == doctest::Approx(0.5));
  const std::vector<std::vector<double>> ragged = {{1.0}, {1.0, 0.0}};
  CHECK_THROWS_AS(aggregate_runs(ragged), ShapeError);
  CHECK(aggregate_runs({}).empty());
}

TEST_CASE("round record CSV") {
  const std::vector<RoundRecord> recs = {{1, 3, 2, 1.0, {0.25, 0.25, 0.5}},
                                         {2, 0, 0, 0.0, {0.5, 0.25, 0.25}}};
  std::ostringstream out;
  write_round_records(recs, 3, out);
  CHECK(out.str() ==
        "t,cell,arm,loss,p_1,p_2,p_3\n"
        "1,3,2,1,0.25,0.25,0.5\n"
        "2,0,0,0,0.5,0.25,0.25\n");
}
