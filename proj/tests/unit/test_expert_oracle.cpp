#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "hsb/errors.hpp"
#include "hsb/expert_oracle.hpp"
#include "hsb/rng.hpp"
#include "support.hpp"

using namespace hsb;

TEST_CASE("leaf experts are the constant arms") {
  const auto s = build_binary_tree(CellGrid({2}));
  const auto leaf = enumerate_weighted_experts(s, 1, 2);
  REQUIRE(leaf.experts.size() == 2);
  for (const auto& e : leaf.experts) CHECK(e.prior() == doctest::Approx(0.5));
}

TEST_CASE("N=2, M=2 tree: two constants at 1/4, four stitched at 1/8") {
  const auto s = build_binary_tree(CellGrid({2}));
  const auto root = enumerate_weighted_experts(s, 0, 2);
  REQUIRE(root.experts.size() == 6);
  std::map<std::vector<std::uint16_t>, double> mass;
  std::size_t quarter = 0, eighth = 0;
  double total = 0.0;
  for (const auto& e : root.experts) {
    mass[e.mapping] += e.prior();
    total += e.prior();
    if (std::abs(e.prior() - 0.25) < 1e-15) ++quarter;
    if (std::abs(e.prior() - 0.125) < 1e-15) ++eighth;
  }
  CHECK(quarter == 2);
  CHECK(eighth == 4);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  // Collapses onto the four leaf mappings; constants carry 1/4 + 1/8.
  CHECK(mass.size() == 4);
  CHECK(mass[{0, 0}] == doctest::Approx(0.375));
  CHECK(mass[{0, 1}] == doctest::Approx(0.125));
}

TEST_CASE("priors sum to one under every node of every builder") {
  for (const auto& [label, s] : test_support::all_builders()) {
    CAPTURE(label);
    const auto counts = count_experts(s, 2);
    for (NodeId i = 0; i < s.size(); ++i) {
      if (counts[i] > 5000) continue;
      const auto set = enumerate_weighted_experts(s, i, 2);
      CHECK(set.experts.size() == counts[i]);
      double sum = 0.0;
      for (const auto& e : set.experts) sum += e.prior();
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      const auto cells = test_support::cell_set(s, i);
      CHECK(set.cells == std::vector<CellIndex>(cells.begin(), cells.end()));
    }
  }
}

TEST_CASE("expert counts follow the recursion") {
  // count(leaf) = M, count(i) = M + sum over groups of prod of member counts.
  const auto bt = build_binary_tree(CellGrid({4}));
  CHECK(count_experts(bt, 2)[0] == 38);
  CHECK(count_experts(bt, 3)[0] == 147);
  const auto lex = build_lexicographic_graph(CellGrid({3}));
  CHECK(count_experts(lex, 2)[0] == 26);
  const auto big = build_binary_tree(CellGrid({64}));
  CHECK(count_experts(big, 2, 1000)[0] == 1001);  // saturates at cap + 1
  CHECK_THROWS_AS(enumerate_weighted_experts(big, 0, 2, 1000), CapacityError);
}

TEST_CASE("total weight on the empty and one-round histories") {
  const auto s = build_binary_tree(CellGrid({2}));
  const auto root = enumerate_weighted_experts(s, 0, 2);
  CHECK(log_total_weight(root, {}, 0.7) == 0.0);
  const EstimatedLossRound r{0, {1.0, 0.0}};
  const double e = std::exp(-1.0);
  const double expect = 0.25 * e + 0.25 + 0.125 * (e + e + 1 + 1);
  CHECK(std::exp(log_total_weight(root, {&r, 1}, 1.0)) ==
        doctest::Approx(expect).epsilon(1e-15));
  // Rounds outside a node's region do not touch it.
  const auto leaf1 = enumerate_weighted_experts(s, 2, 2);
  CHECK(log_total_weight(leaf1, {&r, 1}, 1.0) == 0.0);
}

TEST_CASE("flat mixture basics") {
  const auto s = build_binary_tree(CellGrid({4}));
  FlatMixture flat = flat_mixture_for(s, 2, 0.5);
  for (CellIndex c = 0; c < 4; ++c) {
    const auto p = flat.flat_simplex(c);
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
  }
  const std::vector<double> before(flat.log_weights().begin(), flat.log_weights().end());
  flat.flat_update(2, 1, 0.5, 0.0);
  CHECK(std::vector<double>(flat.log_weights().begin(), flat.log_weights().end()) == before);

  flat.flat_update(2, 1, 0.5, 1.0);
  const auto pos = flat.experts().position(2);
  for (std::size_t k = 0; k < before.size(); ++k) {
    const bool picks = flat.experts().experts[k].mapping[pos] == 1;
    CHECK(flat.log_weights()[k] == (picks ? before[k] - 1.0 : before[k]));
  }
  CHECK_THROWS_AS(flat.flat_update(2, 1, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(flat.flat_update(2, 1, 0.5, 2.0), DomainError);
}

TEST_CASE("single-expert class plays its arm with certainty") {
  ExpertSet set;
  set.node = 0;
  set.cells = {0, 1};
  set.experts.push_back({0.0, {2, 0}});
  FlatMixture flat(set, CellGrid({2}), 3, 0.1);
  CHECK(flat.flat_simplex(0) == std::vector<double>{0.0, 0.0, 1.0});
  CHECK(flat.flat_simplex(1) == std::vector<double>{1.0, 0.0, 0.0});
}

TEST_CASE("uniform prior over all mappings") {
  const auto flat = FlatMixture::uniform_all_mappings(CellGrid({4}), 2, 0.1);
  CHECK(flat.experts().experts.size() == 16);
  std::set<std::vector<std::uint16_t>> distinct;
  for (const auto& e : flat.experts().experts) {
    distinct.insert(e.mapping);
    CHECK(e.prior() == doctest::Approx(1.0 / 16));
  }
  CHECK(distinct.size() == 16);
  CHECK_THROWS_AS(FlatMixture::uniform_all_mappings(CellGrid({20}), 2, 0.1),
                  CapacityError);
}

TEST_CASE("expert CSV dump") {
  const auto s = build_binary_tree(CellGrid({2}));
  std::ostringstream out;
  write_experts_csv(enumerate_weighted_experts(s, 0, 2), out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "prior,cell_0,cell_1");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 6);
}
