#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "hsb/environments.hpp"
#include "hsb/errors.hpp"
#include "hsb/experiment.hpp"
#include "hsb/hsb_learner.hpp"

using namespace hsb;

namespace {

using Env = SinusoidalBernoulliEnv;

double min_mean(double s) {
  const auto p = Env::mean_losses(s, false);
  return *std::min_element(p.begin(), p.end());
}

// Root of p_0 - p_1 on [lo, hi] by bisection.
double crossing(double lo, double hi) {
  auto f = [](double s) {
    const auto p = Env::mean_losses(s, false);
    return p[0] - p[1];
  };
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((f(lo) < 0) == (f(mid) < 0) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

class FixedArm final : public ContextualPolicy {
 public:
  FixedArm(std::size_t arm, std::size_t arms) : arm_(arm), arms_(arms) {}
  std::string name() const override { return "fixed"; }
  std::size_t arms() const override { return arms_; }
  ArmDecision select(std::span<const double>, Rng&) override {
    ArmDecision d;
    d.arm = arm_;
    d.simplex.assign(arms_, 0.0);
    d.simplex[arm_] = 1.0;
    return d;
  }
  void update(const ArmDecision&, double loss) override { seen.push_back(loss); }
  std::vector<double> seen;

 private:
  std::size_t arm_, arms_;
};

std::shared_ptr<const Structure> tree(std::size_t cells) {
  return std::make_shared<const Structure>(build_binary_tree(CellGrid({cells})));
}

}  // namespace

TEST_CASE("sinusoidal mean losses") {
  const auto p = Env::mean_losses(0.5, false);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[2] == 0.5);
  const auto q = Env::mean_losses(0.2, true);
  const auto r = Env::mean_losses(0.2, false);
  CHECK(q[0] == r[1]);
  CHECK(q[1] == r[2]);
  CHECK(q[2] == r[0]);
}

TEST_CASE("optimal stationary regions") {
  // Arm 2 below 0.5, arm 0 up to the p_0 = p_1 crossing, arm 1 after it.
  const double theta = crossing(0.6, 0.99);
  CHECK(std::abs(theta - 0.9182) < 1e-4);
  auto best = [](double s) {
    const auto p = Env::mean_losses(s, false);
    return static_cast<std::size_t>(std::min_element(p.begin(), p.end()) - p.begin());
  };
  for (double s = 0.005; s < 1.0; s += 0.01) {
    CAPTURE(s);
    const std::size_t expect = s < 0.5 ? 2 : s < theta ? 0 : 1;
    CHECK(best(s) == expect);
  }
}

TEST_CASE("clairvoyant floor: quadrature against the piecewise closed form") {
  const double theta = crossing(0.6, 0.99);
  constexpr double pi = std::numbers::pi;
  const double closed = 0.125 + 0.5 * (theta - 0.5) -
                        (std::cos(2 * pi * theta) + 1) / (4 * pi) +
                        (std::cos(pi * theta) + 1) / pi;
  const std::size_t n = 1000000;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += min_mean((i + 0.5) / n);
  CHECK(sum / n == doctest::Approx(closed).epsilon(1e-9));

  // Playing the optimal arm on sampled rounds lands on the same floor.
  Env env(Env::Phase::kStationary, 100000, 11);
  double incurred = 0.0;
  for (const auto& r : env.generate()) {
    const auto p = Env::mean_losses(r.context[0], false);
    incurred += r.losses[std::min_element(p.begin(), p.end()) - p.begin()];
  }
  const double se = std::sqrt(closed * (1 - closed) / 100000);
  CHECK(std::abs(incurred / 100000 - closed) < 4 * se);
}

TEST_CASE("sinusoidal streams are reproducible Bernoulli rounds") {
  Env a(Env::Phase::kSwitched, 1000, 3);
  Env b(Env::Phase::kSwitched, 1000, 3);
  const auto ra = a.generate();
  const auto rb = b.generate();
  REQUIRE(ra.size() == 1000);
  for (std::size_t t = 0; t < ra.size(); ++t) {
    CHECK(ra[t].context == rb[t].context);
    CHECK(ra[t].losses == rb[t].losses);
    CHECK(ra[t].context[0] >= 0.0);
    CHECK(ra[t].context[0] < 1.0);
    for (double l : ra[t].losses) CHECK((l == 0.0 || l == 1.0));
  }
  CHECK(a.switch_round() == 250);
  CHECK(Env(Env::Phase::kSwitched, 1001, 1, 0.25).switch_round() == 250);
  CHECK(Env(Env::Phase::kStationary, 1000, 1).switch_round() == 1000);
  Env c(Env::Phase::kStationary, 2, 1);
  CHECK_THROWS_AS(c.step(0), DomainError);
  CHECK_THROWS_AS(c.step(3), DomainError);
  CHECK_THROWS_AS(Env(Env::Phase::kSwitched, 10, 1, 1.5), ConfigError);
  CHECK(phase_from_string(to_string(Env::Phase::kSwitched)) == Env::Phase::kSwitched);
  CHECK_THROWS_AS(phase_from_string("drifting"), ConfigError);
}

TEST_CASE("the switched model changes after the switch round") {
  // Frequency of arm-2 losses for s < 0.5: mean s before, 0.5 + 0.5 sin after.
  Env env(Env::Phase::kSwitched, 40000, 5);
  const auto rounds = env.generate();
  double before = 0, before_n = 0, after = 0, after_n = 0;
  for (std::size_t t = 0; t < rounds.size(); ++t) {
    const double s = rounds[t].context[0];
    const double expect = Env::mean_losses(s, t >= 10000)[2];
    (t < 10000 ? before : after) += rounds[t].losses[2] - expect;
    (t < 10000 ? before_n : after_n) += 1;
  }
  CHECK(std::abs(before / before_n) < 0.02);
  CHECK(std::abs(after / after_n) < 0.01);
}

TEST_CASE("replay: trace of a fixed-arm policy") {
  const std::vector<LoggedRound> log = {
      {{0.1}, 0, true}, {{0.2}, 1, false}, {{0.3}, 0, false},
      {{0.4}, 2, true}, {{0.5}, 1, true}};
  FixedArm policy(0, 3);
  Rng rng(1);
  const auto r = replay_evaluate(policy, log, rng);
  CHECK(r.matched == 2);
  CHECK(r.total_loss == 1);
  CHECK(policy.seen == std::vector<double>{0.0, 1.0});
  CHECK(r.click_rate() == 0.5);

  FixedArm empty_policy(0, 3);
  const auto e = replay_evaluate(empty_policy, {}, rng);
  CHECK(e.matched == 0);
  CHECK(e.total_loss == 0);
  CHECK(e.click_rate() == 0.0);

  FixedArm narrow(0, 2);
  CHECK_THROWS_AS(replay_evaluate(narrow, log, rng), ConfigError);
}

TEST_CASE("replay never reveals unmatched outcomes") {
  Env env(Env::Phase::kStationary, 3000, 8);
  const auto rounds = env.generate();
  Rng log_rng(9);
  auto log = uniform_logging(rounds, 3, log_rng);

  auto run = [&](const std::vector<LoggedRound>& l, std::vector<bool>* matched) {
    HsbLearner learner(tree(8), 3, 0.05);
    Rng rng(10);
    for (const auto& r : l) {
      const auto d = learner.select(r.context, rng);
      const bool hit = d.arm == r.displayed_arm;
      if (matched) matched->push_back(hit);
      if (hit) learner.update(d, r.clicked ? 0.0 : 1.0);
    }
    return learner.snapshot();
  };
  std::vector<bool> matched;
  const auto reference = run(log, &matched);
  {
    HsbLearner learner(tree(8), 3, 0.05);
    Rng rng(10);
    const auto r = replay_evaluate(learner, log, rng);
    CHECK(learner.snapshot() == reference);
    CHECK(r.matched == static_cast<std::size_t>(std::count(matched.begin(), matched.end(), true)));
  }
  // Flipping every unmatched outcome leaves the learner untouched.
  for (std::size_t t = 0; t < log.size(); ++t)
    if (!matched[t]) log[t].clicked = !log[t].clicked;
  HsbLearner learner(tree(8), 3, 0.05);
  Rng rng(10);
  replay_evaluate(learner, log, rng);
  CHECK(learner.snapshot() == reference);
}

TEST_CASE("logged CSV round-trip and parse errors") {
  const std::vector<LoggedRound> log = {{{0.25, 0.5}, 1, true}, {{1.0, 0.0}, 0, false}};
  std::ostringstream out;
  write_logged_rounds(log, out);
  CHECK(out.str().rfind("s_1,s_2,displayed_arm,clicked\n", 0) == 0);
  std::istringstream in(out.str());
  const auto back = read_logged_rounds(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].context == log[0].context);
  CHECK(back[0].displayed_arm == 1);
  CHECK(back[1].clicked == false);

  auto error_row = [](const std::string& text) -> std::size_t {
    std::istringstream s(text);
    try {
      read_logged_rounds(s);
    } catch (const ParseError& e) {
      return e.row();
    }
    return 0;
  };
  CHECK(error_row("s_1,displayed_arm,clicked\n0.5,0,1\n0.5,x,1\n") == 3);
  CHECK(error_row("s_1,displayed_arm,clicked\n0.5,0,2\n") == 2);
  CHECK(error_row("s_1,displayed_arm,clicked\n1.5,0,1\n") == 2);
  CHECK(error_row("s_1,displayed_arm,clicked\n0.5,0\n") == 2);
  CHECK(error_row("s_1,arm,clicked\n") == 1);
  std::istringstream empty("s_1,displayed_arm,clicked\n");
  CHECK(read_logged_rounds(empty).empty());
  std::istringstream none("");
  CHECK_THROWS_AS(read_logged_rounds(none), ParseError);
}

TEST_CASE("uniform logging shows each arm about equally often") {
  Env env(Env::Phase::kStationary, 30000, 4);
  const auto rounds = env.generate();
  Rng rng(2);
  const auto log = uniform_logging(rounds, 3, rng);
  std::size_t shown[3] = {};
  for (std::size_t t = 0; t < log.size(); ++t) {
    ++shown[log[t].displayed_arm];
    CHECK(log[t].clicked == (rounds[t].losses[log[t].displayed_arm] == 0.0));
  }
  for (auto n : shown) CHECK(std::abs(static_cast<double>(n) - 10000.0) < 400.0);
}

TEST_CASE("Hamming decoding") {
  const auto m = CodingMatrix::one_versus_all(3);
  CHECK(hamming_decode(std::vector<int>{1, -1, -1}, m) == 0);
  CHECK(hamming_decode(std::vector<int>{-1, -1, -1}, m) == 0);  // tie -> lowest
  CHECK(hamming_decode(std::vector<int>{1, 1, 1}, m) == 0);
  for (std::size_t c = 0; c < 3; ++c) CHECK(hamming_decode(m.rows[c], m) == c);
  CHECK_THROWS_AS(hamming_decode(std::vector<int>{1, -1}, m), ShapeError);
  CHECK(codeword_context(std::vector<int>{1, -1, 1}) == std::vector<double>{1, 0, 1});

  CodingMatrix bad{{{1, -1}, {1, -1}}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CodingMatrix zero{{{1, 0}, {-1, 1}}};
  CHECK_THROWS_AS(zero.validate(), ConfigError);
  CHECK_THROWS_AS(CodingMatrix::one_versus_all(1), ConfigError);
}

TEST_CASE("perceptron learns a separable stream") {
  Rng rng(4);
  Perceptron p(2);
  auto label = [](double a, double b) { return 3 * a - b + 0.2 > 0 ? 1 : -1; };
  std::size_t late_mistakes = 0;
  for (int t = 0; t < 5000; ++t) {
    const double x[] = {rng.uniform(), rng.uniform()};
    const int y = label(x[0], x[1]);
    if (t >= 4000 && p.predict(x) != y) ++late_mistakes;
    p.train(x, y);
  }
  CHECK(late_mistakes < 50);
  CHECK_THROWS_AS(p.train(std::vector<double>{1.0}, 1), ShapeError);
}

TEST_CASE("ECOC step") {
  Rng rng(6);
  const auto data = separable_classes(3, 4, 3000, rng);
  EcocSetup setup(CodingMatrix::one_versus_all(3), 4);
  for (const auto& s : data) setup.train(s.features, s.label);
  std::size_t correct = 0;
  for (const auto& s : data) {
    const auto r = setup.observe(s.features, s.label);
    CHECK(r.context == codeword_context(r.codeword));
    CHECK(r.losses[s.label] == 0.0);
    CHECK(std::count(r.losses.begin(), r.losses.end(), 1.0) == 2);
    if (r.codeword == setup.matrix().rows[s.label]) {
      CHECK(hamming_decode(r.codeword, setup.matrix()) == s.label);
      ++correct;
    }
  }
  CHECK(correct > 2900);
  CHECK_THROWS_AS(setup.observe(data[0].features, 3), DomainError);
  CHECK_THROWS_AS(setup.train(data[0].features, 7), DomainError);
  CHECK_THROWS_AS(setup.observe(std::vector<double>{1.0}, 0), ShapeError);
}

TEST_CASE("labelled CSV remaps labels") {
  std::istringstream in("a,b,label\n0.1,0.2,7\n0.3,0.4,3\n0.5,0.6,7\n");
  const auto s = read_labeled_csv(in);
  REQUIRE(s.size() == 3);
  CHECK(s[0].label == 1);
  CHECK(s[1].label == 0);
  CHECK(s[1].features == std::vector<double>{0.3, 0.4});
  std::istringstream bad("a,label\n0.1,x\n");
  CHECK_THROWS_AS(read_labeled_csv(bad), ParseError);
}

TEST_CASE("HSB-APS epoch error settles on a separable 6-class stream") {
  // 6435 samples in 9 epochs of 715.
  Rng rng(12);
  const auto data = separable_classes(6, 8, 6435, rng);
  ExperimentConfig config;
  config.epochs = 9;
  config.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  AlgorithmSpec aps;
  aps.name = "hsb-aps";
  aps.eta = 0.1;
  config.algorithms = {aps};
  const auto result = ecoc_protocol(config, data);
  const auto& e = result.epoch_error_percent.at(0);
  REQUIRE(e.size() == 9);
  CAPTURE(e[6]);
  CAPTURE(e[7]);
  CAPTURE(e[8]);
  CHECK(e[7] <= e[6]);
  CHECK(e[8] <= e[7]);
  CHECK(e[8] < e[0]);
}
