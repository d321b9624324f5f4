#pragma once

// Synthetic loss streams, logged-data replay, and the ECOC classification
// adapter.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hsb/policy.hpp"
#include "hsb/rng.hpp"

namespace hsb {

// Context plus the loss of every arm. Learners only ever see the chosen
// arm's entry; the full vector feeds the regret oracles.
struct FullInfoRound {
  std::vector<double> context;
  std::vector<double> losses;
};

// Three Bernoulli arms over s in [0,1]:
//   stationary: p = (0.5 + 0.5 sin 2 pi s, sin pi s, s)
//   switched:   the stationary model for the first floor(f T) rounds, then
//               p = (sin pi s, s, 0.5 + 0.5 sin 2 pi s).
class SinusoidalBernoulliEnv {
 public:
  enum class Phase { kStationary, kSwitched };

  static constexpr std::size_t kArms = 3;

  SinusoidalBernoulliEnv(Phase phase, std::size_t horizon, std::uint64_t seed,
                         double switch_fraction = 0.25);

  Phase phase() const { return phase_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t switch_round() const { return switch_round_; }

  // Mean losses at s under the first or second model.
  static std::array<double, kArms> mean_losses(double s, bool second_model);

  // Round t (1-based). Draws s ~ U[0,1) then one Bernoulli per arm.
  FullInfoRound step(std::size_t t);
  std::vector<FullInfoRound> generate();

 private:
  Phase phase_;
  std::size_t horizon_;
  std::size_t switch_round_;
  Rng rng_;
};

SinusoidalBernoulliEnv::Phase phase_from_string(const std::string& name);
std::string to_string(SinusoidalBernoulliEnv::Phase phase);

// Runs a policy online over full-information rounds with bandit feedback.
// Returns the loss incurred in each round.
std::vector<double> run_online(ContextualPolicy& policy,
                               std::span<const FullInfoRound> rounds,
                               Rng& rng,
                               std::vector<RoundRecord>* records = nullptr);

// ---------------------------------------------------------------------------
// Logged data

struct LoggedRound {
  std::vector<double> context;
  std::size_t displayed_arm = 0;
  bool clicked = false;
};

// CSV with header "s_1,...,s_n,displayed_arm,clicked"; arms are 0-based,
// clicked is 0 or 1. ParseError carries the 1-based line number.
std::vector<LoggedRound> read_logged_rounds(std::istream& in);
void write_logged_rounds(std::span<const LoggedRound> rounds,
                         std::ostream& out);

// Shows a uniformly random arm each round; clicked iff that arm's loss is 0.
std::vector<LoggedRound> uniform_logging(std::span<const FullInfoRound> rounds,
                                         std::size_t arms, Rng& rng);

struct ReplayResult {
  std::size_t total_loss = 0;  // L
  std::size_t matched = 0;     // R
  double loss_rate() const;    // L / R (0 when R = 0)
  double click_rate() const;   // 1 - L / R
};

// Offline replay: the policy is queried every round but only updated (loss
// 1 if not clicked, else 0) when its choice equals the displayed arm.
ReplayResult replay_evaluate(ContextualPolicy& policy,
                             std::span<const LoggedRound> log, Rng& rng);

// ---------------------------------------------------------------------------
// ECOC

// Rows are class codewords over {+1, -1}.
struct CodingMatrix {
  std::vector<std::vector<int>> rows;

  std::size_t classes() const { return rows.size(); }
  std::size_t code_length() const { return rows.empty() ? 0 : rows[0].size(); }

  static CodingMatrix one_versus_all(std::size_t classes);
  // ConfigError unless entries are +-1, rows equal length and distinct.
  void validate() const;
};

// Row with the smallest Hamming distance; ties go to the lowest index.
std::size_t hamming_decode(std::span<const int> codeword,
                           const CodingMatrix& matrix);

// Bit b in {-1,+1} -> coordinate (b + 1) / 2.
std::vector<double> codeword_context(std::span<const int> codeword);

// Online perceptron on inputs standardised with running mean / variance.
class Perceptron {
 public:
  explicit Perceptron(std::size_t features);

  int predict(std::span<const double> x) const;
  // Folds x into the running statistics, then applies w += y x, b += y when
  // y (w.x + b) <= 0.
  void train(std::span<const double> x, int target);

  std::span<const double> weights() const { return w_; }
  double bias() const { return b_; }

 private:
  void standardize(std::span<const double> x, std::vector<double>& z) const;
  double score(std::span<const double> z) const;

  std::vector<double> w_;
  double b_ = 0.0;
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
  mutable std::vector<double> z_;
};

struct EcocRound {
  std::vector<int> codeword;
  std::vector<double> context;  // codeword_context(codeword)
  std::vector<double> losses;   // 0 at the true class, 1 elsewhere
};

class EcocSetup {
 public:
  EcocSetup(CodingMatrix matrix, std::size_t features);

  const CodingMatrix& matrix() const { return matrix_; }
  std::size_t classes() const { return matrix_.classes(); }
  std::size_t features() const { return features_; }

  // Codeword from the current perceptrons. DomainError for a label out of
  // range, ShapeError for a wrong feature count.
  EcocRound observe(std::span<const double> x, std::size_t label) const;
  // Trains each bit's perceptron on its target for `label`.
  void train(std::span<const double> x, std::size_t label);

 private:
  CodingMatrix matrix_;
  std::size_t features_;
  std::vector<Perceptron> bits_;
};

struct LabeledSample {
  std::vector<double> features;
  std::size_t label = 0;
};

// CSV whose last column is an integer label; a header row is required.
// Distinct labels are mapped to 0..C-1 in increasing order when
// `remap_labels` is set.
std::vector<LabeledSample> read_labeled_csv(std::istream& in,
                                            bool remap_labels = true);

// Features uniform on [-1,1] with +4 added on the feature matching the
// class, so every one-versus-all problem is linearly separable with margin.
std::vector<LabeledSample> separable_classes(std::size_t classes,
                                             std::size_t features,
                                             std::size_t samples, Rng& rng);

}  // namespace hsb
