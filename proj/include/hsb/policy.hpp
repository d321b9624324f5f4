#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hsb/hierarchy.hpp"
#include "hsb/rng.hpp"

namespace hsb {

// One arm draw together with the simplex that produced it. update() needs
// the probability of the chosen arm, so the decision carries it back.
struct ArmDecision {
  std::size_t arm = 0;
  std::vector<double> simplex;
  CellIndex cell = 0;
  std::uint64_t round = 0;   // updates completed before this draw
  std::uint64_t ticket = 0;  // identifies the select call that made it

  double chosen_probability() const { return simplex.at(arm); }
};

// Select/update protocol shared by every learner. An update must pass the
// decision returned by the immediately preceding select (ProtocolError
// otherwise). A select that is never followed by an update is simply
// discarded; the replay evaluator relies on this.
class ContextualPolicy {
 public:
  virtual ~ContextualPolicy() = default;

  virtual std::string name() const = 0;
  virtual std::size_t arms() const = 0;
  virtual ArmDecision select(std::span<const double> context, Rng& rng) = 0;
  virtual void update(const ArmDecision& decision, double loss) = 0;
};

// One interaction, as written to the round-record CSV.
struct RoundRecord {
  std::uint64_t t = 0;  // 1-based
  CellIndex cell = 0;
  std::size_t arm = 0;
  double loss = 0.0;
  std::vector<double> simplex;
};

// Tracks select/update alternation for a policy implementation.
class ProtocolGuard {
 public:
  std::uint64_t rounds() const { return rounds_; }
  bool pending() const { return pending_; }

  // Stamps a new decision with the current round and a fresh ticket.
  void begin_select(ArmDecision& d) {
    pending_ = true;
    d.round = rounds_;
    d.ticket = ++ticket_;
  }
  void begin_update(const ArmDecision& d) const {
    if (!pending_) throw_protocol("update without a fresh decision");
    if (d.ticket != ticket_ || d.round != rounds_)
      throw_protocol("update with a stale decision");
  }
  void finish_update() {
    pending_ = false;
    ++rounds_;
  }
  void restore(std::uint64_t rounds) {
    rounds_ = rounds;
    pending_ = false;
  }

 private:
  [[noreturn]] static void throw_protocol(const char* what);
  std::uint64_t rounds_ = 0;
  std::uint64_t ticket_ = 0;
  bool pending_ = false;
};

// Rejects losses outside [0,1] (DomainError).
void check_loss(double loss);

}  // namespace hsb
