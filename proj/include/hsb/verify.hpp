#pragma once

// Property suites checking the hierarchical learner against brute-force
// expert enumeration, plus the regret and quantization bound checks.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsb/hierarchy.hpp"
#include "hsb/hsb_learner.hpp"

namespace hsb {

struct SuiteResult {
  std::string name;
  bool pass = false;
  double max_error = 0.0;  // worst observed deviation (suite specific)
  std::string detail;
  double seconds = 0.0;
};

struct VerifyReport {
  std::vector<SuiteResult> suites;

  bool pass() const;
  nlohmann::json to_json() const;
};

// A structure and arm count small enough to enumerate every expert.
struct OracleInstance {
  std::string label;
  std::shared_ptr<const Structure> structure;
  std::size_t arms = 2;
};

// Two instances per builder, N <= 4 and M <= 3.
std::vector<OracleInstance> oracle_instances();

struct EquivalenceOptions {
  std::size_t seeds = 50;
  std::size_t rounds = 200;
  double tolerance = 1e-9;
  RecursionVariant variant = RecursionVariant::kExact;
};

// Fresh learners have log w = 0 at every node (within 1e-12) and the
// enumerated priors of every node sum to one.
SuiteResult check_initialization(
    RecursionVariant variant = RecursionVariant::kExact);

// Random histories: after every update, w at every node equals the
// enumerated weighted sum over the node's experts (relative error).
SuiteResult check_node_weights(const EquivalenceOptions& options = {});

// Random histories: the learner's simplex equals the flat mixture's simplex
// over the root experts when both see the same estimated losses.
SuiteResult check_simplex(const EquivalenceOptions& options = {});

// Flat mixture over the N = 2, M = 2 binary-tree experts on switching
// adversarial losses: mean regret against every expert stays under
// ln(1/beta)/eta + M T eta / 2.
SuiteResult check_mixture_bound(std::size_t seeds = 20,
                                std::size_t horizon = 5000);

// Quantization gap of the sinusoidal mean-loss family against
// 2 c sqrt(n) / N^(1/n) for N in {4, 16, 64, 256}.
SuiteResult check_quantization_bound();

// Every suite above; the variant is injected into the learner.
VerifyReport verify(RecursionVariant variant = RecursionVariant::kExact);

}  // namespace hsb
