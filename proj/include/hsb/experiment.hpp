#pragma once

// Config-driven experiment protocols behind the command-line tool.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsb/environments.hpp"
#include "hsb/hierarchy.hpp"
#include "hsb/policy.hpp"

namespace hsb {

// One competitor. Which fields matter depends on `name`:
//   hsb-bt, hsb-aps, sexp3, exp4-flat: depth (N = 2^depth) or cells
//   hsb-lg, hsb-arb:                    cells (or depth)
//   hsb-kgroup:                         cells (or depth), k
//   hsb-kary:                           k, depth (N = k^depth, 1-D only)
//   exp3, hamming:                      nothing
// For hsb-* and exp4-flat, eta is a number or "auto". "auto" applies the
// horizon-tuned rate and needs `regions`. Leaving eta out applies the same
// tuning with regions = 2.
struct AlgorithmSpec {
  std::string name;
  std::string label;  // defaults to name plus the size parameters
  std::optional<std::size_t> depth;
  std::optional<std::size_t> cells;
  std::optional<std::size_t> k;
  std::optional<double> eta;  // fixed value
  bool eta_auto = false;
  std::optional<std::size_t> regions;

  std::string display_label() const;
};

struct ExperimentConfig {
  std::string model = "stationary";  // stationary | switched
  double switch_fraction = 0.25;
  std::size_t horizon = 1000;
  std::vector<std::uint64_t> seeds{1};
  std::size_t presentations = 1;
  std::vector<AlgorithmSpec> algorithms;
  std::string output_dir = "out";
  bool write_rounds = false;
  std::size_t curve_stride = 1;
  std::size_t threads = 1;
  std::size_t arms = 0;    // replay: number of arms in the log (required)
  std::size_t epochs = 9;  // ECOC: number of reporting epochs
};

// Throws ConfigError naming the offending field path, e.g.
// "algorithms[1].eta: 'auto' requires 'regions'".
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

// A policy instance plus what is needed to score it.
struct PolicyBundle {
  std::unique_ptr<ContextualPolicy> policy;
  std::shared_ptr<const Structure> structure;  // hsb-* only
  std::optional<CellGrid> grid;                // competitor class grid
  double eta = 0.0;                            // hsb-* / exp4-flat
  double a_r = 0.0;                            // hsb-* only
};

// Builds structures once; make() then hands out fresh learners.
class PolicyFactory {
 public:
  PolicyFactory(const AlgorithmSpec& spec, std::size_t context_dims,
                std::size_t arms, std::size_t horizon);

  const AlgorithmSpec& spec() const { return spec_; }
  PolicyBundle make() const;
  std::shared_ptr<const Structure> structure() const { return structure_; }
  const std::optional<CellGrid>& grid() const { return grid_; }
  double eta() const { return eta_; }
  double a_r() const { return a_r_; }
  bool is_hsb() const { return structure_ != nullptr; }

 private:
  AlgorithmSpec spec_;
  std::size_t arms_;
  std::size_t horizon_;
  std::shared_ptr<const Structure> structure_;
  std::optional<CellGrid> grid_;
  double eta_ = 0.0;
  double a_r_ = 0.0;
};

struct AlgorithmSummary {
  std::string label;
  double final_average_loss = 0.0;  // ensemble mean of L_T / T
  double final_quarter_loss = 0.0;  // mean per-round loss over the last T/4
  double mean_loss = 0.0;           // mean cumulative loss
  double mean_best_mapping_loss = 0.0;
  double mean_regret = 0.0;
  std::optional<double> bound;  // regret bound for hsb-* at its eta
  std::optional<bool> bound_holds;
};

struct SyntheticResult {
  std::vector<AlgorithmSummary> algorithms;
  std::vector<std::vector<double>> curves;  // per algorithm, per round
  nlohmann::json summary;
};

// Datasets (one per seed) x presentations x algorithms. Writes
// curves.csv, regret.csv, summary.json and, when write_rounds is set,
// rounds/<label>_s<seed>_p<presentation>.csv under output_dir.
SyntheticResult run_synthetic(const ExperimentConfig& config);

struct ReplayRow {
  std::string label;
  std::uint64_t seed = 0;
  std::size_t total_loss = 0;
  std::size_t matched = 0;
  double click_rate = 0.0;
};

// Replays a logged CSV once per (algorithm, seed). Writes replay.csv and
// summary.json.
std::vector<ReplayRow> run_replay(const ExperimentConfig& config,
                                  const std::filesystem::path& log_path);

struct EcocResult {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> epoch_error_percent;  // [algorithm][epoch]
};

// ECOC classification over a labelled CSV. Writes epochs.csv and
// summary.json.
EcocResult run_ecoc(const ExperimentConfig& config,
                    const std::filesystem::path& data_path);

// Same protocol on in-memory samples, without touching the filesystem.
EcocResult ecoc_protocol(const ExperimentConfig& config,
                         const std::vector<LabeledSample>& samples);

// Builds the named structure for dump-structure.
Structure build_named_structure(const std::string& kind, std::size_t cells,
                                std::size_t dims, std::size_t k);

}  // namespace hsb
