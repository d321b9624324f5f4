// hsb: experiment runner and verification entry point.
//
// Human-readable progress goes to stderr; the JSON summary goes to stdout.
// Exit codes: 0 success, 1 verification failure, 2 bad configuration or
// usage, 3 I/O or parse failure, 4 any other error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "hsb/environments.hpp"
#include "hsb/errors.hpp"
#include "hsb/experiment.hpp"
#include "hsb/hierarchy_json.hpp"
#include "hsb/verify.hpp"

namespace {

using nlohmann::json;

struct Overrides {
  std::optional<std::size_t> horizon;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> presentations;
  std::optional<std::string> output;
  std::optional<std::size_t> threads;
  bool write_rounds = false;
  std::optional<std::string> model;
  std::optional<std::size_t> arms;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> curve_stride;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--horizon", o.horizon, "Rounds per dataset (T)");
  cmd->add_option("--seeds", o.seeds, "Dataset seeds, replacing the config list")
      ->delimiter(',');
  cmd->add_option("--presentations", o.presentations,
                  "Presentations per dataset");
  cmd->add_option("--output", o.output, "Output directory");
  cmd->add_option("--threads", o.threads, "Worker threads");
  cmd->add_flag("--write-rounds", o.write_rounds, "Write per-run round CSVs");
  cmd->add_option("--model", o.model, "stationary or switched");
  cmd->add_option("--arms", o.arms, "Arm count of a replay log");
  cmd->add_option("--epochs", o.epochs, "ECOC reporting epochs");
  cmd->add_option("--curve-stride", o.curve_stride, "Row stride of curves.csv");
}

hsb::ExperimentConfig load_with_overrides(const std::string& path,
                                          const Overrides& o) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw hsb::IoError(fmt::format("cannot open config {}", path));
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw hsb::ConfigError(fmt::format("{}: {}", path, e.what()));
    }
  }
  // Overrides go through the same validation as the file.
  if (!doc.is_object()) throw hsb::ConfigError("<root>: expected an object");
  if (o.horizon) doc["horizon"] = *o.horizon;
  if (!o.seeds.empty()) doc["seeds"] = o.seeds;
  if (o.presentations) doc["presentations"] = *o.presentations;
  if (o.output) doc["output_dir"] = *o.output;
  if (o.threads) doc["threads"] = *o.threads;
  if (o.write_rounds) doc["write_rounds"] = true;
  if (o.model) doc["environment"]["model"] = *o.model;
  if (o.arms) doc["arms"] = *o.arms;
  if (o.epochs) doc["epochs"] = *o.epochs;
  if (o.curve_stride) doc["curve_stride"] = *o.curve_stride;
  return hsb::config_from_json(doc);
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

json read_summary(const hsb::ExperimentConfig& config) {
  std::ifstream in(std::filesystem::path(config.output_dir) / "summary.json");
  return json::parse(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical contextual bandits: experiments and checks"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;

  auto* synth = app.add_subcommand("run-synthetic",
                                   "Sinusoidal Bernoulli ensemble protocol");
  synth->add_option("--config", config_path, "JSON config")->required();
  add_overrides(synth, overrides);

  std::string log_path;
  auto* replay = app.add_subcommand("run-replay", "Replay a logged CSV");
  replay->add_option("--config", config_path, "JSON config")->required();
  replay->add_option("--log", log_path, "Logged rounds CSV")->required();
  add_overrides(replay, overrides);

  std::string data_path;
  auto* ecoc = app.add_subcommand("run-ecoc", "ECOC classification stream");
  ecoc->add_option("--config", config_path, "JSON config")->required();
  ecoc->add_option("--data", data_path, "Labelled CSV")->required();
  add_overrides(ecoc, overrides);

  std::string mutation = "none";
  auto* verify = app.add_subcommand("verify", "Run the property suites");
  verify
      ->add_option("--mutation", mutation,
                   "Inject a recursion fault: none, gamma-all-members, "
                   "drop-prior-split")
      ->check(CLI::IsMember({"none", "gamma-all-members", "drop-prior-split"}));

  std::string kind;
  std::size_t cells = 0, depth = 0, dims = 1, k = 2;
  std::string structure_out;
  auto* dump = app.add_subcommand("dump-structure", "Print a structure as JSON");
  dump->add_option("--kind", kind, "binary-tree, kary-tree, lexicographic, "
                                   "kgroup-lexicographic, arbitrary-splitting, "
                                   "arbitrary-position-splitting")
      ->required();
  auto* cells_opt = dump->add_option("--cells", cells, "Number of cells N");
  dump->add_option("--depth", depth, "N = k^depth (2^depth unless kary-tree)")
      ->excludes(cells_opt);
  dump->add_option("--dims", dims, "Context dimensions");
  dump->add_option("--k", k, "Branching / group size");
  dump->add_option("--output", structure_out, "Write JSON here, not stdout");

  std::size_t gen_rounds = 1000;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  auto* make_log = app.add_subcommand(
      "make-log", "Uniform-logging CSV from the stationary sinusoidal model");
  make_log->add_option("--rounds", gen_rounds, "Rounds");
  make_log->add_option("--seed", gen_seed, "Seed");
  make_log->add_option("--output", gen_out, "CSV path")->required();

  std::size_t classes = 6, features = 8;
  auto* make_classes = app.add_subcommand(
      "make-classes", "Linearly separable labelled CSV for run-ecoc");
  make_classes->add_option("--classes", classes, "Classes");
  make_classes->add_option("--features", features, "Features");
  make_classes->add_option("--samples", gen_rounds, "Samples");
  make_classes->add_option("--seed", gen_seed, "Seed");
  make_classes->add_option("--output", gen_out, "CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto config = load_with_overrides(config_path, overrides);
      const auto result = hsb::run_synthetic(config);
      for (const auto& a : result.algorithms)
        std::cerr << fmt::format(
            "{:<24} final avg loss {:.5f}  last-quarter {:.5f}  regret {:.1f}{}\n",
            a.label, a.final_average_loss, a.final_quarter_loss, a.mean_regret,
            a.bound ? fmt::format("  bound {:.1f} ({})", *a.bound,
                                  *a.bound_holds ? "holds" : "VIOLATED")
                    : "");
      print_json(result.summary);
    } else if (*replay) {
      const auto config = load_with_overrides(config_path, overrides);
      const auto rows = hsb::run_replay(config, log_path);
      for (const auto& r : rows)
        std::cerr << fmt::format("{:<24} seed {:<6} L {:<8} R {:<8} click {:.5f}\n",
                                 r.label, r.seed, r.total_loss, r.matched,
                                 r.click_rate);
      print_json(read_summary(config));
    } else if (*ecoc) {
      const auto config = load_with_overrides(config_path, overrides);
      const auto result = hsb::run_ecoc(config, data_path);
      for (std::size_t a = 0; a < result.labels.size(); ++a) {
        std::string line = fmt::format("{:<24}", result.labels[a]);
        for (double e : result.epoch_error_percent[a])
          line += fmt::format(" {:6.2f}", e);
        std::cerr << line << '\n';
      }
      print_json(read_summary(config));
    } else if (*verify) {
      auto variant = hsb::RecursionVariant::kExact;
      if (mutation == "gamma-all-members")
        variant = hsb::RecursionVariant::kGammaAllMembers;
      else if (mutation == "drop-prior-split")
        variant = hsb::RecursionVariant::kDropPriorSplit;
      const auto report = hsb::verify(variant);
      for (const auto& s : report.suites)
        std::cerr << fmt::format("{} {:<26} {:7.2f}s  {}\n",
                                 s.pass ? "PASS" : "FAIL", s.name, s.seconds,
                                 s.detail);
      auto j = report.to_json();
      j["mutation"] = mutation;
      print_json(j);
      return report.pass() ? 0 : 1;
    } else if (*dump) {
      std::size_t n = cells;
      if (n == 0) {
        const std::size_t base = kind == "kary-tree" ? k : 2;
        n = 1;
        for (std::size_t i = 0; i < depth; ++i) n *= base;
      }
      const auto s = hsb::build_named_structure(kind, n, dims, k);
      const auto j = hsb::structure_to_json(s);
      std::cerr << fmt::format("{}: {} nodes over {} cells, psi {}, H_S {}\n",
                               kind, s.size(), s.grid().total_cells(), s.psi(),
                               s.hs());
      if (structure_out.empty()) {
        print_json(j);
      } else {
        std::ofstream out(structure_out);
        if (!out) throw hsb::IoError("cannot write " + structure_out);
        out << j.dump(2) << '\n';
        print_json({{"command", "dump-structure"},
                    {"kind", kind},
                    {"nodes", s.size()},
                    {"cells", s.grid().total_cells()},
                    {"psi", s.psi()},
                    {"hs", s.hs()},
                    {"output", structure_out}});
      }
    } else if (*make_log) {
      hsb::SinusoidalBernoulliEnv env(
          hsb::SinusoidalBernoulliEnv::Phase::kStationary, gen_rounds, gen_seed);
      const auto rounds = env.generate();
      hsb::Rng rng(hsb::derive_seed(gen_seed, 0x6c6f67, 0));
      const auto log = hsb::uniform_logging(rounds, env.kArms, rng);
      std::ofstream out(gen_out);
      if (!out) throw hsb::IoError("cannot write " + gen_out);
      hsb::write_logged_rounds(log, out);
      print_json({{"command", "make-log"},
                  {"rounds", log.size()},
                  {"arms", env.kArms},
                  {"output", gen_out}});
    } else if (*make_classes) {
      hsb::Rng rng(gen_seed);
      const auto samples =
          hsb::separable_classes(classes, features, gen_rounds, rng);
      std::ofstream out(gen_out);
      if (!out) throw hsb::IoError("cannot write " + gen_out);
      for (std::size_t f = 0; f < features; ++f) out << "x" << f + 1 << ',';
      out << "label\n";
      for (const auto& s : samples) {
        for (double x : s.features) out << fmt::format("{},", x);
        out << s.label << '\n';
      }
      print_json({{"command", "make-classes"},
                  {"samples", samples.size()},
                  {"classes", classes},
                  {"output", gen_out}});
    }
  } catch (const hsb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const hsb::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 3;
  } catch (const hsb::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
