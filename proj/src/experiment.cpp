#include "hsb/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "hsb/baselines.hpp"
#include "hsb/environments.hpp"
#include "hsb/errors.hpp"
#include "hsb/evaluation.hpp"
#include "hsb/expert_oracle.hpp"
#include "hsb/hsb_learner.hpp"

namespace hsb {
namespace {

using nlohmann::json;

const std::set<std::string>& algorithm_names() {
  static const std::set<std::string> names{
      "hsb-bt", "hsb-lg",  "hsb-aps",  "hsb-kary",  "hsb-kgroup",
      "hsb-arb", "exp3",   "sexp3",    "exp4-flat", "hamming"};
  return names;
}

[[noreturn]] void config_fail(const std::string& path, const std::string& what) {
  throw ConfigError(fmt::format("{}: {}", path, what));
}

// Re-roots a factory error under algorithms[i]: "depth: missing" becomes
// "algorithms[i].depth: missing"; messages without a field path are kept.
[[noreturn]] void algorithm_fail(std::size_t i, const std::string& msg) {
  const auto colon = msg.find(':');
  const bool has_field =
      colon != std::string::npos && colon > 0 &&
      msg.find_first_of(" \t") > colon;
  if (has_field)
    throw ConfigError(fmt::format("algorithms[{}].{}", i, msg));
  config_fail(fmt::format("algorithms[{}]", i), msg);
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok)
      config_fail(path.empty() ? key : path + "." + key, "unknown field");
  }
}

std::size_t read_size(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    config_fail(path, "expected a non-negative integer");
  return v.get<std::size_t>();
}

double read_number(const json& v, const std::string& path) {
  if (!v.is_number()) config_fail(path, "expected a number");
  return v.get<double>();
}

std::string read_string(const json& v, const std::string& path) {
  if (!v.is_string()) config_fail(path, "expected a string");
  return v.get<std::string>();
}

bool read_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) config_fail(path, "expected true or false");
  return v.get<bool>();
}

AlgorithmSpec algorithm_from_json(const json& v, const std::string& path) {
  if (!v.is_object()) config_fail(path, "expected an object");
  reject_unknown(v, path,
                 {"name", "label", "depth", "cells", "k", "eta", "regions"});
  AlgorithmSpec a;
  if (!v.contains("name")) config_fail(path + ".name", "missing");
  a.name = read_string(v["name"], path + ".name");
  if (!algorithm_names().count(a.name))
    config_fail(path + ".name", fmt::format("unknown algorithm '{}'", a.name));
  if (v.contains("label")) a.label = read_string(v["label"], path + ".label");
  if (v.contains("depth")) a.depth = read_size(v["depth"], path + ".depth");
  if (v.contains("cells")) a.cells = read_size(v["cells"], path + ".cells");
  if (v.contains("k")) a.k = read_size(v["k"], path + ".k");
  if (v.contains("regions"))
    a.regions = read_size(v["regions"], path + ".regions");
  if (v.contains("eta")) {
    const json& e = v["eta"];
    if (e.is_string()) {
      if (e.get<std::string>() != "auto")
        config_fail(path + ".eta", "expected a number or \"auto\"");
      a.eta_auto = true;
    } else {
      a.eta = read_number(e, path + ".eta");
      if (!(*a.eta > 0.0) || !std::isfinite(*a.eta))
        config_fail(path + ".eta", "must be positive");
    }
  }
  if (a.eta_auto && !a.regions)
    config_fail(path + ".eta", "\"auto\" requires 'regions'");
  if (a.regions && *a.regions == 0)
    config_fail(path + ".regions", "must be at least 1");
  if (a.depth && a.cells)
    config_fail(path, "give either 'depth' or 'cells', not both");
  if ((a.name == "hsb-kary" || a.name == "hsb-kgroup") && !a.k)
    config_fail(path + ".k", "missing");
  if (a.k && *a.k < 2) config_fail(path + ".k", "must be at least 2");
  if (a.name == "hsb-kary" && a.cells)
    config_fail(path + ".cells", "hsb-kary takes 'depth' (N = k^depth)");
  return a;
}

json algorithm_to_json(const AlgorithmSpec& a) {
  json j;
  j["name"] = a.name;
  if (!a.label.empty()) j["label"] = a.label;
  if (a.depth) j["depth"] = *a.depth;
  if (a.cells) j["cells"] = *a.cells;
  if (a.k) j["k"] = *a.k;
  if (a.eta_auto)
    j["eta"] = "auto";
  else if (a.eta)
    j["eta"] = *a.eta;
  if (a.regions) j["regions"] = *a.regions;
  return j;
}

std::uint64_t label_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t checked_pow(std::size_t base, std::size_t exp,
                        const std::string& path) {
  std::size_t v = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (v > (std::size_t{1} << 31) / base) config_fail(path, "too many cells");
    v *= base;
  }
  return v;
}

CellGrid grid_for(std::size_t dims, std::size_t cells) {
  if (dims == 1) return CellGrid({cells});
  return CellGrid::uniform(dims, cells);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

std::filesystem::path prepare_output(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec)
    throw IoError(fmt::format("cannot create {}: {}", dir, ec.message()));
  return p;
}

// Runs job(i) for i in [0, count) on up to `threads` workers. The first
// exception is rethrown after all workers join.
template <class Job>
void parallel_for(std::size_t count, std::size_t threads, Job job) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<PolicyFactory> make_factories(const ExperimentConfig& config,
                                          std::size_t dims, std::size_t arms,
                                          std::size_t horizon) {
  std::vector<PolicyFactory> out;
  std::set<std::string> labels;
  for (std::size_t i = 0; i < config.algorithms.size(); ++i) {
    const auto& spec = config.algorithms[i];
    if (spec.name == "hamming")
      config_fail(fmt::format("algorithms[{}].name", i),
                  "hamming is only available for run-ecoc");
    try {
      out.emplace_back(spec, dims, arms, horizon);
    } catch (const ConfigError& e) {
      algorithm_fail(i, e.what());
    }
    if (!labels.insert(spec.display_label()).second)
      config_fail(fmt::format("algorithms[{}].label", i),
                  fmt::format("duplicate label '{}'", spec.display_label()));
  }
  return out;
}

json structure_info(const PolicyFactory& f) {
  json j;
  if (f.grid()) j["cells"] = f.grid()->total_cells();
  if (f.eta() > 0.0) j["eta"] = f.eta();
  if (f.structure()) {
    j["nodes"] = f.structure()->size();
    j["psi"] = f.structure()->psi();
    j["hs"] = f.structure()->hs();
    j["a_r"] = f.a_r();
  }
  return j;
}

}  // namespace

std::string AlgorithmSpec::display_label() const {
  if (!label.empty()) return label;
  std::string s = name;
  if (k) s += fmt::format("-k{}", *k);
  if (depth) s += fmt::format("-d{}", *depth);
  if (cells) s += fmt::format("-n{}", *cells);
  return s;
}

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) config_fail("<root>", "expected an object");
  reject_unknown(doc, "",
                 {"environment", "horizon", "seeds", "presentations",
                  "algorithms", "output_dir", "write_rounds", "curve_stride",
                  "threads", "arms", "epochs"});
  ExperimentConfig c;
  if (doc.contains("environment")) {
    const json& env = doc["environment"];
    if (!env.is_object()) config_fail("environment", "expected an object");
    reject_unknown(env, "environment", {"model", "switch_fraction"});
    if (env.contains("model")) {
      c.model = read_string(env["model"], "environment.model");
      if (c.model != "stationary" && c.model != "switched")
        config_fail("environment.model",
                    "expected \"stationary\" or \"switched\"");
    }
    if (env.contains("switch_fraction")) {
      c.switch_fraction =
          read_number(env["switch_fraction"], "environment.switch_fraction");
      if (!(c.switch_fraction >= 0.0 && c.switch_fraction <= 1.0))
        config_fail("environment.switch_fraction", "must lie in [0,1]");
    }
  }
  if (doc.contains("horizon")) c.horizon = read_size(doc["horizon"], "horizon");
  if (doc.contains("seeds")) {
    const json& s = doc["seeds"];
    if (!s.is_array() || s.empty())
      config_fail("seeds", "expected a non-empty list");
    c.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto path = fmt::format("seeds[{}]", i);
      if (!s[i].is_number_integer() ||
          (!s[i].is_number_unsigned() && s[i].get<long long>() < 0))
        config_fail(path, "expected a non-negative integer");
      c.seeds.push_back(s[i].get<std::uint64_t>());
    }
  }
  if (doc.contains("presentations")) {
    c.presentations = read_size(doc["presentations"], "presentations");
    if (c.presentations == 0) config_fail("presentations", "must be positive");
  }
  if (doc.contains("algorithms")) {
    const json& a = doc["algorithms"];
    if (!a.is_array()) config_fail("algorithms", "expected a list");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < a.size(); ++i) {
      c.algorithms.push_back(
          algorithm_from_json(a[i], fmt::format("algorithms[{}]", i)));
      const auto label = c.algorithms.back().display_label();
      if (!labels.insert(label).second)
        config_fail(fmt::format("algorithms[{}].label", i),
                    fmt::format("duplicate label '{}'", label));
    }
  }
  if (doc.contains("output_dir"))
    c.output_dir = read_string(doc["output_dir"], "output_dir");
  if (doc.contains("write_rounds"))
    c.write_rounds = read_bool(doc["write_rounds"], "write_rounds");
  if (doc.contains("curve_stride")) {
    c.curve_stride = read_size(doc["curve_stride"], "curve_stride");
    if (c.curve_stride == 0) config_fail("curve_stride", "must be positive");
  }
  if (doc.contains("threads")) {
    c.threads = read_size(doc["threads"], "threads");
    if (c.threads == 0) config_fail("threads", "must be positive");
  }
  if (doc.contains("arms")) c.arms = read_size(doc["arms"], "arms");
  if (doc.contains("epochs")) {
    c.epochs = read_size(doc["epochs"], "epochs");
    if (c.epochs == 0) config_fail("epochs", "must be positive");
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["environment"] = {{"model", c.model},
                      {"switch_fraction", c.switch_fraction}};
  j["horizon"] = c.horizon;
  j["seeds"] = c.seeds;
  j["presentations"] = c.presentations;
  j["algorithms"] = json::array();
  for (const auto& a : c.algorithms) j["algorithms"].push_back(algorithm_to_json(a));
  j["output_dir"] = c.output_dir;
  j["write_rounds"] = c.write_rounds;
  j["curve_stride"] = c.curve_stride;
  j["threads"] = c.threads;
  j["arms"] = c.arms;
  j["epochs"] = c.epochs;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config {}", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return config_from_json(doc);
}

Structure build_named_structure(const std::string& kind, std::size_t cells,
                                std::size_t dims, std::size_t k) {
  const StructureKind sk = structure_kind_from_string(kind);
  if (dims == 0) throw ConfigError("dims must be positive");
  if (cells == 0) throw ConfigError("cells must be positive");
  const CellGrid grid = grid_for(dims, cells);
  switch (sk) {
    case StructureKind::kBinaryTree:
      return build_binary_tree(grid);
    case StructureKind::kKaryTree:
      return build_kary_tree(grid, k);
    case StructureKind::kLexicographic:
      return build_lexicographic_graph(grid);
    case StructureKind::kKGroupLexicographic:
      return build_kgroup_lexicographic(grid, k);
    case StructureKind::kArbitrarySplitting:
      return build_arbitrary_splitting(grid);
    case StructureKind::kArbitraryPositionSplitting:
      return build_arbitrary_position_splitting(grid);
    case StructureKind::kCustom:
      break;
  }
  throw ConfigError("custom structures are loaded from JSON, not built");
}

PolicyFactory::PolicyFactory(const AlgorithmSpec& spec,
                             std::size_t context_dims, std::size_t arms,
                             std::size_t horizon)
    : spec_(spec), arms_(arms), horizon_(horizon) {
  if (arms < 2) config_fail("arms", "at least two arms are required");
  if (horizon == 0) config_fail("horizon", "must be positive");
  const std::string& n = spec.name;
  if (n == "exp3" || n == "hamming") {
    grid_ = CellGrid(std::vector<std::size_t>(context_dims, 1));
    return;
  }

  std::size_t cells = 0;
  if (n == "hsb-kary") {
    if (!spec.depth) config_fail("depth", "missing");
    cells = checked_pow(*spec.k, *spec.depth, "depth");
  } else if (spec.cells) {
    cells = *spec.cells;
  } else if (spec.depth) {
    cells = checked_pow(2, *spec.depth, "depth");
  } else {
    config_fail("depth", "missing ('depth' or 'cells' is required)");
  }
  if (cells == 0) config_fail("cells", "must be positive");
  if (n == "hsb-kary" && context_dims != 1)
    config_fail("name", "hsb-kary needs a one-dimensional context");
  grid_ = grid_for(context_dims, cells);

  if (n == "sexp3") return;

  if (n == "exp4-flat") {
    // Uniform prior over the M^N mappings: ln(1/beta) = N ln M.
    if (spec.eta) {
      eta_ = *spec.eta;
    } else {
      eta_ = std::sqrt(2.0 * static_cast<double>(cells) *
                       std::log(static_cast<double>(arms)) /
                       (static_cast<double>(arms) * static_cast<double>(horizon)));
    }
    // Fail at configuration time rather than in the first run.
    double count = std::pow(static_cast<double>(arms), static_cast<double>(cells));
    if (count > static_cast<double>(kExpertCap))
      config_fail("cells", fmt::format("{}^{} mappings exceed the expert cap {}",
                                       arms, cells, kExpertCap));
    return;
  }

  const std::size_t k = spec.k.value_or(2);
  static const std::pair<const char*, const char*> kinds[] = {
      {"hsb-bt", "binary-tree"},
      {"hsb-kary", "kary-tree"},
      {"hsb-lg", "lexicographic"},
      {"hsb-kgroup", "kgroup-lexicographic"},
      {"hsb-arb", "arbitrary-splitting"},
      {"hsb-aps", "arbitrary-position-splitting"}};
  std::string kind;
  for (const auto& [alg, s] : kinds)
    if (n == alg) kind = s;
  structure_ = std::make_shared<const Structure>(
      build_named_structure(kind, cells, context_dims, k));
  // Without an estimate of R the bound is stated for the worst case R = N,
  // which covers every cell -> arm mapping.
  const std::size_t regions = spec.regions.value_or(cells);
  a_r_ = structure_->params().a_r(regions, arms);
  if (spec.eta)
    eta_ = *spec.eta;
  else
    eta_ = structure_eta(*structure_, arms, static_cast<double>(horizon),
                         spec.regions.value_or(2));
}

PolicyBundle PolicyFactory::make() const {
  PolicyBundle b;
  b.structure = structure_;
  b.grid = grid_;
  b.eta = eta_;
  b.a_r = a_r_;
  const std::string& n = spec_.name;
  const double T = static_cast<double>(horizon_);
  if (structure_) {
    b.policy = std::make_unique<HsbLearner>(structure_, arms_, eta_);
  } else if (n == "exp3") {
    b.policy = std::make_unique<Exp3>(arms_, T);
  } else if (n == "sexp3") {
    b.policy = std::make_unique<SExp3>(*grid_, arms_, T);
  } else if (n == "exp4-flat") {
    b.policy = std::make_unique<FlatMixture>(
        FlatMixture::uniform_all_mappings(*grid_, arms_, eta_));
  } else {
    throw ConfigError(fmt::format("{} is not an online policy", n));
  }
  return b;
}

// ---------------------------------------------------------------------------

SyntheticResult run_synthetic(const ExperimentConfig& config) {
  const auto phase = phase_from_string(config.model);
  const std::size_t T = config.horizon;
  const std::size_t arms = SinusoidalBernoulliEnv::kArms;
  if (config.algorithms.empty()) config_fail("algorithms", "empty");
  const auto factories = make_factories(config, 1, arms, T);
  const auto out_dir = prepare_output(config.output_dir);
  if (config.write_rounds) prepare_output((out_dir / "rounds").string());

  const std::size_t A = factories.size();
  const std::size_t D = config.seeds.size();
  const std::size_t P = config.presentations;

  struct PairResult {
    std::vector<double> curve_sum;  // sum over presentations of L_t / t
    double loss_sum = 0.0;
    double best_loss = 0.0;
    double quarter_sum = 0.0;
  };
  std::vector<PairResult> pairs(A * D);

  parallel_for(A * D, config.threads, [&](std::size_t job) {
    const std::size_t a = job / D;
    const std::size_t d = job % D;
    const std::uint64_t seed = config.seeds[d];
    SinusoidalBernoulliEnv env(phase, T, seed, config.switch_fraction);
    const auto history = env.generate();
    const std::string label = factories[a].spec().display_label();
    PairResult& r = pairs[job];
    r.curve_sum.assign(T, 0.0);
    r.best_loss = best_mapping_loss(history, *factories[a].grid()).loss;
    const std::size_t quarter_start = T - T / 4;
    for (std::size_t p = 0; p < P; ++p) {
      auto bundle = factories[a].make();
      Rng rng(derive_seed(seed, label_hash(label), p));
      std::vector<RoundRecord> records;
      const auto losses = run_online(*bundle.policy, history, rng,
                                     config.write_rounds ? &records : nullptr);
      double cum = 0.0;
      double quarter = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        cum += losses[t];
        r.curve_sum[t] += cum / static_cast<double>(t + 1);
        if (t >= quarter_start) quarter += losses[t];
      }
      r.loss_sum += cum;
      r.quarter_sum +=
          T / 4 == 0 ? 0.0 : quarter / static_cast<double>(T - quarter_start);
      if (config.write_rounds) {
        std::ostringstream os;
        write_round_records(records, arms, os);
        write_text(out_dir / "rounds" /
                       fmt::format("{}_s{}_p{}.csv", label, seed, p),
                   os.str());
      }
    }
  });

  SyntheticResult result;
  const double runs = static_cast<double>(D * P);
  for (std::size_t a = 0; a < A; ++a) {
    const auto& f = factories[a];
    AlgorithmSummary s;
    s.label = f.spec().display_label();
    std::vector<double> curve(T, 0.0);
    double loss = 0.0, best = 0.0, quarter = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      const auto& r = pairs[a * D + d];
      for (std::size_t t = 0; t < T; ++t) curve[t] += r.curve_sum[t];
      loss += r.loss_sum;
      best += r.best_loss * static_cast<double>(P);
      quarter += r.quarter_sum;
    }
    for (double& v : curve) v /= runs;
    s.final_average_loss = T ? curve.back() : 0.0;
    s.final_quarter_loss = quarter / runs;
    s.mean_loss = loss / runs;
    s.mean_best_mapping_loss = best / runs;
    s.mean_regret = s.mean_loss - s.mean_best_mapping_loss;
    if (f.is_hsb()) {
      const auto& st = *f.structure();
      const auto check = check_regret_bound(
          s.mean_regret, static_cast<double>(st.psi()),
          static_cast<double>(st.hs()), f.a_r(), arms, T, f.eta());
      s.bound = check.bound;
      s.bound_holds = check.pass;
    }
    result.algorithms.push_back(s);
    result.curves.push_back(std::move(curve));
  }

  // curves.csv: t, then one averaged-accumulated-loss column per algorithm.
  {
    std::string text = "t";
    for (const auto& s : result.algorithms) text += "," + s.label;
    text += '\n';
    for (std::size_t t = 0; t < T; ++t) {
      if ((t + 1) % config.curve_stride != 0 && t + 1 != T) continue;
      text += fmt::format("{}", t + 1);
      for (std::size_t a = 0; a < A; ++a)
        text += fmt::format(",{}", result.curves[a][t]);
      text += '\n';
    }
    write_text(out_dir / "curves.csv", text);
  }
  {
    std::string text =
        "label,final_average_loss,final_quarter_loss,mean_loss,"
        "mean_best_mapping_loss,mean_regret,bound,bound_holds\n";
    for (const auto& s : result.algorithms)
      text += fmt::format(
          "{},{},{},{},{},{},{},{}\n", s.label, s.final_average_loss,
          s.final_quarter_loss, s.mean_loss, s.mean_best_mapping_loss,
          s.mean_regret, s.bound ? fmt::format("{}", *s.bound) : "",
          s.bound_holds ? (*s.bound_holds ? "1" : "0") : "");
    write_text(out_dir / "regret.csv", text);
  }

  json summary;
  summary["command"] = "run-synthetic";
  summary["config"] = config_to_json(config);
  summary["algorithms"] = json::array();
  for (std::size_t a = 0; a < A; ++a) {
    const auto& s = result.algorithms[a];
    json j = structure_info(factories[a]);
    j["label"] = s.label;
    j["final_average_loss"] = s.final_average_loss;
    j["final_quarter_loss"] = s.final_quarter_loss;
    j["mean_loss"] = s.mean_loss;
    j["mean_best_mapping_loss"] = s.mean_best_mapping_loss;
    j["mean_regret"] = s.mean_regret;
    if (s.bound) {
      j["bound"] = *s.bound;
      j["bound_holds"] = *s.bound_holds;
    }
    summary["algorithms"].push_back(j);
  }
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  result.summary = std::move(summary);
  return result;
}

// ---------------------------------------------------------------------------

std::vector<ReplayRow> run_replay(const ExperimentConfig& config,
                                  const std::filesystem::path& log_path) {
  std::ifstream in(log_path);
  if (!in) throw IoError(fmt::format("cannot open log {}", log_path.string()));
  const auto log = read_logged_rounds(in);
  if (config.arms < 2) config_fail("arms", "replay needs 'arms' >= 2");
  for (std::size_t i = 0; i < log.size(); ++i)
    if (log[i].displayed_arm >= config.arms)
      throw ParseError(i + 2, fmt::format("displayed arm {} out of range for "
                                          "{} arms",
                                          log[i].displayed_arm, config.arms));
  if (config.algorithms.empty()) config_fail("algorithms", "empty");
  const std::size_t dims = log.empty() ? 1 : log[0].context.size();
  const std::size_t horizon = std::max<std::size_t>(1, log.size());
  const auto factories = make_factories(config, dims, config.arms, horizon);
  const auto out_dir = prepare_output(config.output_dir);

  const std::size_t A = factories.size();
  const std::size_t S = config.seeds.size();
  std::vector<ReplayRow> rows(A * S);
  parallel_for(A * S, config.threads, [&](std::size_t job) {
    const auto& f = factories[job / S];
    const std::uint64_t seed = config.seeds[job % S];
    const std::string label = f.spec().display_label();
    auto bundle = f.make();
    Rng rng(derive_seed(seed, label_hash(label), 0));
    const auto r = replay_evaluate(*bundle.policy, log, rng);
    rows[job] = {label, seed, r.total_loss, r.matched, r.click_rate()};
  });

  std::string text = "label,seed,L,R,click_rate\n";
  for (const auto& r : rows)
    text += fmt::format("{},{},{},{},{}\n", r.label, r.seed, r.total_loss,
                        r.matched, r.click_rate);
  write_text(out_dir / "replay.csv", text);

  json summary;
  summary["command"] = "run-replay";
  summary["config"] = config_to_json(config);
  summary["log"] = log_path.string();
  summary["rounds"] = log.size();
  summary["algorithms"] = json::array();
  for (std::size_t a = 0; a < A; ++a) {
    double click = 0.0;
    std::size_t matched = 0;
    for (std::size_t s = 0; s < S; ++s) {
      click += rows[a * S + s].click_rate;
      matched += rows[a * S + s].matched;
    }
    summary["algorithms"].push_back(
        {{"label", factories[a].spec().display_label()},
         {"mean_click_rate", click / static_cast<double>(S)},
         {"mean_matched", static_cast<double>(matched) / static_cast<double>(S)}});
  }
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return rows;
}

// ---------------------------------------------------------------------------

EcocResult ecoc_protocol(const ExperimentConfig& config,
                         const std::vector<LabeledSample>& samples) {
  if (samples.empty()) throw ShapeError("no labelled samples");
  if (config.algorithms.empty()) config_fail("algorithms", "empty");
  std::size_t classes = 0;
  for (const auto& s : samples) classes = std::max(classes, s.label + 1);
  if (classes < 2) throw DomainError("ECOC needs at least two classes");
  const std::size_t features = samples[0].features.size();

  EcocSetup setup(CodingMatrix::one_versus_all(classes), features);
  const std::size_t code = setup.matrix().code_length();
  std::vector<FullInfoRound> stream;
  std::vector<std::size_t> hamming;
  stream.reserve(samples.size());
  for (const auto& s : samples) {
    auto r = setup.observe(s.features, s.label);
    hamming.push_back(hamming_decode(r.codeword, setup.matrix()));
    stream.push_back({std::move(r.context), std::move(r.losses)});
    setup.train(s.features, s.label);
  }

  const std::size_t n = samples.size();
  const std::size_t epochs = std::min(config.epochs, n);
  const std::size_t epoch_len = n / epochs;
  auto epoch_errors = [&](const std::vector<double>& loss) {
    std::vector<double> e(epochs, 0.0);
    for (std::size_t k = 0; k < epochs; ++k) {
      double sum = 0.0;
      for (std::size_t t = k * epoch_len; t < (k + 1) * epoch_len; ++t)
        sum += loss[t];
      e[k] = 100.0 * sum / static_cast<double>(epoch_len);
    }
    return e;
  };

  // Bandit learners default to one cell per codeword.
  std::vector<AlgorithmSpec> specs = config.algorithms;
  for (auto& s : specs)
    if (s.name != "exp3" && s.name != "hamming" && s.name != "hsb-kary" &&
        !s.depth && !s.cells)
      s.depth = code;

  EcocResult result;
  std::vector<std::unique_ptr<PolicyFactory>> factories(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    result.labels.push_back(specs[i].display_label());
    if (specs[i].name == "hamming") continue;
    try {
      factories[i] =
          std::make_unique<PolicyFactory>(specs[i], code, classes, n);
    } catch (const ConfigError& e) {
      algorithm_fail(i, e.what());
    }
  }
  result.epoch_error_percent.assign(specs.size(), {});

  const std::size_t S = config.seeds.size();
  std::vector<std::vector<double>> per_job(specs.size() * S);
  parallel_for(specs.size() * S, config.threads, [&](std::size_t job) {
    const std::size_t a = job / S;
    std::vector<double> loss(n);
    if (specs[a].name == "hamming") {
      for (std::size_t t = 0; t < n; ++t)
        loss[t] = hamming[t] == samples[t].label ? 0.0 : 1.0;
    } else {
      auto bundle = factories[a]->make();
      Rng rng(derive_seed(config.seeds[job % S], label_hash(result.labels[a]), 0));
      loss = run_online(*bundle.policy, stream, rng);
    }
    per_job[job] = epoch_errors(loss);
  });
  for (std::size_t a = 0; a < specs.size(); ++a) {
    std::vector<double> mean(epochs, 0.0);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t k = 0; k < epochs; ++k) mean[k] += per_job[a * S + s][k];
    for (double& v : mean) v /= static_cast<double>(S);
    result.epoch_error_percent[a] = std::move(mean);
  }
  return result;
}

EcocResult run_ecoc(const ExperimentConfig& config,
                    const std::filesystem::path& data_path) {
  std::ifstream in(data_path);
  if (!in)
    throw IoError(fmt::format("cannot open data {}", data_path.string()));
  const auto samples = read_labeled_csv(in);
  const auto result = ecoc_protocol(config, samples);
  const auto out_dir = prepare_output(config.output_dir);

  std::string text = "epoch";
  for (const auto& l : result.labels) text += "," + l;
  text += '\n';
  const std::size_t epochs =
      result.epoch_error_percent.empty() ? 0 : result.epoch_error_percent[0].size();
  for (std::size_t k = 0; k < epochs; ++k) {
    text += fmt::format("{}", k + 1);
    for (const auto& e : result.epoch_error_percent)
      text += fmt::format(",{}", e[k]);
    text += '\n';
  }
  write_text(out_dir / "epochs.csv", text);

  json summary;
  summary["command"] = "run-ecoc";
  summary["config"] = config_to_json(config);
  summary["data"] = data_path.string();
  summary["samples"] = samples.size();
  summary["algorithms"] = json::array();
  for (std::size_t a = 0; a < result.labels.size(); ++a)
    summary["algorithms"].push_back(
        {{"label", result.labels[a]},
         {"epoch_error_percent", result.epoch_error_percent[a]}});
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return result;
}

}  // namespace hsb
