#include "hsb/environments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>

#include <fmt/format.h>

#include "hsb/errors.hpp"

namespace hsb {

// ---------------------------------------------------------------------------
// Sinusoidal model

SinusoidalBernoulliEnv::SinusoidalBernoulliEnv(Phase phase,
                                               std::size_t horizon,
                                               std::uint64_t seed,
                                               double switch_fraction)
    : phase_(phase), horizon_(horizon), rng_(seed) {
  if (!(switch_fraction >= 0.0 && switch_fraction <= 1.0))
    throw ConfigError("switch fraction must lie in [0,1]");
  switch_round_ = phase == Phase::kSwitched
                      ? static_cast<std::size_t>(
                            std::floor(switch_fraction *
                                       static_cast<double>(horizon)))
                      : horizon;
}

std::array<double, SinusoidalBernoulliEnv::kArms>
SinusoidalBernoulliEnv::mean_losses(double s, bool second_model) {
  constexpr double pi = std::numbers::pi;
  const double a = 0.5 + 0.5 * std::sin(2.0 * pi * s);
  const double b = std::sin(pi * s);
  const double c = s;
  if (second_model) return {b, c, a};
  return {a, b, c};
}

FullInfoRound SinusoidalBernoulliEnv::step(std::size_t t) {
  if (t == 0 || t > horizon_)
    throw DomainError("round " + std::to_string(t) + " outside the horizon");
  const double s = rng_.uniform();
  const auto p = mean_losses(s, t > switch_round_);
  FullInfoRound r;
  r.context = {s};
  r.losses.resize(kArms);
  for (std::size_t i = 0; i < kArms; ++i)
    r.losses[i] = rng_.bernoulli(p[i]) ? 1.0 : 0.0;
  return r;
}

std::vector<FullInfoRound> SinusoidalBernoulliEnv::generate() {
  std::vector<FullInfoRound> rounds;
  rounds.reserve(horizon_);
  for (std::size_t t = 1; t <= horizon_; ++t) rounds.push_back(step(t));
  return rounds;
}

SinusoidalBernoulliEnv::Phase phase_from_string(const std::string& name) {
  if (name == "stationary") return SinusoidalBernoulliEnv::Phase::kStationary;
  if (name == "switched") return SinusoidalBernoulliEnv::Phase::kSwitched;
  throw ConfigError("unknown environment model '" + name + "'");
}

std::string to_string(SinusoidalBernoulliEnv::Phase phase) {
  return phase == SinusoidalBernoulliEnv::Phase::kStationary ? "stationary"
                                                             : "switched";
}

std::vector<double> run_online(ContextualPolicy& policy,
                               std::span<const FullInfoRound> rounds,
                               Rng& rng, std::vector<RoundRecord>* records) {
  std::vector<double> incurred;
  incurred.reserve(rounds.size());
  for (std::size_t t = 0; t < rounds.size(); ++t) {
    const auto& r = rounds[t];
    if (r.losses.size() != policy.arms())
      throw ShapeError("loss vector length does not match the arm count");
    auto d = policy.select(r.context, rng);
    const double loss = r.losses[d.arm];
    policy.update(d, loss);
    incurred.push_back(loss);
    if (records)
      records->push_back({t + 1, d.cell, d.arm, loss, std::move(d.simplex)});
  }
  return incurred;
}

// ---------------------------------------------------------------------------
// CSV helpers

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(std::string_view field, std::size_t row) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty())
    throw ParseError(row, "not a number: '" + std::string(field) + "'");
  return v;
}

long long parse_int(std::string_view field, std::size_t row) {
  long long v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty())
    throw ParseError(row, "not an integer: '" + std::string(field) + "'");
  return v;
}

bool blank(std::string_view line) { return trim(line).empty(); }

}  // namespace

std::vector<LoggedRound> read_logged_rounds(std::istream& in) {
  std::string line;
  std::size_t row = 0;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++row;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() < 3 || fields[fields.size() - 2] != "displayed_arm" ||
        fields.back() != "clicked")
      throw ParseError(row,
                       "expected header 's_1,...,s_n,displayed_arm,clicked'");
    columns = fields.size();
    break;
  }
  if (columns == 0) throw ParseError(row, "missing header");

  std::vector<LoggedRound> out;
  while (std::getline(in, line)) {
    ++row;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != columns)
      throw ParseError(row, "expected " + std::to_string(columns) +
                                " fields, got " +
                                std::to_string(fields.size()));
    LoggedRound r;
    for (std::size_t i = 0; i + 2 < columns; ++i) {
      const double v = parse_double(fields[i], row);
      if (!(v >= 0.0 && v <= 1.0))
        throw ParseError(row, "context component outside [0,1]");
      r.context.push_back(v);
    }
    const auto arm = parse_int(fields[columns - 2], row);
    if (arm < 0) throw ParseError(row, "negative displayed_arm");
    r.displayed_arm = static_cast<std::size_t>(arm);
    const auto clicked = parse_int(fields[columns - 1], row);
    if (clicked != 0 && clicked != 1)
      throw ParseError(row, "clicked must be 0 or 1");
    r.clicked = clicked == 1;
    out.push_back(std::move(r));
  }
  return out;
}

void write_logged_rounds(std::span<const LoggedRound> rounds,
                         std::ostream& out) {
  const std::size_t dims = rounds.empty() ? 1 : rounds[0].context.size();
  for (std::size_t i = 0; i < dims; ++i) out << "s_" << i + 1 << ',';
  out << "displayed_arm,clicked\n";
  for (const auto& r : rounds) {
    for (double v : r.context) out << fmt::format("{},", v);
    out << r.displayed_arm << ',' << (r.clicked ? 1 : 0) << '\n';
  }
}

std::vector<LoggedRound> uniform_logging(std::span<const FullInfoRound> rounds,
                                         std::size_t arms, Rng& rng) {
  std::vector<LoggedRound> out;
  out.reserve(rounds.size());
  for (const auto& r : rounds) {
    if (r.losses.size() != arms) throw ShapeError("loss vector length");
    const std::size_t shown = rng.index(arms);
    out.push_back({r.context, shown, r.losses[shown] == 0.0});
  }
  return out;
}

double ReplayResult::loss_rate() const {
  return matched == 0 ? 0.0
                      : static_cast<double>(total_loss) /
                            static_cast<double>(matched);
}

double ReplayResult::click_rate() const {
  return matched == 0 ? 0.0 : 1.0 - loss_rate();
}

ReplayResult replay_evaluate(ContextualPolicy& policy,
                             std::span<const LoggedRound> log, Rng& rng) {
  ReplayResult result;
  for (const auto& r : log) {
    if (r.displayed_arm >= policy.arms())
      throw ConfigError("logged arm " + std::to_string(r.displayed_arm) +
                        " exceeds the policy's arm count");
    const auto d = policy.select(r.context, rng);
    if (d.arm != r.displayed_arm) continue;
    const double loss = r.clicked ? 0.0 : 1.0;
    policy.update(d, loss);
    ++result.matched;
    if (!r.clicked) ++result.total_loss;
  }
  return result;
}

// ---------------------------------------------------------------------------
// ECOC

CodingMatrix CodingMatrix::one_versus_all(std::size_t classes) {
  if (classes < 2) throw ConfigError("need at least two classes");
  CodingMatrix m;
  m.rows.assign(classes, std::vector<int>(classes, -1));
  for (std::size_t c = 0; c < classes; ++c) m.rows[c][c] = 1;
  return m;
}

void CodingMatrix::validate() const {
  if (rows.size() < 2) throw ConfigError("coding matrix needs two rows");
  const auto len = rows[0].size();
  if (len == 0) throw ConfigError("coding matrix rows are empty");
  for (const auto& r : rows) {
    if (r.size() != len) throw ConfigError("coding matrix rows differ in length");
    for (int b : r)
      if (b != 1 && b != -1) throw ConfigError("coding matrix entries must be +-1");
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j)
      if (rows[i] == rows[j]) throw ConfigError("coding matrix rows must differ");
}

std::size_t hamming_decode(std::span<const int> codeword,
                           const CodingMatrix& matrix) {
  std::size_t best = 0;
  std::size_t best_distance = static_cast<std::size_t>(-1);
  for (std::size_t c = 0; c < matrix.rows.size(); ++c) {
    const auto& row = matrix.rows[c];
    if (row.size() != codeword.size())
      throw ShapeError("codeword length does not match the coding matrix");
    std::size_t dist = 0;
    for (std::size_t i = 0; i < row.size(); ++i) dist += row[i] != codeword[i];
    if (dist < best_distance) {
      best_distance = dist;
      best = c;
    }
  }
  return best;
}

std::vector<double> codeword_context(std::span<const int> codeword) {
  std::vector<double> ctx(codeword.size());
  for (std::size_t i = 0; i < codeword.size(); ++i)
    ctx[i] = (static_cast<double>(codeword[i]) + 1.0) / 2.0;
  return ctx;
}

Perceptron::Perceptron(std::size_t features)
    : w_(features, 0.0), mean_(features, 0.0), m2_(features, 0.0),
      z_(features, 0.0) {}

void Perceptron::standardize(std::span<const double> x,
                             std::vector<double>& z) const {
  if (x.size() != w_.size()) throw ShapeError("feature vector length");
  z.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double sd = 1.0;
    if (count_ >= 2) {
      const double var = m2_[i] / static_cast<double>(count_ - 1);
      if (var > 0.0) sd = std::sqrt(var);
    }
    z[i] = (x[i] - mean_[i]) / sd;
  }
}

double Perceptron::score(std::span<const double> z) const {
  double s = b_;
  for (std::size_t i = 0; i < z.size(); ++i) s += w_[i] * z[i];
  return s;
}

int Perceptron::predict(std::span<const double> x) const {
  standardize(x, z_);
  return score(z_) > 0.0 ? 1 : -1;
}

void Perceptron::train(std::span<const double> x, int target) {
  if (x.size() != w_.size()) throw ShapeError("feature vector length");
  ++count_;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double delta = x[i] - mean_[i];
    mean_[i] += delta / static_cast<double>(count_);
    m2_[i] += delta * (x[i] - mean_[i]);
  }
  standardize(x, z_);
  const double y = target > 0 ? 1.0 : -1.0;
  if (y * score(z_) <= 0.0) {
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] += y * z_[i];
    b_ += y;
  }
}

EcocSetup::EcocSetup(CodingMatrix matrix, std::size_t features)
    : matrix_(std::move(matrix)), features_(features) {
  matrix_.validate();
  if (features_ == 0) throw ConfigError("need at least one feature");
  bits_.assign(matrix_.code_length(), Perceptron(features_));
}

EcocRound EcocSetup::observe(std::span<const double> x,
                             std::size_t label) const {
  if (label >= classes())
    throw DomainError("label " + std::to_string(label) + " out of range");
  if (x.size() != features_) throw ShapeError("feature vector length");
  EcocRound r;
  r.codeword.reserve(bits_.size());
  for (const auto& p : bits_) r.codeword.push_back(p.predict(x));
  r.context = codeword_context(r.codeword);
  r.losses.assign(classes(), 1.0);
  r.losses[label] = 0.0;
  return r;
}

void EcocSetup::train(std::span<const double> x, std::size_t label) {
  if (label >= classes())
    throw DomainError("label " + std::to_string(label) + " out of range");
  for (std::size_t b = 0; b < bits_.size(); ++b)
    bits_[b].train(x, matrix_.rows[label][b]);
}

std::vector<LabeledSample> read_labeled_csv(std::istream& in,
                                            bool remap_labels) {
  std::string line;
  std::size_t row = 0;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++row;
    if (blank(line)) continue;
    columns = split_fields(line).size();
    break;
  }
  if (columns < 2) throw ParseError(row, "expected a header with features and a label");

  std::vector<LabeledSample> out;
  std::vector<long long> raw;
  while (std::getline(in, line)) {
    ++row;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != columns)
      throw ParseError(row, "expected " + std::to_string(columns) +
                                " fields, got " +
                                std::to_string(fields.size()));
    LabeledSample s;
    for (std::size_t i = 0; i + 1 < columns; ++i)
      s.features.push_back(parse_double(fields[i], row));
    const auto label = parse_int(fields.back(), row);
    if (!remap_labels && label < 0) throw ParseError(row, "negative label");
    raw.push_back(label);
    s.label = static_cast<std::size_t>(std::max<long long>(label, 0));
    out.push_back(std::move(s));
  }
  if (remap_labels) {
    std::map<long long, std::size_t> index;
    for (auto l : raw) index.emplace(l, 0);
    std::size_t next = 0;
    for (auto& [l, i] : index) i = next++;
    for (std::size_t k = 0; k < out.size(); ++k) out[k].label = index[raw[k]];
  }
  return out;
}

std::vector<LabeledSample> separable_classes(std::size_t classes,
                                             std::size_t features,
                                             std::size_t samples, Rng& rng) {
  if (classes < 2 || features < classes)
    throw ConfigError("need 2 <= classes <= features");
  std::vector<LabeledSample> out(samples);
  for (auto& s : out) {
    s.label = rng.index(classes);
    s.features.resize(features);
    for (auto& f : s.features) f = 2.0 * rng.uniform() - 1.0;
    s.features[s.label] += 4.0;
  }
  return out;
}

}  // namespace hsb
