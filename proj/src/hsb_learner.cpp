#include "hsb/hsb_learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hsb/errors.hpp"
#include "hsb/logmath.hpp"

namespace hsb {

namespace {

constexpr char kSnapshotMagic[8] = {'H', 'S', 'B', 'S', 'N', 'A', 'P', '1'};
constexpr std::uint32_t kSnapshotVersion = 1;

double lse_small(std::span<const double> xs) {
  double hi = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) hi = std::max(hi, xs[i]);
  if (hi == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - hi);
  return hi + std::log(s);
}

std::uint64_t structure_fingerprint(const Structure& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(s.size());
  mix(s.grid().total_cells());
  mix(s.psi());
  mix(s.hs());
  for (NodeId i = 0; i < s.size(); ++i) mix(s.group_count(i));
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size())
      throw FormatError("snapshot truncated at byte " + std::to_string(pos_));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

HsbLearner::HsbLearner(std::shared_ptr<const Structure> structure,
                       std::size_t arms, double eta, RecursionVariant variant)
    : structure_(std::move(structure)),
      arms_(arms),
      eta_(eta),
      variant_(variant),
      query_(*structure_) {
  if (arms_ == 0) throw ConfigError("learner needs at least one arm");
  if (!(eta_ > 0.0) || !std::isfinite(eta_))
    throw DomainError("learning rate must be positive and finite");
  const std::size_t n = structure_->size();
  log_alpha_.assign(n * arms_, 0.0);
  log_w_.assign(n, 0.0);
  slot_of_.assign(n, 0);
  for (NodeId node : structure_->bottom_up_order())
    log_w_[node] = recompute_log_w(node);
}

double HsbLearner::prior_split(std::size_t groups) const {
  if (variant_ == RecursionVariant::kDropPriorSplit) return 0.0;
  return std::log(static_cast<double>(groups + 1));
}

double HsbLearner::recompute_log_w(NodeId node) const {
  const Structure& s = *structure_;
  const std::size_t groups = s.group_count(node);
  const double split = prior_split(groups);
  double terms_buf[16];
  std::vector<double> terms_heap;
  double* terms = terms_buf;
  if (groups + 1 > 16) {
    terms_heap.resize(groups + 1);
    terms = terms_heap.data();
  }
  terms[0] = log_sum_exp(log_alpha(node)) -
             std::log(static_cast<double>(arms_)) - split;
  for (std::size_t g = 0; g < groups; ++g) {
    double sum = 0.0;
    for (NodeId j : s.group(node, g)) sum += log_w_[j];
    terms[g + 1] = sum - split;
  }
  return lse_small({terms, groups + 1});
}

void HsbLearner::compute_gamma(CellIndex cell) {
  const Structure& s = *structure_;
  const auto path = query_.run(cell);
  path_.assign(path.begin(), path.end());
  gamma_.resize(path_.size() * arms_);
  const double log_m = std::log(static_cast<double>(arms_));
  const bool all_members = variant_ == RecursionVariant::kGammaAllMembers;

  for (std::size_t row = 0; row < path_.size(); ++row) {
    const NodeId node = path_[row];
    slot_of_[node] = static_cast<std::uint32_t>(row);
    const std::size_t groups = s.group_count(node);
    const double split = prior_split(groups);

    group_child_slot_.resize(groups);
    group_sibling_log_w_.resize(groups);
    for (std::size_t g = 0; g < groups; ++g) {
      const NodeId child = s.member_containing(node, g, cell);
      double siblings = 0.0;
      for (NodeId j : s.group(node, g)) {
        if (j == child) continue;
        siblings += all_members ? log_w_[j] - log_m : log_w_[j];
      }
      group_child_slot_[g] = slot_of_[child];
      group_sibling_log_w_[g] = siblings - split;
    }

    terms_.resize(groups + 1);
    const auto alpha = log_alpha(node);
    for (std::size_t m = 0; m < arms_; ++m) {
      terms_[0] = alpha[m] - log_m - split;
      for (std::size_t g = 0; g < groups; ++g)
        terms_[g + 1] = group_sibling_log_w_[g] +
                        gamma_[std::size_t{group_child_slot_[g]} * arms_ + m];
      gamma_[row * arms_ + m] = lse_small(terms_);
    }
  }
  path_cell_ = cell;
  select_touches_ = path_.size() * arms_;
}

std::vector<double> HsbLearner::log_gamma_root(CellIndex cell) {
  compute_gamma(cell);
  const auto root_row = (path_.size() - 1) * arms_;
  return {gamma_.begin() + static_cast<std::ptrdiff_t>(root_row),
          gamma_.begin() + static_cast<std::ptrdiff_t>(root_row + arms_)};
}

std::vector<double> HsbLearner::simplex(CellIndex cell) {
  auto p = log_gamma_root(cell);
  const double log_total = log_w_[structure_->root()];
  for (double& v : p) v = std::exp(v - log_total);
  return p;
}

ArmDecision HsbLearner::select(std::span<const double> context, Rng& rng) {
  return select_cell(structure_->grid().quantize(context), rng);
}

ArmDecision HsbLearner::select_cell(CellIndex cell, Rng& rng) {
  ArmDecision d;
  d.simplex = simplex(cell);
  d.cell = cell;
  d.arm = sample_index(d.simplex, rng);
  guard_.begin_select(d);
  return d;
}

void HsbLearner::update(const ArmDecision& decision, double loss) {
  guard_.begin_update(decision);
  check_loss(loss);
  if (decision.simplex.size() != arms_ || decision.arm >= arms_)
    throw ConfigError("decision does not match the learner's arm count");
  const double p = decision.chosen_probability();
  if (!(p > 0.0)) throw DomainError("chosen arm has zero probability");

  update_touches_ = 0;
  const double discount = eta_ * (loss / p);
  if (discount != 0.0) {
    if (path_cell_ != decision.cell || path_.empty()) {
      const auto path = query_.run(decision.cell);
      path_.assign(path.begin(), path.end());
      path_cell_ = decision.cell;
    }
    for (NodeId node : path_) {
      log_alpha_[std::size_t{node} * arms_ + decision.arm] -= discount;
      log_w_[node] = recompute_log_w(node);
    }
    update_touches_ = path_.size();
  }
  guard_.finish_update();
}

std::vector<std::uint8_t> HsbLearner::snapshot() const {
  Writer w;
  for (char c : kSnapshotMagic) w.put(c);
  w.put(kSnapshotVersion);
  w.put(static_cast<std::uint64_t>(structure_->size()));
  w.put(static_cast<std::uint64_t>(arms_));
  w.put(static_cast<std::uint64_t>(guard_.rounds()));
  w.put(eta_);
  w.put(static_cast<std::uint32_t>(variant_));
  w.put(structure_fingerprint(*structure_));
  for (double v : log_alpha_) w.put(v);
  for (double v : log_w_) w.put(v);
  return std::move(w.bytes);
}

HsbLearner HsbLearner::restore(std::span<const std::uint8_t> bytes,
                               std::shared_ptr<const Structure> structure) {
  Reader r(bytes);
  for (char c : kSnapshotMagic)
    if (r.get<char>() != c) throw FormatError("not an HSB snapshot");
  if (r.get<std::uint32_t>() != kSnapshotVersion)
    throw FormatError("unsupported snapshot version");
  const auto nodes = r.get<std::uint64_t>();
  const auto arms = r.get<std::uint64_t>();
  const auto rounds = r.get<std::uint64_t>();
  const auto eta = r.get<double>();
  const auto variant = r.get<std::uint32_t>();
  const auto fingerprint = r.get<std::uint64_t>();
  if (nodes != structure->size() ||
      fingerprint != structure_fingerprint(*structure))
    throw FormatError("snapshot was taken on a different structure");
  if (variant > static_cast<std::uint32_t>(RecursionVariant::kDropPriorSplit))
    throw FormatError("unknown recursion variant");
  if (arms == 0 || arms > (std::uint64_t{1} << 20))
    throw FormatError("implausible arm count");
  if (r.remaining() != (nodes * arms + nodes) * sizeof(double))
    throw FormatError("snapshot payload has the wrong length");

  HsbLearner learner(std::move(structure), arms, eta,
                     static_cast<RecursionVariant>(variant));
  for (double& v : learner.log_alpha_) v = r.get<double>();
  for (double& v : learner.log_w_) v = r.get<double>();
  for (const auto* arr : {&learner.log_alpha_, &learner.log_w_})
    for (double v : *arr)
      if (!std::isfinite(v)) throw FormatError("non-finite weight in snapshot");
  learner.guard_.restore(rounds);
  return learner;
}

// ---------------------------------------------------------------------------

double optimal_eta(double psi, double hs, double a_r, std::size_t arms,
                   double horizon) {
  if (!(psi >= 1.0) || !(hs >= 0.0) || !(a_r >= 0.0) || arms < 1 ||
      !(horizon >= 1.0))
    throw DomainError("optimal_eta: need psi >= 1, hs >= 0, A_R >= 0, "
                      "M >= 1, T >= 1");
  const double m = static_cast<double>(arms);
  const double eta =
      std::sqrt(2.0 * psi * (a_r + 1.0) * std::log((hs + 1.0) * m) /
                (m * horizon));
  if (!(eta > 0.0))
    throw DomainError("optimal_eta: degenerate problem (ln((H_S+1)M) = 0)");
  return eta;
}

double regret_bound(double psi, double hs, double a_r, std::size_t arms,
                    double horizon, double eta) {
  if (!(eta > 0.0)) throw DomainError("regret_bound: eta must be positive");
  const double m = static_cast<double>(arms);
  return psi * (a_r + 1.0) * std::log((hs + 1.0) * m) / eta +
         m * horizon * eta / 2.0;
}

double tuned_regret_bound(double psi, double hs, double a_r, std::size_t arms,
                          double horizon) {
  const double m = static_cast<double>(arms);
  return std::sqrt(0.5 * psi * m * horizon * (a_r + 1.0) *
                   std::log((hs + 1.0) * m));
}

double structure_eta(const Structure& structure, std::size_t arms,
                     double horizon, std::size_t regions) {
  const auto& p = structure.params();
  return optimal_eta(static_cast<double>(p.psi), static_cast<double>(p.hs),
                     p.a_r(regions, arms), arms, horizon);
}

}  // namespace hsb
