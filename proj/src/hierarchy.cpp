#include "hsb/hierarchy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include "hsb/errors.hpp"

namespace hsb {

namespace {

bool is_power_of_two(std::size_t x) { return x != 0 && (x & (x - 1)) == 0; }

std::size_t log2_exact(std::size_t x) {
  return static_cast<std::size_t>(std::countr_zero(x));
}

// Largest D with k^D <= n, and whether equality holds.
std::pair<std::size_t, bool> integer_log(std::size_t n, std::size_t k) {
  std::size_t depth = 0;
  std::size_t acc = 1;
  while (acc < n) {
    acc *= k;
    ++depth;
  }
  return {depth, acc == n};
}

std::vector<CellInterval> intervals_from_sorted(
    std::span<const CellIndex> cells) {
  std::vector<CellInterval> out;
  for (CellIndex c : cells) {
    if (!out.empty() && out.back().last + 1 == c) {
      out.back().last = c;
    } else {
      out.push_back({c, c});
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// CellGrid

CellGrid::CellGrid(std::vector<std::size_t> splits_per_dim)
    : splits_(std::move(splits_per_dim)) {
  if (splits_.empty()) throw ConfigError("grid needs at least one dimension");
  for (std::size_t s : splits_) {
    if (s == 0) throw ConfigError("grid split counts must be positive");
    if (total_ > (std::size_t{1} << 31) / s)
      throw ConfigError("grid has too many cells");
    total_ *= s;
  }
}

CellGrid CellGrid::uniform(std::size_t dims, std::size_t total_cells) {
  if (dims == 0) throw ConfigError("grid needs at least one dimension");
  if (!is_power_of_two(total_cells))
    throw ConfigError("uniform grid needs a power-of-two cell count, got " +
                      std::to_string(total_cells));
  const std::size_t k = log2_exact(total_cells);
  const std::size_t base = k / dims;
  const std::size_t extra = k % dims;
  std::vector<std::size_t> splits(dims);
  for (std::size_t d = 0; d < dims; ++d)
    splits[d] = std::size_t{1} << (d < extra ? base + 1 : base);
  return CellGrid(std::move(splits));
}

CellIndex CellGrid::quantize(std::span<const double> context) const {
  if (context.size() != splits_.size())
    throw ShapeError("context has " + std::to_string(context.size()) +
                     " components, grid expects " +
                     std::to_string(splits_.size()));
  std::size_t index = 0;
  for (std::size_t d = 0; d < splits_.size(); ++d) {
    const double x = context[d];
    if (!(x >= 0.0 && x <= 1.0))
      throw DomainError("context component " + std::to_string(d) +
                        " outside [0,1]");
    const auto s = splits_[d];
    auto k = static_cast<std::size_t>(x * static_cast<double>(s));
    if (k >= s) k = s - 1;
    index = index * s + k;
  }
  return static_cast<CellIndex>(index);
}

std::vector<std::size_t> CellGrid::coordinates(CellIndex cell) const {
  if (cell >= total_) throw DomainError("cell index out of range");
  std::vector<std::size_t> coords(splits_.size());
  std::size_t rest = cell;
  for (std::size_t d = splits_.size(); d-- > 0;) {
    coords[d] = rest % splits_[d];
    rest /= splits_[d];
  }
  return coords;
}

CellIndex CellGrid::cell_at(std::span<const std::size_t> coords) const {
  if (coords.size() != splits_.size()) throw ShapeError("coordinate rank");
  std::size_t index = 0;
  for (std::size_t d = 0; d < splits_.size(); ++d) {
    if (coords[d] >= splits_[d]) throw DomainError("coordinate out of range");
    index = index * splits_[d] + coords[d];
  }
  return static_cast<CellIndex>(index);
}

std::vector<double> CellGrid::cell_center(CellIndex cell) const {
  auto coords = coordinates(cell);
  std::vector<double> center(coords.size());
  for (std::size_t d = 0; d < coords.size(); ++d)
    center[d] = (static_cast<double>(coords[d]) + 0.5) /
                static_cast<double>(splits_[d]);
  return center;
}

// ---------------------------------------------------------------------------
// StructureParams

std::string to_string(StructureKind kind) {
  switch (kind) {
    case StructureKind::kBinaryTree: return "binary-tree";
    case StructureKind::kKaryTree: return "kary-tree";
    case StructureKind::kLexicographic: return "lexicographic";
    case StructureKind::kKGroupLexicographic: return "kgroup-lexicographic";
    case StructureKind::kArbitrarySplitting: return "arbitrary-splitting";
    case StructureKind::kArbitraryPositionSplitting:
      return "arbitrary-position-splitting";
    case StructureKind::kCustom: return "custom";
  }
  return "custom";
}

StructureKind structure_kind_from_string(const std::string& name) {
  for (auto kind :
       {StructureKind::kBinaryTree, StructureKind::kKaryTree,
        StructureKind::kLexicographic, StructureKind::kKGroupLexicographic,
        StructureKind::kArbitrarySplitting,
        StructureKind::kArbitraryPositionSplitting, StructureKind::kCustom}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown structure kind '" + name + "'");
}

double StructureParams::a_r(std::size_t regions, std::size_t arms) const {
  if (regions == 0) throw DomainError("region count R must be at least 1");
  const double r1 = static_cast<double>(regions - 1);
  const double n = static_cast<double>(leaf_cells);
  switch (kind) {
    case StructureKind::kBinaryTree:
    case StructureKind::kArbitraryPositionSplitting:
      return r1 * std::log2(n);
    case StructureKind::kKaryTree:
      return r1 * static_cast<double>(integer_log(leaf_cells, branching).first);
    case StructureKind::kLexicographic:
      return r1;
    case StructureKind::kKGroupLexicographic: {
      const std::size_t k1 = branching - 1;
      return static_cast<double>((regions - 1 + k1 - 1) / k1);
    }
    case StructureKind::kArbitrarySplitting:
      if (arms == 0) throw DomainError("arm count must be positive");
      return static_cast<double>(arms - 1);
    case StructureKind::kCustom:
      break;
  }
  throw ConfigError("custom structures have no closed-form A_R; supply it");
}

// ---------------------------------------------------------------------------
// Structure

std::span<const CellInterval> Structure::region(NodeId node) const {
  const auto b = region_offsets_[node];
  return {intervals_.data() + b, region_offsets_[node + 1] - b};
}

std::size_t Structure::region_size(NodeId node) const {
  std::size_t n = 0;
  for (const auto& iv : region(node)) n += iv.size();
  return n;
}

std::vector<CellIndex> Structure::region_cells(NodeId node) const {
  std::vector<CellIndex> cells;
  for (const auto& iv : region(node))
    for (std::size_t c = iv.first; c <= iv.last; ++c)
      cells.push_back(static_cast<CellIndex>(c));
  return cells;
}

bool Structure::contains(NodeId node, CellIndex cell) const {
  const auto r = region(node);
  if (r.size() == 1) return r[0].first <= cell && cell <= r[0].last;
  auto it = std::upper_bound(
      r.begin(), r.end(), cell,
      [](CellIndex c, const CellInterval& iv) { return c < iv.first; });
  if (it == r.begin()) return false;
  --it;
  return cell <= it->last;
}

std::span<const NodeId> Structure::group(NodeId node, std::size_t g) const {
  const auto gi = node_group_offsets_[node] + g;
  const auto b = group_member_offsets_[gi];
  return {members_.data() + b, group_member_offsets_[gi + 1] - b};
}

NodeId Structure::member_containing(NodeId node, std::size_t g,
                                    CellIndex cell) const {
  for (NodeId m : group(node, g))
    if (contains(m, cell)) return m;
  throw ConfigError("group does not cover cell " + std::to_string(cell));
}

// ---------------------------------------------------------------------------
// StructureBuilder

StructureBuilder::StructureBuilder(CellGrid grid) : s_(std::move(grid)) {}

NodeId StructureBuilder::add_node(std::span<const CellInterval> region) {
  if (region.empty()) throw ConfigError("node region must be nonempty");
  const auto start = s_.intervals_.size();
  for (const auto& iv : region) {
    if (iv.first > iv.last || iv.last >= s_.grid_.total_cells())
      throw ConfigError("region interval out of range");
    if (s_.intervals_.size() > start) {
      auto& back = s_.intervals_.back();
      if (iv.first <= back.last)
        throw ConfigError("region intervals must be sorted and disjoint");
      if (iv.first == back.last + 1) {
        back.last = iv.last;
        continue;
      }
    }
    s_.intervals_.push_back(iv);
  }
  s_.region_offsets_.push_back(s_.intervals_.size());
  s_.node_group_offsets_.push_back(s_.node_group_offsets_.back());
  return static_cast<NodeId>(s_.region_offsets_.size() - 2);
}

void StructureBuilder::add_group(std::span<const NodeId> members) {
  if (s_.region_offsets_.size() < 2)
    throw ConfigError("add_group before any node");
  if (members.empty()) throw ConfigError("child group must be nonempty");
  s_.members_.insert(s_.members_.end(), members.begin(), members.end());
  s_.group_member_offsets_.push_back(s_.members_.size());
  ++s_.node_group_offsets_.back();
}

Structure StructureBuilder::finish(StructureParams params, bool validate) && {
  Structure s = std::move(s_);
  const std::size_t n = s.size();
  if (n == 0) throw ConfigError("structure has no nodes");

  std::vector<std::uint8_t> memberships(n, 0);
  std::size_t psi = 1;
  std::size_t hs = 0;
  for (NodeId i = 0; i < n; ++i) {
    hs = std::max(hs, s.group_count(i));
    for (std::size_t g = 0; g < s.group_count(i); ++g) {
      const auto grp = s.group(i, g);
      psi = std::max(psi, grp.size());
      for (NodeId m : grp) {
        if (m >= n)
          throw ConfigError("group member " + std::to_string(m) +
                            " is not a node");
        if (memberships[m] < 2) ++memberships[m];
      }
    }
  }
  s.is_tree_ = std::all_of(memberships.begin(), memberships.end(),
                           [](std::uint8_t c) { return c <= 1; });

  // Post-order DFS over the whole graph; colour 1 = on stack, 2 = done.
  std::vector<std::uint8_t> colour(n, 0);
  s.bottom_up_.reserve(n);
  std::vector<std::pair<NodeId, std::size_t>> stack;  // node, next member
  for (NodeId start = 0; start < n; ++start) {
    if (colour[start] != 0) continue;
    colour[start] = 1;
    stack.emplace_back(start, 0);
    while (!stack.empty()) {
      auto [node, next] = stack.back();
      const auto first = s.node_group_offsets_[node];
      const auto last = s.node_group_offsets_[node + 1];
      const auto mb = s.group_member_offsets_[first];
      const auto me = s.group_member_offsets_[last];
      if (mb + next < me) {
        ++stack.back().second;
        const NodeId child = s.members_[mb + next];
        if (colour[child] == 1)
          throw ConfigError("structure contains a cycle through node " +
                            std::to_string(child));
        if (colour[child] == 0) {
          colour[child] = 1;
          stack.emplace_back(child, 0);
        }
      } else {
        colour[node] = 2;
        s.bottom_up_.push_back(node);
        stack.pop_back();
      }
    }
  }

  params.psi = psi;
  params.hs = hs;
  params.leaf_cells = s.grid_.total_cells();
  s.params_ = params;
  if (validate) validate_structure(s);
  return s;
}

void validate_structure(const Structure& s) {
  const auto total = s.grid().total_cells();
  const auto root = s.region(s.root());
  if (!(root.size() == 1 && root[0].first == 0 && root[0].last + 1 == total))
    throw ConfigError("root region must be the full cell set");

  std::vector<CellInterval> pieces;
  for (NodeId i = 0; i < s.size(); ++i) {
    const auto parent = s.region(i);
    for (std::size_t g = 0; g < s.group_count(i); ++g) {
      pieces.clear();
      for (NodeId m : s.group(i, g)) {
        if (m == i)
          throw ConfigError("node " + std::to_string(i) +
                            " lists itself as a child");
        const auto r = s.region(m);
        pieces.insert(pieces.end(), r.begin(), r.end());
      }
      std::sort(pieces.begin(), pieces.end(),
                [](const CellInterval& a, const CellInterval& b) {
                  return a.first < b.first;
                });
      std::vector<CellInterval> merged;
      for (const auto& iv : pieces) {
        if (!merged.empty() && iv.first <= merged.back().last)
          throw ConfigError("group " + std::to_string(g) + " of node " +
                            std::to_string(i) + " has overlapping regions");
        if (!merged.empty() && iv.first == merged.back().last + 1)
          merged.back().last = iv.last;
        else
          merged.push_back(iv);
      }
      if (!std::equal(merged.begin(), merged.end(), parent.begin(),
                      parent.end()))
        throw ConfigError("group " + std::to_string(g) + " of node " +
                          std::to_string(i) +
                          " does not cover its parent region exactly");
    }
  }
}

// ---------------------------------------------------------------------------
// Containment

ContainmentQuery::ContainmentQuery(const Structure& structure)
    : structure_(&structure) {
  if (!structure.is_tree()) stamp_.assign(structure.size(), 0);
}

std::span<const NodeId> ContainmentQuery::run(CellIndex cell) {
  const Structure& s = *structure_;
  if (cell >= s.grid().total_cells())
    throw DomainError("cell index out of range");
  out_.clear();
  stack_.clear();
  const bool dedupe = !stamp_.empty();
  if (dedupe && ++epoch_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    epoch_ = 1;
  }
  auto visit = [&](NodeId node) {
    if (dedupe) {
      if (stamp_[node] == epoch_) return;
      stamp_[node] = epoch_;
    }
    stack_.push_back({node, 0});
  };
  visit(s.root());
  while (!stack_.empty()) {
    Frame& top = stack_.back();
    if (top.next_group < s.group_count(top.node)) {
      const NodeId child =
          s.member_containing(top.node, top.next_group++, cell);
      visit(child);
    } else {
      out_.push_back(top.node);
      stack_.pop_back();
    }
  }
  return out_;
}

std::vector<NodeId> nodes_containing(const Structure& structure,
                                     CellIndex cell) {
  ContainmentQuery q(structure);
  auto r = q.run(cell);
  return {r.begin(), r.end()};
}

// ---------------------------------------------------------------------------
// Builders

Structure build_binary_tree(const CellGrid& grid) {
  const std::size_t n = grid.total_cells();
  if (n < 2 || !is_power_of_two(n))
    throw ConfigError("binary tree needs a power-of-two cell count >= 2, got " +
                      std::to_string(n));
  const std::size_t depth = log2_exact(n);
  StructureBuilder b(grid);
  const std::size_t count = 2 * n - 1;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t level = std::bit_width(k + 1) - 1;
    const std::size_t pos = k + 1 - (std::size_t{1} << level);
    const std::size_t width = n >> level;
    b.add_node(CellInterval{static_cast<CellIndex>(pos * width),
                            static_cast<CellIndex>((pos + 1) * width - 1)});
    if (level < depth) {
      const NodeId kids[2] = {static_cast<NodeId>(2 * k + 1),
                              static_cast<NodeId>(2 * k + 2)};
      b.add_group(kids);
    }
  }
  StructureParams p;
  p.kind = StructureKind::kBinaryTree;
  return std::move(b).finish(p, false);
}

Structure build_kary_tree(const CellGrid& grid, std::size_t k) {
  if (k < 2) throw ConfigError("K-ary tree needs K >= 2");
  const std::size_t n = grid.total_cells();
  const auto [depth, exact] = integer_log(n, k);
  if (!exact || depth < 1)
    throw ConfigError("K-ary tree needs N = K^D with D >= 1; N=" +
                      std::to_string(n) + ", K=" + std::to_string(k));
  StructureBuilder b(grid);
  std::vector<NodeId> kids(k);
  std::size_t level_start = 0;
  std::size_t level_size = 1;
  for (std::size_t level = 0; level <= depth; ++level) {
    const std::size_t width = n / level_size;
    for (std::size_t pos = 0; pos < level_size; ++pos) {
      const std::size_t id = level_start + pos;
      b.add_node(CellInterval{static_cast<CellIndex>(pos * width),
                              static_cast<CellIndex>((pos + 1) * width - 1)});
      if (level < depth) {
        for (std::size_t c = 0; c < k; ++c)
          kids[c] = static_cast<NodeId>(k * id + 1 + c);
        b.add_group(kids);
      }
    }
    level_start += level_size;
    level_size *= k;
  }
  StructureParams p;
  p.kind = StructureKind::kKaryTree;
  p.branching = k;
  return std::move(b).finish(p, false);
}

namespace {

// Intervals of [0, n) ordered by decreasing length, then start, so the full
// range gets id 0.
// Calls fn(cuts) for every way to cut [first, first+length) into `pieces`
// contiguous nonempty intervals; cuts holds the start of pieces 2..pieces.
template <typename Fn>
void for_each_composition(std::size_t first, std::size_t length,
                          std::size_t pieces, Fn&& fn) {
  std::vector<std::size_t> cuts(pieces - 1);
  auto rec = [&](auto& self, std::size_t slot, std::size_t lo) -> void {
    if (slot == cuts.size()) {
      fn(std::span<const std::size_t>(cuts));
      return;
    }
    const std::size_t remaining = cuts.size() - slot - 1;
    for (std::size_t c = lo; c + remaining < first + length; ++c) {
      cuts[slot] = c;
      self(self, slot + 1, c + 1);
    }
  };
  rec(rec, 0, first + 1);
}

// Intervals are discovered breadth-first from the full range, so only
// intervals some chain of groups reaches from the root become nodes.
Structure build_interval_graph(const CellGrid& grid, std::size_t k,
                               StructureKind kind) {
  const std::size_t n = grid.total_cells();
  using Key = std::pair<std::size_t, std::size_t>;  // (first, length)
  std::map<Key, NodeId> ids;
  std::deque<Key> queue;
  auto intern = [&](std::size_t first, std::size_t length) {
    auto [it, inserted] =
        ids.emplace(Key{first, length}, static_cast<NodeId>(ids.size()));
    if (inserted) queue.push_back(it->first);
    return it->second;
  };
  intern(0, n);

  StructureBuilder b(grid);
  std::vector<NodeId> members;
  while (!queue.empty()) {
    const auto [first, length] = queue.front();
    queue.pop_front();
    b.add_node(CellInterval{static_cast<CellIndex>(first),
                            static_cast<CellIndex>(first + length - 1)});
    if (length < 2) continue;
    const std::size_t lo_pieces = length >= k ? k : 2;
    const std::size_t hi_pieces = std::min(k, length);
    for (std::size_t pieces = lo_pieces; pieces <= hi_pieces; ++pieces) {
      for_each_composition(
          first, length, pieces, [&](std::span<const std::size_t> cuts) {
            members.clear();
            std::size_t start = first;
            for (std::size_t c : cuts) {
              members.push_back(intern(start, c - start));
              start = c;
            }
            members.push_back(intern(start, first + length - start));
            b.add_group(members);
          });
    }
  }
  StructureParams p;
  p.kind = kind;
  p.branching = k;
  return std::move(b).finish(p, false);
}

}  // namespace

Structure build_lexicographic_graph(const CellGrid& grid) {
  if (grid.total_cells() < 2)
    throw ConfigError("lexicographic graph needs N >= 2");
  return build_interval_graph(grid, 2, StructureKind::kLexicographic);
}

Structure build_kgroup_lexicographic(const CellGrid& grid, std::size_t k) {
  const std::size_t n = grid.total_cells();
  if (k < 2 || k > n)
    throw ConfigError("K-group splitting needs 2 <= K <= N; K=" +
                      std::to_string(k) + ", N=" + std::to_string(n));
  return build_interval_graph(grid, k, StructureKind::kKGroupLexicographic);
}

Structure build_arbitrary_splitting(const CellGrid& grid,
                                    std::size_t max_cells) {
  const std::size_t n = grid.total_cells();
  if (n > max_cells)
    throw ConfigError("arbitrary splitting over " + std::to_string(n) +
                      " cells exceeds the cap of " + std::to_string(max_cells));
  // Node id = full - mask, so the full set is node 0.
  const std::uint64_t full = (std::uint64_t{1} << n) - 1;
  auto id_of = [full](std::uint64_t mask) {
    return static_cast<NodeId>(full - mask);
  };
  StructureBuilder b(grid);
  std::vector<CellIndex> cells;
  for (std::uint64_t id = 0; id < full; ++id) {
    const std::uint64_t mask = full - id;
    cells.clear();
    for (std::size_t c = 0; c < n; ++c)
      if (mask >> c & 1U) cells.push_back(static_cast<CellIndex>(c));
    const auto region = intervals_from_sorted(cells);
    b.add_node(region);
    if (cells.size() < 2) continue;
    // Unordered bipartitions: the side holding the lowest cell ranges over
    // every proper subset that contains it.
    const std::uint64_t low = mask & (~mask + 1);
    const std::uint64_t rest = mask ^ low;
    for (std::uint64_t sub = 0;; sub = (sub - rest) & rest) {
      if (sub != rest) {
        const std::uint64_t side = low | sub;
        const NodeId pair[2] = {id_of(side), id_of(mask ^ side)};
        b.add_group(pair);
      }
      if (sub == rest) break;
    }
  }
  StructureParams p;
  p.kind = StructureKind::kArbitrarySplitting;
  return std::move(b).finish(p, false);
}

Structure build_arbitrary_position_splitting(const CellGrid& grid) {
  const std::size_t d = grid.dims();
  for (std::size_t s : grid.splits())
    if (!is_power_of_two(s))
      throw ConfigError(
          "arbitrary position splitting needs power-of-two splits per "
          "dimension");
  // A box is (first, length) per dimension in grid coordinates.
  using Box = std::vector<std::size_t>;
  std::map<Box, NodeId> ids;
  std::deque<Box> queue;
  auto intern = [&](const Box& box) {
    auto [it, inserted] = ids.emplace(box, static_cast<NodeId>(ids.size()));
    if (inserted) queue.push_back(box);
    return it->second;
  };
  Box root(2 * d);
  for (std::size_t k = 0; k < d; ++k) root[2 * k + 1] = grid.splits()[k];
  intern(root);

  StructureBuilder b(grid);
  std::vector<CellIndex> cells;
  std::vector<std::size_t> coords(d);
  while (!queue.empty()) {
    const Box box = queue.front();
    queue.pop_front();

    cells.clear();
    for (std::size_t k = 0; k < d; ++k) coords[k] = box[2 * k];
    for (;;) {
      cells.push_back(grid.cell_at(coords));
      std::size_t k = d;
      while (k-- > 0) {
        if (++coords[k] < box[2 * k] + box[2 * k + 1]) break;
        coords[k] = box[2 * k];
      }
      if (k == static_cast<std::size_t>(-1)) break;
    }
    std::sort(cells.begin(), cells.end());
    b.add_node(intervals_from_sorted(cells));

    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t len = box[2 * k + 1];
      if (len < 2) continue;
      Box lo = box, hi = box;
      lo[2 * k + 1] = hi[2 * k + 1] = len / 2;
      hi[2 * k] += len / 2;
      const NodeId pair[2] = {intern(lo), intern(hi)};
      b.add_group(pair);
    }
  }
  StructureParams p;
  p.kind = StructureKind::kArbitraryPositionSplitting;
  p.dims = d;
  return std::move(b).finish(p, false);
}

Structure build_arbitrary_position_splitting(std::size_t dims,
                                             std::size_t depth) {
  if (dims == 0) throw ConfigError("need at least one dimension");
  if (depth > 24)
    throw ConfigError("depth " + std::to_string(depth) +
                      " exceeds the available resolution (max 24)");
  return build_arbitrary_position_splitting(
      CellGrid::uniform(dims, std::size_t{1} << depth));
}

}  // namespace hsb
