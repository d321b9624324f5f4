#pragma once

// Hierarchical partitioning structures over a uniformly quantized context
// space.
//
// The context space [0,1]^n is cut into N cells (CellGrid). A Structure is a
// node graph: every node owns a region (a set of cells) and a list of child
// groups. Each child group is an exact partition of its parent's region.
// Leaves have no child groups.
//
// Conventions used throughout the library:
//   * cells, nodes and arms are 0-based;
//   * cell indices are row-major over dimensions in declaration order;
//   * the root always has id 0.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hsb {

using CellIndex = std::uint32_t;
using NodeId = std::uint32_t;

// Closed interval [first, last] of cell indices.
struct CellInterval {
  CellIndex first = 0;
  CellIndex last = 0;

  std::size_t size() const { return std::size_t{last} - first + 1; }
  bool operator==(const CellInterval&) const = default;
};

class CellGrid {
 public:
  // Explicit per-dimension split counts. Each must be positive.
  explicit CellGrid(std::vector<std::size_t> splits_per_dim);

  // Uniform scheme for N = 2^k cells over n dimensions: the first (k mod n)
  // dimensions get 2^(floor(k/n)+1) splits, the rest 2^floor(k/n).
  static CellGrid uniform(std::size_t dims, std::size_t total_cells);

  std::size_t dims() const { return splits_.size(); }
  std::span<const std::size_t> splits() const { return splits_; }
  std::size_t total_cells() const { return total_; }

  // Cell whose half-open box contains the point; coordinate 1.0 clamps to
  // the last cell along its dimension. Throws ShapeError / DomainError.
  CellIndex quantize(std::span<const double> context) const;

  std::vector<std::size_t> coordinates(CellIndex cell) const;
  CellIndex cell_at(std::span<const std::size_t> coords) const;
  std::vector<double> cell_center(CellIndex cell) const;

  bool operator==(const CellGrid&) const = default;

 private:
  std::vector<std::size_t> splits_;
  std::size_t total_ = 1;
};

enum class StructureKind {
  kBinaryTree,
  kKaryTree,
  kLexicographic,
  kKGroupLexicographic,
  kArbitrarySplitting,
  kArbitraryPositionSplitting,
  kCustom,
};

std::string to_string(StructureKind kind);
StructureKind structure_kind_from_string(const std::string& name);

// Constants entering the regret bound of a structure.
struct StructureParams {
  StructureKind kind = StructureKind::kCustom;
  std::size_t psi = 0;         // max |group|
  std::size_t hs = 0;          // max number of child groups of a node
  std::size_t leaf_cells = 0;  // N
  std::size_t branching = 2;   // K for K-ary trees and K-group splitting
  std::size_t dims = 1;        // d for arbitrary position splitting

  // Upper bound A_R on the number of splittings needed to express an
  // R-region partition. The arbitrary-splitting closed form is M - 1 and
  // therefore depends on the arm count rather than on R. Custom structures
  // have no closed form and throw ConfigError.
  double a_r(std::size_t regions, std::size_t arms) const;
};

class StructureBuilder;

// Immutable node graph. Storage is flat (CSR) so that very large trees stay
// compact; node data is exposed through spans.
class Structure {
 public:
  std::size_t size() const { return region_offsets_.size() - 1; }
  NodeId root() const { return 0; }
  const CellGrid& grid() const { return grid_; }
  const StructureParams& params() const { return params_; }
  std::size_t psi() const { return params_.psi; }
  std::size_t hs() const { return params_.hs; }

  std::span<const CellInterval> region(NodeId node) const;
  std::size_t region_size(NodeId node) const;
  std::vector<CellIndex> region_cells(NodeId node) const;
  bool contains(NodeId node, CellIndex cell) const;

  std::size_t group_count(NodeId node) const {
    return node_group_offsets_[node + 1] - node_group_offsets_[node];
  }
  std::span<const NodeId> group(NodeId node, std::size_t g) const;
  bool is_leaf(NodeId node) const { return group_count(node) == 0; }

  // The unique member of group g of `node` whose region holds `cell`.
  // Precondition: contains(node, cell).
  NodeId member_containing(NodeId node, std::size_t g, CellIndex cell) const;

  // Every node after all members of its child groups.
  std::span<const NodeId> bottom_up_order() const { return bottom_up_; }

  // True when every node is a member of at most one group, i.e. the
  // containment chain of a cell can be walked without a visited set.
  bool is_tree() const { return is_tree_; }

 private:
  friend class StructureBuilder;
  Structure(CellGrid grid) : grid_(std::move(grid)) {}

  CellGrid grid_;
  StructureParams params_;
  std::vector<std::size_t> region_offsets_{0};
  std::vector<CellInterval> intervals_;
  std::vector<std::size_t> node_group_offsets_{0};
  std::vector<std::size_t> group_member_offsets_{0};
  std::vector<NodeId> members_;
  std::vector<NodeId> bottom_up_;
  bool is_tree_ = true;
};

// Appends nodes in id order. Child groups may reference ids that have not
// been added yet; references are resolved in finish().
class StructureBuilder {
 public:
  explicit StructureBuilder(CellGrid grid);

  // Region intervals must be sorted and non-adjacent; they are merged here
  // if they touch.
  NodeId add_node(std::span<const CellInterval> region);
  NodeId add_node(CellInterval region) { return add_node({&region, 1}); }
  // Adds a child group to the node most recently added.
  void add_group(std::span<const NodeId> members);

  // Computes the bottom-up order and the realised psi/hs. When `validate`
  // is set, also checks every group is an exact partition of its parent
  // (ConfigError otherwise). Builders for the six named families skip it.
  Structure finish(StructureParams params, bool validate = true) &&;

 private:
  Structure s_;
};

// Throws ConfigError describing the first violated invariant: root region
// is the full cell set, groups are exact partitions, graph is acyclic.
void validate_structure(const Structure& structure);

// Scratch space for repeated containment queries on one structure. Not
// thread-safe; give each thread its own.
class ContainmentQuery {
 public:
  explicit ContainmentQuery(const Structure& structure);

  // Nodes whose region holds `cell`, each placed after every member of its
  // child groups that also holds the cell. The span stays valid until the
  // next call.
  std::span<const NodeId> run(CellIndex cell);

 private:
  struct Frame {
    NodeId node;
    std::size_t next_group;
  };
  const Structure* structure_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  std::vector<Frame> stack_;
  std::vector<NodeId> out_;
};

std::vector<NodeId> nodes_containing(const Structure& structure,
                                     CellIndex cell);

// Builders. Each takes a grid and lays the structure over its cell order.
Structure build_binary_tree(const CellGrid& grid);
Structure build_kary_tree(const CellGrid& grid, std::size_t k);
Structure build_lexicographic_graph(const CellGrid& grid);
Structure build_kgroup_lexicographic(const CellGrid& grid, std::size_t k);

inline constexpr std::size_t kArbitrarySplittingCap = 16;
Structure build_arbitrary_splitting(const CellGrid& grid,
                                    std::size_t max_cells = kArbitrarySplittingCap);

// Every node is an axis-aligned box of cells; each child group halves the
// box along one dimension that still has more than one cell. All split
// counts of the grid must be powers of two.
Structure build_arbitrary_position_splitting(const CellGrid& grid);
// Convenience form over CellGrid::uniform(dims, 2^depth).
Structure build_arbitrary_position_splitting(std::size_t dims,
                                             std::size_t depth);

}  // namespace hsb
