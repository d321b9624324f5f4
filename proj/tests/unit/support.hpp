#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hsb/hierarchy.hpp"

namespace test_support {

inline std::set<hsb::CellIndex> cell_set(const hsb::Structure& s,
                                         hsb::NodeId node) {
  std::set<hsb::CellIndex> out;
  for (const auto& iv : s.region(node))
    for (std::size_t c = iv.first; c <= iv.last; ++c)
      out.insert(static_cast<hsb::CellIndex>(c));
  return out;
}

// A spread of sizes for every builder.
inline std::vector<std::pair<std::string, hsb::Structure>> all_builders() {
  using namespace hsb;
  std::vector<std::pair<std::string, Structure>> v;
  for (std::size_t n : {2u, 4u, 16u})
    v.emplace_back("binary-tree N=" + std::to_string(n),
                   build_binary_tree(CellGrid({n})));
  v.emplace_back("binary-tree 2-D N=16",
                 build_binary_tree(CellGrid::uniform(2, 16)));
  v.emplace_back("kary-tree K=3 N=9", build_kary_tree(CellGrid({9}), 3));
  v.emplace_back("kary-tree K=4 N=16", build_kary_tree(CellGrid({16}), 4));
  for (std::size_t n : {2u, 3u, 5u})
    v.emplace_back("lexicographic N=" + std::to_string(n),
                   build_lexicographic_graph(CellGrid({n})));
  v.emplace_back("kgroup K=3 N=4", build_kgroup_lexicographic(CellGrid({4}), 3));
  v.emplace_back("kgroup K=3 N=7", build_kgroup_lexicographic(CellGrid({7}), 3));
  v.emplace_back("kgroup K=4 N=4", build_kgroup_lexicographic(CellGrid({4}), 4));
  for (std::size_t n : {2u, 3u, 5u})
    v.emplace_back("arbitrary-splitting N=" + std::to_string(n),
                   build_arbitrary_splitting(CellGrid({n})));
  v.emplace_back("position-splitting d=1 D=3",
                 build_arbitrary_position_splitting(1, 3));
  v.emplace_back("position-splitting d=2 D=2",
                 build_arbitrary_position_splitting(2, 2));
  v.emplace_back("position-splitting d=2 D=4",
                 build_arbitrary_position_splitting(2, 4));
  v.emplace_back("position-splitting d=3 D=3",
                 build_arbitrary_position_splitting(3, 3));
  return v;
}

}  // namespace test_support
