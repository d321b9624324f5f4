#include "hsb/hierarchy_json.hpp"

#include "hsb/errors.hpp"

namespace hsb {

nlohmann::json structure_to_json(const Structure& s) {
  using nlohmann::json;
  json nodes = json::array();
  for (NodeId i = 0; i < s.size(); ++i) {
    json region = json::array();
    for (const auto& iv : s.region(i)) region.push_back({iv.first, iv.last});
    json groups = json::array();
    for (std::size_t g = 0; g < s.group_count(i); ++g) {
      const auto grp = s.group(i, g);
      groups.push_back(json(std::vector<NodeId>(grp.begin(), grp.end())));
    }
    nodes.push_back({{"id", i}, {"region", region}, {"groups", groups}});
  }
  const auto splits = s.grid().splits();
  return {{"kind", to_string(s.params().kind)},
          {"psi", s.psi()},
          {"hs", s.hs()},
          {"branching", s.params().branching},
          {"dims", s.params().dims},
          {"grid", std::vector<std::size_t>(splits.begin(), splits.end())},
          {"root", s.root()},
          {"nodes", nodes}};
}

Structure structure_from_json(const nlohmann::json& doc) {
  try {
    CellGrid grid(doc.at("grid").get<std::vector<std::size_t>>());
    StructureBuilder b(grid);
    const auto& nodes = doc.at("nodes");
    std::vector<CellInterval> region;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& node = nodes[i];
      if (node.at("id").get<std::size_t>() != i)
        throw ConfigError("node ids must be dense and in order");
      region.clear();
      for (const auto& iv : node.at("region"))
        region.push_back({iv.at(0).get<CellIndex>(), iv.at(1).get<CellIndex>()});
      b.add_node(region);
      for (const auto& grp : node.at("groups"))
        b.add_group(grp.get<std::vector<NodeId>>());
    }
    if (doc.value("root", 0) != 0) throw ConfigError("root must be node 0");
    StructureParams p;
    p.kind = structure_kind_from_string(doc.value("kind", "custom"));
    p.branching = doc.value("branching", std::size_t{2});
    p.dims = doc.value("dims", grid.dims());
    return std::move(b).finish(p, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("structure descriptor: ") + e.what());
  }
}

}  // namespace hsb
