#include "ggmotion/topology.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

namespace ggmotion {

SkeletonTopology build_topology(std::vector<int> parent, std::vector<std::vector<int>> groups) {
  SkeletonTopology t;
  t.n_joints = static_cast<int>(parent.size());
  t.parent = std::move(parent);
  t.groups = std::move(groups);
  const int n = t.n_joints;
  if (n < 1) throw ConfigError("topology: need at least one joint");

  for (int j = 0; j < n; ++j) {
    if (t.parent[j] == -1) {
      if (t.root >= 0) {
        throw ConfigError("topology: multiple roots (joints " + std::to_string(t.root) + " and " +
                          std::to_string(j) + ")");
      }
      t.root = j;
    } else if (t.parent[j] < 0 || t.parent[j] >= n) {
      throw ConfigError("topology: joint " + std::to_string(j) + " has out-of-range parent " +
                        std::to_string(t.parent[j]));
    }
  }
  if (t.root < 0) throw ConfigError("topology: no root (every joint has a parent)");

  // Walking parents from every joint must reach the root without revisits.
  for (int j = 0; j < n; ++j) {
    int cur = j, steps = 0;
    while (t.parent[cur] != -1) {
      cur = t.parent[cur];
      if (++steps > n) {
        throw ConfigError("topology: cycle in parent links through joint " + std::to_string(j));
      }
    }
  }

  if (t.groups.empty()) throw ConfigError("topology: need at least one group");
  t.group_of.assign(static_cast<size_t>(n), -1);
  for (size_t s = 0; s < t.groups.size(); ++s) {
    if (t.groups[s].empty()) throw ConfigError("topology: group " + std::to_string(s) + " is empty");
    for (int j : t.groups[s]) {
      if (j < 0 || j >= n) {
        throw ConfigError("topology: group " + std::to_string(s) + " references invalid joint " +
                          std::to_string(j));
      }
      if (t.group_of[static_cast<size_t>(j)] != -1) {
        throw ConfigError("topology: joint " + std::to_string(j) + " appears in two groups");
      }
      t.group_of[static_cast<size_t>(j)] = static_cast<int>(s);
      t.order.push_back(j);
    }
  }
  for (int j = 0; j < n; ++j) {
    if (t.group_of[static_cast<size_t>(j)] == -1) {
      throw ConfigError("topology: joint " + std::to_string(j) + " belongs to no group");
    }
  }
  t.rank.assign(static_cast<size_t>(n), 0);
  for (int r = 0; r < n; ++r) t.rank[static_cast<size_t>(t.order[static_cast<size_t>(r)])] = r;

  // Tree adjacency, each neighbor list in canonical-rank order.
  t.neighbors.assign(static_cast<size_t>(n), {});
  for (int r = 0; r < n; ++r) {
    int j = t.order[static_cast<size_t>(r)];
    if (t.parent[static_cast<size_t>(j)] != -1) {
      t.neighbors[static_cast<size_t>(j)].push_back(t.parent[static_cast<size_t>(j)]);
      t.neighbors[static_cast<size_t>(t.parent[static_cast<size_t>(j)])].push_back(j);
    }
  }
  for (auto& nb : t.neighbors) {
    std::sort(nb.begin(), nb.end(),
              [&](int a, int b) { return t.rank[static_cast<size_t>(a)] < t.rank[static_cast<size_t>(b)]; });
  }

  t.hop = hops(t);
  t.max_hop = t.hop.maxCoeff();
  return t;
}

Eigen::MatrixXi hops(const SkeletonTopology& topo) {
  const int n = topo.n_joints;
  Eigen::MatrixXi h = Eigen::MatrixXi::Constant(n, n, -1);
  for (int src = 0; src < n; ++src) {
    std::deque<int> queue{src};
    h(src, src) = 0;
    while (!queue.empty()) {
      int cur = queue.front();
      queue.pop_front();
      for (int nb : topo.neighbors[static_cast<size_t>(cur)]) {
        if (h(src, nb) == -1) {
          h(src, nb) = h(src, cur) + 1;
          queue.push_back(nb);
        }
      }
    }
    for (int j = 0; j < n; ++j) {
      if (h(src, j) == -1) {
        throw ConfigError("topology: joint " + std::to_string(j) + " unreachable from " +
                          std::to_string(src));
      }
    }
  }
  return h;
}

Row hop_embed(int h, int c_prime) {
  if (c_prime <= 0 || c_prime % 2 != 0) {
    throw ConfigError("hop_embed: c_prime must be positive and even, got " +
                      std::to_string(c_prime));
  }
  Row out(c_prime);
  for (int i = 0; 2 * i < c_prime; ++i) {
    double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(c_prime));
    out(2 * i) = std::sin(h * freq);
    out(2 * i + 1) = std::cos(h * freq);
  }
  return out;
}

HopEmbedding build_hop_embedding(const SkeletonTopology& topo, int c_prime) {
  HopEmbedding e;
  e.table.resize(topo.max_hop + 1, c_prime);
  for (int h = 0; h <= topo.max_hop; ++h) e.table.row(h) = hop_embed(h, c_prime);
  return e;
}

SkeletonTopology topology_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("topology JSON: ") + e.what());
  }
  if (!j.contains("parent") || !j.contains("groups")) {
    throw FormatError("topology JSON: missing \"parent\" or \"groups\"");
  }
  std::vector<int> parent;
  for (const auto& p : j.at("parent")) parent.push_back(p.is_null() ? -1 : p.get<int>());
  auto groups = j.at("groups").get<std::vector<std::vector<int>>>();
  if (j.contains("n_joints") && j.at("n_joints").get<int>() != static_cast<int>(parent.size())) {
    throw FormatError("topology JSON: n_joints does not match parent list length");
  }
  return build_topology(std::move(parent), std::move(groups));
}

std::string topology_to_json(const SkeletonTopology& topo) {
  nlohmann::json j;
  j["n_joints"] = topo.n_joints;
  auto& parents = j["parent"] = nlohmann::json::array();
  for (int p : topo.parent) {
    if (p == -1) {
      parents.push_back(nullptr);
    } else {
      parents.push_back(p);
    }
  }
  j["groups"] = topo.groups;
  return j.dump(2);
}

SkeletonTopology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open topology file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return topology_from_json(ss.str());
}

}  // namespace ggmotion
