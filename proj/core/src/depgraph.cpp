#include "datawa/depgraph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace datawa {

namespace {

/// Index-based adjacency for a node list.
std::vector<std::vector<int>> adjacency(const std::vector<WorkerId>& nodes,
                                        const std::vector<std::pair<WorkerId, WorkerId>>& edges) {
  std::vector<std::vector<int>> adj(nodes.size());
  auto index_of = [&](WorkerId w) {
    return static_cast<int>(std::lower_bound(nodes.begin(), nodes.end(), w) - nodes.begin());
  };
  for (const auto& [u, v] : edges) {
    const int iu = index_of(u);
    const int iv = index_of(v);
    adj[iu].push_back(iv);
    adj[iv].push_back(iu);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

bool intersects(const std::vector<TaskId>& a, const std::vector<TaskId>& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j]) ++i;
    else ++j;
  }
  return false;
}

}  // namespace

bool Wdg::has_edge(WorkerId u, WorkerId v) const {
  if (u > v) std::swap(u, v);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(u, v));
}

std::vector<WorkerId> Wdg::neighbors(WorkerId u) const {
  std::vector<WorkerId> out;
  for (const auto& [a, b] : edges) {
    if (a == u) out.push_back(b);
    else if (b == u) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<WorkerId>> Wdg::components() const {
  const auto adj = adjacency(nodes, edges);
  std::vector<int> comp(nodes.size(), -1);
  std::vector<std::vector<WorkerId>> out;
  for (std::size_t start = 0; start < nodes.size(); ++start) {
    if (comp[start] != -1) continue;
    const int c = static_cast<int>(out.size());
    std::vector<int> stack{static_cast<int>(start)};
    comp[start] = c;
    out.emplace_back();
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      out[c].push_back(nodes[u]);
      for (int v : adj[u]) {
        if (comp[v] == -1) {
          comp[v] = c;
          stack.push_back(v);
        }
      }
    }
    std::sort(out[c].begin(), out[c].end());
  }
  return out;
}

Wdg Wdg::induced(std::span<const WorkerId> keep) const {
  Wdg out;
  out.nodes.assign(keep.begin(), keep.end());
  std::sort(out.nodes.begin(), out.nodes.end());
  for (const auto& [u, v] : edges) {
    if (std::binary_search(out.nodes.begin(), out.nodes.end(), u) &&
        std::binary_search(out.nodes.begin(), out.nodes.end(), v)) {
      out.edges.emplace_back(u, v);
    }
  }
  return out;
}

Wdg build_wdg(std::span<const Worker> workers, const SequenceCatalog& catalogs) {
  Wdg g;
  g.nodes.reserve(workers.size());
  for (const Worker& w : workers) g.nodes.push_back(w.id);
  std::sort(g.nodes.begin(), g.nodes.end());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& rs_i = catalogs.at(g.nodes[i]).reachable;
    for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
      if (intersects(rs_i, catalogs.at(g.nodes[j]).reachable)) {
        g.edges.emplace_back(g.nodes[i], g.nodes[j]);
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

CliqueSet mcs_partition(const Wdg& g) {
  CliqueSet out;
  const int n = static_cast<int>(g.nodes.size());
  if (n == 0) return out;
  auto adj_list = adjacency(g.nodes, g.edges);
  std::vector<std::set<int>> adj(n);
  for (int u = 0; u < n; ++u) adj[u] = std::set<int>(adj_list[u].begin(), adj_list[u].end());

  // Maximum cardinality search: visit the unvisited vertex with the most
  // visited neighbors, ties to the lowest worker id.
  std::vector<int> visit_order;
  visit_order.reserve(n);
  std::vector<bool> visited(n, false);
  std::vector<int> label(n, 0);
  for (int step = 0; step < n; ++step) {
    int pick = -1;
    for (int u = 0; u < n; ++u) {
      if (visited[u]) continue;
      if (pick == -1 || label[u] > label[pick]) pick = u;
    }
    visited[pick] = true;
    visit_order.push_back(pick);
    for (int v : adj[pick]) {
      if (!visited[v]) ++label[v];
    }
  }

  // Eliminate in reverse visit order; completing each vertex's not-yet-
  // eliminated neighborhood into a clique yields a chordal fill, and the
  // elimination order is a perfect elimination ordering of the filled graph.
  std::vector<int> elim(visit_order.rbegin(), visit_order.rend());
  std::vector<int> elim_pos(n);
  for (int i = 0; i < n; ++i) elim_pos[elim[i]] = i;
  for (int i = 0; i < n; ++i) {
    const int u = elim[i];
    std::vector<int> later;
    for (int v : adj[u]) {
      if (elim_pos[v] > i) later.push_back(v);
    }
    for (std::size_t a = 0; a < later.size(); ++a) {
      for (std::size_t b = a + 1; b < later.size(); ++b) {
        if (adj[later[a]].insert(later[b]).second) {
          adj[later[b]].insert(later[a]);
          WorkerId wu = g.nodes[later[a]];
          WorkerId wv = g.nodes[later[b]];
          if (wu > wv) std::swap(wu, wv);
          out.fill_edges.emplace_back(wu, wv);
        }
      }
    }
  }
  std::sort(out.fill_edges.begin(), out.fill_edges.end());

  // Candidate cliques {v} + later neighbors, filtered to the maximal ones.
  std::vector<std::vector<int>> candidates;
  for (int i = 0; i < n; ++i) {
    const int u = elim[i];
    std::vector<int> c{u};
    for (int v : adj[u]) {
      if (elim_pos[v] > i) c.push_back(v);
    }
    std::sort(c.begin(), c.end());
    candidates.push_back(std::move(c));
  }
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    bool maximal = true;
    for (std::size_t b = 0; b < candidates.size() && maximal; ++b) {
      if (a == b || candidates[b].size() <= candidates[a].size()) continue;
      maximal = !std::includes(candidates[b].begin(), candidates[b].end(),
                               candidates[a].begin(), candidates[a].end());
    }
    if (maximal) {
      std::vector<WorkerId> clique;
      clique.reserve(candidates[a].size());
      for (int idx : candidates[a]) clique.push_back(g.nodes[idx]);
      out.cliques.push_back(std::move(clique));
    }
  }
  std::sort(out.cliques.begin(), out.cliques.end());
  out.cliques.erase(std::unique(out.cliques.begin(), out.cliques.end()), out.cliques.end());
  return out;
}

namespace {

/// Builds the subtree for one connected subgraph; returns the root node id.
int build_component(const Wdg& g, const CliqueSet& cliques, int component,
                    DependencyTree& tree) {
  // Choose the clique whose removal maximizes the residual component count.
  const std::vector<std::vector<WorkerId>>* pool = &cliques.cliques;
  std::vector<std::vector<WorkerId>> recomputed;
  if (pool->empty()) {
    recomputed = mcs_partition(g).cliques;
    pool = &recomputed;
  }
  int best = -1;
  std::size_t best_components = 0;
  for (std::size_t i = 0; i < pool->size(); ++i) {
    std::vector<WorkerId> rest;
    for (WorkerId w : g.nodes) {
      if (!std::binary_search((*pool)[i].begin(), (*pool)[i].end(), w)) rest.push_back(w);
    }
    const std::size_t n_comp = g.induced(rest).components().size();
    if (best == -1) {
      best = static_cast<int>(i);
      best_components = n_comp;
      continue;
    }
    const auto& cur = (*pool)[i];
    const auto& win = (*pool)[best];
    if (n_comp > best_components ||
        (n_comp == best_components &&
         (cur.size() < win.size() || (cur.size() == win.size() && cur < win)))) {
      best = static_cast<int>(i);
      best_components = n_comp;
    }
  }

  const int node_id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(TreeNode{node_id, (*pool)[best], {}, component});

  std::vector<WorkerId> rest;
  for (WorkerId w : g.nodes) {
    if (!std::binary_search((*pool)[best].begin(), (*pool)[best].end(), w)) rest.push_back(w);
  }
  const Wdg residual = g.induced(rest);
  for (const auto& comp : residual.components()) {
    const Wdg sub = residual.induced(comp);
    const CliqueSet sub_cliques = mcs_partition(sub);
    const int child = build_component(sub, sub_cliques, component, tree);
    tree.nodes[node_id].children.push_back(child);
  }
  return node_id;
}

void collect_subtree(const DependencyTree& tree, int node, std::vector<WorkerId>& out) {
  const TreeNode& n = tree.nodes[node];
  out.insert(out.end(), n.workers.begin(), n.workers.end());
  for (int c : n.children) collect_subtree(tree, c, out);
}

void print_node(const DependencyTree& tree, int node, int depth, std::ostringstream& os) {
  const TreeNode& n = tree.nodes[node];
  os << std::string(static_cast<std::size_t>(depth) * 2, ' ') << "node " << n.id << ": {";
  for (std::size_t i = 0; i < n.workers.size(); ++i) {
    if (i) os << ", ";
    os << n.workers[i];
  }
  os << "}\n";
  for (int c : n.children) print_node(tree, c, depth + 1, os);
}

nlohmann::json node_to_json(const DependencyTree& tree, int node) {
  const TreeNode& n = tree.nodes[node];
  nlohmann::json j;
  j["id"] = n.id;
  j["workers"] = n.workers;
  j["children"] = nlohmann::json::array();
  for (int c : n.children) j["children"].push_back(node_to_json(tree, c));
  return j;
}

}  // namespace

std::vector<WorkerId> DependencyTree::workers_of_subtree(int node) const {
  std::vector<WorkerId> out;
  collect_subtree(*this, node, out);
  std::sort(out.begin(), out.end());
  return out;
}

DependencyTree build_tree(const Wdg& g, const CliqueSet& cliques) {
  DependencyTree tree;
  const auto comps = g.components();
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const Wdg sub = g.induced(comps[c]);
    // Restrict the precomputed cliques to this component; cliques never span
    // components, so membership of the first worker decides.
    CliqueSet local;
    for (const auto& clique : cliques.cliques) {
      if (!clique.empty() &&
          std::binary_search(comps[c].begin(), comps[c].end(), clique.front())) {
        local.cliques.push_back(clique);
      }
    }
    tree.roots.push_back(build_component(sub, local, static_cast<int>(c), tree));
  }
  return tree;
}

std::string tree_to_text(const DependencyTree& tree) {
  std::ostringstream os;
  for (std::size_t i = 0; i < tree.roots.size(); ++i) {
    os << "tree " << i << "\n";
    print_node(tree, tree.roots[i], 1, os);
  }
  return os.str();
}

std::string tree_to_json(const DependencyTree& tree) {
  nlohmann::json j = nlohmann::json::array();
  for (int r : tree.roots) j.push_back(node_to_json(tree, r));
  return j.dump(2);
}

}  // namespace datawa
