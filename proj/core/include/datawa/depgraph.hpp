#pragma once

#include <span>
#include <string>
#include <vector>

#include "datawa/seqplan.hpp"
#include "datawa/types.hpp"

namespace datawa {

/// Worker dependency graph: an edge joins two workers whose reachable task
/// sets intersect.
struct Wdg {
  std::vector<WorkerId> nodes;                        // ascending
  std::vector<std::pair<WorkerId, WorkerId>> edges;   // u < v, sorted

  bool has_edge(WorkerId u, WorkerId v) const;
  std::vector<WorkerId> neighbors(WorkerId u) const;
  /// Connected components, each sorted, ordered by smallest member.
  std::vector<std::vector<WorkerId>> components() const;
  /// Induced subgraph over `keep` (sorted worker ids).
  Wdg induced(std::span<const WorkerId> keep) const;
};

Wdg build_wdg(std::span<const Worker> workers, const SequenceCatalog& catalogs);

/// Maximal cliques of the chordal supergraph produced by maximum cardinality
/// search, together with the fill edges the chordalization added.
struct CliqueSet {
  std::vector<std::vector<WorkerId>> cliques;           // each sorted; list sorted lex
  std::vector<std::pair<WorkerId, WorkerId>> fill_edges;  // u < v, sorted
};

/// Runs maximum cardinality search (ties to the lowest worker id), eliminates
/// in reverse visit order to obtain a chordal fill, and enumerates the maximal
/// cliques of the filled graph.
CliqueSet mcs_partition(const Wdg& g);

struct TreeNode {
  int id = 0;
  std::vector<WorkerId> workers;  // sorted
  std::vector<int> children;
  int component = 0;              // index of the containing tree in roots
};

/// Forest over the worker dependency graph: one tree per connected component.
/// Node worker sets partition the workers; sibling subtrees have no WDG edge
/// between them.
struct DependencyTree {
  std::vector<TreeNode> nodes;
  std::vector<int> roots;

  std::vector<WorkerId> workers_of_subtree(int node) const;
};

/// Recursive tree construction: picks the clique whose removal maximizes the
/// component count (ties: smallest clique, then lexicographic), roots it, and
/// recurses per residual component with a fresh clique decomposition.
DependencyTree build_tree(const Wdg& g, const CliqueSet& cliques);

std::string tree_to_text(const DependencyTree& tree);
std::string tree_to_json(const DependencyTree& tree);

}  // namespace datawa
