#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tcm/matrix.hpp"
#include "tcm/rng.hpp"

namespace tcm {

using Edge = std::pair<int, int>;

// Undirected, unweighted graph with dense node features. Edges are stored
// once with u < v, sorted, deduplicated; self-loops only ever appear inside
// adjacency normalization.
struct Graph {
  int n_nodes = 0;
  std::vector<Edge> edges;
  Matrix features;                        // N x F
  std::optional<std::vector<int>> labels; // length N when present
  std::string name;

  int feat_dim() const { return features.cols(); }
  std::vector<int> degrees() const;
  bool has_edge(int u, int v) const;  // binary search over the sorted list
  void validate() const;
};

// Sorts, flips to u < v, drops duplicates and self-loops. Returns the number
// of duplicates removed so loaders can warn or fail in strict mode.
int canonicalize_edges(std::vector<Edge>& edges);

struct NodeSplits {
  std::vector<int> train, val, test;
};

struct LoadOptions {
  bool strict = false;  // escalate duplicate-edge warnings to errors
};

Graph load_graph_json(const std::string& path, const LoadOptions& opts = {});
// Whitespace-separated "u v" lines plus a per-node feature CSV (no header).
Graph load_graph_edgelist(const std::string& edge_path, const std::string& features_csv_path,
                          const std::string& name = "", const LoadOptions& opts = {});
void save_graph_json(const Graph& g, const std::string& path);

// Symmetric GCN normalization D^{-1/2} (A + I) D^{-1/2} as a dense matrix.
Matrix normalize_adjacency(const Graph& g);
// Same, with the given edges removed first (used by the edge-masking task).
Matrix normalize_adjacency_without(const Graph& g, const std::vector<Edge>& dropped);

struct SbmParams {
  int blocks = 5;
  int nodes_per_block = 12;
  double p_in = 0.3;
  double p_out = 0.02;
  int feat_dim = 16;
  double noise = 0.5;
};

// Stochastic block model with Gaussian block-mean features; labels = block id.
Graph synth_sbm(const SbmParams& p, Rng rng);

struct SplitFractions {
  double train = 0.1, val = 0.1, test = 0.8;
};

// Seeded disjoint node partition, class-stratified when labels exist. Falls
// back to an unstratified split (with a stderr warning) when some class has
// fewer members than there are nonzero split slots.
NodeSplits split_nodes(const Graph& g, const SplitFractions& fractions, Rng rng);

// BFS hop distances from src; -1 marks unreachable nodes.
std::vector<int> bfs_distances(const Graph& g, int src);
std::vector<int> connected_components(const Graph& g);  // component id per node
// Largest finite hop distance over all node pairs (0 for edgeless graphs).
int graph_diameter(const Graph& g);

std::vector<std::vector<int>> adjacency_lists(const Graph& g);

}  // namespace tcm
