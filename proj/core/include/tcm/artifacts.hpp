#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcm/graph.hpp"

namespace tcm {

struct ArtifactConfig {
  double feature_mask_ratio = 0.2;  // nodes whose features become prediction targets
  double edge_mask_ratio = 0.1;
  int clusters = 4;
  int subgraph_size = 10;
  int embed_dim = 32;          // pca_rank defaults to min(F, embed_dim)
  int pca_rank = 0;            // 0 = derive from embed_dim
  int attr_pairs_per_node = 2; // pair-similarity task samples this many * N pairs

  void validate() const;
};

// Every stochastic ingredient a task target needs, drawn once per dataset and
// seed. Freezing these is what makes correlation numerators and denominators
// evaluate the identical target.
struct FrozenArtifacts {
  std::uint64_t seed = 0;
  std::string dataset;

  std::vector<int> feature_mask;            // nodes with masked features
  std::vector<Edge> masked_edges;           // subset of g.edges
  std::vector<Edge> negative_edges;         // non-edges, ~1:1 with g.edges
  std::vector<int> corruption_perm;         // bijection on [0, N)
  std::vector<std::vector<int>> subgraph_samples;  // per-anchor PPR top-s nodes
  std::vector<int> cluster_assign;          // cluster id per node
  std::vector<int> cluster_centers;         // one node id per cluster
  std::vector<Edge> attr_pairs;             // frozen pairs for similarity regression
  int pca_rank = 0;

  void validate(const Graph& g) const;
};

FrozenArtifacts freeze_artifacts(const Graph& g, const ArtifactConfig& cfg, Rng rng);

// Truncated personalized PageRank scores from one anchor (power iteration).
std::vector<double> ppr_scores(const Graph& g, int anchor, double restart = 0.15, int iters = 30);

std::string artifacts_to_json(const FrozenArtifacts& a);
FrozenArtifacts artifacts_from_json(const std::string& text);
void save_artifacts(const FrozenArtifacts& a, const std::string& path);
FrozenArtifacts load_artifacts(const std::string& path);

}  // namespace tcm
