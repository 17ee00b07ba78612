#include "tcm/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "tcm/errors.hpp"

namespace tcm {

using nlohmann::json;

void ArtifactConfig::validate() const {
  if (feature_mask_ratio <= 0.0 || feature_mask_ratio >= 1.0)
    throw ParamError("feature_mask_ratio must be in (0, 1)");
  if (edge_mask_ratio <= 0.0 || edge_mask_ratio >= 1.0)
    throw ParamError("edge_mask_ratio must be in (0, 1)");
  if (clusters < 1) throw ParamError("clusters must be >= 1");
  if (subgraph_size < 1) throw ParamError("subgraph_size must be >= 1");
  if (attr_pairs_per_node < 1) throw ParamError("attr_pairs_per_node must be >= 1");
}

void FrozenArtifacts::validate(const Graph& g) const {
  for (const auto& e : masked_edges)
    if (!std::binary_search(g.edges.begin(), g.edges.end(), e))
      throw ParamError("masked edge is not a graph edge");
  for (const auto& e : negative_edges)
    if (std::binary_search(g.edges.begin(), g.edges.end(), e))
      throw ParamError("negative edge collides with a graph edge");
  std::vector<char> seen(g.n_nodes, 0);
  if (static_cast<int>(corruption_perm.size()) != g.n_nodes)
    throw ParamError("corruption permutation has wrong length");
  for (int p : corruption_perm) {
    if (p < 0 || p >= g.n_nodes || seen[p]) throw ParamError("corruption permutation is not a bijection");
    seen[p] = 1;
  }
  for (std::size_t c = 0; c < cluster_centers.size(); ++c)
    if (cluster_assign[cluster_centers[c]] != static_cast<int>(c))
      throw ParamError("cluster center does not belong to its cluster");
}

std::vector<double> ppr_scores(const Graph& g, int anchor, double restart, int iters) {
  auto adj = adjacency_lists(g);
  std::vector<double> p(g.n_nodes, 0.0), next(g.n_nodes, 0.0);
  p[anchor] = 1.0;
  for (int t = 0; t < iters; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int u = 0; u < g.n_nodes; ++u) {
      if (p[u] == 0.0) continue;
      if (adj[u].empty()) {
        next[u] += (1.0 - restart) * p[u];  // dangling mass stays put
        continue;
      }
      double share = (1.0 - restart) * p[u] / adj[u].size();
      for (int v : adj[u]) next[v] += share;
    }
    next[anchor] += restart;
    std::swap(p, next);
  }
  return p;
}

namespace {

std::vector<int> top_k_by_score(const std::vector<double>& score, int k) {
  std::vector<int> ids(score.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  });
  ids.resize(std::min<std::size_t>(k, ids.size()));
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Cluster partition: connected components when there are at least k of them,
// otherwise balanced multi-source BFS from the k highest-degree nodes.
void build_clusters(const Graph& g, int k, std::vector<int>& assign, std::vector<int>& centers) {
  const int n = g.n_nodes;
  k = std::min(k, n);
  assign.assign(n, -1);

  auto comp = connected_components(g);
  int n_comp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;

  if (n_comp >= k) {
    for (int i = 0; i < n; ++i) assign[i] = comp[i] % k;
  } else {
    auto deg = g.degrees();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (deg[a] != deg[b]) return deg[a] > deg[b];
      return a < b;
    });
    auto adj = adjacency_lists(g);
    std::vector<std::deque<int>> frontier(k);
    for (int c = 0; c < k; ++c) {
      int seed = order[c];
      assign[seed] = c;
      frontier[c].push_back(seed);
    }
    // One hop per cluster per round keeps cluster growth balanced.
    bool grew = true;
    while (grew) {
      grew = false;
      for (int c = 0; c < k; ++c) {
        std::deque<int> next;
        while (!frontier[c].empty()) {
          int u = frontier[c].front();
          frontier[c].pop_front();
          for (int v : adj[u])
            if (assign[v] < 0) {
              assign[v] = c;
              next.push_back(v);
              grew = true;
            }
        }
        frontier[c] = std::move(next);
      }
    }
    for (int i = 0; i < n; ++i)
      if (assign[i] < 0) assign[i] = i % k;  // nodes unreachable from every seed
  }

  // Center = max-degree member, ties by lowest id.
  auto deg = g.degrees();
  centers.assign(k, -1);
  for (int i = 0; i < n; ++i) {
    int c = assign[i];
    if (centers[c] < 0 || deg[i] > deg[centers[c]]) centers[c] = i;
  }
  // Drop empty clusters (possible when k was clamped or ids were re-used).
  std::vector<int> remap(k, -1);
  std::vector<int> kept;
  for (int c = 0; c < k; ++c)
    if (centers[c] >= 0) {
      remap[c] = static_cast<int>(kept.size());
      kept.push_back(centers[c]);
    }
  for (int i = 0; i < n; ++i) assign[i] = remap[assign[i]];
  centers = std::move(kept);
}

}  // namespace

FrozenArtifacts freeze_artifacts(const Graph& g, const ArtifactConfig& cfg, Rng rng) {
  cfg.validate();
  const int n = g.n_nodes;
  FrozenArtifacts a;
  a.seed = rng.seed();
  a.dataset = g.name;

  // Feature mask.
  {
    Rng r = rng.child("feature_mask");
    int count = std::max(1, static_cast<int>(std::llround(cfg.feature_mask_ratio * n)));
    count = std::min(count, n);
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    r.shuffle(ids);
    a.feature_mask.assign(ids.begin(), ids.begin() + count);
    std::sort(a.feature_mask.begin(), a.feature_mask.end());
  }

  // Masked edges.
  {
    Rng r = rng.child("edge_mask");
    int count = static_cast<int>(std::llround(cfg.edge_mask_ratio * g.edges.size()));
    count = std::max(count, g.edges.empty() ? 0 : 1);
    if (count > static_cast<int>(g.edges.size()))
      throw ParamError("edge mask requests more edges than the graph has");
    std::vector<Edge> pool = g.edges;
    r.shuffle(pool);
    a.masked_edges.assign(pool.begin(), pool.begin() + count);
    std::sort(a.masked_edges.begin(), a.masked_edges.end());
  }

  // Balanced negatives: 1:1 with the masked edges, capped by availability.
  {
    Rng r = rng.child("negatives");
    std::vector<Edge> non_edges;
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
        if (!std::binary_search(g.edges.begin(), g.edges.end(), Edge{u, v}))
          non_edges.emplace_back(u, v);
    r.shuffle(non_edges);
    std::size_t want = std::min(non_edges.size(), a.masked_edges.size());
    a.negative_edges.assign(non_edges.begin(), non_edges.begin() + want);
    std::sort(a.negative_edges.begin(), a.negative_edges.end());
  }

  // Corruption permutation.
  a.corruption_perm = rng.child("corruption").permutation(n);

  // PPR subgraph samples.
  {
    int s = std::min(cfg.subgraph_size, n);
    a.subgraph_samples.resize(n);
    for (int anchor = 0; anchor < n; ++anchor)
      a.subgraph_samples[anchor] = top_k_by_score(ppr_scores(g, anchor), s);
  }

  build_clusters(g, cfg.clusters, a.cluster_assign, a.cluster_centers);

  // Frozen node pairs for the attribute-similarity task.
  {
    Rng r = rng.child("attr_pairs");
    long long total = static_cast<long long>(n) * (n - 1) / 2;
    long long want = std::min<long long>(static_cast<long long>(cfg.attr_pairs_per_node) * n, total);
    std::set<Edge> chosen;
    while (static_cast<long long>(chosen.size()) < want) {
      int u = static_cast<int>(r.uniform_int(n));
      int v = static_cast<int>(r.uniform_int(n));
      if (u == v) continue;
      chosen.insert(u < v ? Edge{u, v} : Edge{v, u});
    }
    a.attr_pairs.assign(chosen.begin(), chosen.end());
  }

  a.pca_rank = cfg.pca_rank > 0 ? cfg.pca_rank : std::min(g.feat_dim(), cfg.embed_dim);
  a.pca_rank = std::min({a.pca_rank, g.feat_dim(), n});

  a.validate(g);
  return a;
}

namespace {

json edges_to_json(const std::vector<Edge>& edges) {
  json arr = json::array();
  for (auto [u, v] : edges) arr.push_back({u, v});
  return arr;
}

std::vector<Edge> edges_from_json(const json& arr) {
  std::vector<Edge> out;
  for (const auto& e : arr) out.emplace_back(e[0].get<int>(), e[1].get<int>());
  return out;
}

}  // namespace

std::string artifacts_to_json(const FrozenArtifacts& a) {
  json j;
  j["seed"] = a.seed;
  j["dataset"] = a.dataset;
  j["feature_mask"] = a.feature_mask;
  j["masked_edges"] = edges_to_json(a.masked_edges);
  j["negative_edges"] = edges_to_json(a.negative_edges);
  j["corruption_perm"] = a.corruption_perm;
  j["subgraph_samples"] = a.subgraph_samples;
  j["cluster_assign"] = a.cluster_assign;
  j["cluster_centers"] = a.cluster_centers;
  j["attr_pairs"] = edges_to_json(a.attr_pairs);
  j["pca_rank"] = a.pca_rank;
  return j.dump(2) + "\n";
}

FrozenArtifacts artifacts_from_json(const std::string& text) {
  json j = json::parse(text);
  FrozenArtifacts a;
  a.seed = j.at("seed").get<std::uint64_t>();
  a.dataset = j.at("dataset").get<std::string>();
  a.feature_mask = j.at("feature_mask").get<std::vector<int>>();
  a.masked_edges = edges_from_json(j.at("masked_edges"));
  a.negative_edges = edges_from_json(j.at("negative_edges"));
  a.corruption_perm = j.at("corruption_perm").get<std::vector<int>>();
  a.subgraph_samples = j.at("subgraph_samples").get<std::vector<std::vector<int>>>();
  a.cluster_assign = j.at("cluster_assign").get<std::vector<int>>();
  a.cluster_centers = j.at("cluster_centers").get<std::vector<int>>();
  a.attr_pairs = edges_from_json(j.at("attr_pairs"));
  a.pca_rank = j.at("pca_rank").get<int>();
  return a;
}

void save_artifacts(const FrozenArtifacts& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << artifacts_to_json(a);
}

FrozenArtifacts load_artifacts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open artifacts file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return artifacts_from_json(text);
}

}  // namespace tcm
