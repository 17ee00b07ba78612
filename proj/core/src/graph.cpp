#include "tcm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tcm/errors.hpp"

namespace tcm {

using nlohmann::json;

std::vector<int> Graph::degrees() const {
  std::vector<int> d(n_nodes, 0);
  for (auto [u, v] : edges) {
    ++d[u];
    ++d[v];
  }
  return d;
}

bool Graph::has_edge(int u, int v) const {
  if (u == v) return false;
  Edge e = u < v ? Edge{u, v} : Edge{v, u};
  return std::binary_search(edges.begin(), edges.end(), e);
}

void Graph::validate() const {
  if (features.rows() != n_nodes)
    throw ParseError("feature row count " + std::to_string(features.rows()) +
                     " does not match n_nodes " + std::to_string(n_nodes));
  for (std::size_t i = 0; i < edges.size(); ++i) {
    auto [u, v] = edges[i];
    if (u < 0 || v < 0 || u >= n_nodes || v >= n_nodes)
      throw ParseError("edge " + std::to_string(i) + " references node out of [0, " +
                       std::to_string(n_nodes) + ")");
    if (u == v) throw ParseError("self-loop stored at edge " + std::to_string(i));
  }
  if (labels && static_cast<int>(labels->size()) != n_nodes)
    throw ParseError("label count does not match n_nodes");
}

int canonicalize_edges(std::vector<Edge>& edges) {
  std::size_t before = edges.size();
  std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
  for (auto& e : edges)
    if (e.first > e.second) std::swap(e.first, e.second);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return static_cast<int>(before - edges.size());
}

namespace {

void handle_duplicates(int removed, const std::string& where, const LoadOptions& opts) {
  if (removed <= 0) return;
  if (opts.strict)
    throw ParseError(where + ": " + std::to_string(removed) + " duplicate/self-loop edges (strict mode)");
  std::cerr << "warning: " << where << ": dropped " << removed << " duplicate/self-loop edges\n";
}

}  // namespace

Graph load_graph_json(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open graph file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }

  Graph g;
  if (!j.contains("n_nodes")) throw ParseError(path + ": missing n_nodes");
  g.n_nodes = j.at("n_nodes").get<int>();
  if (g.n_nodes < 0) throw ParseError(path + ": n_nodes must be nonnegative");

  for (const auto& e : j.value("edges", json::array())) {
    if (!e.is_array() || e.size() != 2) throw ParseError(path + ": edges must be [u, v] pairs");
    g.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  handle_duplicates(canonicalize_edges(g.edges), path, opts);

  const auto& feats = j.value("features", json::array());
  int f_dim = feats.empty() ? 0 : static_cast<int>(feats[0].size());
  Matrix x(static_cast<int>(feats.size()), f_dim);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (static_cast<int>(feats[i].size()) != f_dim)
      throw ParseError(path + ": ragged feature row " + std::to_string(i));
    for (int c = 0; c < f_dim; ++c) x(static_cast<int>(i), c) = feats[i][c].get<double>();
  }
  if (x.rows() != g.n_nodes)
    throw ParseError(path + ": feature row " + std::to_string(x.rows() > g.n_nodes ? g.n_nodes : x.rows()) +
                     " has no matching node (n_nodes = " + std::to_string(g.n_nodes) + ")");
  g.features = std::move(x);

  if (j.contains("labels") && !j.at("labels").is_null())
    g.labels = j.at("labels").get<std::vector<int>>();
  g.name = j.value("name", path);
  g.validate();
  return g;
}

Graph load_graph_edgelist(const std::string& edge_path, const std::string& features_csv_path,
                          const std::string& name, const LoadOptions& opts) {
  std::ifstream fin(features_csv_path);
  if (!fin) throw ParseError("cannot open feature CSV: " + features_csv_path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(fin, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(features_csv_path + ": bad value in row " + std::to_string(rows.size()));
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(features_csv_path + ": ragged feature row " + std::to_string(rows.size()));
    rows.push_back(std::move(row));
  }

  Graph g;
  g.n_nodes = static_cast<int>(rows.size());
  int f_dim = rows.empty() ? 0 : static_cast<int>(rows.front().size());
  g.features = Matrix(g.n_nodes, f_dim);
  for (int i = 0; i < g.n_nodes; ++i)
    for (int c = 0; c < f_dim; ++c) g.features(i, c) = rows[i][c];

  std::ifstream ein(edge_path);
  if (!ein) throw ParseError("cannot open edge list: " + edge_path);
  int u, v;
  while (ein >> u >> v) g.edges.emplace_back(u, v);
  if (!ein.eof()) throw ParseError(edge_path + ": expected whitespace-separated integer pairs");
  handle_duplicates(canonicalize_edges(g.edges), edge_path, opts);

  g.name = name.empty() ? edge_path : name;
  g.validate();
  return g;
}

void save_graph_json(const Graph& g, const std::string& path) {
  json j;
  j["n_nodes"] = g.n_nodes;
  json edges = json::array();
  for (auto [u, v] : g.edges) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  json feats = json::array();
  for (int i = 0; i < g.features.rows(); ++i) {
    json row = json::array();
    for (int c = 0; c < g.features.cols(); ++c) row.push_back(g.features(i, c));
    feats.push_back(std::move(row));
  }
  j["features"] = std::move(feats);
  if (g.labels) j["labels"] = *g.labels;
  j["name"] = g.name;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

namespace {

Matrix normalized_from_edges(int n, const std::vector<Edge>& edges) {
  std::vector<double> deg(n, 1.0);  // self-loop included
  for (auto [u, v] : edges) {
    deg[u] += 1.0;
    deg[v] += 1.0;
  }
  std::vector<double> inv_sqrt(n);
  for (int i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
  Matrix a(n, n);
  for (int i = 0; i < n; ++i) a(i, i) = inv_sqrt[i] * inv_sqrt[i];
  for (auto [u, v] : edges) {
    double w = inv_sqrt[u] * inv_sqrt[v];
    a(u, v) = w;
    a(v, u) = w;
  }
  return a;
}

}  // namespace

Matrix normalize_adjacency(const Graph& g) { return normalized_from_edges(g.n_nodes, g.edges); }

Matrix normalize_adjacency_without(const Graph& g, const std::vector<Edge>& dropped) {
  std::vector<Edge> drop = dropped;
  canonicalize_edges(drop);
  std::vector<Edge> kept;
  kept.reserve(g.edges.size());
  std::set_difference(g.edges.begin(), g.edges.end(), drop.begin(), drop.end(),
                      std::back_inserter(kept));
  return normalized_from_edges(g.n_nodes, kept);
}

Graph synth_sbm(const SbmParams& p, Rng rng) {
  if (p.blocks < 1 || p.nodes_per_block < 1) throw ParamError("sbm: blocks and nodes_per_block must be >= 1");
  if (p.p_out < 0 || p.p_out > p.p_in || p.p_in > 1.0)
    throw ParamError("sbm: need 0 <= p_out <= p_in <= 1");

  Graph g;
  g.n_nodes = p.blocks * p.nodes_per_block;
  g.name = "sbm-" + std::to_string(p.blocks) + "x" + std::to_string(p.nodes_per_block);
  std::vector<int> block(g.n_nodes);
  for (int i = 0; i < g.n_nodes; ++i) block[i] = i / p.nodes_per_block;
  g.labels = block;

  Rng feat_rng = rng.child("features");
  Matrix means(p.blocks, p.feat_dim);
  for (auto& x : means.data()) x = feat_rng.normal();
  g.features = Matrix(g.n_nodes, p.feat_dim);
  for (int i = 0; i < g.n_nodes; ++i)
    for (int c = 0; c < p.feat_dim; ++c)
      g.features(i, c) = means(block[i], c) + p.noise * feat_rng.normal();

  Rng edge_rng = rng.child("edges");
  for (int i = 0; i < g.n_nodes; ++i)
    for (int j = i + 1; j < g.n_nodes; ++j) {
      double prob = block[i] == block[j] ? p.p_in : p.p_out;
      if (edge_rng.uniform() < prob) g.edges.emplace_back(i, j);
    }
  canonicalize_edges(g.edges);
  return g;
}

NodeSplits split_nodes(const Graph& g, const SplitFractions& f, Rng rng) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || f.train + f.val + f.test > 1.0 + 1e-12)
    throw ParamError("split fractions must be nonnegative and sum to <= 1");

  const int n = g.n_nodes;
  int want[3] = {static_cast<int>(std::floor(f.train * n + 1e-9)),
                 static_cast<int>(std::floor(f.val * n + 1e-9)),
                 static_cast<int>(std::floor(f.test * n + 1e-9))};

  int slots = (f.train > 0) + (f.val > 0) + (f.test > 0);
  bool stratified = g.labels.has_value();
  if (stratified) {
    std::vector<int> counts;
    for (int lbl : *g.labels) {
      if (lbl >= static_cast<int>(counts.size())) counts.resize(lbl + 1, 0);
      ++counts[lbl];
    }
    for (int c : counts)
      if (c > 0 && c < slots) {
        std::cerr << "warning: class with " << c << " members cannot fill " << slots
                  << " split slots; falling back to unstratified split\n";
        stratified = false;
        break;
      }
  }

  NodeSplits out;
  auto take = [&](std::vector<int>& pool, int count, std::vector<int>& dst) {
    for (int i = 0; i < count && !pool.empty(); ++i) {
      dst.push_back(pool.back());
      pool.pop_back();
    }
  };

  if (!stratified) {
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
    rng.shuffle(ids);
    take(ids, want[0], out.train);
    take(ids, want[1], out.val);
    take(ids, want[2], out.test);
  } else {
    int n_classes = *std::max_element(g.labels->begin(), g.labels->end()) + 1;
    std::vector<std::vector<int>> members(n_classes);
    for (int i = 0; i < n; ++i) members[(*g.labels)[i]].push_back(i);
    for (auto& m : members) rng.shuffle(m);

    // Largest-remainder allocation per class so global sizes land exactly.
    for (int s = 0; s < 3; ++s) {
      double frac = s == 0 ? f.train : (s == 1 ? f.val : f.test);
      std::vector<int> quota(n_classes, 0);
      std::vector<std::pair<double, int>> rem;
      int assigned = 0;
      for (int c = 0; c < n_classes; ++c) {
        double exact = frac * members[c].size();
        quota[c] = static_cast<int>(std::floor(exact + 1e-9));
        assigned += quota[c];
        rem.push_back({exact - quota[c], c});
      }
      std::stable_sort(rem.begin(), rem.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      for (std::size_t i = 0; assigned < want[s] && i < rem.size(); ++i) {
        int c = rem[i].second;
        if (quota[c] < static_cast<int>(members[c].size())) {
          ++quota[c];
          ++assigned;
        }
      }
      auto& dst = s == 0 ? out.train : (s == 1 ? out.val : out.test);
      for (int c = 0; c < n_classes; ++c) take(members[c], quota[c], dst);
    }
  }

  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<std::vector<int>> adjacency_lists(const Graph& g) {
  std::vector<std::vector<int>> adj(g.n_nodes);
  for (auto [u, v] : g.edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

std::vector<int> bfs_distances(const Graph& g, int src) {
  auto adj = adjacency_lists(g);
  std::vector<int> dist(g.n_nodes, -1);
  std::deque<int> q{src};
  dist[src] = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (int v : adj[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
  }
  return dist;
}

std::vector<int> connected_components(const Graph& g) {
  std::vector<int> comp(g.n_nodes, -1);
  auto adj = adjacency_lists(g);
  int c = 0;
  for (int s = 0; s < g.n_nodes; ++s) {
    if (comp[s] >= 0) continue;
    std::deque<int> q{s};
    comp[s] = c;
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (int v : adj[u])
        if (comp[v] < 0) {
          comp[v] = c;
          q.push_back(v);
        }
    }
    ++c;
  }
  return comp;
}

int graph_diameter(const Graph& g) {
  int diam = 0;
  for (int s = 0; s < g.n_nodes; ++s)
    for (int d : bfs_distances(g, s)) diam = std::max(diam, d);
  return diam;
}

}  // namespace tcm
