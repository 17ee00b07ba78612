#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "tcm/artifacts.hpp"
#include "tcm/errors.hpp"
#include "tcm/graph.hpp"

using namespace tcm;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path p = fs::temp_directory_path() / "tcmlab_graphdata_test";
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

Graph two_triangles() {
  Graph g;
  g.n_nodes = 6;
  g.edges = {{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}};
  g.features = Matrix(6, 2, 1.0);
  g.name = "two-triangles";
  return g;
}

}  // namespace

TEST_CASE("json graph loading") {
  auto dir = temp_dir();
  SUBCASE("direct echo") {
    write_file(dir / "g.json", R"({
      "n_nodes": 3,
      "edges": [[0, 1], [1, 2]],
      "features": [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
      "labels": [0, 1, 0],
      "name": "tiny"
    })");
    Graph g = load_graph_json((dir / "g.json").string());
    CHECK(g.n_nodes == 3);
    CHECK(g.edges.size() == 2);
    CHECK(g.feat_dim() == 2);
    CHECK(g.labels.has_value());
    CHECK(g.name == "tiny");
  }
  SUBCASE("feature row count mismatch names the offending row") {
    write_file(dir / "bad.json", R"({
      "n_nodes": 3,
      "edges": [],
      "features": [[1.0], [2.0], [3.0], [4.0], [5.0], [6.0]]
    })");
    try {
      load_graph_json((dir / "bad.json").string());
      FAIL("expected parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
  }
  SUBCASE("ragged features rejected") {
    write_file(dir / "ragged.json", R"({
      "n_nodes": 2, "edges": [], "features": [[1.0, 2.0], [3.0]]
    })");
    CHECK_THROWS_AS(load_graph_json((dir / "ragged.json").string()), ParseError);
  }
  SUBCASE("out-of-range edge rejected") {
    write_file(dir / "edge.json", R"({
      "n_nodes": 2, "edges": [[0, 5]], "features": [[1.0], [1.0]]
    })");
    CHECK_THROWS_AS(load_graph_json((dir / "edge.json").string()), ParseError);
  }
}

TEST_CASE("edge list loading dedups reversed duplicates") {
  auto dir = temp_dir();
  write_file(dir / "g.edges", "0 1\n1 0\n1 2\n");
  write_file(dir / "g.csv", "1.0,2.0\n3.0,4.0\n5.0,6.0\n");
  Graph g = load_graph_edgelist((dir / "g.edges").string(), (dir / "g.csv").string(), "el");
  CHECK(g.n_nodes == 3);
  CHECK(g.edges.size() == 2);  // "0 1" and "1 0" collapse

  LoadOptions strict;
  strict.strict = true;
  CHECK_THROWS_AS(
      load_graph_edgelist((dir / "g.edges").string(), (dir / "g.csv").string(), "el", strict),
      ParseError);
}

TEST_CASE("graph json round trip") {
  auto dir = temp_dir();
  Graph g = two_triangles();
  g.labels = std::vector<int>{0, 0, 0, 1, 1, 1};
  save_graph_json(g, (dir / "rt.json").string());
  Graph h = load_graph_json((dir / "rt.json").string());
  CHECK(h.n_nodes == g.n_nodes);
  CHECK(h.edges == g.edges);
  CHECK(*h.labels == *g.labels);
}

TEST_CASE("adjacency normalization") {
  SUBCASE("isolated node keeps only its self-loop") {
    Graph g;
    g.n_nodes = 1;
    g.features = Matrix(1, 1, 1.0);
    Matrix a = normalize_adjacency(g);
    CHECK(a(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("two nodes, one edge") {
    Graph g;
    g.n_nodes = 2;
    g.edges = {{0, 1}};
    g.features = Matrix(2, 1, 1.0);
    Matrix a = normalize_adjacency(g);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(a(i, j) == doctest::Approx(0.5));
  }
  SUBCASE("triangle is uniform 1/3") {
    Graph g;
    g.n_nodes = 3;
    g.edges = {{0, 1}, {0, 2}, {1, 2}};
    g.features = Matrix(3, 1, 1.0);
    Matrix a = normalize_adjacency(g);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(a(i, j) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("symmetric with spectral radius at most one") {
    Graph g = synth_sbm({3, 5, 0.5, 0.1, 4, 0.3}, Rng(8));
    Matrix a = normalize_adjacency(g);
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j) CHECK(std::fabs(a(i, j) - a(j, i)) < 1e-12);
    // power iteration for the dominant eigenvalue
    std::vector<double> v(g.n_nodes, 1.0);
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
      std::vector<double> nv(g.n_nodes, 0.0);
      for (int i = 0; i < g.n_nodes; ++i)
        for (int j = 0; j < g.n_nodes; ++j) nv[i] += a(i, j) * v[j];
      double norm = 0.0;
      for (double x : nv) norm += x * x;
      norm = std::sqrt(norm);
      for (auto& x : nv) x /= norm;
      v = nv;
      lambda = norm;
    }
    CHECK(lambda <= 1.0 + 1e-9);
  }
  SUBCASE("masked edges drop out of the normalization") {
    Graph g = two_triangles();
    Matrix full = normalize_adjacency(g);
    Matrix cut = normalize_adjacency_without(g, {{0, 1}});
    CHECK(full(0, 1) > 0.0);
    CHECK(cut(0, 1) == 0.0);
    CHECK(cut(1, 0) == 0.0);
  }
}

TEST_CASE("stochastic block model") {
  SUBCASE("deterministic limit makes complete blocks") {
    Graph g = synth_sbm({2, 3, 1.0, 0.0, 2, 0.0}, Rng(1));
    CHECK(g.n_nodes == 6);
    CHECK(g.edges.size() == 6);  // two triangles
    auto comp = connected_components(g);
    std::set<int> ids(comp.begin(), comp.end());
    CHECK(ids.size() == 2);
  }
  SUBCASE("zero noise repeats the block mean") {
    Graph g = synth_sbm({2, 4, 0.6, 0.1, 3, 0.0}, Rng(2));
    for (int i = 1; i < 4; ++i)
      for (int c = 0; c < 3; ++c) CHECK(g.features(i, c) == g.features(0, c));
  }
  SUBCASE("uniform probability matches binomial statistics") {
    const double p = 0.2;
    const int n = 20;
    double total = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s)
      total += static_cast<double>(synth_sbm({2, 10, p, p, 2, 0.1}, Rng(100 + s)).edges.size());
    double pairs = n * (n - 1) / 2.0;
    double mean_expected = p * pairs;
    double sd = std::sqrt(pairs * p * (1 - p) / seeds);
    CHECK(std::fabs(total / seeds - mean_expected) <= 3.0 * sd);
  }
  SUBCASE("p_out = 0 gives exactly `blocks` components") {
    Graph g = synth_sbm({4, 6, 0.9, 0.0, 2, 0.1}, Rng(3));
    auto comp = connected_components(g);
    std::set<int> ids(comp.begin(), comp.end());
    CHECK(ids.size() == 4);
  }
}

TEST_CASE("node splits") {
  Graph g = synth_sbm({5, 20, 0.3, 0.05, 4, 0.5}, Rng(4));
  SUBCASE("exact sizes for 10/10/80") {
    NodeSplits s = split_nodes(g, {0.1, 0.1, 0.8}, Rng(5));
    CHECK(s.train.size() == 10);
    CHECK(s.val.size() == 10);
    CHECK(s.test.size() == 80);
    std::set<int> seen;
    for (auto* part : {&s.train, &s.val, &s.test})
      for (int id : *part) {
        CHECK(!seen.count(id));
        seen.insert(id);
      }
  }
  SUBCASE("degenerate split sends everything to train") {
    NodeSplits s = split_nodes(g, {1.0, 0.0, 0.0}, Rng(6));
    CHECK(s.train.size() == 100);
    CHECK(s.val.empty());
    CHECK(s.test.empty());
  }
  SUBCASE("same seed reproduces the split") {
    NodeSplits a = split_nodes(g, {0.2, 0.2, 0.6}, Rng(7));
    NodeSplits b = split_nodes(g, {0.2, 0.2, 0.6}, Rng(7));
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
  }
  SUBCASE("stratified splits balance classes") {
    NodeSplits s = split_nodes(g, {0.2, 0.2, 0.6}, Rng(8));
    std::vector<int> counts(5, 0);
    for (int id : s.train) ++counts[(*g.labels)[id]];
    for (int c : counts) CHECK(c == 4);  // 20% of each 20-node class
  }
  SUBCASE("tiny class falls back to unstratified") {
    Graph t = two_triangles();
    t.labels = std::vector<int>{0, 0, 0, 0, 0, 1};  // class 1 has a single member
    NodeSplits s = split_nodes(t, {0.5, 0.25, 0.25}, Rng(9));
    CHECK(s.train.size() + s.val.size() + s.test.size() <= 6);
  }
}

TEST_CASE("bfs distances and diameter") {
  Graph g = two_triangles();
  auto d = bfs_distances(g, 0);
  CHECK(d[1] == 1);
  CHECK(d[2] == 1);
  CHECK(d[3] == -1);  // unreachable
  CHECK(graph_diameter(g) == 1);
}

TEST_CASE("frozen artifacts") {
  SUBCASE("half of a four-edge graph masks two edges with paired negatives") {
    Graph g;
    g.n_nodes = 5;
    g.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}};
    g.features = Matrix(5, 2, 1.0);
    ArtifactConfig cfg;
    cfg.edge_mask_ratio = 0.5;
    cfg.clusters = 2;
    cfg.subgraph_size = 3;
    cfg.embed_dim = 2;
    FrozenArtifacts a = freeze_artifacts(g, cfg, Rng(10));
    CHECK(a.masked_edges.size() == 2);
    CHECK(a.negative_edges.size() == 2);
  }
  SUBCASE("negatives never collide with edges") {
    Graph g = synth_sbm({3, 6, 0.5, 0.1, 3, 0.2}, Rng(11));
    FrozenArtifacts a = freeze_artifacts(g, {}, Rng(12));
    for (const auto& e : a.negative_edges) CHECK(!g.has_edge(e.first, e.second));
    for (const auto& e : a.masked_edges) CHECK(g.has_edge(e.first, e.second));
  }
  SUBCASE("corruption permutation composed with its inverse is the identity") {
    Graph g = synth_sbm({2, 6, 0.5, 0.1, 3, 0.2}, Rng(13));
    FrozenArtifacts a = freeze_artifacts(g, {}, Rng(14));
    std::vector<int> inverse(g.n_nodes);
    for (int i = 0; i < g.n_nodes; ++i) inverse[a.corruption_perm[i]] = i;
    for (int i = 0; i < g.n_nodes; ++i) CHECK(a.corruption_perm[inverse[i]] == i);
  }
  SUBCASE("two disjoint triangles split into their components") {
    Graph g = two_triangles();
    ArtifactConfig cfg;
    cfg.clusters = 2;
    cfg.subgraph_size = 3;
    cfg.embed_dim = 2;
    FrozenArtifacts a = freeze_artifacts(g, cfg, Rng(15));
    CHECK(a.cluster_centers.size() == 2);
    CHECK(a.cluster_assign[0] == a.cluster_assign[1]);
    CHECK(a.cluster_assign[0] == a.cluster_assign[2]);
    CHECK(a.cluster_assign[3] == a.cluster_assign[4]);
    CHECK(a.cluster_assign[0] != a.cluster_assign[3]);
    // uniform degree, so centers are the lowest ids
    CHECK(a.cluster_centers[0] == 0);
    CHECK(a.cluster_centers[1] == 3);
  }
  SUBCASE("re-freezing with the same seed is bit-identical") {
    Graph g = synth_sbm({3, 5, 0.4, 0.1, 4, 0.3}, Rng(16));
    FrozenArtifacts a = freeze_artifacts(g, {}, Rng(17));
    FrozenArtifacts b = freeze_artifacts(g, {}, Rng(17));
    CHECK(artifacts_to_json(a) == artifacts_to_json(b));
  }
  SUBCASE("artifact json round trip") {
    Graph g = synth_sbm({2, 5, 0.5, 0.1, 3, 0.2}, Rng(18));
    FrozenArtifacts a = freeze_artifacts(g, {}, Rng(19));
    FrozenArtifacts b = artifacts_from_json(artifacts_to_json(a));
    CHECK(artifacts_to_json(a) == artifacts_to_json(b));
  }
  SUBCASE("ratio bounds validated") {
    ArtifactConfig cfg;
    cfg.edge_mask_ratio = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ParamError);
    cfg.edge_mask_ratio = 0.1;
    cfg.feature_mask_ratio = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ParamError);
  }
  SUBCASE("ppr subgraphs include their anchor and respect the size cap") {
    Graph g = synth_sbm({2, 8, 0.6, 0.1, 3, 0.2}, Rng(20));
    ArtifactConfig cfg;
    cfg.subgraph_size = 5;
    FrozenArtifacts a = freeze_artifacts(g, cfg, Rng(21));
    for (int i = 0; i < g.n_nodes; ++i) {
      CHECK(a.subgraph_samples[i].size() == 5);
      bool holds_anchor = false;
      for (int u : a.subgraph_samples[i]) holds_anchor |= (u == i);
      CHECK(holds_anchor);
    }
  }
}
