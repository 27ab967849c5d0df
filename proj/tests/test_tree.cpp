#include <doctest.h>

#include <algorithm>
#include <array>

#include "layerscope/synth.hpp"
#include "layerscope/tree.hpp"
#include "oracles.hpp"

using namespace layerscope;

namespace {

DepTree tree_of(std::vector<int> heads) {
  DepTree t;
  t.heads = std::move(heads);
  t.deprels.assign(t.heads.size(), "dep");
  t.upos.assign(t.heads.size(), "X");
  return t;
}

}  // namespace

TEST_CASE("depth examples") {
  // a <- b <- c rooted at a.
  CHECK(tree_depths(tree_of({0, 1, 2})) == std::vector<int>{0, 1, 2});
  CHECK(tree_depths(tree_of({0, 1, 1, 1})) == std::vector<int>{0, 1, 1, 1});
}

TEST_CASE("distance examples") {
  const auto chain = tree_of({0, 1, 2});
  const auto d = tree_distances(chain);
  CHECK(d(0, 2) == 2);
  CHECK(d(2, 0) == 2);
  const auto t = random_tree(9, 4);
  const auto dt = tree_distances(t);
  for (std::size_t i = 0; i < t.n_words(); ++i)
    if (t.heads[i] > 0) CHECK(dt(static_cast<int>(i), t.heads[i] - 1) == 1);
}

TEST_CASE("depths match a BFS oracle and distances match Floyd-Warshall") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = random_tree(1 + seed % 12, seed);
    CHECK(tree_depths(t) == oracle::bfs_depths(t.heads));
    const auto d = tree_distances(t);
    const auto fw = oracle::floyd_warshall(t.heads);
    for (std::size_t i = 0; i < t.n_words(); ++i)
      for (std::size_t j = 0; j < t.n_words(); ++j) CHECK(d(i, j) == fw[i][j]);
  }
}

TEST_CASE("tree distances satisfy the four-point condition") {
  const auto t = random_tree(9, 17);
  const auto d = tree_distances(t);
  const int n = 9;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int e = 0; e < n; ++e) {
          std::array<int, 3> s{d(a, b) + d(c, e), d(a, c) + d(b, e), d(a, e) + d(b, c)};
          std::sort(s.begin(), s.end());
          CHECK(s[1] == s[2]);
        }
}

TEST_CASE("tree_edges lists each head link once, sorted") {
  const auto edges = tree_edges(tree_of({3, 3, 0, 3}));
  CHECK(edges == std::vector<std::pair<int, int>>{{0, 2}, {1, 2}, {2, 3}});
}
