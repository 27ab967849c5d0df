// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "layerscope/activations.hpp"
#include "layerscope/edgeprobe.hpp"
#include "layerscope/metrics.hpp"
#include "layerscope/mst.hpp"
#include "layerscope/rng.hpp"
#include "layerscope/rsa.hpp"
#include "layerscope/structprobe.hpp"
#include "layerscope/synth.hpp"
#include "layerscope/tree.hpp"
#include "oracles.hpp"

using namespace layerscope;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd x(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) x(i, j) = rng.normal();
  return x;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1. RSA identity and symmetry.
Outcome rsa_identity_symmetry() {
  double worst = 0.0;
  bool symmetric = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto kx = cosine_kernel(gaussian(200, 64, rng));
    const auto ky = cosine_kernel(gaussian(200, 64, rng));
    worst = std::max(worst, std::abs(rsa_score(kx, kx) - 1.0));
    symmetric = symmetric && rsa_score(kx, ky) == rsa_score(ky, kx);
  }
  return {worst <= 1e-6 && symmetric,
          "max |rsa(X,X)-1| = " + fmt("%.2e", worst) + ", bitwise symmetric = " + (symmetric ? "yes" : "no")};
}

// 2. Invariance to rotation and positive scaling.
Outcome rsa_invariance() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    const Eigen::MatrixXd x = gaussian(200, 64, rng);
    const auto q = random_orthogonal(64, seed);
    const double c = 0.01 + 100.0 * rng.uniform();
    const auto kx = cosine_kernel(x);
    worst = std::max(worst, std::abs(rsa_score(kx, cosine_kernel(x * q.transpose())) - 1.0));
    worst = std::max(worst, std::abs(rsa_score(kx, cosine_kernel(c * x)) - 1.0));
  }
  return {worst <= 1e-5, "max |rsa-1| over QX and cX = " + fmt("%.2e", worst)};
}

// 3. Planted-tree recovery on a held-out 20% split.
Outcome planted_recovery() {
  PlantConfig pc;  // 100 trees, sizes 5-20, m=64, k=32, noise 0
  pc.seed = 2024;
  const auto corpus = plant_tree_corpus(pc);
  std::vector<ProbeSentence> all;
  for (const auto& s : corpus.sentences) all.push_back(make_probe_sentence(s.layers[0], s.parse.tree));
  const std::span<const ProbeSentence> train(all.data(), 80), test(all.data() + 80, 20);

  ProbeTrainConfig cfg;
  cfg.rank = 64;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 100;
  cfg.patience = 6;
  cfg.seed = 7;
  const auto depth = train_probe(ProbeKind::kDepth, train, 0, cfg);
  const auto dist = train_probe(ProbeKind::kDistance, train, 0, cfg);
  const auto r = eval_structural(depth.params, dist.params, test);
  const double uuas = r.uuas.value_or(0), dsp = r.dist_spearman.value_or(0);
  const double root = r.root_acc.value_or(0), psp = r.depth_spearman.value_or(0);
  return {uuas >= 0.95 && dsp >= 0.95 && root >= 0.95 && psp >= 0.95,
          "UUAS " + fmt("%.4f", uuas) + ", dist-Spearman " + fmt("%.4f", dsp) + ", root acc " + fmt("%.4f", root) +
              ", depth-Spearman " + fmt("%.4f", psp) + " (epochs " + std::to_string(depth.epochs_run) + "/" +
              std::to_string(dist.epochs_run) + ")"};
}

// 4. Analytic gradients against central differences.
Outcome gradient_check() {
  double worst = 0.0;
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = static_cast<Eigen::Index>(1 + rng.below(4));
    const auto m = static_cast<Eigen::Index>(1 + rng.below(6));
    std::vector<ProbeSentence> batch;
    const std::size_t n_sent = 1 + rng.below(3);
    for (std::size_t s = 0; s < n_sent; ++s) {
      const auto t = random_tree(2 + rng.below(6), rng.next());
      batch.push_back(make_probe_sentence(gaussian(static_cast<Eigen::Index>(t.n_words()), m, rng), t));
    }
    for (auto kind : {ProbeKind::kDepth, ProbeKind::kDistance}) {
      ProbeParams p{kind, gaussian(k, m, rng), 0};
      const auto analytic = probe_loss_and_grad(p, batch).grad;
      Eigen::MatrixXd numeric(k, m);
      const double h = 1e-5;
      for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
          const double orig = p.B(i, j);
          p.B(i, j) = orig + h;
          const double up = probe_loss_and_grad(p, batch).loss;
          p.B(i, j) = orig - h;
          const double down = probe_loss_and_grad(p, batch).loss;
          p.B(i, j) = orig;
          numeric(i, j) = (up - down) / (2 * h);
        }
      const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-12);
      worst = std::max(worst, (analytic - numeric).cwiseAbs().maxCoeff() / scale);
    }
  }
  return {worst < 1e-3, "max relative error " + fmt("%.2e", worst) + " over 200 gradients"};
}

// 5. MST against exhaustive enumeration, and tree metrics edge-exact.
Outcome mst_oracle() {
  double worst = 0.0;
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(6));
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        w(i, j) = w(j, i) = trial % 4 == 0 ? static_cast<double>(rng.below(3)) : rng.uniform();
    double total = 0.0;
    for (auto [i, j] : decode_mst(w)) total += w(i, j);
    worst = std::max(worst, std::abs(total - oracle::brute_force_mst_weight(w, n)));
  }
  int exact = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto t = random_tree(2 + seed % 19, seed);
    exact += decode_mst(tree_distances(t).cast<double>()) == tree_edges(t);
  }
  return {worst <= 1e-12 && exact == 200,
          "max weight gap " + fmt("%.1e", worst) + ", tree metrics recovered " + std::to_string(exact) + "/200"};
}

// 6. Metric oracles.
Outcome metric_oracles() {
  double worst = 0.0;
  int compared = 0;
  Rng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng.below(5));
      y[i] = trial % 2 ? rng.normal() : static_cast<double>(rng.below(5));
    }
    const auto rx = oracle::average_ranks(x), ry = oracle::average_ranks(y);
    const bool defined = std::adjacent_find(rx.begin(), rx.end(), std::not_equal_to<>()) != rx.end() &&
                         std::adjacent_find(ry.begin(), ry.end(), std::not_equal_to<>()) != ry.end();
    if (!defined) {
      bool threw = false;
      try {
        spearman(x, y);
      } catch (const std::exception&) {
        threw = true;
      }
      if (!threw) worst = INFINITY;
      continue;
    }
    worst = std::max(worst, std::abs(spearman(x, y) - oracle::spearman(x, y)));
    ++compared;
  }
  const std::set<LabeledItem> pred{{0, 0}, {1, 1}, {2, 0}}, gold{{0, 0}, {1, 1}, {3, 2}};
  const auto f = micro_f1(pred, gold);
  const bool f1_ok = std::abs(f.precision - 2.0 / 3) < 1e-15 && std::abs(f.recall - 2.0 / 3) < 1e-15 &&
                     std::abs(f.f1 - 2.0 / 3) < 1e-15;
  double flip = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(2 + rng.below(20)), y;
    for (auto& v : x) v = rng.normal();
    const double a = 10 * rng.normal();
    for (double v : x) y.push_back(a - v);
    flip = std::max(flip, std::abs(pearson(x, y) + 1.0));
  }
  return {worst <= 1e-12 && f1_ok && flip <= 1e-12,
          "spearman gap " + fmt("%.1e", worst) + " on " + std::to_string(compared) + " defined vectors, micro-F1 " +
              fmt("%.6f", f.f1) + ", max |pearson(x,a-x)+1| " + fmt("%.1e", flip)};
}

// 7. tree_distances against Floyd-Warshall.
Outcome tree_distance_oracle() {
  int exact = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto t = random_tree(1 + seed % 12, 77 + seed);
    const auto d = tree_distances(t);
    const auto fw = oracle::floyd_warshall(t.heads);
    bool same = true;
    for (std::size_t i = 0; i < t.n_words(); ++i)
      for (std::size_t j = 0; j < t.n_words(); ++j)
        same = same && d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == fw[i][j];
    exact += same;
  }
  return {exact == 200, std::to_string(exact) + "/200 trees exact"};
}

// 8. Edge probe learnability and determinism.
Outcome edge_learnability() {
  SpanTaskConfig tc;  // 2000 examples
  tc.seed = 8;
  const auto task = plant_span_task(tc);
  const auto data = edge_dataset(task.examples, task.activations, 0);

  // Hold out the last 20% of sentences.
  const std::size_t n_sent = data.sentences.size();
  const std::size_t cut = n_sent - n_sent / 5;
  EdgeData train = data, test = data;
  train.items.clear();
  test.items.clear();
  for (const auto& item : data.items) (item.sentence < cut ? train : test).items.push_back(item);

  EdgeTrainConfig cfg;
  cfg.projection_dim = 64;
  cfg.hidden_dim = 64;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 16;
  cfg.max_epochs = 60;
  cfg.patience = 6;
  cfg.seed = 3;
  const auto a = train_edge_probe(train, cfg);
  const auto b = train_edge_probe(train, cfg);
  const bool identical = encode_edge_probe(a.model) == encode_edge_probe(b.model);
  const auto pr = eval_edge_probe(a.model, test, cfg.threshold);
  return {pr.f1 >= 0.95 && identical,
          "held-out micro-F1 " + fmt("%.4f", pr.f1) + " on " + std::to_string(test.items.size()) +
              " examples (epochs " + std::to_string(a.epochs_run) + "), same-seed runs bitwise identical = " +
              (identical ? "yes" : "no")};
}

// 9. Layer-divergence curve shape.
Outcome divergence_shape() {
  std::vector<std::size_t> lengths(100);
  Rng rng(9);
  for (auto& n : lengths) n = 5 + rng.below(16);
  const auto base = random_activation_set(13, lengths, 64, 90);
  const auto tuned = rerandomize_layers(base, 6, 91);
  const auto stim = sample_stimuli(base, 1000, 92);
  const auto curve = layerwise_rsa(base, tuned, stim);
  double low_min = 1.0, high_max = -1.0;
  for (const auto& [layer, score] : curve.scores)
    layer <= 5 ? low_min = std::min(low_min, score) : high_max = std::max(high_max, score);
  return {curve.scores.size() == 13 && low_min >= 0.999 && high_max <= 0.2,
          "min score layers 0-5 " + fmt("%.6f", low_min) + ", max score layers 6-12 " + fmt("%.4f", high_max)};
}

// 10. ACTV1 byte-identical round trip.
Outcome actv_round_trip() {
  int ok = 0;
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> lengths;
    if (trial == 0) {
      // 0 tokens
    } else if (trial == 1) {
      lengths = {1};
    } else {
      for (std::size_t s = 0, n = 1 + rng.below(5); s < n; ++s) lengths.push_back(1 + rng.below(12));
    }
    const auto set = random_activation_set(1 + rng.below(4), lengths, 1 + rng.below(16), rng.next(),
                                           trial % 2 ? "wiki" : "mnli");
    const auto bytes = encode_activations(set);
    const auto back = decode_activations(bytes);
    ok += back == set && encode_activations(back) == bytes;
  }
  return {ok == 50, std::to_string(ok) + "/50 sets byte-identical (incl. 0- and 1-token)"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 = no stated limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "RSA identity & symmetry", 10, rsa_identity_symmetry},
      {2, "RSA orthogonal/scale invariance", 30, rsa_invariance},
      {3, "planted-tree recovery", 300, planted_recovery},
      {4, "probe gradient correctness", 30, gradient_check},
      {5, "MST oracle equivalence", 60, mst_oracle},
      {6, "metric oracles", 0, metric_oracles},
      {7, "tree_distances vs Floyd-Warshall", 0, tree_distance_oracle},
      {8, "edge probe learnability", 180, edge_learnability},
      {9, "layer-divergence shape", 0, divergence_shape},
      {10, "ACTV1 round trip", 0, actv_round_trip},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_s == 0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s [%d] %s: %s; %.2f s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_s > 0 ? (" (limit " + fmt("%.0f", c.budget_s) + " s)").c_str() : "");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
