#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "seedsched/rng.hpp"

namespace seedsched {

struct TrainingExample {
  Eigen::VectorXd x;
  double y = 0.0;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 0;           // 0 = unlimited
  int min_samples_leaf = 2;
  int features_per_split = 0;  // 0 = ceil(d/3)
  bool bootstrap = true;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double prediction = 0.0;  // mean of the targets routed here
  std::uint32_t n_samples = 0;
  double impurity_gain = 0.0;  // sum-of-squares reduction achieved by this split
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const Eigen::VectorXd& x) const {
    int i = 0;
    while (nodes[i].feature >= 0)
      i = (x[nodes[i].feature] <= nodes[i].threshold) ? nodes[i].left : nodes[i].right;
    return nodes[i].prediction;
  }
};

// Bagged CART regression trees with greedy variance-reduction splits over a
// random feature subset per node. Deterministic given the rng seed.
class RandomForestModel {
 public:
  std::vector<RegressionTree> trees;
  ForestParams params;
  std::uint64_t rng_seed = 0;
  int d = 0;

  bool fitted() const { return !trees.empty(); }

  static RandomForestModel fit(const std::vector<TrainingExample>& data, ForestParams params,
                               std::uint64_t rng_seed) {
    if (data.empty()) throw std::invalid_argument("cannot fit a forest on empty data");
    RandomForestModel m;
    m.params = params;
    m.rng_seed = rng_seed;
    m.d = static_cast<int>(data[0].x.size());
    const int n = static_cast<int>(data.size());
    const int mtry = params.features_per_split > 0 ? std::min(params.features_per_split, m.d)
                                                   : (m.d + 2) / 3;
    m.trees.reserve(params.n_trees);
    for (int ti = 0; ti < params.n_trees; ++ti) {
      Rng rng(mix_seed(rng_seed, ti));
      std::vector<int> idx(n);
      if (params.bootstrap) {
        for (int& i : idx) i = static_cast<int>(rng.index(n));
      } else {
        for (int i = 0; i < n; ++i) idx[i] = i;
      }
      m.trees.push_back(grow_tree(data, std::move(idx), params, mtry, rng));
    }
    return m;
  }

  double predict(const Eigen::VectorXd& x) const {
    if (!fitted()) throw std::logic_error("forest is not fitted");
    if (static_cast<int>(x.size()) != d) throw std::invalid_argument("dimension mismatch");
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict(x);
    return sum / static_cast<double>(trees.size());
  }

  // Mean decrease impurity: per feature, the sum over splits of the weighted
  // variance reduction, averaged over trees and normalized to sum to 1. All
  // zeros when no tree ever split (importance undefined in that case).
  Eigen::VectorXd feature_importance() const {
    if (!fitted()) throw std::logic_error("forest is not fitted");
    Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
    for (const auto& t : trees)
      for (const auto& nd : t.nodes)
        if (nd.feature >= 0) total[nd.feature] += nd.impurity_gain;
    total /= static_cast<double>(trees.size());
    const double s = total.sum();
    if (s > 0.0) total /= s;
    return total;
  }

 private:
  struct Work {
    std::vector<int> idx;
    int depth = 0;
    int slot = 0;  // node index to fill
  };

  static RegressionTree grow_tree(const std::vector<TrainingExample>& data,
                                  std::vector<int> root_idx, const ForestParams& p, int mtry,
                                  Rng& rng) {
    RegressionTree tree;
    const int d = static_cast<int>(data[0].x.size());
    std::vector<int> features(d);
    for (int f = 0; f < d; ++f) features[f] = f;

    std::vector<Work> stack;
    tree.nodes.emplace_back();
    stack.push_back({std::move(root_idx), 0, 0});

    std::vector<std::pair<double, double>> column;  // (feature value, target)
    while (!stack.empty()) {
      Work wk = std::move(stack.back());
      stack.pop_back();
      const auto& idx = wk.idx;
      const int n = static_cast<int>(idx.size());

      double sum = 0.0, sumsq = 0.0;
      double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
      for (int i : idx) {
        const double y = data[i].y;
        sum += y;
        sumsq += y * y;
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
      const double node_ssd = std::max(0.0, sumsq - sum * sum / n);
      tree.nodes[wk.slot].prediction = sum / n;
      tree.nodes[wk.slot].n_samples = static_cast<std::uint32_t>(n);

      const bool depth_ok = p.max_depth == 0 || wk.depth < p.max_depth;
      if (!depth_ok || n < 2 * p.min_samples_leaf || ymin == ymax) continue;  // leaf

      // mtry features without replacement (partial Fisher-Yates)
      for (int i = 0; i < mtry; ++i) {
        const int j = i + static_cast<int>(rng.index(d - i));
        std::swap(features[i], features[j]);
      }

      double best_gain = 0.0, best_threshold = 0.0;
      int best_feature = -1;
      for (int fi = 0; fi < mtry; ++fi) {
        const int f = features[fi];
        column.clear();
        for (int i : idx) column.emplace_back(data[i].x[f], data[i].y);
        std::sort(column.begin(), column.end());
        double lsum = 0.0, lsumsq = 0.0;
        for (int i = 1; i < n; ++i) {
          lsum += column[i - 1].second;
          lsumsq += column[i - 1].second * column[i - 1].second;
          if (column[i - 1].first == column[i].first) continue;
          if (i < p.min_samples_leaf || n - i < p.min_samples_leaf) continue;
          const double rsum = sum - lsum, rsumsq = sumsq - lsumsq;
          const double lssd = std::max(0.0, lsumsq - lsum * lsum / i);
          const double rssd = std::max(0.0, rsumsq - rsum * rsum / (n - i));
          const double gain = node_ssd - lssd - rssd;
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = f;
            best_threshold = (column[i - 1].first + column[i].first) / 2.0;
          }
        }
      }
      if (best_feature < 0) continue;  // no admissible split

      std::vector<int> left_idx, right_idx;
      for (int i : idx) {
        if (data[i].x[best_feature] <= best_threshold)
          left_idx.push_back(i);
        else
          right_idx.push_back(i);
      }
      if (left_idx.empty() || right_idx.empty()) continue;

      const int left_slot = static_cast<int>(tree.nodes.size());
      const int right_slot = left_slot + 1;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& nd = tree.nodes[wk.slot];  // re-acquire: the vector may have grown
      nd.feature = best_feature;
      nd.threshold = best_threshold;
      nd.impurity_gain = best_gain;
      nd.left = left_slot;
      nd.right = right_slot;
      stack.push_back({std::move(right_idx), wk.depth + 1, right_slot});
      stack.push_back({std::move(left_idx), wk.depth + 1, left_slot});
    }
    return tree;
  }
};

}  // namespace seedsched
