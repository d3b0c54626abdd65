#pragma once

#include <string>
#include <vector>

#include "uplift/types.hpp"

namespace uplift {

// Least-squares gradient boosting with axis-aligned regression trees.
// Serves as the distillation teacher: smooth, deterministic, dependency-free.

struct GbdtParams {
  int max_depth = 3;
  int n_rounds = 100;
  double learning_rate = 0.1;
  int min_samples_leaf = 8;
  int max_candidates = 64;  // per-feature threshold cap per node
};

struct TreeNode {
  int feature = -1;         // -1 marks a leaf
  double threshold = 0.0;   // route left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;       // leaf contribution (pre learning-rate)
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  template <class Derived>
  double predict_row(const Eigen::MatrixBase<Derived>& row) const {
    int id = 0;
    while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
      const TreeNode& node = nodes[static_cast<std::size_t>(id)];
      id = row[node.feature] <= node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(id)].value;
  }
};

struct GbdtModel {
  std::vector<Tree> trees;
  double learning_rate = 0.1;
  double base_score = 0.0;
  int max_depth = 3;
  int n_rounds = 100;
  Index n_features = 0;
  bool binary_target = false;       // training target took only values {0,1}
  std::vector<double> train_mse;    // entry 0: base score only, then per tree

  template <class Derived>
  double predict_row(const Eigen::MatrixBase<Derived>& row) const {
    double acc = base_score;
    for (const Tree& tree : trees) acc += learning_rate * tree.predict_row(row);
    return acc;
  }

  Vector predict(const Matrix& x) const;
};

// Boosting stops early (without adding a tree) once no split improves the
// fit, so a constant target yields a base-score-only model. A single-row
// input degenerates the same way. Deterministic: features are scanned in
// ascending index order and ties keep the lowest threshold.
GbdtModel fit_gbdt(const Matrix& x_aug, const Vector& target, const GbdtParams& params);

struct SoftLabels {
  Vector y_hat;
};

// Teacher scores for distillation. When the training target was binary the
// outputs are clamped to [1e-6, 1-1e-6] so they behave as probabilities.
SoftLabels predict_soft(const GbdtModel& model, const Matrix& x_aug);

// JSON round-trip (shortest-decimal doubles, bit-exact reload).
std::string gbdt_to_json(const GbdtModel& model);
GbdtModel gbdt_from_json(const std::string& text);

}  // namespace uplift
