#include "uplift/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace uplift {

namespace {

using json = nlohmann::ordered_json;

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

double sum_of(const Vector& r, const std::vector<Index>& rows) {
  double s = 0.0;
  for (Index i : rows) s += r[i];
  return s;
}

// Variance-reduction split search over midpoint thresholds, capped at
// params.max_candidates evenly spaced candidates per feature. Features are
// visited in ascending order and only strictly better gains are accepted,
// which pins the tie-break to (lowest feature, lowest threshold).
SplitChoice best_split(const Matrix& x, const Vector& r, const std::vector<Index>& rows,
                       const GbdtParams& params) {
  SplitChoice best;
  const Index m = static_cast<Index>(rows.size());
  if (m < 2 * params.min_samples_leaf) return best;

  const double total_sum = sum_of(r, rows);
  std::vector<Index> order(rows);
  std::vector<double> prefix_sum(static_cast<std::size_t>(m) + 1, 0.0);

  for (Index f = 0; f < x.cols(); ++f) {
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
      if (x(a, f) != x(b, f)) return x(a, f) < x(b, f);
      return a < b;
    });
    for (Index k = 0; k < m; ++k) {
      prefix_sum[static_cast<std::size_t>(k) + 1] =
          prefix_sum[static_cast<std::size_t>(k)] + r[order[static_cast<std::size_t>(k)]];
    }

    // Boundary k means "first k sorted rows go left"; valid boundaries sit
    // between distinct feature values with both sides big enough.
    std::vector<Index> boundaries;
    for (Index k = params.min_samples_leaf; k <= m - params.min_samples_leaf; ++k) {
      const double lo = x(order[static_cast<std::size_t>(k - 1)], f);
      const double hi = x(order[static_cast<std::size_t>(k)], f);
      if (lo < hi) boundaries.push_back(k);
    }
    if (boundaries.empty()) continue;

    std::vector<Index> chosen;
    const Index cap = params.max_candidates;
    if (static_cast<Index>(boundaries.size()) <= cap) {
      chosen = boundaries;
    } else {
      chosen.reserve(static_cast<std::size_t>(cap));
      const std::size_t nb = boundaries.size();
      for (Index c = 0; c < cap; ++c) {
        const std::size_t pick =
            static_cast<std::size_t>((static_cast<unsigned long long>(c) + 1) * nb / (static_cast<unsigned long long>(cap) + 1));
        chosen.push_back(boundaries[std::min(pick, nb - 1)]);
      }
      chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
    }

    for (Index k : chosen) {
      const double left_sum = prefix_sum[static_cast<std::size_t>(k)];
      const double right_sum = total_sum - left_sum;
      const double left_n = static_cast<double>(k);
      const double right_n = static_cast<double>(m - k);
      // Variance reduction: parent SSE minus child SSEs collapses to the
      // between-group term, so only residual sums are needed.
      const double gain = left_sum * left_sum / left_n + right_sum * right_sum / right_n -
                          total_sum * total_sum / static_cast<double>(m);
      if (gain > best.gain + 1e-12) {
        const double lo = x(order[static_cast<std::size_t>(k - 1)], f);
        const double hi = x(order[static_cast<std::size_t>(k)], f);
        best.found = true;
        best.feature = static_cast<int>(f);
        best.threshold = lo + (hi - lo) / 2.0;
        best.gain = gain;
      }
    }
  }
  return best;
}

int grow(Tree& tree, const Matrix& x, const Vector& r, std::vector<Index>& rows, int depth,
         const GbdtParams& params) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();

  SplitChoice split;
  if (depth < params.max_depth) split = best_split(x, r, rows, params);

  if (!split.found) {
    tree.nodes[static_cast<std::size_t>(id)].value =
        sum_of(r, rows) / static_cast<double>(rows.size());
    return id;
  }

  std::vector<Index> left_rows, right_rows;
  left_rows.reserve(rows.size());
  right_rows.reserve(rows.size());
  for (Index i : rows) {
    (x(i, split.feature) <= split.threshold ? left_rows : right_rows).push_back(i);
  }
  rows.clear();
  rows.shrink_to_fit();

  tree.nodes[static_cast<std::size_t>(id)].feature = split.feature;
  tree.nodes[static_cast<std::size_t>(id)].threshold = split.threshold;
  const int left = grow(tree, x, r, left_rows, depth + 1, params);
  tree.nodes[static_cast<std::size_t>(id)].left = left;
  const int right = grow(tree, x, r, right_rows, depth + 1, params);
  tree.nodes[static_cast<std::size_t>(id)].right = right;
  return id;
}

void validate(const GbdtParams& p) {
  if (p.max_depth < 1) throw config_error("gbdt: max_depth must be positive");
  if (p.n_rounds < 1) throw config_error("gbdt: n_rounds must be positive");
  if (!(p.learning_rate > 0.0 && p.learning_rate <= 1.0)) {
    throw config_error("gbdt: learning_rate must lie in (0, 1]");
  }
  if (p.min_samples_leaf < 1) throw config_error("gbdt: min_samples_leaf must be positive");
  if (p.max_candidates < 1) throw config_error("gbdt: max_candidates must be positive");
}

}  // namespace

Vector GbdtModel::predict(const Matrix& x) const {
  if (x.cols() != n_features) {
    throw shape_error("gbdt: model expects " + std::to_string(n_features) +
                      " columns, got " + std::to_string(x.cols()));
  }
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out[i] = predict_row(x.row(i));
  return out;
}

GbdtModel fit_gbdt(const Matrix& x_aug, const Vector& target, const GbdtParams& params) {
  validate(params);
  const Index n = x_aug.rows();
  if (n < 1) throw data_error("gbdt: need at least one row");
  if (target.size() != n) {
    throw shape_error("gbdt: target length " + std::to_string(target.size()) +
                      " does not match " + std::to_string(n) + " rows");
  }

  GbdtModel model;
  model.learning_rate = params.learning_rate;
  model.max_depth = params.max_depth;
  model.n_rounds = params.n_rounds;
  model.n_features = x_aug.cols();
  model.base_score = target.mean();
  model.binary_target = ((target.array() == 0.0) || (target.array() == 1.0)).all();

  Vector pred = Vector::Constant(n, model.base_score);
  Vector residual = target - pred;
  model.train_mse.push_back(residual.squaredNorm() / static_cast<double>(n));

  const bool constant_target = target.minCoeff() == target.maxCoeff();
  if (constant_target || n < 2) return model;

  for (int round = 0; round < params.n_rounds; ++round) {
    std::vector<Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Index{0});

    Tree tree;
    grow(tree, x_aug, residual, rows, 0, params);
    if (tree.nodes.size() == 1 && tree.nodes[0].feature < 0) break;  // nothing left to fit

    model.trees.push_back(std::move(tree));
    for (Index i = 0; i < n; ++i) {
      pred[i] += params.learning_rate * model.trees.back().predict_row(x_aug.row(i));
    }
    residual = target - pred;
    model.train_mse.push_back(residual.squaredNorm() / static_cast<double>(n));
  }
  return model;
}

SoftLabels predict_soft(const GbdtModel& model, const Matrix& x_aug) {
  Vector y_hat = model.predict(x_aug);
  if (model.binary_target) {
    y_hat = y_hat.cwiseMax(1e-6).cwiseMin(1.0 - 1e-6);
  }
  for (Index i = 0; i < y_hat.size(); ++i) {
    if (!std::isfinite(y_hat[i])) throw numeric_error("gbdt: non-finite prediction");
  }
  return SoftLabels{std::move(y_hat)};
}

std::string gbdt_to_json(const GbdtModel& model) {
  json doc;
  doc["format"] = "gbdt-v1";
  doc["base_score"] = model.base_score;
  doc["learning_rate"] = model.learning_rate;
  doc["max_depth"] = model.max_depth;
  doc["n_rounds"] = model.n_rounds;
  doc["n_features"] = static_cast<long long>(model.n_features);
  doc["binary_target"] = model.binary_target;
  doc["train_mse"] = model.train_mse;
  json trees = json::array();
  for (const Tree& tree : model.trees) {
    json nodes = json::array();
    for (const TreeNode& node : tree.nodes) {
      json jn;
      jn["feature"] = node.feature;
      jn["threshold"] = node.threshold;
      jn["left"] = node.left;
      jn["right"] = node.right;
      jn["value"] = node.value;
      nodes.push_back(std::move(jn));
    }
    trees.push_back(json{{"nodes", std::move(nodes)}});
  }
  doc["trees"] = std::move(trees);
  return doc.dump(2) + "\n";
}

GbdtModel gbdt_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw schema_error(std::string("gbdt model: invalid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "gbdt-v1") {
      throw schema_error("gbdt model: unknown format tag");
    }
    GbdtModel model;
    model.base_score = doc.at("base_score").get<double>();
    model.learning_rate = doc.at("learning_rate").get<double>();
    model.max_depth = doc.at("max_depth").get<int>();
    model.n_rounds = doc.at("n_rounds").get<int>();
    model.n_features = doc.at("n_features").get<long long>();
    model.binary_target = doc.at("binary_target").get<bool>();
    model.train_mse = doc.at("train_mse").get<std::vector<double>>();
    for (const json& jt : doc.at("trees")) {
      Tree tree;
      for (const json& jn : jt.at("nodes")) {
        TreeNode node;
        node.feature = jn.at("feature").get<int>();
        node.threshold = jn.at("threshold").get<double>();
        node.left = jn.at("left").get<int>();
        node.right = jn.at("right").get<int>();
        node.value = jn.at("value").get<double>();
        tree.nodes.push_back(node);
      }
      model.trees.push_back(std::move(tree));
    }
    return model;
  } catch (const json::exception& e) {
    throw schema_error(std::string("gbdt model: malformed document: ") + e.what());
  }
}

}  // namespace uplift
