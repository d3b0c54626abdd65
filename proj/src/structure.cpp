#include "uplift/structure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "uplift/rng.hpp"

namespace uplift {

namespace {

using json = nlohmann::ordered_json;

constexpr double kSigmaFloor = 1e-12;

// A candidate move must beat this fraction of the running score's magnitude:
// smaller gains are numerical noise between score-equivalent structures and
// would stall (or cycle) the search without moving the float total.
constexpr double kGainTol = 1e-12;

}  // namespace

std::vector<Index> DagStructure::parents_of(Index child) const {
  std::vector<Index> out;
  for (Index p = 0; p < adj.rows(); ++p) {
    if (adj(p, child) != 0) out.push_back(p);
  }
  return out;
}

bool is_acyclic(const IntMatrix& adj) {
  const Index d = adj.rows();
  std::vector<Index> indegree(static_cast<std::size_t>(d), 0);
  for (Index c = 0; c < d; ++c) {
    for (Index p = 0; p < d; ++p) indegree[static_cast<std::size_t>(c)] += adj(p, c) != 0;
  }
  std::vector<Index> queue;
  for (Index v = 0; v < d; ++v) {
    if (indegree[static_cast<std::size_t>(v)] == 0) queue.push_back(v);
  }
  Index seen = 0;
  while (!queue.empty()) {
    const Index v = queue.back();
    queue.pop_back();
    ++seen;
    for (Index c = 0; c < d; ++c) {
      if (adj(v, c) != 0 && --indegree[static_cast<std::size_t>(c)] == 0) queue.push_back(c);
    }
  }
  return seen == d;
}

double bic_local(const Matrix& data, Index child, const std::vector<Index>& parents,
                 bool* ridge_fallback) {
  const Index m = data.rows();
  const Index p = static_cast<Index>(parents.size());
  if (m < p + 3) {
    throw config_error("bic: need at least |parents| + 3 rows, got " + std::to_string(m));
  }
  if (ridge_fallback != nullptr) *ridge_fallback = false;

  Matrix phi(m, p + 1);
  phi.col(0).setOnes();
  for (Index k = 0; k < p; ++k) phi.col(k + 1) = data.col(parents[static_cast<std::size_t>(k)]);
  const Vector y = data.col(child);

  const Matrix gram = phi.transpose() * phi;
  const Vector rhs = phi.transpose() * y;
  Vector beta;
  const Eigen::FullPivLU<Matrix> lu(gram);
  if (lu.rank() < gram.rows()) {
    Matrix ridged = gram;
    ridged.diagonal().array() += 1e-8;
    beta = ridged.ldlt().solve(rhs);
    if (ridge_fallback != nullptr) *ridge_fallback = true;
  } else {
    beta = lu.solve(rhs);
  }

  const double rss = (y - phi * beta).squaredNorm();
  const double sigma2 = std::max(rss / static_cast<double>(m), kSigmaFloor);
  const double loglik_term =
      -(static_cast<double>(m) / 2.0) * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0);
  const double penalty =
      (std::log(static_cast<double>(m)) / 2.0) * (static_cast<double>(p) + 2.0);
  return loglik_term - penalty;
}

double bic_total(const Matrix& data, const IntMatrix& adj) {
  if (adj.rows() != adj.cols() || adj.rows() != data.cols()) {
    throw shape_error("bic: adjacency must be d x d for d data columns");
  }
  if (!is_acyclic(adj)) throw config_error("bic: graph has a cycle");
  double total = 0.0;
  for (Index c = 0; c < adj.cols(); ++c) {
    std::vector<Index> parents;
    for (Index p = 0; p < adj.rows(); ++p) {
      if (adj(p, c) != 0) parents.push_back(p);
    }
    total += bic_local(data, c, parents);
  }
  return total;
}

namespace {

// Cached family scores, keyed by parent bitmask (d <= 63 always holds here;
// feature counts beyond that are rejected up front).
class ScoreCache {
 public:
  ScoreCache(const Matrix& data) : data_(data), per_child_(static_cast<std::size_t>(data.cols())) {}

  double local(Index child, std::uint64_t mask) {
    auto& cache = per_child_[static_cast<std::size_t>(child)];
    const auto it = cache.find(mask);
    if (it != cache.end()) return it->second;
    std::vector<Index> parents;
    for (Index p = 0; p < data_.cols(); ++p) {
      if (mask & (std::uint64_t{1} << p)) parents.push_back(p);
    }
    const double score = bic_local(data_, child, parents);
    cache.emplace(mask, score);
    return score;
  }

 private:
  const Matrix& data_;
  std::vector<std::unordered_map<std::uint64_t, double>> per_child_;
};

struct Graph {
  IntMatrix adj;
  std::vector<std::uint64_t> parent_mask;
  std::vector<Index> parent_count;

  explicit Graph(Index d)
      : adj(IntMatrix::Zero(d, d)),
        parent_mask(static_cast<std::size_t>(d), 0),
        parent_count(static_cast<std::size_t>(d), 0) {}

  void add(Index s, Index t) {
    adj(s, t) = 1;
    parent_mask[static_cast<std::size_t>(t)] |= std::uint64_t{1} << s;
    ++parent_count[static_cast<std::size_t>(t)];
  }
  void remove(Index s, Index t) {
    adj(s, t) = 0;
    parent_mask[static_cast<std::size_t>(t)] &= ~(std::uint64_t{1} << s);
    --parent_count[static_cast<std::size_t>(t)];
  }

  // Path query on the current adjacency (DFS).
  bool reaches(Index from, Index to) const {
    if (from == to) return true;
    const Index d = adj.rows();
    std::vector<char> seen(static_cast<std::size_t>(d), 0);
    std::vector<Index> stack{from};
    seen[static_cast<std::size_t>(from)] = 1;
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      for (Index c = 0; c < d; ++c) {
        if (adj(v, c) != 0 && !seen[static_cast<std::size_t>(c)]) {
          if (c == to) return true;
          seen[static_cast<std::size_t>(c)] = 1;
          stack.push_back(c);
        }
      }
    }
    return false;
  }
};

enum class MoveType { kAdd = 0, kDelete = 1, kReverse = 2 };

struct Move {
  MoveType type = MoveType::kAdd;
  Index source = 0;
  Index target = 0;
  double gain = 0.0;
};

struct ClimbRun {
  Graph graph;
  double score = 0.0;
  std::vector<double> trace;
  int iterations = 0;
};

ClimbRun climb_from(Graph start, const Matrix& data, ScoreCache& cache, int max_iters,
                    Index parent_cap) {
  const Index d = data.cols();
  ClimbRun run{std::move(start), 0.0, {}, 0};

  std::vector<double> local(static_cast<std::size_t>(d));
  for (Index c = 0; c < d; ++c) {
    local[static_cast<std::size_t>(c)] = cache.local(c, run.graph.parent_mask[static_cast<std::size_t>(c)]);
  }
  run.score = std::accumulate(local.begin(), local.end(), 0.0);

  for (int iter = 0; iter < max_iters; ++iter) {
    Move best;
    bool found = false;

    const double gain_floor = kGainTol * (1.0 + std::abs(run.score));
    auto consider = [&](MoveType type, Index s, Index t, double gain) {
      if (gain <= gain_floor) return;
      if (!found || gain > best.gain) {
        best = Move{type, s, t, gain};
        found = true;
      }
    };

    // Candidate scan in tie-break order: adds, deletes, reverses, each by
    // (source, target); `consider` replaces only on strictly larger gain.
    for (Index s = 0; s < d; ++s) {
      for (Index t = 0; t < d; ++t) {
        if (s == t || run.graph.adj(s, t) != 0) continue;
        if (run.graph.parent_count[static_cast<std::size_t>(t)] >= parent_cap) continue;
        if (run.graph.reaches(t, s)) continue;  // adding s->t would close a cycle
        const std::uint64_t mask = run.graph.parent_mask[static_cast<std::size_t>(t)];
        const double gain =
            cache.local(t, mask | (std::uint64_t{1} << s)) - local[static_cast<std::size_t>(t)];
        consider(MoveType::kAdd, s, t, gain);
      }
    }
    for (Index s = 0; s < d; ++s) {
      for (Index t = 0; t < d; ++t) {
        if (run.graph.adj(s, t) == 0) continue;
        const std::uint64_t mask = run.graph.parent_mask[static_cast<std::size_t>(t)];
        const double gain =
            cache.local(t, mask & ~(std::uint64_t{1} << s)) - local[static_cast<std::size_t>(t)];
        consider(MoveType::kDelete, s, t, gain);
      }
    }
    for (Index s = 0; s < d; ++s) {
      for (Index t = 0; t < d; ++t) {
        if (run.graph.adj(s, t) == 0) continue;
        if (run.graph.parent_count[static_cast<std::size_t>(s)] >= parent_cap) continue;
        run.graph.remove(s, t);
        const bool legal = !run.graph.reaches(s, t);  // t->s must not close a cycle
        double gain = 0.0;
        if (legal) {
          const double new_t = cache.local(t, run.graph.parent_mask[static_cast<std::size_t>(t)]);
          const double new_s = cache.local(
              s, run.graph.parent_mask[static_cast<std::size_t>(s)] | (std::uint64_t{1} << t));
          gain = (new_t - local[static_cast<std::size_t>(t)]) +
                 (new_s - local[static_cast<std::size_t>(s)]);
        }
        run.graph.add(s, t);
        if (legal) consider(MoveType::kReverse, s, t, gain);
      }
    }

    if (!found) break;

    switch (best.type) {
      case MoveType::kAdd:
        run.graph.add(best.source, best.target);
        break;
      case MoveType::kDelete:
        run.graph.remove(best.source, best.target);
        break;
      case MoveType::kReverse:
        run.graph.remove(best.source, best.target);
        run.graph.add(best.target, best.source);
        break;
    }
    for (Index c : {best.source, best.target}) {
      local[static_cast<std::size_t>(c)] =
          cache.local(c, run.graph.parent_mask[static_cast<std::size_t>(c)]);
    }
    run.score += best.gain;
    run.trace.push_back(run.score);
    ++run.iterations;
  }

  // Recompute the total from locals to shed accumulated increments.
  run.score = 0.0;
  for (Index c = 0; c < d; ++c) {
    run.score += cache.local(c, run.graph.parent_mask[static_cast<std::size_t>(c)]);
  }
  return run;
}

Graph random_start(Index d, Index parent_cap, Rng& rng) {
  std::vector<Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);
  Graph g(d);
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const Index s = order[a];
      const Index t = order[b];
      if (g.parent_count[static_cast<std::size_t>(t)] >= parent_cap) continue;
      if (rng.bernoulli(0.2)) g.add(s, t);
    }
  }
  return g;
}

}  // namespace

HillClimbResult hill_climb(const Matrix& data, const HillClimbOptions& opts) {
  const Index d = data.cols();
  const Index m = data.rows();
  if (d < 1) throw config_error("structure: need at least one column");
  if (d > 63) throw config_error("structure: at most 63 columns supported");
  if (m < 5) throw config_error("structure: need at least 5 rows");
  if (opts.max_iters < 0) throw config_error("structure: max_iters must be non-negative");
  if (opts.restarts < 1) throw config_error("structure: restarts must be at least 1");
  if (opts.parent_cap < 0) throw config_error("structure: parent_cap must be non-negative");

  const Index parent_cap = std::min<Index>(opts.parent_cap, m - 3);
  ScoreCache cache(data);

  HillClimbResult best;
  bool have_best = false;
  for (int r = 0; r < opts.restarts; ++r) {
    Graph start(d);
    if (r > 0) {
      Rng rng(opts.seed + static_cast<std::uint64_t>(r));
      start = random_start(d, parent_cap, rng);
    }
    ClimbRun run = (d == 1) ? ClimbRun{std::move(start), bic_local(data, 0, {}), {}, 0}
                            : climb_from(std::move(start), data, cache, opts.max_iters, parent_cap);
    if (!have_best || run.score > best.dag.score) {
      best.dag.adj = run.graph.adj;
      best.dag.score = run.score;
      best.score_trace = std::move(run.trace);
      best.iterations = run.iterations;
      best.restart_index = r;
      have_best = true;
    }
  }

  best.dag.local_scores.resize(d);
  for (Index c = 0; c < d; ++c) {
    DagStructure tmp;
    tmp.adj = best.dag.adj;
    best.dag.local_scores[c] = bic_local(data, c, tmp.parents_of(c));
  }
  return best;
}

GcnAdjacency to_gcn_adjacency(const DagStructure& g) {
  if (!is_acyclic(g.adj)) throw config_error("structure: graph has a cycle");
  const Index d = g.adj.rows();
  Matrix a_hat(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      a_hat(i, j) = (i == j || g.adj(i, j) != 0 || g.adj(j, i) != 0) ? 1.0 : 0.0;
    }
  }
  const Vector deg = a_hat.rowwise().sum();
  const Vector inv_sqrt = deg.array().rsqrt();
  GcnAdjacency out;
  out.a_norm = inv_sqrt.asDiagonal() * a_hat * inv_sqrt.asDiagonal();
  return out;
}

std::string dag_to_json(const DagStructure& g) {
  json doc;
  doc["format"] = "dag-v1";
  json adj = json::array();
  for (Index p = 0; p < g.adj.rows(); ++p) {
    json row = json::array();
    for (Index c = 0; c < g.adj.cols(); ++c) row.push_back(g.adj(p, c));
    adj.push_back(std::move(row));
  }
  doc["adj"] = std::move(adj);
  doc["score"] = g.score;
  doc["local_scores"] =
      std::vector<double>(g.local_scores.data(), g.local_scores.data() + g.local_scores.size());
  return doc.dump(2) + "\n";
}

DagStructure dag_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw schema_error(std::string("dag: invalid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "dag-v1") {
      throw schema_error("dag: unknown format tag");
    }
    const auto& adj = doc.at("adj");
    const Index d = static_cast<Index>(adj.size());
    DagStructure g;
    g.adj = IntMatrix::Zero(d, d);
    for (Index p = 0; p < d; ++p) {
      const auto& row = adj.at(static_cast<std::size_t>(p));
      if (static_cast<Index>(row.size()) != d) throw schema_error("dag: ragged adjacency");
      for (Index c = 0; c < d; ++c) g.adj(p, c) = row.at(static_cast<std::size_t>(c)).get<int>();
    }
    g.score = doc.at("score").get<double>();
    const auto locals = doc.at("local_scores").get<std::vector<double>>();
    if (static_cast<Index>(locals.size()) != d) throw schema_error("dag: local_scores length");
    g.local_scores = Eigen::Map<const Vector>(locals.data(), d);
    if (!is_acyclic(g.adj)) throw schema_error("dag: adjacency has a cycle");
    return g;
  } catch (const json::exception& e) {
    throw schema_error(std::string("dag: malformed document: ") + e.what());
  }
}

std::string dag_to_edge_list(const DagStructure& g, const std::vector<std::string>& names) {
  std::ostringstream out;
  for (Index p = 0; p < g.adj.rows(); ++p) {
    for (Index c = 0; c < g.adj.cols(); ++c) {
      if (g.adj(p, c) == 0) continue;
      const std::string pn =
          p < static_cast<Index>(names.size()) ? names[static_cast<std::size_t>(p)] : "f" + std::to_string(p);
      const std::string cn =
          c < static_cast<Index>(names.size()) ? names[static_cast<std::size_t>(c)] : "f" + std::to_string(c);
      out << pn << " -> " << cn << '\n';
    }
  }
  return out.str();
}

}  // namespace uplift
