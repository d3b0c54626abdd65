#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uplift/types.hpp"

namespace uplift {

// Score-based DAG learning over feature columns: decomposable linear-Gaussian
// BIC, greedy single-edge hill climbing, and the symmetric normalized
// adjacency consumed by the graph network.

struct DagStructure {
  IntMatrix adj;        // adj(p, c) = 1 ⇔ edge p → c
  double score = 0.0;   // total BIC, equals local_scores.sum()
  Vector local_scores;  // one per node

  Index d() const { return adj.rows(); }
  std::vector<Index> parents_of(Index child) const;
};

// True when a topological order exists.
bool is_acyclic(const IntMatrix& adj);

// Linear-Gaussian local family score for `child` given `parents`:
//   fit OLS of child on [1, parents]; sigma2 = RSS / M (floored at 1e-12);
//   score = -(M/2)(ln(2*pi*sigma2) + 1) - (ln M / 2)(|parents| + 2).
// A rank-deficient design falls back to ridge (lambda = 1e-8) and sets
// *ridge_fallback. Requires M >= |parents| + 3.
double bic_local(const Matrix& data, Index child, const std::vector<Index>& parents,
                 bool* ridge_fallback = nullptr);

// Fresh (uncached) sum of local scores; throws on a cyclic graph.
double bic_total(const Matrix& data, const IntMatrix& adj);

struct HillClimbOptions {
  int max_iters = 200;     // applied moves per restart
  int restarts = 1;        // total starts; start 0 is the empty graph
  std::uint64_t seed = 0;  // drives random restarts only
  int parent_cap = 5;      // clamped to M - 3 so every local score is fittable
};

struct HillClimbResult {
  DagStructure dag;
  std::vector<double> score_trace;  // score after each applied move, best restart
  int iterations = 0;               // moves applied in the best restart
  int restart_index = 0;            // which start produced the winner
};

// Greedy search over add/delete/reverse moves, largest positive gain first,
// ties broken by (add < delete < reverse, then source, then target). Gains
// below a relative tolerance (1e-12 of the score magnitude) count as zero,
// so every applied move strictly increases the float score. Local scores are
// cached by (child, parent set) so only touched families rescore.
HillClimbResult hill_climb(const Matrix& data, const HillClimbOptions& opts);

struct GcnAdjacency {
  Matrix a_norm;  // D^{-1/2} (sym(adj) + I) D^{-1/2}
};

// Symmetrizes, adds self-loops, and degree-normalizes. The result is
// symmetric with spectral radius at most 1.
GcnAdjacency to_gcn_adjacency(const DagStructure& g);

// Exports: JSON {adj, score, local_scores} and a `parent -> child` line list.
std::string dag_to_json(const DagStructure& g);
DagStructure dag_from_json(const std::string& text);
std::string dag_to_edge_list(const DagStructure& g, const std::vector<std::string>& names);

}  // namespace uplift
