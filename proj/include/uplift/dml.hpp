#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uplift/gbdt.hpp"
#include "uplift/types.hpp"

namespace uplift {

// Per-feature effect estimation. Each feature takes a turn as the exposure
// of interest: its residual (after partialling out the remaining columns)
// is regressed against the residualized teacher score, and the resulting
// coefficient is that feature's causal weight.

enum class Nuisance { kRidge, kGbdt };
enum class FinalStage { kConstant, kLinear };

struct DmlConfig {
  int n_folds = 2;                       // cross-fitting folds, >= 2 (== n allowed)
  Nuisance nuisance = Nuisance::kRidge;
  double ridge_lambda = 1e-3;            // >= 0; shared by nuisance and final stage
  FinalStage final_stage = FinalStage::kLinear;
  std::uint64_t seed = 0;                // fold assignment
  bool parallel = true;                  // run heads concurrently (results identical)
  GbdtParams gbdt;                       // used when nuisance == kGbdt
};

// Out-of-fold residuals: per fold, the nuisance model is trained on the
// complement and predicts the held-out rows. Ridge leaves the intercept
// unpenalized, so pure-noise controls predict (near) the fold mean.
// Fold assignment depends only on (seed, n), never on values, so repeated
// calls line up row by row.
Vector residualize(const Vector& values, const Matrix& controls, const DmlConfig& cfg);

// One fitted head. Linear mode stores coefficients over the affine basis
// [1, x without column j]; constant mode stores a single slope.
struct FeatureCate {
  Index feature = 0;
  FinalStage mode = FinalStage::kConstant;
  bool degenerate = false;   // residual treatment variance below 1e-12
  double theta_constant = 0.0;
  Vector beta;               // linear mode, length d

  // Evaluates the head on a full feature row (column `feature` is ignored
  // in linear mode; the basis uses the remaining columns in order).
  template <class Derived>
  double theta_at(const Eigen::MatrixBase<Derived>& row) const {
    if (degenerate) return 0.0;
    if (mode == FinalStage::kConstant) return theta_constant;
    double acc = beta[0];
    Index k = 1;
    for (Index j = 0; j < row.size(); ++j) {
      if (j == feature) continue;
      acc += beta[k++] * row[j];
    }
    return acc;
  }
};

FeatureCate dml_fit_feature(Index j, const Matrix& x, const SoftLabels& y_soft,
                            const DmlConfig& cfg);

struct CateModel {
  std::vector<FeatureCate> heads;  // one per feature, in feature order
  Index n_features = 0;
  FinalStage mode = FinalStage::kConstant;
};

struct CausalWeights {
  Matrix w;                         // n × d, w(i, j) = theta_j(x_i)
  Vector theta_mean;                // column means of w
  std::string heterogeneity_basis;  // "constant" or "affine[1,x_-j]"
  std::vector<bool> degenerate;     // per-feature flag
};

// Fits every head (concurrently when cfg.parallel) and evaluates the fitted
// heads on the training rows. A degenerate head zeroes its column and sets
// its flag; it never aborts the batch.
CateModel multi_head_cate(const Matrix& x, const SoftLabels& y_soft, const DmlConfig& cfg);

// Evaluates fitted heads on arbitrary rows (train or held-out).
CausalWeights apply_cate(const CateModel& model, const Matrix& x);

// JSON round-trip (bit-exact doubles).
std::string cate_to_json(const CateModel& model);
CateModel cate_from_json(const std::string& text);

}  // namespace uplift
