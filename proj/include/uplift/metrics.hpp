#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uplift/types.hpp"

namespace uplift {

// Evaluation: squared error, absolute error against true effects, and the
// uplift curve with its area (raw and calibrated to ~0.5 for random scores).

double mse(const Vector& y_true, const Vector& y_pred);

// Mean |tau_true - tau_hat|. Refuses real-world data (no true effects).
double abs_ite_error(const std::optional<Vector>& tau_true, const Vector& tau_hat);

struct CurvePoint {
  Index k = 0;
  double v = 0.0;
};

// Rows sorted by score descending (ties: ascending row index); for each
// prefix size k, v = (treated-y prefix sum)/|T| - (control-y prefix sum)/|C|
// with |T|, |C| the full-group sizes. The prefix sums accumulate in the
// sorted order, one division each per k; the last point is the ATE.
std::vector<CurvePoint> uplift_curve(const Vector& scores, const IntVector& t, const Vector& y);

double auuc_raw(const std::vector<CurvePoint>& curve);

// Literal expectation of the curve under uniformly random ordering:
// sum over k of (k/n) * (mean treated y - mean control y).
double auuc_random(const IntVector& t, const Vector& y);

// Area for the best achievable ordering: scores = true effects when known,
// otherwise the observed-outcome proxy y*t - y*(1-t).
double auuc_perfect(const IntVector& t, const Vector& y, const std::optional<Vector>& tau_true);

// 0.5 + (raw - random) / (2 * max(|perfect - random|, 1e-12)): random
// scoring lands near 0.5, the perfect ordering at 1.
double auuc_normalized(double raw, double random_area, double perfect_area);

struct UpliftReport {
  double mse_y = 0.0;               // squared error of the factual prediction
  std::optional<double> abs_ite;    // absent without true effects
  double auuc_raw = 0.0;
  double auuc_norm = 0.0;
  std::vector<CurvePoint> curve;    // length n
  Index n_treated = 0;
  Index n_control = 0;
};

UpliftReport make_report(const Vector& tau_hat, const Vector& mu0, const Vector& mu1,
                         const IntVector& t, const Vector& y,
                         const std::optional<Vector>& tau_true);

// CSV `k,V` for external plotting.
std::string curve_to_csv(const std::vector<CurvePoint>& curve);

}  // namespace uplift
