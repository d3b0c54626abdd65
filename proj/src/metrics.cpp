#include "uplift/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "uplift/csv.hpp"

namespace uplift {

double mse(const Vector& y_true, const Vector& y_pred) {
  if (y_true.size() == 0) throw data_error("mse: empty input");
  if (y_true.size() != y_pred.size()) {
    throw shape_error("mse: lengths differ (" + std::to_string(y_true.size()) + " vs " +
                      std::to_string(y_pred.size()) + ")");
  }
  return (y_true - y_pred).squaredNorm() / static_cast<double>(y_true.size());
}

double abs_ite_error(const std::optional<Vector>& tau_true, const Vector& tau_hat) {
  if (!tau_true.has_value()) {
    throw data_error(
        "abs-ITE error needs true effects; this looks like a real-world dataset "
        "(no tau_true column)");
  }
  if (tau_true->size() != tau_hat.size()) {
    throw shape_error("abs-ITE: lengths differ (" + std::to_string(tau_true->size()) + " vs " +
                      std::to_string(tau_hat.size()) + ")");
  }
  if (tau_hat.size() == 0) throw data_error("abs-ITE: empty input");
  return (*tau_true - tau_hat).cwiseAbs().mean();
}

namespace {

std::vector<Index> score_order(const Vector& scores) {
  for (Index i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw data_error("uplift curve: non-finite score");
  }
  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return order;
}

void check_groups(const IntVector& t, const Vector& y) {
  if (t.size() != y.size()) throw shape_error("uplift curve: t and y lengths differ");
  if (t.size() == 0) throw data_error("uplift curve: empty input");
  const Index n_treated = (t.array() == 1).count();
  if (n_treated == 0) throw data_error("uplift curve: no treated rows");
  if (n_treated == t.size()) throw data_error("uplift curve: no control rows");
}

}  // namespace

std::vector<CurvePoint> uplift_curve(const Vector& scores, const IntVector& t, const Vector& y) {
  check_groups(t, y);
  if (scores.size() != t.size()) throw shape_error("uplift curve: score length differs");

  const std::vector<Index> order = score_order(scores);
  const double n_t = static_cast<double>((t.array() == 1).count());
  const double n_c = static_cast<double>(t.size()) - n_t;

  std::vector<CurvePoint> curve;
  curve.reserve(order.size());
  double acc_t = 0.0, acc_c = 0.0;
  Index k = 0;
  for (Index i : order) {
    (t[i] == 1 ? acc_t : acc_c) += y[i];
    ++k;
    curve.push_back(CurvePoint{k, acc_t / n_t - acc_c / n_c});
  }
  return curve;
}

double auuc_raw(const std::vector<CurvePoint>& curve) {
  double total = 0.0;
  for (const CurvePoint& p : curve) total += p.v;
  return total;
}

double auuc_random(const IntVector& t, const Vector& y) {
  check_groups(t, y);
  double sum_t = 0.0, sum_c = 0.0;
  double n_t = 0.0, n_c = 0.0;
  for (Index i = 0; i < t.size(); ++i) {
    if (t[i] == 1) {
      sum_t += y[i];
      n_t += 1.0;
    } else {
      sum_c += y[i];
      n_c += 1.0;
    }
  }
  const double ate = sum_t / n_t - sum_c / n_c;
  const double n = static_cast<double>(t.size());
  double total = 0.0;
  for (Index k = 1; k <= t.size(); ++k) total += (static_cast<double>(k) / n) * ate;
  return total;
}

double auuc_perfect(const IntVector& t, const Vector& y, const std::optional<Vector>& tau_true) {
  Vector scores;
  if (tau_true.has_value()) {
    scores = *tau_true;
  } else {
    scores.resize(y.size());
    for (Index i = 0; i < y.size(); ++i) scores[i] = t[i] == 1 ? y[i] : -y[i];
  }
  return auuc_raw(uplift_curve(scores, t, y));
}

double auuc_normalized(double raw, double random_area, double perfect_area) {
  const double span = std::max(std::abs(perfect_area - random_area), 1e-12);
  return 0.5 + (raw - random_area) / (2.0 * span);
}

UpliftReport make_report(const Vector& tau_hat, const Vector& mu0, const Vector& mu1,
                         const IntVector& t, const Vector& y,
                         const std::optional<Vector>& tau_true) {
  check_groups(t, y);
  const Index n = y.size();
  if (tau_hat.size() != n || mu0.size() != n || mu1.size() != n) {
    throw shape_error("report: prediction vectors must match the dataset length");
  }

  Vector factual(n);
  for (Index i = 0; i < n; ++i) factual[i] = t[i] == 1 ? mu1[i] : mu0[i];

  UpliftReport report;
  report.mse_y = mse(y, factual);
  if (tau_true.has_value()) report.abs_ite = abs_ite_error(tau_true, tau_hat);
  report.curve = uplift_curve(tau_hat, t, y);
  report.auuc_raw = auuc_raw(report.curve);
  report.auuc_norm =
      auuc_normalized(report.auuc_raw, auuc_random(t, y), auuc_perfect(t, y, tau_true));
  report.n_treated = (t.array() == 1).count();
  report.n_control = n - report.n_treated;
  return report;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << "k,V\n";
  for (const CurvePoint& p : curve) out << p.k << ',' << format_double(p.v) << '\n';
  return out.str();
}

}  // namespace uplift
