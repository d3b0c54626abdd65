#include "uplift/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "uplift/csv.hpp"
#include "uplift/rng.hpp"

namespace uplift {

namespace {

void check_surface_width(const Matrix& x, Index need, const char* what) {
  if (x.cols() < need) {
    throw shape_error(std::string(what) + " needs at least " + std::to_string(need) +
                      " feature columns, got " + std::to_string(x.cols()));
  }
}

double propensity_at(double x1, double x2, double eta) {
  const double raw = std::sin(std::numbers::pi * x1 * x2);
  return std::clamp(raw, eta, 1.0 - eta);
}

double effect_at(double x1, double x2) { return (x1 + x2) / 2.0; }

double baseline_at(const Matrix& x, Index i) {
  const double x1 = x(i, 0), x2 = x(i, 1), x4 = x(i, 3), x5 = x(i, 4);
  return std::sin(std::numbers::pi * x1 * x2) + 2.0 * (x1 - 0.5) * (x1 - 0.5) + x4 + 0.5 * x5;
}

}  // namespace

Dataset generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n < 1) throw config_error("synthetic: n must be at least 1");
  if (cfg.d < 5) throw config_error("synthetic: d must be at least 5");
  if (cfg.sigma < 0.0) throw config_error("synthetic: sigma must be non-negative");
  if (!(cfg.eta > 0.0 && cfg.eta < 0.5)) throw config_error("synthetic: eta must lie in (0, 0.5)");

  Rng rng(cfg.seed);
  Dataset ds;
  ds.x.resize(cfg.n, cfg.d);
  ds.t.resize(cfg.n);
  ds.y.resize(cfg.n);
  Vector tau(cfg.n);
  ds.seed = cfg.seed;

  for (Index i = 0; i < cfg.n; ++i) {
    for (Index j = 0; j < cfg.d; ++j) ds.x(i, j) = rng.uniform();
    const double e = propensity_at(ds.x(i, 0), ds.x(i, 1), cfg.eta);
    const int w = rng.bernoulli(e) ? 1 : 0;
    const double eps = rng.normal();  // always consumed, keeps X/W stable across sigma
    const double b = baseline_at(ds.x, i);
    tau[i] = effect_at(ds.x(i, 0), ds.x(i, 1));
    ds.t[i] = w;
    ds.y[i] = b + (w - 0.5) * tau[i] + cfg.sigma * eps;
  }

  ds.tau_true = std::move(tau);
  ds.feature_names.reserve(cfg.d);
  for (Index j = 0; j < cfg.d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  return ds;
}

Vector propensity_surface(const Matrix& x, double eta) {
  check_surface_width(x, 2, "propensity surface");
  Vector e(x.rows());
  for (Index i = 0; i < x.rows(); ++i) e[i] = propensity_at(x(i, 0), x(i, 1), eta);
  return e;
}

Vector treatment_effect_surface(const Matrix& x) {
  check_surface_width(x, 2, "treatment-effect surface");
  return (x.col(0) + x.col(1)) / 2.0;
}

Vector baseline_surface(const Matrix& x) {
  check_surface_width(x, 5, "baseline surface");
  Vector b(x.rows());
  for (Index i = 0; i < x.rows(); ++i) b[i] = baseline_at(x, i);
  return b;
}

std::pair<Vector, Vector> potential_outcomes(const Matrix& x) {
  const Vector b = baseline_surface(x);
  const Vector tau = treatment_effect_surface(x);
  Vector y0(x.rows()), y1(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    y0[i] = b[i] + (0 - 0.5) * tau[i];
    y1[i] = b[i] + (1 - 0.5) * tau[i];
  }
  return {std::move(y0), std::move(y1)};
}

ColumnMapping ColumnMapping::canonical() {
  ColumnMapping m;
  m.treatment = "treatment";
  m.outcome = "outcome";
  m.tau_true = "tau_true";
  return m;
}

Dataset load_csv(const std::filesystem::path& path, const ColumnMapping& mapping,
                 LoadReport* report) {
  const CsvTable table = read_csv_file(path);

  const Index t_col = table.find_column(mapping.treatment);
  if (t_col < 0) throw schema_error(path.string() + ": missing treatment column '" + mapping.treatment + "'");
  const Index y_col = table.find_column(mapping.outcome);
  if (y_col < 0) throw schema_error(path.string() + ": missing outcome column '" + mapping.outcome + "'");
  const Index tau_col = mapping.tau_true.empty() ? -1 : table.find_column(mapping.tau_true);

  std::vector<Index> f_cols;
  std::vector<std::string> f_names;
  if (mapping.features.empty()) {
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      const Index col = static_cast<Index>(j);
      if (col == t_col || col == y_col || col == tau_col) continue;
      f_cols.push_back(col);
      f_names.push_back(table.header[j]);
    }
  } else {
    for (const std::string& name : mapping.features) {
      const Index col = table.find_column(name);
      if (col < 0) throw schema_error(path.string() + ": missing feature column '" + name + "'");
      f_cols.push_back(col);
      f_names.push_back(name);
    }
  }
  if (f_cols.empty()) throw schema_error(path.string() + ": no feature columns after mapping");

  const std::size_t n_raw = table.rows.size();
  const Index d = static_cast<Index>(f_cols.size());
  Matrix x(static_cast<Index>(n_raw), d);
  IntVector t(static_cast<Index>(n_raw));
  Vector y(static_cast<Index>(n_raw));
  Vector tau(tau_col >= 0 ? static_cast<Index>(n_raw) : 0);

  std::size_t dropped = 0;
  Index out = 0;
  for (std::size_t r = 0; r < n_raw; ++r) {
    const auto& row = table.rows[r];
    const std::string where = path.string() + ":" + std::to_string(r + 2);

    const double tv = parse_double(row[static_cast<std::size_t>(t_col)], where);
    const double yv = parse_double(row[static_cast<std::size_t>(y_col)], where);
    const double tauv =
        tau_col >= 0 ? parse_double(row[static_cast<std::size_t>(tau_col)], where) : 0.0;
    bool finite = std::isfinite(tv) && std::isfinite(yv) && std::isfinite(tauv);
    for (Index j = 0; j < d; ++j) {
      const double v =
          parse_double(row[static_cast<std::size_t>(f_cols[static_cast<std::size_t>(j)])], where);
      x(out, j) = v;
      finite = finite && std::isfinite(v);
    }
    if (!finite) {
      ++dropped;
      continue;
    }
    if (tv != 0.0 && tv != 1.0) {
      throw data_error(path.string() + ": treatment value '" +
                       row[static_cast<std::size_t>(t_col)] + "' at data row " +
                       std::to_string(r + 1) + " is not binary");
    }
    t[out] = tv == 1.0 ? 1 : 0;
    y[out] = yv;
    if (tau_col >= 0) tau[out] = tauv;
    ++out;
  }

  if (report != nullptr) {
    report->rows_read = n_raw;
    report->rows_dropped = dropped;
  }
  if (out == 0) throw data_error(path.string() + ": no usable rows after dropping non-finite values");

  Dataset ds;
  ds.x = x.topRows(out);
  ds.t = t.head(out);
  ds.y = y.head(out);
  if (tau_col >= 0) ds.tau_true = Vector(tau.head(out));
  ds.feature_names = std::move(f_names);
  return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& name : ds.feature_names) out << name << ',';
  out << "treatment,outcome";
  if (ds.tau_true.has_value()) out << ",tau_true";
  out << '\n';
  for (Index i = 0; i < ds.n(); ++i) {
    for (Index j = 0; j < ds.d(); ++j) out << format_double(ds.x(i, j)) << ',';
    out << ds.t[i] << ',' << format_double(ds.y[i]);
    if (ds.tau_true.has_value()) out << ',' << format_double((*ds.tau_true)[i]);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<Index>& rows) {
  Dataset out;
  const Index m = static_cast<Index>(rows.size());
  out.x.resize(m, ds.d());
  out.t.resize(m);
  out.y.resize(m);
  if (ds.tau_true.has_value()) out.tau_true = Vector(m);
  for (Index k = 0; k < m; ++k) {
    const Index i = rows[static_cast<std::size_t>(k)];
    out.x.row(k) = ds.x.row(i);
    out.t[k] = ds.t[i];
    out.y[k] = ds.y[i];
    if (ds.tau_true.has_value()) (*out.tau_true)[k] = (*ds.tau_true)[i];
  }
  out.feature_names = ds.feature_names;
  out.seed = ds.seed;
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw config_error("split: train_frac must lie strictly between 0 and 1");
  }
  const Index n = ds.n();
  const Index n_train = static_cast<Index>(std::llround(train_frac * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) {
    throw config_error("split: both sides must be nonempty (n=" + std::to_string(n) +
                       ", train_frac=" + format_double(train_frac) + ")");
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<Index> train_rows(order.begin(), order.begin() + n_train);
  std::vector<Index> test_rows(order.begin() + n_train, order.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {take_rows(ds, train_rows), take_rows(ds, test_rows)};
}

}  // namespace uplift
