// Release gate. Runs every acceptance criterion end to end and prints exactly
// one [PASS]/[FAIL] line per criterion; exits nonzero if any gating criterion
// fails. Criterion 10 needs the public real-world file and prints [SKIP] when
// the file is absent; its outcome never gates the exit code.
//
// Usage: acceptance <path-to-uplift-cli>

#include <sys/wait.h>

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "uplift/csv.hpp"
#include "uplift/dataset.hpp"
#include "uplift/dml.hpp"
#include "uplift/gcn.hpp"
#include "uplift/metrics.hpp"
#include "uplift/pipeline.hpp"
#include "uplift/rng.hpp"
#include "uplift/structure.hpp"
#include "uplift/types.hpp"

namespace fs = std::filesystem;
using namespace uplift;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

fs::path g_cli;       // CLI binary under test
fs::path g_workdir;   // scratch area for end-to-end runs

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

Matrix uniform_matrix(Index n, Index d, Rng& rng) {
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = rng.uniform();
  }
  return x;
}

// Random DAG in a shuffled topological order; edge (earlier -> later) w.p. p.
IntMatrix random_dag(Index d, double p, Rng& rng) {
  std::vector<Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);
  IntMatrix adj = IntMatrix::Zero(d, d);
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      if (rng.uniform() < p) adj(order[a], order[b]) = 1;
    }
  }
  return adj;
}

// Linear-Gaussian sample with parents drawn from lower column indices, so the
// structure search has genuine signal to chase.
Matrix random_sem(Index d, Index rows, Rng& rng) {
  Matrix data(rows, d);
  for (Index j = 0; j < d; ++j) {
    Vector col(rows);
    for (Index i = 0; i < rows; ++i) col[i] = 0.3 * rng.normal();
    for (Index p = 0; p < j; ++p) {
      if (rng.uniform() < 0.4) {
        const double coef = rng.uniform(0.5, 1.5);
        col += coef * data.col(p);
      }
    }
    data.col(j) = col;
  }
  return data;
}

Matrix chain_data(Index rows, std::uint64_t seed) {
  Rng rng(seed);
  Matrix data(rows, 3);
  for (Index i = 0; i < rows; ++i) {
    data(i, 0) = rng.normal();
    data(i, 1) = data(i, 0) + 0.2 * rng.normal();
    data(i, 2) = data(i, 1) + 0.2 * rng.normal();
  }
  return data;
}

// Hand-built network with identity standardization, for forward-pass checks.
GcnModel manual_model(const Matrix& a_norm, Index m, Index hidden, Index rh, int n_layers,
                      std::uint64_t seed) {
  Rng rng(seed);
  auto randm = [&](Index r, Index c) {
    Matrix w(r, c);
    for (Index i = 0; i < r; ++i) {
      for (Index j = 0; j < c; ++j) w(i, j) = 0.5 * rng.normal();
    }
    return w;
  };
  GcnModel model;
  model.a_norm = a_norm;
  model.leaky_slope = 0.01;
  model.layer_w.push_back(randm(m, hidden));
  for (int l = 1; l < n_layers; ++l) model.layer_w.push_back(randm(hidden, hidden));
  model.readout_w1 = randm(rh, hidden + 1);
  model.readout_b1 = Vector::Zero(rh);
  model.readout_w2 = randm(rh, 1).col(0);
  model.readout_b2 = 0.3;
  model.scaler.mean = Vector::Zero(m);
  model.scaler.stdev = Vector::Ones(m);
  return model;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      "\"" + g_cli.string() + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  if (WIFEXITED(rc)) return WEXITSTATUS(rc);
  return -2;
}

std::string pipeline_config(std::uint64_t seed, Index n, Index d, double sigma,
                            double train_frac, int epochs) {
  json cfg;
  cfg["seed"] = seed;
  cfg["dataset"]["synthetic"]["n"] = n;
  cfg["dataset"]["synthetic"]["d"] = d;
  cfg["dataset"]["synthetic"]["sigma"] = sigma;
  cfg["dataset"]["train_frac"] = train_frac;
  cfg["gcn"]["epochs"] = epochs;
  return cfg.dump(2) + "\n";
}

// Runs the CLI pipeline into dir/ and returns the parsed report.
json run_pipeline_cli(const std::string& tag, const std::string& config_text) {
  const fs::path dir = g_workdir / tag;
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "config.json";
  write_file_atomic(cfg_path, config_text);
  const fs::path out = dir / "out";
  const int rc = run_cli("pipeline --config \"" + cfg_path.string() + "\" --out-dir \"" +
                             out.string() + "\"",
                         dir / "log.txt");
  if (rc != 0) {
    throw std::runtime_error("pipeline exited with code " + std::to_string(rc) + ", log: " +
                             (dir / "log.txt").string());
  }
  return json::parse(read_file(out / "report.json"));
}

// ---------------------------------------------------------------------------
// Criteria. Each returns "" on pass, otherwise a short failure detail; the
// measured headline numbers land in *note either way.

std::string criterion1(std::string* note) {
  const auto start = Clock::now();
  std::vector<double> theta_eff, theta_null, ols_eff;
  for (int s = 1; s <= 5; ++s) {
    Rng rng(700 + static_cast<std::uint64_t>(s));
    const Index n = 5000, d = 5;
    const Matrix x = uniform_matrix(n, d, rng);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
      const double g = std::sin(kPi * x(i, 1)) + x(i, 2) * x(i, 2) + 0.5 * x(i, 3);
      y[i] = 2.0 * x(i, 0) + g + 0.1 * rng.normal();
    }
    DmlConfig cfg;
    cfg.final_stage = FinalStage::kConstant;
    cfg.seed = 900 + static_cast<std::uint64_t>(s);
    const CateModel model = multi_head_cate(x, SoftLabels{y}, cfg);
    theta_eff.push_back(model.heads[0].theta_constant);
    theta_null.push_back(model.heads[4].theta_constant);

    Matrix design(n, d + 1);
    design.col(0).setOnes();
    design.rightCols(d) = x;
    const Vector beta =
        (design.transpose() * design).ldlt().solve(design.transpose() * y);
    ols_eff.push_back(beta[1]);
  }
  const double eff = median(theta_eff);
  const double nul = median(theta_null);
  const double ols = median(ols_eff);
  const double secs = seconds_since(start);
  *note = "median theta=" + fmt(eff) + ", null=" + fmt(nul) + ", ols=" + fmt(ols) + ", " +
          fmt(secs) + "s";
  if (std::abs(eff - 2.0) > 0.1) return "effect estimate off: " + fmt(eff);
  if (std::abs(nul) > 0.05) return "null feature not near zero: " + fmt(nul);
  if (std::abs(eff - ols) > 0.1) return "disagrees with least-squares oracle: " + fmt(ols);
  if (secs >= 30.0) return "runtime " + fmt(secs) + "s, budget 30s";
  return {};
}

std::string criterion2(std::string* note) {
  Rng rng(333);
  const Index n = 4000, d = 5;
  const Matrix x = uniform_matrix(n, d, rng);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    y[i] = 1.5 * x(i, 0) + std::sin(kPi * x(i, 1)) + 0.5 * x(i, 2) + 0.1 * rng.normal();
  }
  DmlConfig cfg;
  cfg.final_stage = FinalStage::kConstant;
  cfg.seed = 44;
  const CateModel model = multi_head_cate(x, SoftLabels{y}, cfg);

  double worst = 0.0;
  for (Index j = 0; j < d; ++j) {
    Matrix controls(n, d - 1);
    Index k = 0;
    for (Index c = 0; c < d; ++c) {
      if (c != j) controls.col(k++) = x.col(c);
    }
    // residualize() reuses the fold scheme (it depends only on seed and n),
    // so these are the exact residuals behind the fitted slope.
    const Vector y_res = residualize(y, controls, cfg);
    const Vector t_res = residualize(x.col(j), controls, cfg);
    const Vector final_res = y_res - model.heads[static_cast<std::size_t>(j)].theta_constant * t_res;
    const double denom = std::max(final_res.norm() * t_res.norm(), 1e-300);
    worst = std::max(worst, std::abs(final_res.dot(t_res)) / denom);
  }
  *note = "max residual correlation=" + fmt(worst);
  if (worst > 1e-6) return "first-order condition violated: " + fmt(worst);
  return {};
}

std::string criterion3(std::string* note) {
  const auto start = Clock::now();

  // (a) 100 randomized searches: trace strictly increasing, result acyclic.
  for (int r = 0; r < 100; ++r) {
    Rng rng(5000 + static_cast<std::uint64_t>(r));
    const Index d = 3 + (r % 4);
    const Index rows = 80 + 20 * (r % 5);
    const Matrix data = random_sem(d, rows, rng);
    HillClimbOptions opts;
    opts.seed = 6000 + static_cast<std::uint64_t>(r);
    opts.restarts = 1 + (r % 3);
    const HillClimbResult res = hill_climb(data, opts);
    for (std::size_t i = 1; i < res.score_trace.size(); ++i) {
      if (!(res.score_trace[i] > res.score_trace[i - 1])) {
        return "run " + std::to_string(r) + ": trace not strictly increasing";
      }
    }
    if (!is_acyclic(res.dag.adj)) return "run " + std::to_string(r) + ": cyclic result";
  }

  // (b) chain recovery vs the exhaustive 3-node enumeration, 5 seeds.
  static const std::pair<Index, Index> kArcs[6] = {{0, 1}, {0, 2}, {1, 0},
                                                   {1, 2}, {2, 0}, {2, 1}};
  int hits = 0;
  for (int s = 0; s < 5; ++s) {
    const Matrix data = chain_data(2000, 8000 + static_cast<std::uint64_t>(s));
    double best = -std::numeric_limits<double>::infinity();
    int dag_count = 0;
    for (int mask = 0; mask < 64; ++mask) {
      IntMatrix adj = IntMatrix::Zero(3, 3);
      for (int b = 0; b < 6; ++b) {
        if (mask & (1 << b)) adj(kArcs[b].first, kArcs[b].second) = 1;
      }
      if (!is_acyclic(adj)) continue;
      ++dag_count;
      best = std::max(best, bic_total(data, adj));
    }
    if (dag_count != 25) return "enumeration found " + std::to_string(dag_count) + " DAGs";
    HillClimbOptions opts;
    opts.seed = 8100 + static_cast<std::uint64_t>(s);
    opts.restarts = 3;
    const HillClimbResult res = hill_climb(data, opts);
    if (res.dag.score >= best - 1e-6) ++hits;
  }

  // (c) decomposability: fresh total equals the sum of local scores, and the
  // search's incrementally maintained score matches a fresh recomputation.
  double worst_gap = 0.0;
  for (int r = 0; r < 20; ++r) {
    Rng rng(9000 + static_cast<std::uint64_t>(r));
    const Index d = 4 + (r % 4);
    const Matrix data = random_sem(d, 150, rng);
    const IntMatrix adj = random_dag(d, 0.35, rng);
    const double total = bic_total(data, adj);
    double sum = 0.0;
    for (Index child = 0; child < d; ++child) {
      std::vector<Index> parents;
      for (Index p = 0; p < d; ++p) {
        if (adj(p, child) != 0) parents.push_back(p);
      }
      sum += bic_local(data, child, parents);
    }
    worst_gap = std::max(worst_gap, std::abs(total - sum));

    HillClimbOptions opts;
    opts.seed = 9100 + static_cast<std::uint64_t>(r);
    const HillClimbResult res = hill_climb(data, opts);
    worst_gap = std::max(worst_gap, std::abs(res.dag.score - bic_total(data, res.dag.adj)));
  }

  const double secs = seconds_since(start);
  *note = "chain recovery " + std::to_string(hits) + "/5, decomposability gap=" +
          fmt(worst_gap) + ", " + fmt(secs) + "s";
  if (hits < 4) return "chain optimum found in only " + std::to_string(hits) + "/5 seeds";
  if (worst_gap > 1e-9) return "decomposability gap " + fmt(worst_gap);
  if (secs >= 60.0) return "runtime " + fmt(secs) + "s, budget 60s";
  return {};
}

std::string criterion4(std::string* note) {
  // (a) central-difference gradient check, freshly initialized and trained.
  SyntheticConfig scfg;
  scfg.n = 50;
  scfg.d = 5;
  scfg.sigma = 1.0;
  scfg.seed = 3;
  const Dataset ds = generate_synthetic(scfg);
  const Matrix w = Matrix::Constant(50, 5, 0.25);
  GcnAdjacency ident;
  ident.a_norm = Matrix::Identity(5, 5);
  GcnHyperParams hp;
  hp.hidden = 8;
  hp.readout_hidden = 6;
  hp.seed = 5;
  hp.epochs = 0;
  const GcnModel fresh = fit_gcn(ds, &w, ident, hp);
  const RowVector x0 = ds.x.row(0);
  const RowVector w0 = w.row(0);
  const Matrix nf0 = build_node_features(x0, &w0);
  double worst_grad = gradient_check(fresh, nf0, 1.0, ds.y[0]);
  hp.epochs = 30;
  const GcnModel trained = fit_gcn(ds, &w, ident, hp);
  worst_grad = std::max(worst_grad, gradient_check(trained, nf0, 0.0, ds.y[1]));

  // (b) permuting nodes together with the adjacency leaves the pooled
  // readout unchanged.
  Rng prng(77);
  const IntMatrix dag_adj = random_dag(6, 0.4, prng);
  DagStructure g;
  g.adj = dag_adj;
  g.local_scores = Vector::Zero(6);
  const Matrix a6 = to_gcn_adjacency(g).a_norm;
  const GcnModel pm = manual_model(a6, 2, 8, 5, 2, 11);
  Matrix nf(6, 2);
  for (Index i = 0; i < 6; ++i) {
    nf(i, 0) = prng.uniform();
    nf(i, 1) = prng.normal();
  }
  const std::vector<Index> perm{3, 0, 5, 1, 4, 2};
  Matrix p = Matrix::Zero(6, 6);
  for (Index i = 0; i < 6; ++i) p(i, perm[static_cast<std::size_t>(i)]) = 1.0;
  GcnModel pm2 = pm;
  pm2.a_norm = p * a6 * p.transpose();
  const Matrix nf2 = p * nf;
  const double perm_gap =
      std::abs(gcn_forward(pm, nf, 1.0).y_hat - gcn_forward(pm2, nf2, 1.0).y_hat);

  // (c) single node with identity adjacency collapses to a dense network.
  const GcnModel dm = manual_model(Matrix::Identity(1, 1), 1, 4, 3, 2, 13);
  Matrix nf1(1, 1);
  nf1 << 0.7;
  const double t = 1.0;
  auto leaky = [&](double v) { return v > 0.0 ? v : dm.leaky_slope * v; };
  RowVector h = nf1.row(0);
  for (const Matrix& lw : dm.layer_w) {
    RowVector z = h * lw;
    for (Index j = 0; j < z.size(); ++j) z[j] = leaky(z[j]);
    h = z;
  }
  double dense_y = dm.readout_b2;
  for (Index i = 0; i < dm.readout_w2.size(); ++i) {
    double pre = dm.readout_b1[i];
    for (Index j = 0; j < h.size(); ++j) pre += dm.readout_w1(i, j) * h[j];
    pre += dm.readout_w1(i, h.size()) * t;
    dense_y += dm.readout_w2[i] * leaky(pre);
  }
  const double dense_gap = std::abs(gcn_forward(dm, nf1, t).y_hat - dense_y);

  *note = "grad err=" + fmt(worst_grad) + ", perm gap=" + fmt(perm_gap) + ", dense gap=" +
          fmt(dense_gap);
  if (worst_grad > 1e-4) return "gradient check " + fmt(worst_grad);
  if (perm_gap > 1e-12) return "permutation gap " + fmt(perm_gap);
  if (dense_gap > 1e-12) return "dense-oracle gap " + fmt(dense_gap);
  return {};
}

std::string criterion5(std::string* note) {
  double worst_sym = 0.0, worst_radius = 0.0;
  Rng rng(1234);
  for (int r = 0; r < 50; ++r) {
    const Index d = 2 + (r % 11);
    DagStructure g;
    g.adj = random_dag(d, 0.3, rng);
    g.local_scores = Vector::Zero(d);
    const Matrix a = to_gcn_adjacency(g).a_norm;
    worst_sym = std::max(worst_sym, (a - a.transpose()).cwiseAbs().maxCoeff());

    Vector v(d);
    for (Index i = 0; i < d; ++i) v[i] = rng.normal();
    v.normalize();
    double radius = 0.0;
    for (int it = 0; it < 500; ++it) {
      const Vector av = a * v;
      const double norm = av.norm();
      if (norm == 0.0) break;
      v = av / norm;
      radius = norm;
    }
    worst_radius = std::max(worst_radius, radius);
  }
  *note = "max asymmetry=" + fmt(worst_sym) + ", max spectral radius=" + fmt(worst_radius);
  if (worst_sym > 1e-12) return "asymmetry " + fmt(worst_sym);
  if (worst_radius > 1.0 + 1e-9) return "spectral radius " + fmt(worst_radius);
  return {};
}

std::string criterion6(std::string* note) {
  SyntheticConfig cfg;
  cfg.n = 10000;
  cfg.d = 5;
  cfg.sigma = 1.0;
  cfg.eta = 0.1;
  cfg.seed = 42;
  const Dataset ds = generate_synthetic(cfg);
  const Vector e = propensity_surface(ds.x, cfg.eta);
  if (e.minCoeff() < 0.1 || e.maxCoeff() > 0.9) {
    return "propensity outside the trim band [" + fmt(e.minCoeff()) + ", " +
           fmt(e.maxCoeff()) + "]";
  }

  std::vector<Index> order(10000);
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return e[a] < e[b]; });
  double worst_z = 0.0;
  for (int b = 0; b < 10; ++b) {
    double rate = 0.0, expect = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const Index row = order[static_cast<std::size_t>(b * 1000 + i)];
      rate += ds.t[row];
      expect += e[row];
    }
    rate /= 1000.0;
    expect /= 1000.0;
    const double se = std::sqrt(expect * (1.0 - expect) / 1000.0);
    worst_z = std::max(worst_z, std::abs(rate - expect) / se);
  }
  if (worst_z > 3.0) {
    *note = "decile z=" + fmt(worst_z);
    return "treatment rate off by " + fmt(worst_z) + " binomial SE";
  }

  // Noise-free run: the stored outcome is the selected potential outcome bit
  // for bit, and the potential-outcome gap matches the true effect to within
  // one rounding of each outcome (|gap| <= 2^-50 here, checked at 1e-15).
  cfg.sigma = 0.0;
  const Dataset d0 = generate_synthetic(cfg);
  const auto [y0, y1] = potential_outcomes(d0.x);
  const Vector tau = treatment_effect_surface(d0.x);
  double worst_gap = 0.0;
  for (Index i = 0; i < d0.n(); ++i) {
    const double chosen = d0.t[i] == 1 ? y1[i] : y0[i];
    if (!same_bits(d0.y[i], chosen)) {
      return "noise-free outcome differs from the potential outcome at row " +
             std::to_string(i);
    }
    worst_gap = std::max(worst_gap, std::abs((y1[i] - y0[i]) - tau[i]));
  }
  *note = "decile z=" + fmt(worst_z) + ", effect gap=" + fmt(worst_gap);
  if (worst_gap > 1e-15) return "potential-outcome gap " + fmt(worst_gap);
  return {};
}

std::string criterion7(std::string* note) {
  std::string summary;
  for (const Index d : {Index{5}, Index{9}, Index{20}}) {
    const auto start = Clock::now();
    std::vector<double> weighted, plain;
    for (int s = 1; s <= 5; ++s) {
      const std::string tag =
          "c7_d" + std::to_string(d) + "_s" + std::to_string(s);
      const json report = run_pipeline_cli(
          tag, pipeline_config(1000 * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(s),
                               3000, d, 0.5, 0.6666666666666666, 120));
      const double we = report.at("results").at("weighted").at("abs_ite").get<double>();
      const double pe = report.at("results").at("plain").at("abs_ite").get<double>();
      if (!std::isfinite(we) || !std::isfinite(pe)) {
        return "d=" + std::to_string(d) + " seed " + std::to_string(s) + ": non-finite error";
      }
      weighted.push_back(we);
      plain.push_back(pe);
    }
    const double mw = median(weighted), mp = median(plain);
    const double secs = seconds_since(start);
    summary += (summary.empty() ? "" : "; ") + std::string("d=") + std::to_string(d) +
               ": weighted=" + fmt(mw) + " plain=" + fmt(mp) + " (" + fmt(secs) + "s)";
    *note = summary;
    if (!(mw <= mp)) {
      return "d=" + std::to_string(d) + ": weighted median " + fmt(mw) +
             " exceeds plain " + fmt(mp);
    }
    if (secs >= 300.0) {
      return "d=" + std::to_string(d) + " runtime " + fmt(secs) + "s, budget 300s";
    }
  }
  return {};
}

std::string criterion8(std::string* note) {
  // (a) hand example, exact.
  Vector scores(4), y(4);
  IntVector t(4);
  scores << 0.9, 0.8, 0.7, 0.6;
  t << 1, 0, 1, 0;
  y << 1.0, 0.0, 0.0, 1.0;
  const auto hand = uplift_curve(scores, t, y);
  const double expected_v[4] = {0.5, 0.5, 0.5, 0.0};
  for (int k = 0; k < 4; ++k) {
    if (hand[static_cast<std::size_t>(k)].v != expected_v[k]) {
      return "hand example V(" + std::to_string(k + 1) + ") = " +
             fmt(hand[static_cast<std::size_t>(k)].v);
    }
  }
  if (auuc_raw(hand) != 1.5) return "hand example area " + fmt(auuc_raw(hand));

  // (b) the true effect beats randomly permuted scores.
  SyntheticConfig scfg;
  scfg.n = 5000;
  scfg.d = 5;
  scfg.sigma = 0.5;
  scfg.seed = 7;
  const Dataset ds = generate_synthetic(scfg);
  const Vector& tau = *ds.tau_true;
  const double raw_true = auuc_raw(uplift_curve(tau, ds.t, ds.y));
  Rng rng(4242);
  std::vector<double> perm_raw, rand_norm;
  const double rnd = auuc_random(ds.t, ds.y);
  const double perfect = auuc_perfect(ds.t, ds.y, ds.tau_true);
  for (int k = 0; k < 20; ++k) {
    std::vector<Index> idx(static_cast<std::size_t>(ds.n()));
    std::iota(idx.begin(), idx.end(), Index{0});
    rng.shuffle(idx);
    Vector permuted(ds.n());
    for (Index i = 0; i < ds.n(); ++i) permuted[i] = tau[idx[static_cast<std::size_t>(i)]];
    perm_raw.push_back(auuc_raw(uplift_curve(permuted, ds.t, ds.y)));

    Vector noise(ds.n());
    for (Index i = 0; i < ds.n(); ++i) noise[i] = rng.uniform();
    rand_norm.push_back(
        auuc_normalized(auuc_raw(uplift_curve(noise, ds.t, ds.y)), rnd, perfect));
  }
  const double perm_med = median(perm_raw);
  const double norm_med = median(rand_norm);

  // (d) the final curve point is the group-mean gap: bitwise against the
  // sorted-order recomputation, and near the naive mean difference.
  const auto curve = uplift_curve(tau, ds.t, ds.y);
  std::vector<Index> order(static_cast<std::size_t>(ds.n()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return tau[a] > tau[b]; });
  double sum_t = 0.0, sum_c = 0.0;
  Index n_t = 0, n_c = 0;
  for (Index i : order) (ds.t[i] == 1 ? n_t : n_c) += 1;
  for (Index i : order) {
    if (ds.t[i] == 1) {
      sum_t += ds.y[i];
    } else {
      sum_c += ds.y[i];
    }
  }
  const double v_last = sum_t / static_cast<double>(n_t) - sum_c / static_cast<double>(n_c);
  const bool last_exact = same_bits(curve.back().v, v_last);
  const double naive_gap = std::abs(
      curve.back().v -
      ((ds.t.cast<double>().array() * ds.y.array()).sum() / static_cast<double>(n_t) -
       ((1 - ds.t.array()).cast<double>() * ds.y.array()).sum() / static_cast<double>(n_c)));

  *note = "true=" + fmt(raw_true) + " perm median=" + fmt(perm_med) + ", random norm=" +
          fmt(norm_med) + ", ATE gap=" + fmt(naive_gap);
  if (!(raw_true > perm_med)) return "true effect does not beat permuted scores";
  if (norm_med < 0.45 || norm_med > 0.55) return "random normalized area " + fmt(norm_med);
  if (!last_exact) return "final curve point differs from the ordered recomputation";
  if (naive_gap > 1e-12) return "final curve point vs group means: " + fmt(naive_gap);
  return {};
}

std::string criterion9(std::string* note) {
  const std::string config = pipeline_config(77, 400, 5, 1.0, 0.8, 25);
  const fs::path dir_a = g_workdir / "c9_a", dir_b = g_workdir / "c9_b";
  run_pipeline_cli("c9_a", config);
  run_pipeline_cli("c9_b", config);
  const std::string rep_a = read_file(dir_a / "out" / "report.json");
  const std::string rep_b = read_file(dir_b / "out" / "report.json");
  const json man_a = json::parse(read_file(dir_a / "out" / "manifest.json"));
  const json man_b = json::parse(read_file(dir_b / "out" / "manifest.json"));
  const bool artifacts_equal = man_a.at("artifacts") == man_b.at("artifacts");
  *note = std::string("report bytes ") + (rep_a == rep_b ? "identical" : "differ") +
          ", artifact hashes " + (artifacts_equal ? "identical" : "differ");
  if (rep_a != rep_b) return "reports differ";
  if (!artifacts_equal) return "artifact hashes differ";
  return {};
}

// Optional: directional real-world echo. Never gates.
std::string criterion10(std::string* note, bool* skipped) {
  fs::path source;
  if (const char* env = std::getenv("CRITEO_CSV")) {
    source = env;
  } else {
    for (const fs::path root : {fs::current_path(), fs::current_path() / "data"}) {
      if (!fs::is_directory(root)) continue;
      for (const auto& entry : fs::directory_iterator(root)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("criteo-uplift", 0) == 0 && entry.path().extension() == ".csv") {
          source = entry.path();
          break;
        }
      }
      if (!source.empty()) break;
    }
  }
  if (source.empty() || !fs::exists(source)) {
    *skipped = true;
    *note = "real-world file not present (set CRITEO_CSV to run)";
    return {};
  }

  // First 100k data rows are enough for a directional check.
  const fs::path sub = g_workdir / "criteo_subsample.csv";
  {
    std::ifstream in(source);
    std::ofstream out(sub);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line) && rows <= 100000) {
      out << line << '\n';
      ++rows;
    }
  }
  json cfg;
  cfg["seed"] = 5;
  cfg["dataset"]["csv"]["path"] = sub.string();
  cfg["dataset"]["csv"]["treatment"] = "treatment";
  cfg["dataset"]["csv"]["outcome"] = "conversion";
  cfg["dataset"]["csv"]["features"] =
      std::vector<std::string>{"f0", "f1", "f2", "f3", "f4", "f5",
                               "f6", "f7", "f8", "f9", "f10", "f11"};
  cfg["dataset"]["train_frac"] = 0.8;
  cfg["gcn"]["epochs"] = 60;
  const json report = run_pipeline_cli("c10", cfg.dump(2) + "\n");
  const double wa = report.at("results").at("weighted").at("auuc_raw").get<double>();
  const double pa = report.at("results").at("plain").at("auuc_raw").get<double>();
  *note = "weighted auuc=" + fmt(wa) + ", plain auuc=" + fmt(pa);
  if (!(wa >= pa)) return "weighted area below plain";
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-uplift-cli>\n";
    return 2;
  }
  g_cli = fs::absolute(argv[1]);
  if (!fs::exists(g_cli)) {
    std::cerr << "acceptance: no such binary: " << g_cli << "\n";
    return 2;
  }
  g_workdir = fs::temp_directory_path() / "uplift_acceptance";
  fs::remove_all(g_workdir);
  fs::create_directories(g_workdir);

  struct Item {
    int number;
    const char* what;
    std::string (*fn)(std::string*);
  };
  const Item items[] = {
      {1, "per-feature effect recovery against the least-squares oracle", criterion1},
      {2, "residual orthogonality first-order condition", criterion2},
      {3, "structure search: monotone trace, acyclic, chain recovery, decomposable", criterion3},
      {4, "graph network gradients, permutation invariance, dense oracle", criterion4},
      {5, "normalized adjacency symmetry and spectral radius", criterion5},
      {6, "synthetic generator calibration and noise-free exactness", criterion6},
      {7, "end-to-end: causal weighting beats the plain baseline per width", criterion7},
      {8, "uplift curve hand values, permutation baselines, endpoint identity", criterion8},
      {9, "byte-identical reports across repeated runs", criterion9},
  };

  int failures = 0;
  for (const Item& item : items) {
    std::string note, detail;
    try {
      detail = item.fn(&note);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const bool ok = detail.empty();
    if (!ok) ++failures;
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << item.number << ": "
              << item.what;
    if (!note.empty()) std::cout << " [" << note << "]";
    if (!ok) std::cout << " -- " << detail;
    std::cout << "\n" << std::flush;
  }

  {
    std::string note, detail;
    bool skipped = false;
    try {
      detail = criterion10(&note, &skipped);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const char* status = skipped ? "[SKIP]" : (detail.empty() ? "[PASS]" : "[FAIL]");
    std::cout << status << " criterion 10 (optional, not gating): real-world directional echo";
    if (!note.empty()) std::cout << " [" << note << "]";
    if (!detail.empty()) std::cout << " -- " << detail;
    std::cout << "\n" << std::flush;
  }

  std::cout << "acceptance: " << (9 - failures) << "/9 gating criteria passed\n";
  return failures == 0 ? 0 : 1;
}
