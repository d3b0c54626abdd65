#include "uplift/dml.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>
#include <vector>

#include <json.hpp>

#include "uplift/rng.hpp"

namespace uplift {

namespace {

using json = nlohmann::ordered_json;

void validate(const DmlConfig& cfg, Index n) {
  if (cfg.n_folds < 2) throw config_error("dml: n_folds must be at least 2");
  if (static_cast<Index>(cfg.n_folds) > n) {
    throw config_error("dml: n_folds=" + std::to_string(cfg.n_folds) + " exceeds n=" +
                       std::to_string(n));
  }
  if (cfg.ridge_lambda < 0.0) throw config_error("dml: ridge_lambda must be non-negative");
}

std::vector<int> assign_folds(Index n, int n_folds, std::uint64_t seed) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    fold[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(n_folds));
  }
  return fold;
}

// Ridge with affine design [1 | controls]; the intercept stays unpenalized.
Vector ridge_coeffs(const Matrix& phi, const Vector& v, double lambda) {
  Matrix gram = phi.transpose() * phi;
  for (Index k = 1; k < gram.rows(); ++k) gram(k, k) += lambda;
  return gram.ldlt().solve(phi.transpose() * v);
}

Matrix affine_design(const Matrix& controls, const std::vector<Index>& rows) {
  Matrix phi(static_cast<Index>(rows.size()), controls.cols() + 1);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    phi(static_cast<Index>(k), 0) = 1.0;
    phi.row(static_cast<Index>(k)).tail(controls.cols()) = controls.row(rows[k]);
  }
  return phi;
}

Vector gather(const Vector& v, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<Index>(k)] = v[rows[k]];
  return out;
}

Matrix gather_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
  return out;
}

Matrix drop_column(const Matrix& x, Index j) {
  Matrix out(x.rows(), x.cols() - 1);
  if (j > 0) out.leftCols(j) = x.leftCols(j);
  if (j + 1 < x.cols()) out.rightCols(x.cols() - j - 1) = x.rightCols(x.cols() - j - 1);
  return out;
}

}  // namespace

Vector residualize(const Vector& values, const Matrix& controls, const DmlConfig& cfg) {
  const Index n = values.size();
  if (controls.rows() != n) {
    throw shape_error("dml: controls have " + std::to_string(controls.rows()) +
                      " rows, values have " + std::to_string(n));
  }
  validate(cfg, n);

  const std::vector<int> fold = assign_folds(n, cfg.n_folds, cfg.seed);
  Vector residual(n);

  for (int f = 0; f < cfg.n_folds; ++f) {
    std::vector<Index> train_rows, held_rows;
    for (Index i = 0; i < n; ++i) {
      (fold[static_cast<std::size_t>(i)] == f ? held_rows : train_rows).push_back(i);
    }
    if (held_rows.empty()) continue;
    if (train_rows.empty()) throw config_error("dml: a fold would leave no training rows");

    if (cfg.nuisance == Nuisance::kRidge) {
      const Matrix phi_train = affine_design(controls, train_rows);
      const Vector beta = ridge_coeffs(phi_train, gather(values, train_rows), cfg.ridge_lambda);
      const Matrix phi_held = affine_design(controls, held_rows);
      const Vector pred = phi_held * beta;
      for (std::size_t k = 0; k < held_rows.size(); ++k) {
        residual[held_rows[k]] = values[held_rows[k]] - pred[static_cast<Index>(k)];
      }
    } else {
      const GbdtModel model =
          fit_gbdt(gather_rows(controls, train_rows), gather(values, train_rows), cfg.gbdt);
      for (Index i : held_rows) {
        residual[i] = values[i] - model.predict_row(controls.row(i));
      }
    }
  }
  return residual;
}

FeatureCate dml_fit_feature(Index j, const Matrix& x, const SoftLabels& y_soft,
                            const DmlConfig& cfg) {
  const Index n = x.rows();
  const Index d = x.cols();
  if (d < 2) throw shape_error("dml: need at least 2 features (one control per head)");
  if (j < 0 || j >= d) throw shape_error("dml: feature index out of range");
  if (y_soft.y_hat.size() != n) throw shape_error("dml: soft labels do not match row count");

  const Matrix controls = drop_column(x, j);
  const Vector t_res = residualize(x.col(j), controls, cfg);
  const Vector y_res = residualize(y_soft.y_hat, controls, cfg);

  FeatureCate head;
  head.feature = j;
  head.mode = cfg.final_stage;

  const double st2 = t_res.squaredNorm();
  if (st2 < 1e-12) {
    head.degenerate = true;
    head.theta_constant = 0.0;
    if (cfg.final_stage == FinalStage::kLinear) head.beta = Vector::Zero(d);
    return head;
  }

  if (cfg.final_stage == FinalStage::kConstant) {
    head.theta_constant = t_res.dot(y_res) / st2;
    return head;
  }

  // Linear mode: theta(x) = beta · [1, x_-j]; weighted normal equations with
  // weights t_res², ridge on the full matrix for invertibility.
  Matrix a = Matrix::Zero(d, d);
  Vector b = Vector::Zero(d);
  Vector phi(d);
  for (Index i = 0; i < n; ++i) {
    phi[0] = 1.0;
    Index k = 1;
    for (Index c = 0; c < d; ++c) {
      if (c == j) continue;
      phi[k++] = x(i, c);
    }
    const double w = t_res[i] * t_res[i];
    a.noalias() += w * (phi * phi.transpose());
    b.noalias() += (t_res[i] * y_res[i]) * phi;
  }
  a.diagonal().array() += cfg.ridge_lambda;
  head.beta = a.ldlt().solve(b);
  return head;
}

CateModel multi_head_cate(const Matrix& x, const SoftLabels& y_soft, const DmlConfig& cfg) {
  const Index d = x.cols();
  if (d < 2) throw shape_error("dml: need at least 2 features (one control per head)");
  validate(cfg, x.rows());

  CateModel model;
  model.n_features = d;
  model.mode = cfg.final_stage;
  model.heads.resize(static_cast<std::size_t>(d));

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(d));
  auto run_head = [&](Index j) {
    try {
      model.heads[static_cast<std::size_t>(j)] = dml_fit_feature(j, x, y_soft, cfg);
    } catch (...) {
      errors[static_cast<std::size_t>(j)] = std::current_exception();
    }
  };

  if (cfg.parallel && d > 1) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const Index workers = std::min<Index>(d, static_cast<Index>(hw));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (Index j = w; j < d; j += workers) run_head(j);
      });
    }
    for (auto& th : pool) th.join();
  } else {
    for (Index j = 0; j < d; ++j) run_head(j);
  }

  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return model;
}

CausalWeights apply_cate(const CateModel& model, const Matrix& x) {
  if (x.cols() != model.n_features) {
    throw shape_error("cate: model expects " + std::to_string(model.n_features) +
                      " features, got " + std::to_string(x.cols()));
  }
  CausalWeights out;
  out.w.resize(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const FeatureCate& head = model.heads[static_cast<std::size_t>(j)];
    for (Index i = 0; i < x.rows(); ++i) out.w(i, j) = head.theta_at(x.row(i));
  }
  out.theta_mean = out.w.colwise().mean();
  out.heterogeneity_basis =
      model.mode == FinalStage::kConstant ? "constant" : "affine[1,x_-j]";
  out.degenerate.resize(static_cast<std::size_t>(x.cols()));
  for (Index j = 0; j < x.cols(); ++j) {
    out.degenerate[static_cast<std::size_t>(j)] = model.heads[static_cast<std::size_t>(j)].degenerate;
  }
  return out;
}

std::string cate_to_json(const CateModel& model) {
  json doc;
  doc["format"] = "cate-v1";
  doc["n_features"] = static_cast<long long>(model.n_features);
  doc["mode"] = model.mode == FinalStage::kConstant ? "constant" : "linear";
  json heads = json::array();
  for (const FeatureCate& head : model.heads) {
    json jh;
    jh["feature"] = static_cast<long long>(head.feature);
    jh["degenerate"] = head.degenerate;
    jh["theta_constant"] = head.theta_constant;
    jh["beta"] = std::vector<double>(head.beta.data(), head.beta.data() + head.beta.size());
    heads.push_back(std::move(jh));
  }
  doc["heads"] = std::move(heads);
  return doc.dump(2) + "\n";
}

CateModel cate_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw schema_error(std::string("cate model: invalid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "cate-v1") {
      throw schema_error("cate model: unknown format tag");
    }
    CateModel model;
    model.n_features = doc.at("n_features").get<long long>();
    const std::string mode = doc.at("mode").get<std::string>();
    if (mode != "constant" && mode != "linear") throw schema_error("cate model: unknown mode");
    model.mode = mode == "constant" ? FinalStage::kConstant : FinalStage::kLinear;
    for (const json& jh : doc.at("heads")) {
      FeatureCate head;
      head.feature = jh.at("feature").get<long long>();
      head.degenerate = jh.at("degenerate").get<bool>();
      head.theta_constant = jh.at("theta_constant").get<double>();
      head.mode = model.mode;
      const auto beta = jh.at("beta").get<std::vector<double>>();
      head.beta = Eigen::Map<const Vector>(beta.data(), static_cast<Index>(beta.size()));
      model.heads.push_back(std::move(head));
    }
    if (static_cast<Index>(model.heads.size()) != model.n_features) {
      throw schema_error("cate model: head count does not match n_features");
    }
    return model;
  } catch (const json::exception& e) {
    throw schema_error(std::string("cate model: malformed document: ") + e.what());
  }
}

}  // namespace uplift
