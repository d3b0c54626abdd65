#include "uplift/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "uplift/rng.hpp"

namespace uplift {

namespace {

using json = nlohmann::ordered_json;

double leaky(double v, double slope) { return v >= 0.0 ? v : slope * v; }
double leaky_grad(double v, double slope) { return v >= 0.0 ? 1.0 : slope; }

Matrix leaky_mat(const Matrix& z, double slope) {
  return z.unaryExpr([slope](double v) { return leaky(v, slope); });
}

void validate(const GcnHyperParams& hp) {
  if (hp.n_layers < 1) throw config_error("gcn: n_layers must be at least 1");
  if (hp.hidden < 1) throw config_error("gcn: hidden must be at least 1");
  if (hp.readout_hidden < 1) throw config_error("gcn: readout_hidden must be at least 1");
  if (!(hp.lr > 0.0)) throw config_error("gcn: lr must be positive");
  if (hp.epochs < 0) throw config_error("gcn: epochs must be non-negative");
  if (hp.batch < 1) throw config_error("gcn: batch must be at least 1");
  if (hp.l2 < 0.0) throw config_error("gcn: l2 must be non-negative");
  if (!(hp.momentum >= 0.0 && hp.momentum < 1.0)) {
    throw config_error("gcn: momentum must lie in [0, 1)");
  }
  if (!(hp.leaky_slope >= 0.0)) throw config_error("gcn: leaky_slope must be non-negative");
}

// Glorot-uniform fill, row-major draw order so the stream is pinned.
void glorot_fill(Matrix& w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
  }
}

void check_dims(const GcnModel& model, const Matrix& node_features) {
  if (node_features.rows() != model.a_norm.rows()) {
    throw shape_error("gcn: expected " + std::to_string(model.a_norm.rows()) +
                      " nodes, got " + std::to_string(node_features.rows()));
  }
  if (model.layer_w.empty() || node_features.cols() != model.layer_w.front().rows()) {
    throw shape_error("gcn: expected " +
                      std::to_string(model.layer_w.empty() ? 0 : model.layer_w.front().rows()) +
                      " input channels, got " + std::to_string(node_features.cols()));
  }
}

// Flat views over every trainable parameter, in a fixed order shared by the
// finite-difference check.
std::vector<double*> parameter_refs(GcnModel& model) {
  std::vector<double*> refs;
  for (Matrix& w : model.layer_w) {
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < w.cols(); ++j) refs.push_back(&w(i, j));
    }
  }
  for (Index i = 0; i < model.readout_w1.rows(); ++i) {
    for (Index j = 0; j < model.readout_w1.cols(); ++j) refs.push_back(&model.readout_w1(i, j));
  }
  for (Index i = 0; i < model.readout_b1.size(); ++i) refs.push_back(&model.readout_b1[i]);
  for (Index i = 0; i < model.readout_w2.size(); ++i) refs.push_back(&model.readout_w2[i]);
  refs.push_back(&model.readout_b2);
  return refs;
}

std::vector<const double*> gradient_refs(const GcnGradients& g) {
  std::vector<const double*> refs;
  for (const Matrix& w : g.layer_w) {
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < w.cols(); ++j) refs.push_back(&w(i, j));
    }
  }
  for (Index i = 0; i < g.readout_w1.rows(); ++i) {
    for (Index j = 0; j < g.readout_w1.cols(); ++j) refs.push_back(&g.readout_w1(i, j));
  }
  for (Index i = 0; i < g.readout_b1.size(); ++i) refs.push_back(&g.readout_b1[i]);
  for (Index i = 0; i < g.readout_w2.size(); ++i) refs.push_back(&g.readout_w2[i]);
  refs.push_back(&g.readout_b2);
  return refs;
}

}  // namespace

Matrix ChannelScaler::apply(const Matrix& node_features) const {
  if (node_features.cols() != mean.size()) {
    throw shape_error("gcn: scaler expects " + std::to_string(mean.size()) + " channels");
  }
  Matrix out = node_features;
  for (Index c = 0; c < out.cols(); ++c) {
    out.col(c) = (out.col(c).array() - mean[c]) / stdev[c];
  }
  return out;
}

Matrix build_node_features(const RowVector& x_row, const RowVector* w_row) {
  const Index d = x_row.size();
  Matrix nf(d, w_row != nullptr ? 2 : 1);
  nf.col(0) = x_row.transpose();
  if (w_row != nullptr) {
    if (w_row->size() != d) throw shape_error("gcn: weight row length mismatch");
    nf.col(1) = w_row->transpose();
  }
  return nf;
}

GcnForwardCache gcn_forward(const GcnModel& model, const Matrix& node_features, double t) {
  check_dims(model, node_features);
  GcnForwardCache cache;
  const std::size_t n_layers = model.layer_w.size();
  cache.h.resize(n_layers + 1);
  cache.z.resize(n_layers);
  cache.h[0] = model.scaler.apply(node_features);
  for (std::size_t l = 0; l < n_layers; ++l) {
    cache.z[l].noalias() = model.a_norm * (cache.h[l] * model.layer_w[l]);
    cache.h[l + 1] = leaky_mat(cache.z[l], model.leaky_slope);
  }
  cache.pooled = cache.h[n_layers].colwise().mean().transpose();

  cache.readout_in.resize(cache.pooled.size() + 1);
  cache.readout_in.head(cache.pooled.size()) = cache.pooled;
  cache.readout_in[cache.pooled.size()] = t;

  cache.hidden_pre = model.readout_w1 * cache.readout_in + model.readout_b1;
  cache.hidden_act = cache.hidden_pre.unaryExpr(
      [slope = model.leaky_slope](double v) { return leaky(v, slope); });
  cache.y_hat = model.readout_w2.dot(cache.hidden_act) + model.readout_b2;
  return cache;
}

GcnGradients loss_gradients(const GcnModel& model, const Matrix& node_features, double t,
                            double y) {
  const GcnForwardCache cache = gcn_forward(model, node_features, t);
  const std::size_t n_layers = model.layer_w.size();

  GcnGradients g;
  g.layer_w.resize(n_layers);
  const double err = cache.y_hat - y;
  g.loss = err * err;

  const double dout = 2.0 * err;
  g.readout_w2 = dout * cache.hidden_act;
  g.readout_b2 = dout;

  Vector d_hidden_pre(cache.hidden_pre.size());
  for (Index i = 0; i < d_hidden_pre.size(); ++i) {
    d_hidden_pre[i] =
        dout * model.readout_w2[i] * leaky_grad(cache.hidden_pre[i], model.leaky_slope);
  }
  g.readout_w1 = d_hidden_pre * cache.readout_in.transpose();
  g.readout_b1 = d_hidden_pre;

  const Vector d_readout_in = model.readout_w1.transpose() * d_hidden_pre;
  const Vector d_pooled = d_readout_in.head(d_readout_in.size() - 1);

  // Mean pooling spreads the pooled gradient evenly across nodes.
  const Index d_nodes = model.a_norm.rows();
  Matrix dh = (d_pooled / static_cast<double>(d_nodes)).transpose().replicate(d_nodes, 1);

  for (std::size_t l = n_layers; l-- > 0;) {
    Matrix dz(cache.z[l].rows(), cache.z[l].cols());
    for (Index i = 0; i < dz.rows(); ++i) {
      for (Index j = 0; j < dz.cols(); ++j) {
        dz(i, j) = dh(i, j) * leaky_grad(cache.z[l](i, j), model.leaky_slope);
      }
    }
    const Matrix a_t_dz = model.a_norm.transpose() * dz;
    g.layer_w[l].noalias() = cache.h[l].transpose() * a_t_dz;
    if (l > 0) dh.noalias() = a_t_dz * model.layer_w[l].transpose();
  }
  return g;
}

GcnModel fit_gcn(const Dataset& train, const Matrix* weights, const GcnAdjacency& a,
                 const GcnHyperParams& hp) {
  validate(hp);
  const Index n = train.n();
  const Index d = train.d();
  if (n < 1) throw data_error("gcn: training split is empty");
  if (a.a_norm.rows() != d || a.a_norm.cols() != d) {
    throw shape_error("gcn: adjacency is " + std::to_string(a.a_norm.rows()) + "x" +
                      std::to_string(a.a_norm.cols()) + " but d=" + std::to_string(d));
  }
  if (weights != nullptr && (weights->rows() != n || weights->cols() != d)) {
    throw shape_error("gcn: causal weights must be n x d");
  }
  const Index m = weights != nullptr ? 2 : 1;

  // Raw node tensors, then per-channel statistics over samples x nodes.
  std::vector<Matrix> raw(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const RowVector x_row = train.x.row(i);
    if (weights != nullptr) {
      const RowVector w_row = weights->row(i);
      raw[static_cast<std::size_t>(i)] = build_node_features(x_row, &w_row);
    } else {
      raw[static_cast<std::size_t>(i)] = build_node_features(x_row, nullptr);
    }
  }

  GcnModel model;
  model.leaky_slope = hp.leaky_slope;
  model.a_norm = a.a_norm;
  model.hp = hp;
  model.scaler.mean = Vector::Zero(m);
  model.scaler.stdev = Vector::Ones(m);
  const double count = static_cast<double>(n) * static_cast<double>(d);
  for (Index c = 0; c < m; ++c) {
    double s = 0.0;
    for (const Matrix& nf : raw) s += nf.col(c).sum();
    const double mu = s / count;
    double sq = 0.0;
    for (const Matrix& nf : raw) sq += (nf.col(c).array() - mu).square().sum();
    const double sd = std::sqrt(sq / count);
    model.scaler.mean[c] = mu;
    model.scaler.stdev[c] = sd < 1e-12 ? 1.0 : sd;
  }

  Rng rng(hp.seed);
  model.layer_w.resize(static_cast<std::size_t>(hp.n_layers));
  Index fan_in = m;
  for (int l = 0; l < hp.n_layers; ++l) {
    model.layer_w[static_cast<std::size_t>(l)].resize(fan_in, hp.hidden);
    glorot_fill(model.layer_w[static_cast<std::size_t>(l)], rng);
    fan_in = hp.hidden;
  }
  model.readout_w1.resize(hp.readout_hidden, hp.hidden + 1);
  glorot_fill(model.readout_w1, rng);
  model.readout_b1 = Vector::Zero(hp.readout_hidden);
  Matrix w2(hp.readout_hidden, 1);
  glorot_fill(w2, rng);
  model.readout_w2 = w2.col(0);
  model.readout_b2 = 0.0;

  // Momentum buffers mirror the parameter layout.
  std::vector<Matrix> v_layer(model.layer_w.size());
  for (std::size_t l = 0; l < v_layer.size(); ++l) {
    v_layer[l] = Matrix::Zero(model.layer_w[l].rows(), model.layer_w[l].cols());
  }
  Matrix v_w1 = Matrix::Zero(model.readout_w1.rows(), model.readout_w1.cols());
  Vector v_b1 = Vector::Zero(model.readout_b1.size());
  Vector v_w2 = Vector::Zero(model.readout_w2.size());
  double v_b2 = 0.0;

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sse = 0.0;
    for (Index start = 0, batch_id = 0; start < n; start += hp.batch, ++batch_id) {
      const Index stop = std::min<Index>(start + hp.batch, n);
      const double bsz = static_cast<double>(stop - start);

      GcnGradients acc;
      acc.layer_w.resize(model.layer_w.size());
      for (std::size_t l = 0; l < acc.layer_w.size(); ++l) {
        acc.layer_w[l] = Matrix::Zero(model.layer_w[l].rows(), model.layer_w[l].cols());
      }
      acc.readout_w1 = Matrix::Zero(model.readout_w1.rows(), model.readout_w1.cols());
      acc.readout_b1 = Vector::Zero(model.readout_b1.size());
      acc.readout_w2 = Vector::Zero(model.readout_w2.size());
      acc.readout_b2 = 0.0;

      double batch_loss = 0.0;
      for (Index pos = start; pos < stop; ++pos) {
        const Index i = order[static_cast<std::size_t>(pos)];
        const GcnGradients g = loss_gradients(model, raw[static_cast<std::size_t>(i)],
                                              static_cast<double>(train.t[i]), train.y[i]);
        for (std::size_t l = 0; l < acc.layer_w.size(); ++l) acc.layer_w[l] += g.layer_w[l];
        acc.readout_w1 += g.readout_w1;
        acc.readout_b1 += g.readout_b1;
        acc.readout_w2 += g.readout_w2;
        acc.readout_b2 += g.readout_b2;
        batch_loss += g.loss;
      }
      epoch_sse += batch_loss;

      double grad_sq = acc.readout_b2 * acc.readout_b2;
      for (const Matrix& gw : acc.layer_w) grad_sq += gw.squaredNorm();
      grad_sq += acc.readout_w1.squaredNorm() + acc.readout_b1.squaredNorm() +
                 acc.readout_w2.squaredNorm();
      if (!std::isfinite(batch_loss) || !std::isfinite(grad_sq)) {
        throw numeric_error("gcn: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_id) + ", grad norm " +
                            std::to_string(std::sqrt(grad_sq)));
      }

      for (std::size_t l = 0; l < model.layer_w.size(); ++l) {
        const Matrix grad = acc.layer_w[l] / bsz + hp.l2 * model.layer_w[l];
        v_layer[l] = hp.momentum * v_layer[l] - hp.lr * grad;
        model.layer_w[l] += v_layer[l];
      }
      {
        const Matrix grad = acc.readout_w1 / bsz + hp.l2 * model.readout_w1;
        v_w1 = hp.momentum * v_w1 - hp.lr * grad;
        model.readout_w1 += v_w1;
      }
      {
        const Vector grad = acc.readout_b1 / bsz;
        v_b1 = hp.momentum * v_b1 - hp.lr * grad;
        model.readout_b1 += v_b1;
      }
      {
        const Vector grad = acc.readout_w2 / bsz + hp.l2 * model.readout_w2;
        v_w2 = hp.momentum * v_w2 - hp.lr * grad;
        model.readout_w2 += v_w2;
      }
      {
        const double grad = acc.readout_b2 / bsz;
        v_b2 = hp.momentum * v_b2 - hp.lr * grad;
        model.readout_b2 += v_b2;
      }
    }
    model.epoch_loss.push_back(epoch_sse / static_cast<double>(n));
  }
  return model;
}

double gradient_check(const GcnModel& model, const Matrix& node_features, double t, double y) {
  const GcnGradients analytic = loss_gradients(model, node_features, t, y);
  const std::vector<const double*> grads = gradient_refs(analytic);

  GcnModel probe = model;
  const std::vector<double*> params = parameter_refs(probe);
  if (params.size() != grads.size()) throw numeric_error("gcn: parameter layout mismatch");

  const double step = 1e-5;
  double max_rel = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = *params[k];
    *params[k] = saved + step;
    const GcnForwardCache up = gcn_forward(probe, node_features, t);
    *params[k] = saved - step;
    const GcnForwardCache dn = gcn_forward(probe, node_features, t);
    *params[k] = saved;
    const double up_loss = (up.y_hat - y) * (up.y_hat - y);
    const double dn_loss = (dn.y_hat - y) * (dn.y_hat - y);
    const double numeric = (up_loss - dn_loss) / (2.0 * step);
    const double a = *grads[k];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

UpliftScores predict_uplift(const GcnModel& model, const Dataset& ds, const Matrix* weights) {
  const Index n = ds.n();
  if (weights != nullptr && (weights->rows() != n || weights->cols() != ds.d())) {
    throw shape_error("gcn: causal weights must be n x d");
  }
  if (model.input_channels() != (weights != nullptr ? 2 : 1)) {
    throw shape_error("gcn: model expects " + std::to_string(model.input_channels()) +
                      " input channels");
  }

  UpliftScores out;
  out.tau_hat.resize(n);
  out.mu0.resize(n);
  out.mu1.resize(n);
  std::vector<double> d1, d0;
  for (Index i = 0; i < n; ++i) {
    const RowVector x_row = ds.x.row(i);
    Matrix nf;
    if (weights != nullptr) {
      const RowVector w_row = weights->row(i);
      nf = build_node_features(x_row, &w_row);
    } else {
      nf = build_node_features(x_row, nullptr);
    }
    const double mu1 = gcn_forward(model, nf, 1.0).y_hat;
    const double mu0 = gcn_forward(model, nf, 0.0).y_hat;
    out.mu1[i] = mu1;
    out.mu0[i] = mu0;
    out.tau_hat[i] = mu1 - mu0;
    if (ds.t[i] == 1) {
      out.treated_rows.push_back(i);
      d1.push_back(ds.y[i] - mu0);
    } else {
      out.control_rows.push_back(i);
      d0.push_back(mu1 - ds.y[i]);
    }
  }
  out.d_tilde_1 = Eigen::Map<const Vector>(d1.data(), static_cast<Index>(d1.size()));
  out.d_tilde_0 = Eigen::Map<const Vector>(d0.data(), static_cast<Index>(d0.size()));
  return out;
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  const Index r = static_cast<Index>(rows.size());
  if (r == 0) return Matrix(0, 0);
  const Index c = static_cast<Index>(rows.at(0).size());
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    const auto& row = rows.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(row.size()) != c) throw schema_error("gcn model: ragged matrix");
    for (Index j = 0; j < c; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  return m;
}

std::vector<double> vec_to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vec_from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

std::string gcn_to_json(const GcnModel& model) {
  json doc;
  doc["format"] = "gcn-v1";
  json layers = json::array();
  for (const Matrix& w : model.layer_w) layers.push_back(matrix_to_json(w));
  doc["layer_w"] = std::move(layers);
  doc["readout_w1"] = matrix_to_json(model.readout_w1);
  doc["readout_b1"] = vec_to_std(model.readout_b1);
  doc["readout_w2"] = vec_to_std(model.readout_w2);
  doc["readout_b2"] = model.readout_b2;
  doc["leaky_slope"] = model.leaky_slope;
  doc["a_norm"] = matrix_to_json(model.a_norm);
  doc["scaler_mean"] = vec_to_std(model.scaler.mean);
  doc["scaler_stdev"] = vec_to_std(model.scaler.stdev);
  json hp;
  hp["n_layers"] = model.hp.n_layers;
  hp["hidden"] = model.hp.hidden;
  hp["readout_hidden"] = model.hp.readout_hidden;
  hp["leaky_slope"] = model.hp.leaky_slope;
  hp["lr"] = model.hp.lr;
  hp["epochs"] = model.hp.epochs;
  hp["batch"] = model.hp.batch;
  hp["l2"] = model.hp.l2;
  hp["momentum"] = model.hp.momentum;
  hp["seed"] = model.hp.seed;
  doc["hp"] = std::move(hp);
  doc["epoch_loss"] = model.epoch_loss;
  return doc.dump(2) + "\n";
}

GcnModel gcn_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw schema_error(std::string("gcn model: invalid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "gcn-v1") {
      throw schema_error("gcn model: unknown format tag");
    }
    GcnModel model;
    for (const json& jw : doc.at("layer_w")) model.layer_w.push_back(matrix_from_json(jw));
    model.readout_w1 = matrix_from_json(doc.at("readout_w1"));
    model.readout_b1 = vec_from_std(doc.at("readout_b1").get<std::vector<double>>());
    model.readout_w2 = vec_from_std(doc.at("readout_w2").get<std::vector<double>>());
    model.readout_b2 = doc.at("readout_b2").get<double>();
    model.leaky_slope = doc.at("leaky_slope").get<double>();
    model.a_norm = matrix_from_json(doc.at("a_norm"));
    model.scaler.mean = vec_from_std(doc.at("scaler_mean").get<std::vector<double>>());
    model.scaler.stdev = vec_from_std(doc.at("scaler_stdev").get<std::vector<double>>());
    const json& hp = doc.at("hp");
    model.hp.n_layers = hp.at("n_layers").get<int>();
    model.hp.hidden = hp.at("hidden").get<int>();
    model.hp.readout_hidden = hp.at("readout_hidden").get<int>();
    model.hp.leaky_slope = hp.at("leaky_slope").get<double>();
    model.hp.lr = hp.at("lr").get<double>();
    model.hp.epochs = hp.at("epochs").get<int>();
    model.hp.batch = hp.at("batch").get<int>();
    model.hp.l2 = hp.at("l2").get<double>();
    model.hp.momentum = hp.at("momentum").get<double>();
    model.hp.seed = hp.at("seed").get<std::uint64_t>();
    model.epoch_loss = doc.at("epoch_loss").get<std::vector<double>>();
    return model;
  } catch (const json::exception& e) {
    throw schema_error(std::string("gcn model: malformed document: ") + e.what());
  }
}

}  // namespace uplift
