#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uplift/dataset.hpp"
#include "uplift/structure.hpp"
#include "uplift/types.hpp"

namespace uplift {

// Graph-convolutional S-learner. Each sample becomes a d-node graph (one
// node per feature) with node inputs [value, causal weight] (or [value]
// alone in the unweighted baseline). Convolutions share one weight matrix
// per layer; the pooled embedding is concatenated with the treatment scalar
// and read out through a small dense head, so mu(x, t) stays togglable in t.

struct GcnHyperParams {
  int n_layers = 2;
  int hidden = 16;
  int readout_hidden = 16;
  double leaky_slope = 0.01;
  double lr = 0.01;
  int epochs = 300;
  int batch = 64;
  double l2 = 1e-4;         // weight decay on weight matrices, never biases
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

// Per-channel standardization over all training samples and nodes; test
// rows reuse the training statistics. A zero-variance channel divides by 1.
struct ChannelScaler {
  Vector mean;   // length m
  Vector stdev;  // length m, effective divisor (floored at 1 when ~0)

  Matrix apply(const Matrix& node_features) const;
};

// Raw d×m node-feature matrix for one sample; column 0 is the feature value,
// column 1 (when weights are given) its causal weight.
Matrix build_node_features(const RowVector& x_row, const RowVector* w_row);

struct GcnForwardCache {
  std::vector<Matrix> h;   // h[0] = standardized input, h[l+1] after layer l
  std::vector<Matrix> z;   // pre-activation per layer
  Vector pooled;           // column mean of h[L]
  Vector readout_in;       // [pooled ⊕ t]
  Vector hidden_pre;       // readout hidden pre-activation
  Vector hidden_act;
  double y_hat = 0.0;
};

struct GcnModel {
  std::vector<Matrix> layer_w;  // layer l maps m_l -> m_{l+1}
  Matrix readout_w1;            // readout_hidden × (hidden + 1)
  Vector readout_b1;
  Vector readout_w2;            // length readout_hidden
  double readout_b2 = 0.0;
  double leaky_slope = 0.01;
  Matrix a_norm;                // frozen at fit time
  ChannelScaler scaler;
  GcnHyperParams hp;
  std::vector<double> epoch_loss;

  Index n_nodes() const { return a_norm.rows(); }
  Index input_channels() const { return layer_w.empty() ? 0 : layer_w.front().rows(); }
};

// One forward pass; node_features are raw (the model standardizes).
GcnForwardCache gcn_forward(const GcnModel& model, const Matrix& node_features, double t);

// Gradients of the single-sample squared error (y_hat - y)² with respect to
// every parameter. Weight decay is not included here; the trainer adds it.
struct GcnGradients {
  std::vector<Matrix> layer_w;
  Matrix readout_w1;
  Vector readout_b1;
  Vector readout_w2;
  double readout_b2 = 0.0;
  double loss = 0.0;
};

GcnGradients loss_gradients(const GcnModel& model, const Matrix& node_features, double t,
                            double y);

// Minibatch SGD with momentum; per-epoch sample order is reshuffled from the
// seeded stream and gradients accumulate in batch order, so training is
// bit-reproducible. Throws numeric_error (with epoch/batch/grad-norm) if the
// loss leaves the finite range.
GcnModel fit_gcn(const Dataset& train, const Matrix* weights, const GcnAdjacency& a,
                 const GcnHyperParams& hp);

// Central-difference check (step 1e-5) of every parameter's gradient on one
// sample; returns the max relative error with denominator max(|a|,|b|,1e-8).
double gradient_check(const GcnModel& model, const Matrix& node_features, double t, double y);

struct UpliftScores {
  Vector tau_hat;             // mu1 - mu0 per sample
  Vector mu0;
  Vector mu1;
  Vector d_tilde_1;           // y - mu0 over treated rows, in treated order
  Vector d_tilde_0;           // mu1 - y over control rows, in control order
  std::vector<Index> treated_rows;
  std::vector<Index> control_rows;
};

// Two independent forward passes per sample (t = 1, then t = 0).
UpliftScores predict_uplift(const GcnModel& model, const Dataset& ds, const Matrix* weights);

// JSON round-trip (bit-exact doubles).
std::string gcn_to_json(const GcnModel& model);
GcnModel gcn_from_json(const std::string& text);

}  // namespace uplift
