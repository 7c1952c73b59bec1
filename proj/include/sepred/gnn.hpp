// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "sepred/errors.hpp"
#include "sepred/molgraph.hpp"
#include "sepred/neural.hpp"

namespace sepred {

// Structural hyperparameters of the recurrent GNN.
struct GnnArch {
  int state_dim = 20;
  int iterations = 6;          // K
  double aggregation = 1.0;    // coefficient on the neighbor sum
  std::vector<int> state_hidden = {150, 150};
  std::vector<int> output_hidden = {100, 100};
};

// Learnable weights plus the structural hyperparameters they were built for.
struct GnnParams {
  MlpParams state_net;   // f_w: [x_n, l_n, aggregate] -> new state
  MlpParams output_net;  // g_w: [x_n^K, l_n] -> class scores
  int state_dim = 0;
  int iterations = 0;
  double aggregation = 1.0;

  int num_classes() const { return output_net.output_dim(); }
};

inline int state_net_input_dim(int state_dim) {
  // [x_n ; l_n ; a * sum of (x_m ; l_m ; e_{m,n})]
  return state_dim + kNumElementGroups +
         (state_dim + kNumElementGroups + kNumBondKinds);
}

inline int output_net_input_dim(int state_dim) {
  return state_dim + kNumElementGroups;
}

inline GnnParams init_gnn_params(const GnnArch& arch, int num_classes,
                                 std::uint64_t seed) {
  if (arch.state_dim < 1 || arch.iterations < 1)
    throw DataError("init_gnn_params: state_dim and iterations must be >= 1");
  std::mt19937_64 rng(seed);
  GnnParams p;
  p.state_dim = arch.state_dim;
  p.iterations = arch.iterations;
  p.aggregation = arch.aggregation;

  std::vector<int> state_dims = {state_net_input_dim(arch.state_dim)};
  state_dims.insert(state_dims.end(), arch.state_hidden.begin(),
                    arch.state_hidden.end());
  state_dims.push_back(arch.state_dim);
  p.state_net = make_mlp(state_dims, Activation::Selu, Activation::Selu,
                         InitScheme::LecunNormal, rng);

  std::vector<int> out_dims = {output_net_input_dim(arch.state_dim)};
  out_dims.insert(out_dims.end(), arch.output_hidden.begin(),
                  arch.output_hidden.end());
  out_dims.push_back(num_classes);
  p.output_net = make_mlp(out_dims, Activation::Selu, Activation::Sigmoid,
                          InitScheme::GlorotNormal, rng);
  return p;
}

/// Row n is a * sum over incoming edges (m -> n) of [x_m ; l_m ; e_{m,n}].
/// Isolated nodes get an all-zero row.
inline Eigen::MatrixXd neighbor_aggregate(const MolGraph& graph,
                                          const Eigen::MatrixXd& states,
                                          double a) {
  const int n = graph.num_nodes();
  if (states.rows() != n)
    throw DataError("neighbor_aggregate: state row count mismatch");
  const int s = static_cast<int>(states.cols());
  const int width = s + kNumElementGroups + kNumBondKinds;
  Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(n, width);
  for (const auto& e : graph.edges) {
    agg.row(e.dst).segment(0, s) += states.row(e.src);
    agg.row(e.dst).segment(s, kNumElementGroups) += graph.node_matrix.row(e.src);
    for (int b = 0; b < kNumBondKinds; ++b)
      agg(e.dst, s + kNumElementGroups + b) += static_cast<double>(e.bond[b]);
  }
  return a * agg;
}

struct GnnForwardCache {
  std::vector<Eigen::MatrixXd> states;      // x^0 .. x^K, each N x s
  std::vector<MlpCache> state_caches;       // one per iteration
  MlpCache output_cache;
};

/// K synchronous state updates from x^0 = 0, then the mean readout over all
/// nodes. The cache retains everything the backward pass needs.
inline Eigen::VectorXd gnn_forward(const GnnParams& params,
                                   const MolGraph& graph,
                                   GnnForwardCache* cache = nullptr) {
  const int n = graph.num_nodes();
  const int s = params.state_dim;
  if (n == 0) throw DataError("gnn_forward: empty graph");

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, s);
  if (cache) {
    cache->states.clear();
    cache->state_caches.clear();
    cache->states.push_back(x);
    cache->state_caches.resize(params.iterations);
  }
  for (int t = 1; t <= params.iterations; ++t) {
    Eigen::MatrixXd agg = neighbor_aggregate(graph, x, params.aggregation);
    Eigen::MatrixXd input(n, state_net_input_dim(s));
    input << x, graph.node_matrix, agg;
    x = mlp_forward(params.state_net, input,
                    cache ? &cache->state_caches[t - 1] : nullptr);
    if (!x.allFinite())
      throw NumericalError("non-finite node state at iteration " +
                           std::to_string(t));
    if (cache) cache->states.push_back(x);
  }

  Eigen::MatrixXd readout_in(n, output_net_input_dim(s));
  readout_in << x, graph.node_matrix;
  Eigen::MatrixXd node_out = mlp_forward(params.output_net, readout_in,
                                         cache ? &cache->output_cache : nullptr);
  return node_out.colwise().mean().transpose();
}

struct GnnGrads {
  MlpGrads state_net;
  MlpGrads output_net;

  static GnnGrads zeros_like(const GnnParams& p) {
    return {MlpGrads::zeros_like(p.state_net),
            MlpGrads::zeros_like(p.output_net)};
  }

  GnnGrads& operator+=(const GnnGrads& other) {
    state_net += other.state_net;
    output_net += other.output_net;
    return *this;
  }

  GnnGrads& operator*=(double sc) {
    state_net *= sc;
    output_net *= sc;
    return *this;
  }
};

/// Exact reverse-mode gradients through the unrolled iterations; accumulates
/// into `grads`. Gradient flows from x^t_n back into x^{t-1}_m along every
/// edge m -> n via the aggregation slot.
inline void gnn_backward(const GnnParams& params, const MolGraph& graph,
                         const GnnForwardCache& cache,
                         const Eigen::VectorXd& dy, GnnGrads& grads) {
  if (cache.state_caches.size() != static_cast<size_t>(params.iterations))
    throw DataError("gnn_backward: cache does not match parameters");
  const int n = graph.num_nodes();
  const int s = params.state_dim;

  // Mean readout distributes dy equally over node outputs.
  Eigen::MatrixXd up_out = (dy / static_cast<double>(n))
                               .transpose()
                               .replicate(n, 1);
  Eigen::MatrixXd d_readout =
      mlp_backward(params.output_net, cache.output_cache, up_out,
                   grads.output_net);
  Eigen::MatrixXd dx = d_readout.leftCols(s);

  for (int t = params.iterations; t >= 1; --t) {
    Eigen::MatrixXd d_input = mlp_backward(
        params.state_net, cache.state_caches[t - 1], dx, grads.state_net);
    Eigen::MatrixXd dx_prev = d_input.leftCols(s);
    const int agg_state_off = s + kNumElementGroups;
    for (const auto& e : graph.edges)
      dx_prev.row(e.src) +=
          params.aggregation * d_input.row(e.dst).segment(agg_state_off, s);
    dx = std::move(dx_prev);
  }
}

struct Prediction {
  Eigen::VectorXd scores;
  std::vector<std::uint8_t> labels;
};

inline Prediction predict(const GnnParams& params, const MolGraph& graph,
                          double threshold = 0.5) {
  Prediction p;
  p.scores = gnn_forward(params, graph);
  p.labels.resize(p.scores.size());
  for (Eigen::Index i = 0; i < p.scores.size(); ++i)
    p.labels[i] = p.scores[i] >= threshold ? 1 : 0;
  return p;
}

}  // namespace sepred
