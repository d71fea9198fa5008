#include "leaf/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "leaf/optim.hpp"

namespace leaf {

namespace {

Tensor glorot_uniform(std::vector<int64_t> shape, int64_t fan_in,
                      int64_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Tensor t(std::move(shape));
  for (double& x : t.storage()) x = dist(rng);
  return t;
}

HeadParams init_head(const std::string& prefix, const BranchConfig& cfg,
                     std::mt19937_64& rng) {
  const int64_t in = cfg.t_in * cfg.hidden;
  return HeadParams{
      Parameter(prefix + ".w1", glorot_uniform({in, cfg.hidden}, in, cfg.hidden, rng)),
      Parameter(prefix + ".b1", Tensor({cfg.hidden})),
      Parameter(prefix + ".w2",
                glorot_uniform({cfg.hidden, cfg.t_out}, cfg.hidden, cfg.t_out, rng)),
      Parameter(prefix + ".b2", Tensor({cfg.t_out})),
  };
}

}  // namespace

std::vector<std::string> BranchConfig::validate() const {
  std::vector<std::string> errs;
  auto positive = [&](int64_t v, const char* name) {
    if (v < 1) errs.push_back(std::string(name) + " must be >= 1");
  };
  positive(hidden, "hidden");
  positive(layers, "layers");
  positive(hyperedges, "hyperedges");
  positive(t_in, "t_in");
  positive(t_out, "t_out");
  positive(features, "features");
  return errs;
}

std::vector<Parameter*> GraphBranchParams::parameters() {
  std::vector<Parameter*> out{&embed};
  for (auto& w : layer_weights) out.push_back(&w);
  out.insert(out.end(), {&head.w1, &head.b1, &head.w2, &head.b2});
  return out;
}

std::vector<Parameter*> HypergraphBranchParams::parameters() {
  std::vector<Parameter*> out{&embed};
  for (auto& w : incidence_weights) out.push_back(&w);
  for (auto& w : edge_weights) out.push_back(&w);
  out.insert(out.end(), {&head.w1, &head.b1, &head.w2, &head.b2});
  return out;
}

PredictorParams PredictorParams::init(const BranchConfig& cfg, uint64_t seed) {
  auto errs = cfg.validate();
  if (!errs.empty()) {
    std::string msg = "invalid branch config:";
    for (const auto& e : errs) msg += " " + e + ";";
    throw std::invalid_argument(msg);
  }
  std::mt19937_64 rng(seed);
  const int64_t d = cfg.hidden, f = cfg.features, m = cfg.hyperedges;

  GraphBranchParams graph{
      Parameter("graph.embed", glorot_uniform({d, f}, f, d, rng)),
      {},
      HeadParams{Parameter("", Tensor({1})), Parameter("", Tensor({1})),
                 Parameter("", Tensor({1})), Parameter("", Tensor({1}))},
  };
  for (int64_t l = 0; l < cfg.layers; ++l)
    graph.layer_weights.emplace_back("graph.layer." + std::to_string(l),
                                     glorot_uniform({d, d}, d, d, rng));
  graph.head = init_head("graph.head", cfg, rng);

  HypergraphBranchParams hyper{
      Parameter("hyper.embed", glorot_uniform({d, f}, f, d, rng)),
      {},
      {},
      HeadParams{Parameter("", Tensor({1})), Parameter("", Tensor({1})),
                 Parameter("", Tensor({1})), Parameter("", Tensor({1}))},
  };
  for (int64_t l = 0; l < cfg.layers; ++l)
    hyper.incidence_weights.emplace_back("hyper.w_h." + std::to_string(l),
                                         glorot_uniform({d, m}, d, m, rng));
  for (int64_t l = 0; l < cfg.layers; ++l)
    hyper.edge_weights.emplace_back("hyper.w_e." + std::to_string(l),
                                    glorot_uniform({m, m}, m, m, rng));
  hyper.head = init_head("hyper.head", cfg, rng);

  return PredictorParams{std::move(graph), std::move(hyper)};
}

std::vector<Parameter*> PredictorParams::parameters() {
  auto out = graph.parameters();
  auto h = hyper.parameters();
  out.insert(out.end(), h.begin(), h.end());
  return out;
}

std::vector<Tensor> PredictorParams::snapshot_values() const {
  auto& self = const_cast<PredictorParams&>(*this);
  std::vector<Tensor> out;
  for (Parameter* p : self.parameters()) out.push_back(p->value);
  return out;
}

void PredictorParams::restore_values(const std::vector<Tensor>& snapshot) {
  auto ps = parameters();
  if (snapshot.size() != ps.size())
    throw std::invalid_argument("restore_values: snapshot size mismatch");
  for (size_t i = 0; i < ps.size(); ++i) ps[i]->value = snapshot[i];
}

Tape::Id embed_inputs(Tape& tape, Tape::Id x_flat, Parameter& embed) {
  return tape.matmul(x_flat, tape.transpose(tape.param(embed)));
}

Tape::Id graph_branch_forward(Tape& tape, Tape::Id hidden, const STGraph& st,
                              GraphBranchParams& params,
                              const BranchConfig& cfg) {
  if (tape.value(hidden).rows() != st.n_nodes())
    throw std::invalid_argument("graph_branch_forward: hidden rows != TN");
  const Tape::Id a_hat = tape.constant(st.normalized);
  Tape::Id h = hidden;
  for (auto& w : params.layer_weights) {
    Tape::Id conv =
        tape.relu(tape.matmul(tape.matmul(a_hat, h), tape.param(w)));
    h = cfg.residual ? tape.add(h, conv) : conv;
  }
  Tape::Id g = tape.gather_time_major(h, cfg.t_in, st.n_vertices);
  Tape::Id z = tape.relu(tape.add_row_bias(tape.matmul(g, tape.param(params.head.w1)),
                                           tape.param(params.head.b1)));
  return tape.add_row_bias(tape.matmul(z, tape.param(params.head.w2)),
                           tape.param(params.head.b2));
}

std::pair<Tape::Id, Tape::Id> hypergraph_layer(Tape& tape, Tape::Id hidden,
                                               Parameter& w_incidence,
                                               Parameter& w_edges,
                                               const BranchConfig& cfg) {
  (void)cfg;
  Tape::Id incidence =
      tape.row_softmax(tape.matmul(hidden, tape.param(w_incidence)));
  Tape::Id pooled = tape.matmul(tape.transpose(incidence), hidden);  // m x d
  Tape::Id interactions =
      tape.relu(tape.matmul(tape.param(w_edges), pooled));
  Tape::Id next = tape.matmul(incidence, tape.add(pooled, interactions));
  return {next, incidence};
}

Tape::Id hypergraph_branch_forward(Tape& tape, Tape::Id hidden,
                                   HypergraphBranchParams& params,
                                   const BranchConfig& cfg) {
  const int64_t tn = tape.value(hidden).rows();
  if (tn % cfg.t_in != 0)
    throw std::invalid_argument("hypergraph_branch_forward: rows not divisible by T");
  const int64_t n = tn / cfg.t_in;
  Tape::Id h = hidden;
  for (int64_t l = 0; l < cfg.layers; ++l) {
    auto [next, incidence] = hypergraph_layer(
        tape, h, params.incidence_weights[static_cast<size_t>(l)],
        params.edge_weights[static_cast<size_t>(l)], cfg);
    (void)incidence;
    h = cfg.residual ? tape.add(h, next) : next;
  }
  Tape::Id g = tape.gather_time_major(h, cfg.t_in, n);
  Tape::Id z = tape.relu(tape.add_row_bias(tape.matmul(g, tape.param(params.head.w1)),
                                           tape.param(params.head.b1)));
  return tape.add_row_bias(tape.matmul(z, tape.param(params.head.w2)),
                           tape.param(params.head.b2));
}

Tape::Id forecast_taped(Tape& tape, BranchKind kind, const Tensor& window_norm,
                        const STGraph& st, PredictorParams& params,
                        const BranchConfig& cfg) {
  if (window_norm.rank() != 3 || window_norm.dim(0) != cfg.t_in ||
      window_norm.dim(1) != st.n_vertices || window_norm.dim(2) != cfg.features)
    throw std::invalid_argument("forecast: window shape does not match config");
  Tensor flat({cfg.t_in * st.n_vertices, cfg.features}, window_norm.storage());
  Tape::Id x = tape.constant(std::move(flat));
  if (kind == BranchKind::Graph) {
    Tape::Id hidden = embed_inputs(tape, x, params.graph.embed);
    return graph_branch_forward(tape, hidden, st, params.graph, cfg);
  }
  Tape::Id hidden = embed_inputs(tape, x, params.hyper.embed);
  return hypergraph_branch_forward(tape, hidden, params.hyper, cfg);
}

Tensor forecast(BranchKind kind, const Tensor& window_norm, const STGraph& st,
                PredictorParams& params, const BranchConfig& cfg) {
  Tape tape;
  Tape::Id y = forecast_taped(tape, kind, window_norm, st, params, cfg);
  return tape.value(y);
}

namespace {

std::vector<Parameter*> branch_parameters(BranchKind kind, PredictorParams& p) {
  return kind == BranchKind::Graph ? p.graph.parameters() : p.hyper.parameters();
}

double validation_mae(BranchKind kind, PredictorParams& params,
                      const STGraph& st, std::span<const Window> val,
                      const NormStats& stats, const BranchConfig& cfg,
                      int stride) {
  double abs_sum = 0.0;
  int64_t count = 0;
  for (size_t w = 0; w < val.size(); w += static_cast<size_t>(stride)) {
    const Window& window = val[w];
    Tensor pred = forecast(kind, normalize(window.input, stats), st, params, cfg);
    // pred is N x T_out in normalized space; target is T_out x N original
    for (int64_t i = 0; i < pred.rows(); ++i)
      for (int64_t s = 0; s < pred.cols(); ++s) {
        const double p = denormalize_flow(pred.at(i, s), stats);
        abs_sum += std::abs(p - window.target[s * pred.rows() + i]);
        ++count;
      }
  }
  return count > 0 ? abs_sum / static_cast<double>(count) : 0.0;
}

}  // namespace

PretrainResult pretrain_branch(BranchKind kind, PredictorParams& params,
                               const STGraph& st, std::span<const Window> train,
                               std::span<const Window> val,
                               const NormStats& stats, const BranchConfig& cfg,
                               const PretrainConfig& pcfg, uint64_t seed) {
  if (train.empty() || val.empty())
    throw std::invalid_argument("pretrain_branch: empty train or val windows");

  auto branch_params = branch_parameters(kind, params);
  Adam optimizer(branch_params, Adam::Config{pcfg.lr, 0.9, 0.999, 1e-8});
  std::mt19937_64 rng(seed);

  PretrainResult result;
  double best = validation_mae(kind, params, st, val, stats, cfg, pcfg.val_stride);
  result.log.push_back({0, 0.0, best});
  result.best_epoch = 0;
  std::vector<Tensor> best_values;
  for (Parameter* p : branch_params) best_values.push_back(p->value);

  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t{0});

  int since_best = 0;
  for (int epoch = 1; epoch <= pcfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    try {
      for (size_t b = 0; b < order.size(); b += static_cast<size_t>(pcfg.batch_size)) {
        const size_t batch_end = std::min(order.size(), b + static_cast<size_t>(pcfg.batch_size));
        const double inv_batch = 1.0 / static_cast<double>(batch_end - b);
        for (size_t w = b; w < batch_end; ++w) {
          const Window& window = train[order[w]];
          Tape tape;
          Tape::Id pred = forecast_taped(tape, kind, normalize(window.input, stats),
                                         st, params, cfg);
          // target as N x T_out in normalized space, matching the head output
          Tensor target({st.n_vertices, cfg.t_out});
          for (int64_t i = 0; i < st.n_vertices; ++i)
            for (int64_t s = 0; s < cfg.t_out; ++s)
              target.at(i, s) =
                  normalize_flow(window.target[s * st.n_vertices + i], stats);
          Tape::Id loss = tape.huber(pred, tape.constant(std::move(target)),
                                     pcfg.huber_delta);
          epoch_loss += tape.value(loss)[0];
          tape.backward(tape.scale(loss, inv_batch));
        }
        optimizer.step();
      }
    } catch (const NonFiniteError& e) {
      throw std::runtime_error(
          "pretraining diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    epoch_loss /= static_cast<double>(train.size());
    const double val_mae =
        validation_mae(kind, params, st, val, stats, cfg, pcfg.val_stride);
    result.log.push_back({epoch, epoch_loss, val_mae});
    if (val_mae < best) {
      best = val_mae;
      result.best_epoch = epoch;
      for (size_t i = 0; i < branch_params.size(); ++i)
        best_values[i] = branch_params[i]->value;
      since_best = 0;
    } else if (++since_best >= pcfg.patience) {
      break;
    }
  }

  for (size_t i = 0; i < branch_params.size(); ++i)
    branch_params[i]->value = best_values[i];
  result.best_val_mae = best;
  return result;
}

}  // namespace leaf
