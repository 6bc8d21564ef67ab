#include "nlps/nnet.hpp"

#include "nlps/random.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nlps::nnet {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void ArchitectureSpec::validate() const {
  if (hidden1 == 0 || hidden2 == 0 || hidden3 == 0)
    throw std::invalid_argument("hidden layer sizes must be at least 1");
  if (kind == Kind::recurrent && sinusoidal_units != 0)
    throw std::invalid_argument("recurrent networks have no sinusoidal layer");
  if (kind == Kind::recurrent && input_dim == 0)
    throw std::invalid_argument("recurrent networks need a non-empty step input");
  if (kind == Kind::feedforward && input_dim + sinusoidal_units == 0)
    throw std::invalid_argument("feedforward network has no inputs");
}

std::vector<Block> Layout::blocks() const {
  std::vector<Block> all{sin_freq, sin_phase, w1, b1, w2, b2, lstm_in, lstm_rec,
                         lstm_bias, w3, b3, out};
  std::erase_if(all, [](const Block& b) { return b.size() == 0; });
  return all;
}

Layout make_layout(const ArchitectureSpec& spec) {
  spec.validate();
  Layout l;
  std::size_t offset = 0;
  auto take = [&offset](std::size_t rows, std::size_t cols, bool bias) {
    Block b{offset, rows, cols, bias};
    offset += rows * cols;
    return b;
  };
  const auto L1 = spec.hidden1, L2 = spec.hidden2, L3 = spec.hidden3;
  if (spec.kind == Kind::feedforward) {
    const auto D = spec.sinusoidal_units;
    l.sin_freq = take(D, 1, false);
    l.sin_phase = take(D, 1, true);
    l.w1 = take(L1, D + spec.input_dim, false);
    l.b1 = take(L1, 1, true);
    l.w2 = take(L2, L1, false);
    l.b2 = take(L2, 1, true);
  } else {
    l.w1 = take(L1, spec.input_dim, false);
    l.b1 = take(L1, 1, true);
    l.lstm_in = take(4 * L2, L1, false);
    l.lstm_rec = take(4 * L2, L2, false);
    l.lstm_bias = take(4 * L2, 1, true);
  }
  l.w3 = take(L3, L2, false);
  l.b3 = take(L3, 1, true);
  l.out = take(L3, 1, false);
  l.total = offset;
  return l;
}

ParamSet::ParamSet(const ArchitectureSpec& spec)
    : spec_(spec), layout_(make_layout(spec)) {
  const auto n = static_cast<Eigen::Index>(layout_.total);
  values_ = VectorXd::Zero(n);
  adam_.first = VectorXd::Zero(n);
  adam_.second = VectorXd::Zero(n);
}

Eigen::Map<MatrixXd> ParamSet::view(const Block& b) {
  return {values_.data() + b.offset, static_cast<Eigen::Index>(b.rows),
          static_cast<Eigen::Index>(b.cols)};
}

Eigen::Map<const MatrixXd> ParamSet::view(const Block& b) const {
  return {values_.data() + b.offset, static_cast<Eigen::Index>(b.rows),
          static_cast<Eigen::Index>(b.cols)};
}

bool ParamSet::operator==(const ParamSet& other) const {
  return spec_ == other.spec_ && values_ == other.values_ &&
         adam_.first == other.adam_.first && adam_.second == other.adam_.second &&
         adam_.step == other.adam_.step;
}

ParamSet init_params(const ArchitectureSpec& spec, std::uint64_t seed) {
  ParamSet params(spec);
  Rng rng(seed);
  for (const Block& b : params.layout().blocks()) {
    if (b.is_bias) continue;
    auto w = params.view(b);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = truncated_normal(rng, 2.0);
  }
  return params;
}

RnnState RnnState::zeros(std::size_t units) {
  const auto n = static_cast<Eigen::Index>(units);
  return {VectorXd::Zero(n), VectorXd::Zero(n)};
}

bool RnnState::operator==(const RnnState& other) const {
  return hidden == other.hidden && cell == other.cell;
}

void FeedforwardSet::append(double t, const VectorXd& input, double target) {
  if (inputs.size() != 0 && input.size() != inputs.rows())
    throw std::invalid_argument("feedforward sample dimension mismatch");
  const auto n = static_cast<Eigen::Index>(times.size());
  times.push_back(t);
  inputs.conservativeResize(input.size(), n + 1);
  inputs.col(n) = input;
  targets.conservativeResize(n + 1);
  targets(n) = target;
}

void SequenceSet::append(const VectorXd& input, double target) {
  if (inputs.size() != 0 && input.size() != inputs.rows())
    throw std::invalid_argument("sequence step dimension mismatch");
  const auto n = inputs.cols();
  inputs.conservativeResize(input.size(), n + 1);
  inputs.col(n) = input;
  targets.conservativeResize(n + 1);
  targets(n) = target;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_kind(const ParamSet& p, Kind kind) {
  if (p.spec().kind != kind)
    throw std::invalid_argument(kind == Kind::recurrent ? "expected a recurrent network"
                                                        : "expected a feedforward network");
}

void require_dim(Eigen::Index got, std::size_t want, const char* what) {
  if (got != static_cast<Eigen::Index>(want))
    throw std::invalid_argument(std::string(what) + ": expected dimension " +
                                std::to_string(want) + ", got " + std::to_string(got));
}

// One LSTM step. Every recurrent evaluation in this file goes through here so
// that single steps and whole-sequence runs agree bit for bit.
void lstm_step(const ParamSet& p, const Eigen::Ref<const VectorXd>& x,
               const Eigen::Ref<const VectorXd>& h_prev, const Eigen::Ref<const VectorXd>& c_prev,
               Eigen::Ref<VectorXd> a1, Eigen::Ref<VectorXd> gates, Eigen::Ref<VectorXd> c,
               Eigen::Ref<VectorXd> c_tanh, Eigen::Ref<VectorXd> h, Eigen::Ref<VectorXd> u,
               double& prediction) {
  const auto& l = p.layout();
  const auto H = static_cast<Eigen::Index>(p.spec().hidden2);
  a1 = p.view(l.w1) * x + p.view(l.b1);
  gates = p.view(l.lstm_in) * a1 + p.view(l.lstm_rec) * h_prev + p.view(l.lstm_bias);
  for (Eigen::Index k = 0; k < 3 * H; ++k) gates(k) = sigmoid(gates(k));
  for (Eigen::Index k = 3 * H; k < 4 * H; ++k) gates(k) = std::tanh(gates(k));
  const auto in = gates.segment(0, H);
  const auto forget = gates.segment(H, H);
  const auto output = gates.segment(2 * H, H);
  const auto cand = gates.segment(3 * H, H);
  c = forget.cwiseProduct(c_prev) + in.cwiseProduct(cand);
  c_tanh = c.array().tanh().matrix();
  h = output.cwiseProduct(c_tanh);
  u = (p.view(l.w3) * h + p.view(l.b3)).array().tanh().matrix();
  prediction = p.view(l.out).col(0).dot(u);
}

struct RecurrentTrace {
  MatrixXd a1, gates, cells, cell_tanh, hidden, features;
  VectorXd predictions;
};

RecurrentTrace run_sequence(const ParamSet& p, const MatrixXd& inputs, const RnnState& initial) {
  require_kind(p, Kind::recurrent);
  const auto& s = p.spec();
  require_dim(inputs.rows(), s.input_dim, "recurrent step input");
  require_dim(initial.hidden.size(), s.hidden2, "recurrent state");
  const auto T = inputs.cols();
  const auto L1 = static_cast<Eigen::Index>(s.hidden1);
  const auto H = static_cast<Eigen::Index>(s.hidden2);
  const auto L3 = static_cast<Eigen::Index>(s.hidden3);
  RecurrentTrace tr{MatrixXd(L1, T), MatrixXd(4 * H, T), MatrixXd(H, T), MatrixXd(H, T),
                    MatrixXd(H, T), MatrixXd(L3, T), VectorXd(T)};
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto h_prev = t == 0 ? Eigen::Ref<const VectorXd>(initial.hidden)
                               : Eigen::Ref<const VectorXd>(tr.hidden.col(t - 1));
    const auto c_prev = t == 0 ? Eigen::Ref<const VectorXd>(initial.cell)
                               : Eigen::Ref<const VectorXd>(tr.cells.col(t - 1));
    lstm_step(p, inputs.col(t), h_prev, c_prev, tr.a1.col(t), tr.gates.col(t), tr.cells.col(t),
              tr.cell_tanh.col(t), tr.hidden.col(t), tr.features.col(t), tr.predictions(t));
  }
  return tr;
}

struct FeedforwardTrace {
  MatrixXd sin_arg;  // D x N, a_i t + b_i
  MatrixXd h0, a1, h2, z;
  VectorXd predictions;
};

FeedforwardTrace run_feedforward(const ParamSet& p, const std::vector<double>& times,
                                 const MatrixXd& inputs) {
  require_kind(p, Kind::feedforward);
  const auto& s = p.spec();
  const auto& l = p.layout();
  const auto N = static_cast<Eigen::Index>(times.size());
  if (inputs.cols() != N) throw std::invalid_argument("times and inputs differ in length");
  if (N > 0) require_dim(inputs.rows(), s.input_dim, "feedforward input");
  const auto D = static_cast<Eigen::Index>(s.sinusoidal_units);
  const Eigen::Map<const Eigen::RowVectorXd> t(times.data(), N);

  FeedforwardTrace tr;
  tr.sin_arg = p.view(l.sin_freq) * t + p.view(l.sin_phase).replicate(1, N);
  tr.h0.resize(D + inputs.rows(), N);
  tr.h0.topRows(D) = tr.sin_arg.array().sin().matrix();
  tr.h0.bottomRows(inputs.rows()) = inputs;
  tr.a1 = (p.view(l.w1) * tr.h0).colwise() + p.view(l.b1).col(0);
  tr.h2 = ((p.view(l.w2) * tr.a1).colwise() + p.view(l.b2).col(0)).array().tanh().matrix();
  tr.z = ((p.view(l.w3) * tr.h2).colwise() + p.view(l.b3).col(0)).array().tanh().matrix();
  tr.predictions = tr.z.transpose() * p.view(l.out).col(0);
  return tr;
}

void require_nonempty(std::size_t n) {
  if (n == 0) throw std::invalid_argument("loss over an empty dataset");
}

double l2_penalty(const ParamSet& p, double l2) { return l2 * p.values().squaredNorm(); }

}  // namespace

FeedforwardOutput ff_forward(const ParamSet& params, double t, const VectorXd& input) {
  require_kind(params, Kind::feedforward);
  require_dim(input.size(), params.spec().input_dim, "feedforward input");
  const auto& l = params.layout();
  const auto D = static_cast<Eigen::Index>(params.spec().sinusoidal_units);
  VectorXd h0(D + input.size());
  for (Eigen::Index i = 0; i < D; ++i)
    h0(i) = std::sin(params.view(l.sin_freq)(i, 0) * t + params.view(l.sin_phase)(i, 0));
  h0.tail(input.size()) = input;
  const VectorXd a1 = params.view(l.w1) * h0 + params.view(l.b1);
  const VectorXd h2 = (params.view(l.w2) * a1 + params.view(l.b2)).array().tanh().matrix();
  FeedforwardOutput out;
  out.features = (params.view(l.w3) * h2 + params.view(l.b3)).array().tanh().matrix();
  out.prediction = params.view(l.out).col(0).dot(out.features);
  return out;
}

RecurrentOutput rnn_step(const ParamSet& params, const RnnState& state, const VectorXd& input) {
  require_kind(params, Kind::recurrent);
  const auto& s = params.spec();
  require_dim(input.size(), s.input_dim, "recurrent step input");
  require_dim(state.hidden.size(), s.hidden2, "recurrent state");
  const auto H = static_cast<Eigen::Index>(s.hidden2);
  VectorXd a1(s.hidden1), gates(4 * H), c_tanh(H);
  RecurrentOutput out{RnnState{VectorXd(H), VectorXd(H)}, 0.0,
                      VectorXd(static_cast<Eigen::Index>(s.hidden3))};
  lstm_step(params, input, state.hidden, state.cell, a1, gates, out.state.cell, c_tanh,
            out.state.hidden, out.features, out.prediction);
  return out;
}

FeedforwardBatch ff_forward_batch(const ParamSet& params, const std::vector<double>& times,
                                  const MatrixXd& inputs) {
  auto tr = run_feedforward(params, times, inputs);
  return {std::move(tr.predictions), std::move(tr.z)};
}

SequenceRun rnn_run(const ParamSet& params, const MatrixXd& inputs, const RnnState& initial) {
  auto tr = run_sequence(params, inputs, initial);
  const auto T = inputs.cols();
  RnnState last = initial;
  if (T > 0) last = RnnState{tr.hidden.col(T - 1), tr.cells.col(T - 1)};
  return {std::move(tr.predictions), std::move(tr.features), std::move(last)};
}

double loss(const ParamSet& params, const FeedforwardSet& data, double l2) {
  require_nonempty(data.size());
  const auto tr = run_feedforward(params, data.times, data.inputs);
  return (tr.predictions - data.targets).squaredNorm() / static_cast<double>(data.size()) +
         l2_penalty(params, l2);
}

double loss(const ParamSet& params, const SequenceSet& data, double l2) {
  require_nonempty(data.size());
  const auto tr = run_sequence(params, data.inputs, RnnState::zeros(params.spec().hidden2));
  return (tr.predictions - data.targets).squaredNorm() / static_cast<double>(data.size()) +
         l2_penalty(params, l2);
}

LossAndGradient loss_and_gradient(const ParamSet& params, const FeedforwardSet& data,
                                  double l2) {
  require_nonempty(data.size());
  const auto& l = params.layout();
  const auto N = static_cast<Eigen::Index>(data.size());
  const auto D = static_cast<Eigen::Index>(params.spec().sinusoidal_units);
  const auto tr = run_feedforward(params, data.times, data.inputs);

  const VectorXd residual = tr.predictions - data.targets;
  LossAndGradient result;
  result.loss = residual.squaredNorm() / static_cast<double>(N) + l2_penalty(params, l2);

  ParamSet g(params.spec());
  const Eigen::RowVectorXd dpred = (2.0 / static_cast<double>(N)) * residual.transpose();
  g.view(l.out).col(0) = tr.z * dpred.transpose();

  // dL/d(pre-activation) of each layer, one column per sample.
  const MatrixXd dz3 = (params.view(l.out).col(0) * dpred).cwiseProduct(
      (1.0 - tr.z.array().square()).matrix());
  g.view(l.w3) = dz3 * tr.h2.transpose();
  g.view(l.b3).col(0) = dz3.rowwise().sum();

  const MatrixXd dz2 = (params.view(l.w3).transpose() * dz3)
                           .cwiseProduct((1.0 - tr.h2.array().square()).matrix());
  g.view(l.w2) = dz2 * tr.a1.transpose();
  g.view(l.b2).col(0) = dz2.rowwise().sum();

  const MatrixXd da1 = params.view(l.w2).transpose() * dz2;
  g.view(l.w1) = da1 * tr.h0.transpose();
  g.view(l.b1).col(0) = da1.rowwise().sum();

  if (D > 0) {
    const MatrixXd dh0_sin = params.view(l.w1).leftCols(D).transpose() * da1;
    const MatrixXd dsin_arg = dh0_sin.cwiseProduct(tr.sin_arg.array().cos().matrix());
    const Eigen::Map<const VectorXd> t(data.times.data(), N);
    g.view(l.sin_freq).col(0) = dsin_arg * t;
    g.view(l.sin_phase).col(0) = dsin_arg.rowwise().sum();
  }

  result.gradient = std::move(g.values());
  result.gradient += (2.0 * l2) * params.values();
  return result;
}

LossAndGradient loss_and_gradient(const ParamSet& params, const SequenceSet& data, double l2) {
  require_nonempty(data.size());
  const auto& s = params.spec();
  const auto& l = params.layout();
  const auto T = static_cast<Eigen::Index>(data.size());
  const auto H = static_cast<Eigen::Index>(s.hidden2);
  const RnnState fresh = RnnState::zeros(s.hidden2);
  const auto tr = run_sequence(params, data.inputs, fresh);

  const VectorXd residual = tr.predictions - data.targets;
  LossAndGradient result;
  result.loss = residual.squaredNorm() / static_cast<double>(T) + l2_penalty(params, l2);

  ParamSet g(s);
  const Eigen::RowVectorXd dpred = (2.0 / static_cast<double>(T)) * residual.transpose();
  g.view(l.out).col(0) = tr.features * dpred.transpose();
  const MatrixXd dz3 = (params.view(l.out).col(0) * dpred)
                           .cwiseProduct((1.0 - tr.features.array().square()).matrix());
  g.view(l.w3) = dz3 * tr.hidden.transpose();
  g.view(l.b3).col(0) = dz3.rowwise().sum();
  const MatrixXd dh_out = params.view(l.w3).transpose() * dz3;  // H x T, excludes recurrence

  // Full backpropagation through time.
  MatrixXd dgates(4 * H, T);
  VectorXd dh_next = VectorXd::Zero(H);
  VectorXd dc_next = VectorXd::Zero(H);
  const auto rec_t = params.view(l.lstm_rec).transpose();
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto gates = tr.gates.col(t);
    const auto in = gates.segment(0, H);
    const auto forget = gates.segment(H, H);
    const auto output = gates.segment(2 * H, H);
    const auto cand = gates.segment(3 * H, H);
    const auto c_prev = t == 0 ? Eigen::Ref<const VectorXd>(fresh.cell)
                               : Eigen::Ref<const VectorXd>(tr.cells.col(t - 1));
    const VectorXd dh = dh_out.col(t) + dh_next;
    const auto ct = tr.cell_tanh.col(t).array();
    const VectorXd dc = (dh.array() * output.array() * (1.0 - ct.square())).matrix() + dc_next;
    auto dg = dgates.col(t);
    dg.segment(0, H) = (dc.array() * cand.array() * in.array() * (1.0 - in.array())).matrix();
    dg.segment(H, H) =
        (dc.array() * c_prev.array() * forget.array() * (1.0 - forget.array())).matrix();
    dg.segment(2 * H, H) =
        (dh.array() * ct * output.array() * (1.0 - output.array())).matrix();
    dg.segment(3 * H, H) = (dc.array() * in.array() * (1.0 - cand.array().square())).matrix();
    dc_next = dc.cwiseProduct(forget);
    dh_next = rec_t * dg;
  }

  MatrixXd h_prev(H, T);
  h_prev.col(0) = fresh.hidden;
  if (T > 1) h_prev.rightCols(T - 1) = tr.hidden.leftCols(T - 1);
  g.view(l.lstm_in) = dgates * tr.a1.transpose();
  g.view(l.lstm_rec) = dgates * h_prev.transpose();
  g.view(l.lstm_bias).col(0) = dgates.rowwise().sum();

  const MatrixXd da1 = params.view(l.lstm_in).transpose() * dgates;
  g.view(l.w1) = da1 * data.inputs.transpose();
  g.view(l.b1).col(0) = da1.rowwise().sum();

  result.gradient = std::move(g.values());
  result.gradient += (2.0 * l2) * params.values();
  return result;
}

VectorXd gradient(const ParamSet& params, const FeedforwardSet& data, double l2) {
  return loss_and_gradient(params, data, l2).gradient;
}

VectorXd gradient(const ParamSet& params, const SequenceSet& data, double l2) {
  return loss_and_gradient(params, data, l2).gradient;
}

void adam_step(ParamSet& params, const VectorXd& grad, double learning_rate,
               const AdamConstants& c) {
  if (grad.size() != params.values().size())
    throw std::invalid_argument("gradient shape does not match parameters");
  auto& st = params.adam();
  ++st.step;
  st.first = c.beta1 * st.first + (1.0 - c.beta1) * grad;
  st.second = c.beta2 * st.second + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  const double step = static_cast<double>(st.step);
  const double bias1 = 1.0 - std::pow(c.beta1, step);
  const double bias2 = 1.0 - std::pow(c.beta2, step);
  params.values().array() -= learning_rate * (st.first.array() / bias1) /
                             ((st.second.array() / bias2).sqrt() + c.epsilon);
}

}  // namespace nlps::nnet
