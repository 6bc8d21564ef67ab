#pragma once

// Small neural-network core with hand-written gradients.
//
// Two architectures are supported, both ending in a single linear output unit
// without bias so that the prediction is an exact dot product with the
// penultimate activations:
//
//   feedforward: t -> D sinusoidal units sin(a_i t + b_i), concatenated with
//                the input vector -> L1 linear -> L2 tanh -> L3 tanh -> out
//   recurrent:   x_t -> L1 linear -> L2 LSTM (forget gates, no peepholes)
//                -> L3 tanh -> out
//
// All parameters live in one flat vector; Layout describes where each block
// sits so gradients, Adam state and finite-difference checks can treat the
// network as a single point in parameter space.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace nlps::nnet {

enum class Kind { feedforward, recurrent };

struct ArchitectureSpec {
  Kind kind = Kind::feedforward;
  std::size_t input_dim = 0;
  std::size_t hidden1 = 1;
  std::size_t hidden2 = 1;
  std::size_t hidden3 = 1;
  std::size_t sinusoidal_units = 0;

  // Throws std::invalid_argument on a zero-width hidden layer or a recurrent
  // spec with sinusoidal units.
  void validate() const;

  bool operator==(const ArchitectureSpec&) const = default;
};

struct Block {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool is_bias = false;

  std::size_t size() const { return rows * cols; }
};

struct Layout {
  // feedforward only
  Block sin_freq, sin_phase, w2, b2;
  // recurrent only; gate rows are ordered input, forget, output, candidate
  Block lstm_in, lstm_rec, lstm_bias;
  // shared
  Block w1, b1, w3, b3, out;
  std::size_t total = 0;

  std::vector<Block> blocks() const;
};

Layout make_layout(const ArchitectureSpec& spec);

struct AdamConstants {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Eigen::VectorXd first;
  Eigen::VectorXd second;
  std::int64_t step = 0;
};

class ParamSet {
 public:
  // All parameters and moments zero.
  explicit ParamSet(const ArchitectureSpec& spec);

  const ArchitectureSpec& spec() const { return spec_; }
  const Layout& layout() const { return layout_; }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  Eigen::Map<Eigen::MatrixXd> view(const Block& b);
  Eigen::Map<const Eigen::MatrixXd> view(const Block& b) const;

  AdamState& adam() { return adam_; }
  const AdamState& adam() const { return adam_; }

  bool operator==(const ParamSet& other) const;

 private:
  ArchitectureSpec spec_;
  Layout layout_;
  Eigen::VectorXd values_;
  AdamState adam_;
};

// Weights standard normal, redrawn while |w| > 2; biases and the sinusoidal
// phases b_i start at zero.
ParamSet init_params(const ArchitectureSpec& spec, std::uint64_t seed);

struct RnnState {
  Eigen::VectorXd hidden;
  Eigen::VectorXd cell;

  static RnnState zeros(std::size_t units);
  bool operator==(const RnnState& other) const;
};

struct FeedforwardOutput {
  double prediction = 0.0;
  Eigen::VectorXd features;
};

struct RecurrentOutput {
  RnnState state;
  double prediction = 0.0;
  Eigen::VectorXd features;
};

FeedforwardOutput ff_forward(const ParamSet& params, double t, const Eigen::VectorXd& input);

RecurrentOutput rnn_step(const ParamSet& params, const RnnState& state,
                         const Eigen::VectorXd& input);

// Feedforward training data: column j of `inputs` is paired with time
// `times[j]` and target `targets[j]`.
struct FeedforwardSet {
  std::vector<double> times;
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;

  std::size_t size() const { return times.size(); }
  void append(double t, const Eigen::VectorXd& input, double target);
};

// One sequence: column j of `inputs` is the step input, targets[j] the reward
// it should predict. Always processed from a fresh state.
struct SequenceSet {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
  void append(const Eigen::VectorXd& input, double target);
};

struct FeedforwardBatch {
  Eigen::VectorXd predictions;
  Eigen::MatrixXd features;  // hidden3 x N
};

FeedforwardBatch ff_forward_batch(const ParamSet& params, const std::vector<double>& times,
                                  const Eigen::MatrixXd& inputs);

struct SequenceRun {
  Eigen::VectorXd predictions;
  Eigen::MatrixXd features;  // hidden3 x T
  RnnState final_state;
};

// Threads rnn_step over every column, starting from `initial`.
SequenceRun rnn_run(const ParamSet& params, const Eigen::MatrixXd& inputs,
                    const RnnState& initial);

double loss(const ParamSet& params, const FeedforwardSet& data, double l2);
double loss(const ParamSet& params, const SequenceSet& data, double l2);

Eigen::VectorXd gradient(const ParamSet& params, const FeedforwardSet& data, double l2);
Eigen::VectorXd gradient(const ParamSet& params, const SequenceSet& data, double l2);

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

LossAndGradient loss_and_gradient(const ParamSet& params, const FeedforwardSet& data, double l2);
LossAndGradient loss_and_gradient(const ParamSet& params, const SequenceSet& data, double l2);

void adam_step(ParamSet& params, const Eigen::VectorXd& grad, double learning_rate,
               const AdamConstants& constants = {});

}  // namespace nlps::nnet
