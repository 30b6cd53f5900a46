#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "flab/errors.hpp"
#include "flab/synthgen.hpp"

// A small fully-connected binary classifier trained from scratch: ReLU hidden
// layers, a single logistic output, stable softplus-form cross-entropy with
// optional L1 weight penalty, and minibatch SGD with momentum. Everything is
// deterministic given a seed.

namespace flab {

struct Architecture {
  std::vector<int> widths = {2, 16, 16, 1};  // input, hidden..., output

  int layer_count() const { return static_cast<int>(widths.size()) - 1; }
  void validate() const;  // input width 2, output width 1, all widths >= 1
};

// Where a trained model came from; filled in by the experiment harness.
struct Provenance {
  std::string scenario_id;
  int fold = -1;
  int model_index = -1;
  std::uint64_t seed = 0;
};

struct ModelParams {
  Architecture arch;
  std::vector<std::vector<double>> weights;  // per layer, row-major (out x in)
  std::vector<std::vector<double>> biases;   // per layer
  Provenance provenance;
};

struct Hyperparams {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int batch_size = 64;
  int epochs = 200;
  double l1_lambda = 0.0;  // L1 penalty on weights (biases exempt)

  void validate() const;
};

// Same shapes as the weights/biases of the model they were taken from.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

// He-initialized weights (gaussian, std sqrt(2 / fan_in)), zero biases.
ModelParams init_params(const Architecture& arch, std::uint64_t seed);

// Probability of class 1; strictly inside (0, 1). Rejects non-finite inputs.
double forward(const ModelParams& params, const Vec2& features);

// Probabilities for every row of a dataset, in row order.
std::vector<double> forward_batch(const ModelParams& params, std::span<const DataRow> rows);

// Threshold rule shared by single models and ensembles: ties go to class 1.
inline Label decide(double probability) { return probability >= 0.5 ? Label{1} : Label{0}; }

// Hard decisions for every row.
std::vector<Label> predict_labels(const ModelParams& params, const Dataset& data);

// Mean binary cross-entropy against observed labels, computed in the
// overflow-safe softplus form, plus l1_lambda * sum(|w|) over weights.
double loss(const ModelParams& params, std::span<const DataRow> batch, double l1_lambda);

// Exact analytic gradient of loss() at the same point, using sign(0) = 0 for
// the L1 subgradient.
Gradients backward(const ModelParams& params, std::span<const DataRow> batch, double l1_lambda);

// Minibatch SGD with momentum (v = mu*v - lr*g; w += v) over shuffled epochs.
// Initialization and the per-epoch shuffle both derive from `seed`, so equal
// seeds give bit-identical models. Throws TrainingError (with the epoch) if
// the epoch loss goes non-finite.
ModelParams train(const Dataset& train_set, const Architecture& arch, const Hyperparams& hyper,
                  std::uint64_t seed);

// Version-tagged text serialization; exact round-trip (17 significant digits).
void save_params(const ModelParams& params, std::ostream& out);
ModelParams load_params(std::istream& in);
void save_params_file(const ModelParams& params, const std::string& path);
ModelParams load_params_file(const std::string& path);

// Self-check of backward() against central finite differences on random
// parameter/batch draws. Draws that put a ReLU preactivation (or, with L1, a
// weight) too close to its kink are rejected: the finite-difference quotient
// itself is invalid there, not the gradient. Runs until n_draws draws pass.
struct GradCheckReport {
  double max_rel_err = 0.0;
  int draws_accepted = 0;
  int draws_rejected = 0;
  long long coords_checked = 0;
  double seconds = 0.0;
};

GradCheckReport check_gradients(int n_draws = 100, std::uint64_t seed = 0x67AD);

}  // namespace flab
