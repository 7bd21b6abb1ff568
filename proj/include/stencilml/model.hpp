#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stencilml/kernels.hpp"
#include "stencilml/labeling.hpp"
#include "stencilml/node_gen.hpp"

namespace stencilml {

using kernels::Matrix;

/// Vanilla PointNet without transform blocks: shared per-point affine+BN+ReLU layers,
/// a feature-wise max over points, then a dense head with dropout and a softmax output.
struct ModelConfig {
  std::vector<int> point_widths{128, 128, 128, 256, 2048};
  std::vector<int> dense_widths{1024, 512};
  int num_classes = kNumQuartiles;
  double dropout = 0.3;
  /// Points per input after padding.
  int input_size = 15;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-3;

  void validate() const;
};

/// One affine map, optionally followed by batch normalization. Weight is in x out.
template <class Real>
struct Layer {
  std::string name;
  Matrix<Real> weight;
  std::vector<Real> bias;
  std::vector<Real> gamma;
  std::vector<Real> beta;
  std::vector<Real> running_mean;
  std::vector<Real> running_var;

  bool normalized() const { return !gamma.empty(); }
  int inputs() const { return weight.rows; }
  int outputs() const { return weight.cols; }
};

/// Named view of one parameter array.
template <class Real>
struct TensorRef {
  std::string name;
  std::vector<int> shape;
  std::span<Real> values;
};

template <class Real>
struct ModelParams {
  ModelConfig config;
  std::vector<Layer<Real>> point_layers;
  std::vector<Layer<Real>> dense_layers;
  Layer<Real> output;

  /// Every array in declaration order; running statistics are included unless
  /// `trainable_only` is set.
  std::vector<TensorRef<Real>> tensors(bool trainable_only = false);
  std::vector<TensorRef<const Real>> tensors(bool trainable_only = false) const;
};

/// Fan-in scaled uniform weights, zero biases, unit scale, zero shift, running stats (0, 1).
template <class Real>
ModelParams<Real> init_model(const ModelConfig& config, std::uint64_t seed);

/// Same shapes as `params`, every value zero.
template <class Real>
ModelParams<Real> zeros_like(const ModelParams<Real>& params);

template <class To, class From>
ModelParams<To> cast_params(const ModelParams<From>& params);

enum class Mode { Train, Infer };

/// What a pass does beyond the affine maps. Train and Infer are the two presets; the
/// finer controls exist for gradient checks.
struct PassOptions {
  bool batch_statistics = false;
  bool dropout = false;
  bool update_running_stats = false;

  static PassOptions for_mode(Mode mode);
};

/// Activations kept for the backward pass.
template <class Real>
struct ForwardCache {
  int batch = 0;
  int points = 0;
  PassOptions options;
  std::vector<Matrix<Real>> inputs;  // per layer, point layers then dense layers then output
  std::vector<Matrix<Real>> xhat;    // normalized pre-activations per normalized layer
  std::vector<std::vector<double>> inv_std;
  std::vector<Matrix<Real>> dropout_scale;  // per dense layer, 0 or 1/(1-rate)
  std::vector<int> argmax;                  // batch x features, point index of the max
  Matrix<Real> probabilities;               // batch x classes
};

/// `coords` is batch*points rows of (x, y), points contiguous per sample.
template <class Real>
void forward(ModelParams<Real>& params, const Matrix<Real>& coords, int batch, PassOptions options, Rng& rng,
             ForwardCache<Real>& cache);

/// Single padded stencil, returns the class probabilities.
template <class Real>
std::vector<double> forward(ModelParams<Real>& params, std::span<const Point2> coords, Mode mode, Rng& rng);

/// -log of the true-class probability, clamped at 1e-12.
double loss(std::span<const double> probabilities, Quartile label);

/// Gradients of the mean cross-entropy of the cached batch. Returns that loss.
template <class Real>
double backward(const ModelParams<Real>& params, const ForwardCache<Real>& cache, std::span<const int> labels,
                ModelParams<Real>& gradients);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

template <class Real>
struct AdamState {
  std::vector<std::vector<Real>> first_moment;
  std::vector<std::vector<Real>> second_moment;
};

/// Bias-corrected Adam update; `step_index` starts at 1.
template <class Real>
void adam_step(ModelParams<Real>& params, const ModelParams<Real>& gradients, AdamState<Real>& state,
               long step_index, const AdamConfig& config = {});

struct TrainConfig {
  int batch_size = 1024;
  int epochs = 20;
  double test_fraction = 0.2;
  AdamConfig optimizer;
  std::uint64_t seed = 1;
  /// After each epoch the running statistics are replaced by the average batch statistics
  /// of this many training batches under the current weights (no dropout). 0 keeps the
  /// momentum estimates alone.
  int bn_recalibration_batches = 4;

  void validate() const;
};

struct EpochStats {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded split stratified by (stencil size, class); indices ascending.
Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed);

template <class Real>
struct TrainResult {
  ModelParams<Real> params;
  TrainHistory history;
  Split split;
};

using EpochCallback = std::function<void(int epoch, const EpochStats&)>;

/// Fixed number of epochs, no early stopping. Records are padded to ds.max_size.
template <class Real>
TrainResult<Real> train(const Dataset& ds, ModelConfig model_config, const TrainConfig& train_config,
                        const EpochCallback& on_epoch = {});

struct Prediction {
  Quartile quartile = Quartile::Q1;
  std::array<double, kNumQuartiles> probabilities{};
};

/// Pads to the model input size and runs inference.
template <class Real>
Prediction predict(ModelParams<Real>& params, const Stencil& stencil);

/// Inference over many records in batches, row order preserved.
template <class Real>
std::vector<Prediction> predict_all(ModelParams<Real>& params, std::span<const LabeledStencil> records,
                                    int batch_size = 1024);

/// Packs padded stencils into batch*points rows.
template <class Real>
Matrix<Real> pack_inputs(std::span<const LabeledStencil> records, std::span<const std::size_t> indices,
                         int points);

}  // namespace stencilml
