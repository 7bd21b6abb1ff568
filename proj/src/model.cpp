#include "stencilml/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "stencilml/error.hpp"

namespace stencilml {

using kernels::Accumulate;
using kernels::column_dot;
using kernels::column_sums;
using kernels::gemm;
using kernels::transpose;

void ModelConfig::validate() const {
  if (point_widths.empty()) throw ContractError("model needs at least one point layer");
  for (int w : point_widths) {
    if (w <= 0) throw ContractError("layer widths must be positive");
  }
  for (int w : dense_widths) {
    if (w <= 0) throw ContractError("layer widths must be positive");
  }
  if (num_classes < 2) throw ContractError("need at least two classes");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractError("dropout rate must be in [0, 1)");
  if (input_size < 1) throw ContractError("input size must be positive");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw ContractError("normalization momentum must be in [0, 1)");
  if (!(bn_epsilon > 0.0)) throw ContractError("normalization epsilon must be positive");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ContractError("batch size must be positive");
  if (epochs < 1) throw ContractError("epoch count must be positive");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ContractError("test fraction must be in (0, 1)");
  if (!(optimizer.learning_rate > 0.0)) throw ContractError("learning rate must be positive");
  if (bn_recalibration_batches < 0) throw ContractError("recalibration batch count must be non-negative");
}

PassOptions PassOptions::for_mode(Mode mode) {
  if (mode == Mode::Train) return {true, true, true};
  return {false, false, false};
}

// ---------------------------------------------------------------------------
// Parameter bookkeeping

namespace {

template <class Real, class Params>
auto collect_tensors(Params& params, bool trainable_only) {
  using Value = std::conditional_t<std::is_const_v<Params>, const Real, Real>;
  std::vector<TensorRef<Value>> out;
  auto add_layer = [&](auto& layer) {
    out.push_back({layer.name + ".weight", {layer.weight.rows, layer.weight.cols}, std::span<Value>(layer.weight.values)});
    out.push_back({layer.name + ".bias", {layer.outputs()}, std::span<Value>(layer.bias)});
    if (!layer.normalized()) return;
    out.push_back({layer.name + ".bn_gamma", {layer.outputs()}, std::span<Value>(layer.gamma)});
    out.push_back({layer.name + ".bn_beta", {layer.outputs()}, std::span<Value>(layer.beta)});
    if (trainable_only) return;
    out.push_back({layer.name + ".bn_running_mean", {layer.outputs()}, std::span<Value>(layer.running_mean)});
    out.push_back({layer.name + ".bn_running_var", {layer.outputs()}, std::span<Value>(layer.running_var)});
  };
  for (auto& l : params.point_layers) add_layer(l);
  for (auto& l : params.dense_layers) add_layer(l);
  add_layer(params.output);
  return out;
}

template <class Real>
Layer<Real> make_layer(std::string name, int in, int out, bool normalized) {
  Layer<Real> layer;
  layer.name = std::move(name);
  layer.weight = Matrix<Real>(in, out);
  layer.bias.assign(out, Real(0));
  if (normalized) {
    layer.gamma.assign(out, Real(1));
    layer.beta.assign(out, Real(0));
    layer.running_mean.assign(out, Real(0));
    layer.running_var.assign(out, Real(1));
  }
  return layer;
}

template <class Real>
ModelParams<Real> shaped_params(const ModelConfig& config) {
  config.validate();
  ModelParams<Real> p;
  p.config = config;
  int in = 2;
  for (std::size_t i = 0; i < config.point_widths.size(); ++i) {
    p.point_layers.push_back(make_layer<Real>("point_" + std::to_string(i), in, config.point_widths[i], true));
    in = config.point_widths[i];
  }
  for (std::size_t i = 0; i < config.dense_widths.size(); ++i) {
    p.dense_layers.push_back(make_layer<Real>("dense_" + std::to_string(i), in, config.dense_widths[i], true));
    in = config.dense_widths[i];
  }
  p.output = make_layer<Real>("output", in, config.num_classes, false);
  return p;
}

}  // namespace

template <class Real>
std::vector<TensorRef<Real>> ModelParams<Real>::tensors(bool trainable_only) {
  return collect_tensors<Real>(*this, trainable_only);
}

template <class Real>
std::vector<TensorRef<const Real>> ModelParams<Real>::tensors(bool trainable_only) const {
  return collect_tensors<Real>(*this, trainable_only);
}

template <class Real>
ModelParams<Real> init_model(const ModelConfig& config, std::uint64_t seed) {
  ModelParams<Real> p = shaped_params<Real>(config);
  Rng rng(seed);
  auto init_layer = [&](Layer<Real>& layer) {
    const double limit = std::sqrt(6.0 / layer.inputs());
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Real& w : layer.weight.values) w = static_cast<Real>(dist(rng));
  };
  for (auto& l : p.point_layers) init_layer(l);
  for (auto& l : p.dense_layers) init_layer(l);
  init_layer(p.output);
  return p;
}

template <class Real>
ModelParams<Real> zeros_like(const ModelParams<Real>& params) {
  ModelParams<Real> z = params;
  for (auto& t : z.tensors()) std::fill(t.values.begin(), t.values.end(), Real(0));
  return z;
}

template <class To, class From>
ModelParams<To> cast_params(const ModelParams<From>& params) {
  ModelParams<To> out = shaped_params<To>(params.config);
  auto src = params.tensors();
  auto dst = out.tensors();
  for (std::size_t t = 0; t < src.size(); ++t) {
    std::transform(src[t].values.begin(), src[t].values.end(), dst[t].values.begin(),
                   [](From v) { return static_cast<To>(v); });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

template <class Real>
inline Real bn_affine(Real gamma, Real xhat, Real beta) {
  return std::fma(gamma, xhat, beta);
}

template <class Real>
void add_bias(Matrix<Real>& z, const std::vector<Real>& bias) {
#pragma omp parallel for num_threads(kernels::threads()) schedule(static)
  for (int i = 0; i < z.rows; ++i) {
    Real* r = z.row(i);
    for (int j = 0; j < z.cols; ++j) r[j] += bias[j];
  }
}

// z (pre-activation, bias added) becomes xhat in place; writes relu(gamma xhat + beta) to y.
template <class Real>
void normalize_activate(Layer<Real>& layer, Matrix<Real>& z, const PassOptions& opt, double momentum,
                        double epsilon, std::vector<double>& inv_std, Matrix<Real>& y) {
  const int n = z.rows;
  const int f = z.cols;
  std::vector<Real> mean(f);
  std::vector<Real> scale(f);
  inv_std.resize(f);
  if (opt.batch_statistics) {
    std::vector<double> sums;
    std::vector<double> squares;
    column_sums(z, sums);
    column_dot(z, z, squares);
    for (int j = 0; j < f; ++j) {
      const double mu = sums[j] / n;
      const double var = std::max(0.0, squares[j] / n - mu * mu);
      inv_std[j] = 1.0 / std::sqrt(var + epsilon);
      mean[j] = static_cast<Real>(mu);
      if (opt.update_running_stats) {
        layer.running_mean[j] = static_cast<Real>(momentum * layer.running_mean[j] + (1.0 - momentum) * mu);
        layer.running_var[j] = static_cast<Real>(momentum * layer.running_var[j] + (1.0 - momentum) * var);
      }
    }
  } else {
    for (int j = 0; j < f; ++j) {
      mean[j] = layer.running_mean[j];
      inv_std[j] = 1.0 / std::sqrt(static_cast<double>(layer.running_var[j]) + epsilon);
    }
  }
  for (int j = 0; j < f; ++j) scale[j] = static_cast<Real>(inv_std[j]);

  y.resize(n, f);
  const Real* gamma = layer.gamma.data();
  const Real* beta = layer.beta.data();
#pragma omp parallel for num_threads(kernels::threads()) schedule(static)
  for (int i = 0; i < n; ++i) {
    Real* zr = z.row(i);
    Real* yr = y.row(i);
    for (int j = 0; j < f; ++j) {
      const Real xh = (zr[j] - mean[j]) * scale[j];
      zr[j] = xh;
      const Real v = bn_affine(gamma[j], xh, beta[j]);
      yr[j] = v > Real(0) ? v : Real(0);
    }
  }
}

template <class Real>
void affine(const Layer<Real>& layer, const Matrix<Real>& input, Matrix<Real>& z) {
  z.resize(input.rows, layer.outputs());
  gemm(input, layer.weight, z);
  add_bias(z, layer.bias);
}

}  // namespace

template <class Real>
void forward(ModelParams<Real>& params, const Matrix<Real>& coords, int batch, PassOptions options, Rng& rng,
             ForwardCache<Real>& cache) {
  const ModelConfig& cfg = params.config;
  if (batch < 1 || coords.cols != 2 || coords.rows % batch != 0 || coords.rows == 0) {
    throw ContractError("forward expects batch*points rows of 2 coordinates");
  }
  const int points = coords.rows / batch;
  const std::size_t n_point = params.point_layers.size();
  const std::size_t n_dense = params.dense_layers.size();

  cache.batch = batch;
  cache.points = points;
  cache.options = options;
  cache.inputs.resize(n_point + n_dense + 1);
  cache.xhat.resize(n_point + n_dense);
  cache.inv_std.resize(n_point + n_dense);
  cache.dropout_scale.resize(n_dense);
  cache.inputs[0] = coords;

  Matrix<Real> activated;
  for (std::size_t l = 0; l < n_point; ++l) {
    affine(params.point_layers[l], cache.inputs[l], cache.xhat[l]);
    Matrix<Real>& out = l + 1 < n_point ? cache.inputs[l + 1] : activated;
    normalize_activate(params.point_layers[l], cache.xhat[l], options, cfg.bn_momentum, cfg.bn_epsilon,
                       cache.inv_std[l], out);
  }

  // Feature-wise max over the points of each sample; ties keep the lowest point index.
  const int features = activated.cols;
  Matrix<Real>& pooled = cache.inputs[n_point];
  pooled.resize(batch, features);
  cache.argmax.assign(static_cast<std::size_t>(batch) * features, 0);
#pragma omp parallel for num_threads(kernels::threads()) schedule(static)
  for (int b = 0; b < batch; ++b) {
    Real* best = pooled.row(b);
    int* arg = cache.argmax.data() + static_cast<std::size_t>(b) * features;
    std::copy_n(activated.row(b * points), features, best);
    for (int p = 1; p < points; ++p) {
      const Real* r = activated.row(b * points + p);
      for (int j = 0; j < features; ++j) {
        if (r[j] > best[j]) {
          best[j] = r[j];
          arg[j] = p;
        }
      }
    }
  }

  for (std::size_t d = 0; d < n_dense; ++d) {
    const std::size_t slot = n_point + d;
    affine(params.dense_layers[d], cache.inputs[slot], cache.xhat[slot]);
    Matrix<Real>& out = cache.inputs[slot + 1];
    normalize_activate(params.dense_layers[d], cache.xhat[slot], options, cfg.bn_momentum, cfg.bn_epsilon,
                       cache.inv_std[slot], out);
    Matrix<Real>& mask = cache.dropout_scale[d];
    if (options.dropout && cfg.dropout > 0.0) {
      mask.resize(out.rows, out.cols);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const Real keep = static_cast<Real>(1.0 / (1.0 - cfg.dropout));
      for (Real& m : mask.values) m = unit(rng) < cfg.dropout ? Real(0) : keep;
      for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= mask.values[i];
    } else {
      mask.resize(0, 0);
    }
  }

  Matrix<Real> logits;
  affine(params.output, cache.inputs[n_point + n_dense], logits);
  cache.probabilities.resize(batch, logits.cols);
  for (int b = 0; b < batch; ++b) {
    const Real* z = logits.row(b);
    const double top = *std::max_element(z, z + logits.cols);
    double total = 0.0;
    std::vector<double> e(logits.cols);
    for (int c = 0; c < logits.cols; ++c) total += e[c] = std::exp(static_cast<double>(z[c]) - top);
    for (int c = 0; c < logits.cols; ++c) cache.probabilities(b, c) = static_cast<Real>(e[c] / total);
  }
}

template <class Real>
std::vector<double> forward(ModelParams<Real>& params, std::span<const Point2> coords, Mode mode, Rng& rng) {
  Matrix<Real> input(static_cast<int>(coords.size()), 2);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    input(static_cast<int>(i), 0) = static_cast<Real>(coords[i].x);
    input(static_cast<int>(i), 1) = static_cast<Real>(coords[i].y);
  }
  ForwardCache<Real> cache;
  forward(params, input, 1, PassOptions::for_mode(mode), rng, cache);
  return {cache.probabilities.values.begin(), cache.probabilities.values.end()};
}

double loss(std::span<const double> probabilities, Quartile label) {
  const auto k = static_cast<std::size_t>(index_of(label));
  if (k >= probabilities.size()) throw ContractError("label outside the probability vector");
  return -std::log(std::max(probabilities[k], 1e-12));
}

// ---------------------------------------------------------------------------
// Backward

namespace {

// Gradient through relu(gamma xhat + beta) and batch normalization. `grad` holds the
// gradient w.r.t. the activated output and is overwritten with the gradient w.r.t.
// the pre-normalization input z.
template <class Real>
void normalize_backward(const Layer<Real>& layer, const Matrix<Real>& xhat, const std::vector<double>& inv_std,
                        bool batch_statistics, Matrix<Real>& grad, Layer<Real>& g) {
  const int n = grad.rows;
  const int f = grad.cols;
  const Real* gamma = layer.gamma.data();
  const Real* beta = layer.beta.data();
#pragma omp parallel for num_threads(kernels::threads()) schedule(static)
  for (int i = 0; i < n; ++i) {
    Real* gr = grad.row(i);
    const Real* xr = xhat.row(i);
    for (int j = 0; j < f; ++j) {
      if (!(bn_affine(gamma[j], xr[j], beta[j]) > Real(0))) gr[j] = Real(0);
    }
  }
  std::vector<double> dgamma;
  std::vector<double> dbeta;
  column_dot(grad, xhat, dgamma);
  column_sums(grad, dbeta);
  for (int j = 0; j < f; ++j) {
    g.gamma[j] = static_cast<Real>(dgamma[j]);
    g.beta[j] = static_cast<Real>(dbeta[j]);
  }

  std::vector<Real> coef(f);
  std::vector<Real> shift(f);
  std::vector<Real> slope(f);
  for (int j = 0; j < f; ++j) {
    const double c = static_cast<double>(gamma[j]) * inv_std[j];
    coef[j] = static_cast<Real>(c);
    shift[j] = static_cast<Real>(batch_statistics ? c * dbeta[j] / n : 0.0);
    slope[j] = static_cast<Real>(batch_statistics ? c * dgamma[j] / n : 0.0);
  }
#pragma omp parallel for num_threads(kernels::threads()) schedule(static)
  for (int i = 0; i < n; ++i) {
    Real* gr = grad.row(i);
    const Real* xr = xhat.row(i);
    for (int j = 0; j < f; ++j) gr[j] = coef[j] * gr[j] - shift[j] - slope[j] * xr[j];
  }
}

// dW = input^T dz, db = colsum(dz), optionally dinput = dz W^T.
template <class Real>
void affine_backward(const Layer<Real>& layer, const Matrix<Real>& input, const Matrix<Real>& dz, Layer<Real>& g,
                     Matrix<Real>* dinput) {
  Matrix<Real> input_t;
  transpose(input, input_t);
  gemm(input_t, dz, g.weight);
  std::vector<double> db;
  column_sums(dz, db);
  for (int j = 0; j < dz.cols; ++j) g.bias[j] = static_cast<Real>(db[j]);
  if (dinput) {
    Matrix<Real> weight_t;
    transpose(layer.weight, weight_t);
    dinput->resize(dz.rows, layer.inputs());
    gemm(dz, weight_t, *dinput);
  }
}

}  // namespace

template <class Real>
double backward(const ModelParams<Real>& params, const ForwardCache<Real>& cache, std::span<const int> labels,
                ModelParams<Real>& grads) {
  const int batch = cache.batch;
  const int points = cache.points;
  if (static_cast<int>(labels.size()) != batch) throw ContractError("label count does not match the batch");
  const int classes = params.config.num_classes;
  const std::size_t n_point = params.point_layers.size();
  const std::size_t n_dense = params.dense_layers.size();

  Matrix<Real> grad(batch, classes);
  double total_loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || y >= classes) throw ContractError("label out of range");
    total_loss += -std::log(std::max(static_cast<double>(cache.probabilities(b, y)), 1e-12));
    for (int c = 0; c < classes; ++c) {
      const double target = c == y ? 1.0 : 0.0;
      grad(b, c) = static_cast<Real>((static_cast<double>(cache.probabilities(b, c)) - target) / batch);
    }
  }

  Matrix<Real> upstream;
  affine_backward(params.output, cache.inputs[n_point + n_dense], grad, grads.output, &upstream);

  for (std::size_t d = n_dense; d-- > 0;) {
    const std::size_t slot = n_point + d;
    grad = std::move(upstream);
    const Matrix<Real>& mask = cache.dropout_scale[d];
    if (mask.size() == grad.size()) {
      for (std::size_t i = 0; i < grad.values.size(); ++i) grad.values[i] *= mask.values[i];
    }
    normalize_backward(params.dense_layers[d], cache.xhat[slot], cache.inv_std[slot], cache.options.batch_statistics,
                       grad, grads.dense_layers[d]);
    affine_backward(params.dense_layers[d], cache.inputs[slot], grad, grads.dense_layers[d], &upstream);
  }

  // Max-pool: route each pooled gradient to its argmax point.
  const int features = upstream.cols;
  grad.resize(batch * points, features);
  grad.fill(Real(0));
  for (int b = 0; b < batch; ++b) {
    const Real* src = upstream.row(b);
    const int* arg = cache.argmax.data() + static_cast<std::size_t>(b) * features;
    for (int j = 0; j < features; ++j) grad(b * points + arg[j], j) = src[j];
  }

  for (std::size_t l = n_point; l-- > 0;) {
    normalize_backward(params.point_layers[l], cache.xhat[l], cache.inv_std[l], cache.options.batch_statistics, grad,
                       grads.point_layers[l]);
    affine_backward(params.point_layers[l], cache.inputs[l], grad, grads.point_layers[l], l > 0 ? &upstream : nullptr);
    if (l > 0) grad = std::move(upstream);
  }
  return total_loss / batch;
}

template <class Real>
void adam_step(ModelParams<Real>& params, const ModelParams<Real>& gradients, AdamState<Real>& state,
               long step_index, const AdamConfig& config) {
  if (step_index < 1) throw ContractError("Adam step index starts at 1");
  auto p = params.tensors(true);
  auto g = gradients.tensors(true);
  if (p.size() != g.size()) throw ContractError("gradient layout does not match the parameters");
  if (state.first_moment.empty()) {
    for (const auto& t : p) {
      state.first_moment.emplace_back(t.values.size(), Real(0));
      state.second_moment.emplace_back(t.values.size(), Real(0));
    }
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step_index));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step_index));
  const Real b1 = static_cast<Real>(config.beta1);
  const Real b2 = static_cast<Real>(config.beta2);
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t].values.size() != g[t].values.size() || state.first_moment[t].size() != p[t].values.size()) {
      throw ContractError("shape mismatch in Adam step for " + p[t].name);
    }
    Real* w = p[t].values.data();
    const Real* gr = g[t].values.data();
    Real* m = state.first_moment[t].data();
    Real* v = state.second_moment[t].data();
    const std::size_t n = p[t].values.size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (Real(1) - b1) * gr[i];
      v[i] = b2 * v[i] + (Real(1) - b2) * gr[i] * gr[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= static_cast<Real>(config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon));
    }
  }
}

// ---------------------------------------------------------------------------
// Training and inference

Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    groups[{r.size(), r.quartile ? index_of(*r.quartile) : -1}].push_back(i);
  }
  Rng rng(seed);
  Split split;
  for (auto& [key, members] : groups) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
    split.test.insert(split.test.end(), members.begin(), members.begin() + n_test);
    split.train.insert(split.train.end(), members.begin() + n_test, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

template <class Real>
Matrix<Real> pack_inputs(std::span<const LabeledStencil> records, std::span<const std::size_t> indices, int points) {
  Matrix<Real> x(static_cast<int>(indices.size()) * points, 2);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::vector<Point2> padded = pad_stencil(records[indices[b]].stencil, points);
    for (int p = 0; p < points; ++p) {
      x(static_cast<int>(b) * points + p, 0) = static_cast<Real>(padded[p].x);
      x(static_cast<int>(b) * points + p, 1) = static_cast<Real>(padded[p].y);
    }
  }
  return x;
}

namespace {

template <class Real>
int argmax_row(const Real* p, int n) {
  return static_cast<int>(std::max_element(p, p + n) - p);
}

}  // namespace

template <class Real>
std::vector<Prediction> predict_all(ModelParams<Real>& params, std::span<const LabeledStencil> records,
                                    int batch_size) {
  const int points = params.config.input_size;
  for (const auto& r : records) {
    if (r.size() > points) {
      throw ContractError("stencil of size " + std::to_string(r.size()) + " exceeds the model input size " +
                          std::to_string(points));
    }
  }
  std::vector<Prediction> out;
  out.reserve(records.size());
  Rng unused(0);
  ForwardCache<Real> cache;
  for (std::size_t start = 0; start < records.size(); start += batch_size) {
    const std::size_t stop = std::min(records.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const Matrix<Real> x = pack_inputs<Real>(records, idx, points);
    forward(params, x, static_cast<int>(idx.size()), PassOptions::for_mode(Mode::Infer), unused, cache);
    for (int b = 0; b < static_cast<int>(idx.size()); ++b) {
      Prediction pred;
      for (int c = 0; c < kNumQuartiles; ++c) pred.probabilities[c] = cache.probabilities(b, c);
      pred.quartile = quartile_from_index(argmax_row(pred.probabilities.data(), kNumQuartiles));
      out.push_back(pred);
    }
  }
  return out;
}

template <class Real>
Prediction predict(ModelParams<Real>& params, const Stencil& stencil) {
  LabeledStencil rec{stencil, 0.0, std::nullopt};
  return predict_all(params, std::span<const LabeledStencil>(&rec, 1), 1).front();
}

namespace {

// Cumulative mean of batch statistics: momentum k/(k+1) on the k-th batch.
template <class Real>
void recalibrate_statistics(ModelParams<Real>& params, std::span<const LabeledStencil> records,
                            std::span<const std::size_t> order, const TrainConfig& tc, ForwardCache<Real>& cache) {
  const double momentum = params.config.bn_momentum;
  PassOptions options;
  options.batch_statistics = true;
  options.update_running_stats = true;
  Rng unused(0);
  for (int k = 0; k < tc.bn_recalibration_batches; ++k) {
    const std::size_t start = static_cast<std::size_t>(k) * tc.batch_size;
    if (start >= order.size()) break;
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
    const std::span<const std::size_t> idx = order.subspan(start, stop - start);
    params.config.bn_momentum = static_cast<double>(k) / static_cast<double>(k + 1);
    forward(params, pack_inputs<Real>(records, idx, params.config.input_size), static_cast<int>(idx.size()), options,
            unused, cache);
  }
  params.config.bn_momentum = momentum;
}

}  // namespace

template <class Real>
TrainResult<Real> train(const Dataset& ds, ModelConfig model_config, const TrainConfig& tc,
                        const EpochCallback& on_epoch) {
  tc.validate();
  if (ds.records.empty()) throw ContractError("cannot train on an empty dataset");
  for (const auto& r : ds.records) {
    if (!r.quartile) throw ContractError("every training record needs a quartile label");
  }
  if (model_config.num_classes != kNumQuartiles) throw ContractError("classifier must have 4 outputs");
  model_config.input_size = ds.max_size;
  model_config.validate();

  TrainResult<Real> result;
  result.split = stratified_split(ds, tc.test_fraction, stream_seed(tc.seed, 1));
  if (result.split.test.empty() || result.split.train.empty()) {
    throw ContractError("dataset too small for the requested train/test split");
  }
  result.params = init_model<Real>(model_config, stream_seed(tc.seed, 2));
  ModelParams<Real>& params = result.params;
  ModelParams<Real> grads = zeros_like(params);
  AdamState<Real> adam;
  Rng shuffle_rng(stream_seed(tc.seed, 3));
  Rng dropout_rng(stream_seed(tc.seed, 4));

  const int points = model_config.input_size;
  std::vector<int> labels(ds.records.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = index_of(*ds.records[i].quartile);

  std::vector<LabeledStencil> test_records;
  test_records.reserve(result.split.test.size());
  for (std::size_t i : result.split.test) test_records.push_back(ds.records[i]);

  ForwardCache<Real> cache;
  long step = 0;
  std::vector<std::size_t> order = result.split.train;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const int batch = static_cast<int>(idx.size());
      const Matrix<Real> x = pack_inputs<Real>(ds.records, idx, points);
      std::vector<int> y(batch);
      for (int b = 0; b < batch; ++b) y[b] = labels[idx[b]];

      forward(params, x, batch, PassOptions::for_mode(Mode::Train), dropout_rng, cache);
      for (int b = 0; b < batch; ++b) {
        if (argmax_row(cache.probabilities.row(b), cache.probabilities.cols) == y[b]) ++correct;
      }
      loss_sum += backward(params, cache, y, grads) * batch;
      adam_step(params, grads, adam, ++step, tc.optimizer);
    }
    recalibrate_statistics(params, ds.records, order, tc, cache);

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    const std::vector<Prediction> preds = predict_all(params, std::span<const LabeledStencil>(test_records), tc.batch_size);
    double test_loss = 0.0;
    std::size_t test_correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const Quartile truth = *test_records[i].quartile;
      test_loss += loss(preds[i].probabilities, truth);
      if (preds[i].quartile == truth) ++test_correct;
    }
    stats.test_loss = test_loss / static_cast<double>(preds.size());
    stats.test_accuracy = static_cast<double>(test_correct) / static_cast<double>(preds.size());
    result.history.push_back(stats);
    if (on_epoch) on_epoch(epoch, stats);
  }
  return result;
}

#define STENCILML_INSTANTIATE(Real)                                                                                  \
  template struct ModelParams<Real>;                                                                                 \
  template ModelParams<Real> init_model<Real>(const ModelConfig&, std::uint64_t);                                    \
  template ModelParams<Real> zeros_like<Real>(const ModelParams<Real>&);                                             \
  template void forward<Real>(ModelParams<Real>&, const Matrix<Real>&, int, PassOptions, Rng&, ForwardCache<Real>&); \
  template std::vector<double> forward<Real>(ModelParams<Real>&, std::span<const Point2>, Mode, Rng&);               \
  template double backward<Real>(const ModelParams<Real>&, const ForwardCache<Real>&, std::span<const int>,          \
                                 ModelParams<Real>&);                                                                \
  template void adam_step<Real>(ModelParams<Real>&, const ModelParams<Real>&, AdamState<Real>&, long,                \
                                const AdamConfig&);                                                                  \
  template Matrix<Real> pack_inputs<Real>(std::span<const LabeledStencil>, std::span<const std::size_t>, int);       \
  template std::vector<Prediction> predict_all<Real>(ModelParams<Real>&, std::span<const LabeledStencil>, int);      \
  template Prediction predict<Real>(ModelParams<Real>&, const Stencil&);                                             \
  template TrainResult<Real> train<Real>(const Dataset&, ModelConfig, const TrainConfig&, const EpochCallback&);

STENCILML_INSTANTIATE(float)
STENCILML_INSTANTIATE(double)

#undef STENCILML_INSTANTIATE

template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);
template ModelParams<double> cast_params<double, double>(const ModelParams<double>&);

}  // namespace stencilml
