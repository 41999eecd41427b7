#include "covdiff/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "covdiff/matkit.hpp"
#include "covdiff/rng.hpp"

namespace covdiff {

namespace {
constexpr double kBnEpsilon = 1e-5;
constexpr double kStdFloor = 1e-8;
}  // namespace

const char* to_string(ClassifierVariant v) {
  switch (v) {
    case ClassifierVariant::Full:
      return "full";
    case ClassifierVariant::RawOnly:
      return "raw_only";
    default:
      return "diff_only";
  }
}

ClassifierVariant classifier_variant_from_string(const std::string& s) {
  if (s == "full") return ClassifierVariant::Full;
  if (s == "raw_only") return ClassifierVariant::RawOnly;
  if (s == "diff_only") return ClassifierVariant::DiffOnly;
  throw std::invalid_argument("unknown classifier variant: " + s);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (batch_size < 1)
    throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("train config: learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("train config: Adam betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0))
    throw std::invalid_argument("train config: adam_epsilon must be > 0");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0))
    throw std::invalid_argument("train config: bn_momentum must lie in [0, 1)");
}

namespace {

void init_dense(DenseLayer& layer, std::size_t in, std::size_t out, Rng& rng) {
  layer.in = in;
  layer.out = out;
  layer.w.resize(in * out);
  layer.b.resize(out);
  // Fan-in scaled uniform init, U(-1/sqrt(in), 1/sqrt(in)).
  const double limit = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& v : layer.w.value) v = (2.0 * rng.uniform() - 1.0) * limit;
  for (auto& v : layer.b.value) v = (2.0 * rng.uniform() - 1.0) * limit;
}

void init_bn(BatchNormLayer& layer, std::size_t dim) {
  layer.dim = dim;
  layer.gamma.resize(dim);
  layer.beta.resize(dim);
  std::fill(layer.gamma.value.begin(), layer.gamma.value.end(), 1.0);
  layer.running_mean.assign(dim, 0.0);
  layer.running_var.assign(dim, 1.0);
}

RealMatrix dense_forward(const DenseLayer& l, const RealMatrix& x) {
  RealMatrix y(x.rows, l.out);
  for (std::size_t b = 0; b < x.rows; ++b) {
    for (std::size_t o = 0; o < l.out; ++o) {
      double acc = l.b.value[o];
      const double* w_row = &l.w.value[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) acc += x.at(b, i) * w_row[i];
      y.at(b, o) = acc;
    }
  }
  return y;
}

/// Accumulates parameter gradients and returns the input gradient.
RealMatrix dense_backward(DenseLayer& l, const RealMatrix& x, const RealMatrix& dy) {
  RealMatrix dx(x.rows, l.in);
  for (std::size_t b = 0; b < x.rows; ++b) {
    for (std::size_t o = 0; o < l.out; ++o) {
      const double g = dy.at(b, o);
      l.b.grad[o] += g;
      double* w_grad = &l.w.grad[o * l.in];
      const double* w_row = &l.w.value[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) {
        w_grad[i] += g * x.at(b, i);
        dx.at(b, i) += g * w_row[i];
      }
    }
  }
  return dx;
}

struct BnCache {
  std::vector<double> inv_std;
  RealMatrix x_hat;
};

RealMatrix bn_forward_train(BatchNormLayer& l, const RealMatrix& x, BnCache& cache,
                            double momentum, bool update_running) {
  const std::size_t m = x.rows;
  const double inv_m = 1.0 / static_cast<double>(m);
  cache.inv_std.assign(l.dim, 0.0);
  cache.x_hat = RealMatrix(m, l.dim);
  RealMatrix y(m, l.dim);
  for (std::size_t d = 0; d < l.dim; ++d) {
    double mean = 0.0;
    for (std::size_t b = 0; b < m; ++b) mean += x.at(b, d);
    mean *= inv_m;
    double var = 0.0;
    for (std::size_t b = 0; b < m; ++b) {
      const double c = x.at(b, d) - mean;
      var += c * c;
    }
    var *= inv_m;
    const double inv_std = 1.0 / std::sqrt(var + kBnEpsilon);
    cache.inv_std[d] = inv_std;
    for (std::size_t b = 0; b < m; ++b) {
      const double xh = (x.at(b, d) - mean) * inv_std;
      cache.x_hat.at(b, d) = xh;
      y.at(b, d) = l.gamma.value[d] * xh + l.beta.value[d];
    }
    if (update_running) {
      l.running_mean[d] = momentum * l.running_mean[d] + (1.0 - momentum) * mean;
      l.running_var[d] = momentum * l.running_var[d] + (1.0 - momentum) * var;
    }
  }
  return y;
}

RealMatrix bn_forward_eval(const BatchNormLayer& l, const RealMatrix& x) {
  RealMatrix y(x.rows, l.dim);
  for (std::size_t d = 0; d < l.dim; ++d) {
    const double inv_std = 1.0 / std::sqrt(l.running_var[d] + kBnEpsilon);
    for (std::size_t b = 0; b < x.rows; ++b)
      y.at(b, d) =
          l.gamma.value[d] * (x.at(b, d) - l.running_mean[d]) * inv_std +
          l.beta.value[d];
  }
  return y;
}

RealMatrix bn_backward(BatchNormLayer& l, const BnCache& cache, const RealMatrix& dy) {
  const std::size_t m = dy.rows;
  const double inv_m = 1.0 / static_cast<double>(m);
  RealMatrix dx(m, l.dim);
  for (std::size_t d = 0; d < l.dim; ++d) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < m; ++b) {
      sum_dy += dy.at(b, d);
      sum_dy_xhat += dy.at(b, d) * cache.x_hat.at(b, d);
    }
    l.gamma.grad[d] += sum_dy_xhat;
    l.beta.grad[d] += sum_dy;
    const double scale = l.gamma.value[d] * cache.inv_std[d] * inv_m;
    for (std::size_t b = 0; b < m; ++b)
      dx.at(b, d) = scale * (static_cast<double>(m) * dy.at(b, d) - sum_dy -
                             cache.x_hat.at(b, d) * sum_dy_xhat);
  }
  return dx;
}

RealMatrix relu_forward(const RealMatrix& x) {
  RealMatrix y = x;
  for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

RealMatrix relu_backward(const RealMatrix& pre, const RealMatrix& dy) {
  RealMatrix dx = dy;
  for (std::size_t i = 0; i < dx.data.size(); ++i)
    if (pre.data[i] <= 0.0) dx.data[i] = 0.0;
  return dx;
}

RealMatrix slice_cols(const RealMatrix& x, std::size_t begin, std::size_t count) {
  RealMatrix y(x.rows, count);
  for (std::size_t b = 0; b < x.rows; ++b)
    for (std::size_t j = 0; j < count; ++j) y.at(b, j) = x.at(b, begin + j);
  return y;
}

RealMatrix concat_cols(const RealMatrix& a, const RealMatrix& b) {
  RealMatrix y(a.rows, a.cols + b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t j = 0; j < a.cols; ++j) y.at(r, j) = a.at(r, j);
    for (std::size_t j = 0; j < b.cols; ++j) y.at(r, a.cols + j) = b.at(r, j);
  }
  return y;
}

/// Everything the backward pass needs from one training-mode forward pass.
struct ForwardCache {
  RealMatrix x_raw, x_diff;
  RealMatrix z_raw, a_raw;
  RealMatrix z_diff, a_diff;
  RealMatrix fused;
  RealMatrix z_fuse, a_fuse;
  RealMatrix logits;
  BnCache bn_raw, bn_diff, bn_fuse;
  RealMatrix r_raw, r_diff, r_fuse;  // batch-norm outputs (ReLU inputs)
};

/// Training-mode forward over standardized inputs (batch x 3 n_rx).
void forward_train(TwoStreamMlp& model, const RealMatrix& x_std, double bn_momentum,
                   bool update_running, ForwardCache& cache) {
  const std::size_t n = static_cast<std::size_t>(model.n_rx);
  RealMatrix fused;
  if (model.has_raw_stream()) {
    cache.x_raw = slice_cols(x_std, 0, 2 * n);
    cache.z_raw = dense_forward(model.fc_raw, cache.x_raw);
    cache.r_raw = bn_forward_train(model.bn_raw, cache.z_raw, cache.bn_raw,
                                   bn_momentum, update_running);
    cache.a_raw = relu_forward(cache.r_raw);
    fused = cache.a_raw;
  }
  if (model.has_diff_stream()) {
    cache.x_diff = slice_cols(x_std, 2 * n, n);
    cache.z_diff = dense_forward(model.fc_diff, cache.x_diff);
    cache.r_diff = bn_forward_train(model.bn_diff, cache.z_diff, cache.bn_diff,
                                    bn_momentum, update_running);
    cache.a_diff = relu_forward(cache.r_diff);
    fused = model.has_raw_stream() ? concat_cols(cache.a_raw, cache.a_diff)
                                   : cache.a_diff;
  }
  cache.fused = std::move(fused);
  cache.z_fuse = dense_forward(model.fc_fuse, cache.fused);
  cache.r_fuse = bn_forward_train(model.bn_fuse, cache.z_fuse, cache.bn_fuse,
                                  bn_momentum, update_running);
  cache.a_fuse = relu_forward(cache.r_fuse);
  cache.logits = dense_forward(model.fc_out, cache.a_fuse);
}

/// Mean cross-entropy and (optionally) the logit gradient, via a row-wise
/// shift-stable softmax.
double cross_entropy(const RealMatrix& logits, const std::vector<int>& labels,
                     RealMatrix* dlogits) {
  const std::size_t m = logits.rows;
  const double inv_m = 1.0 / static_cast<double>(m);
  if (dlogits) *dlogits = RealMatrix(m, logits.cols);
  double loss = 0.0;
  std::vector<double> p(logits.cols);
  for (std::size_t b = 0; b < m; ++b) {
    double peak = logits.at(b, 0);
    for (std::size_t c = 1; c < logits.cols; ++c) peak = std::max(peak, logits.at(b, c));
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      p[c] = std::exp(logits.at(b, c) - peak);
      z += p[c];
    }
    const int label = labels[b];
    loss -= std::log(p[static_cast<std::size_t>(label)] / z);
    if (dlogits)
      for (std::size_t c = 0; c < logits.cols; ++c)
        (*dlogits).at(b, c) =
            (p[c] / z - (static_cast<int>(c) == label ? 1.0 : 0.0)) * inv_m;
  }
  return loss * inv_m;
}

void backward(TwoStreamMlp& model, const ForwardCache& cache, const RealMatrix& dlogits) {
  RealMatrix d_a_fuse = dense_backward(model.fc_out, cache.a_fuse, dlogits);
  RealMatrix d_r_fuse = relu_backward(cache.r_fuse, d_a_fuse);
  RealMatrix d_z_fuse = bn_backward(model.bn_fuse, cache.bn_fuse, d_r_fuse);
  RealMatrix d_fused = dense_backward(model.fc_fuse, cache.fused, d_z_fuse);

  if (model.has_raw_stream()) {
    const RealMatrix d_a_raw = slice_cols(d_fused, 0, model.fc_raw.out);
    const RealMatrix d_r_raw = relu_backward(cache.r_raw, d_a_raw);
    const RealMatrix d_z_raw = bn_backward(model.bn_raw, cache.bn_raw, d_r_raw);
    dense_backward(model.fc_raw, cache.x_raw, d_z_raw);
  }
  if (model.has_diff_stream()) {
    const std::size_t offset = model.has_raw_stream() ? model.fc_raw.out : 0;
    const RealMatrix d_a_diff = slice_cols(d_fused, offset, model.fc_diff.out);
    const RealMatrix d_r_diff = relu_backward(cache.r_diff, d_a_diff);
    const RealMatrix d_z_diff = bn_backward(model.bn_diff, cache.bn_diff, d_r_diff);
    dense_backward(model.fc_diff, cache.x_diff, d_z_diff);
  }
}

std::vector<std::pair<std::string, Param*>> named_params(TwoStreamMlp& model) {
  std::vector<std::pair<std::string, Param*>> out;
  if (model.has_raw_stream()) {
    out.emplace_back("fc_raw.w", &model.fc_raw.w);
    out.emplace_back("fc_raw.b", &model.fc_raw.b);
    out.emplace_back("bn_raw.gamma", &model.bn_raw.gamma);
    out.emplace_back("bn_raw.beta", &model.bn_raw.beta);
  }
  if (model.has_diff_stream()) {
    out.emplace_back("fc_diff.w", &model.fc_diff.w);
    out.emplace_back("fc_diff.b", &model.fc_diff.b);
    out.emplace_back("bn_diff.gamma", &model.bn_diff.gamma);
    out.emplace_back("bn_diff.beta", &model.bn_diff.beta);
  }
  out.emplace_back("fc_fuse.w", &model.fc_fuse.w);
  out.emplace_back("fc_fuse.b", &model.fc_fuse.b);
  out.emplace_back("bn_fuse.gamma", &model.bn_fuse.gamma);
  out.emplace_back("bn_fuse.beta", &model.bn_fuse.beta);
  out.emplace_back("fc_out.w", &model.fc_out.w);
  out.emplace_back("fc_out.b", &model.fc_out.b);
  return out;
}

void zero_grads(TwoStreamMlp& model) {
  for (auto& [name, p] : named_params(model))
    std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

void adam_step(Param& p, const TrainConfig& cfg, double beta1_t, double beta2_t) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * p.grad[i];
    p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * p.grad[i] * p.grad[i];
    const double m_hat = p.m[i] / (1.0 - beta1_t);
    const double v_hat = p.v[i] / (1.0 - beta2_t);
    p.value[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
  }
}

RealMatrix standardize(const TwoStreamMlp& model, const RealMatrix& x) {
  RealMatrix y = x;
  for (std::size_t b = 0; b < y.rows; ++b)
    for (std::size_t j = 0; j < y.cols; ++j)
      y.at(b, j) = (y.at(b, j) - model.input_mean[j]) / model.input_std[j];
  return y;
}

RealMatrix eval_forward_std(const TwoStreamMlp& model, const RealMatrix& x_std) {
  const std::size_t n = static_cast<std::size_t>(model.n_rx);
  RealMatrix fused;
  RealMatrix a_raw;
  if (model.has_raw_stream()) {
    const RealMatrix z = dense_forward(model.fc_raw, slice_cols(x_std, 0, 2 * n));
    a_raw = relu_forward(bn_forward_eval(model.bn_raw, z));
    fused = a_raw;
  }
  if (model.has_diff_stream()) {
    const RealMatrix z = dense_forward(model.fc_diff, slice_cols(x_std, 2 * n, n));
    const RealMatrix a_diff = relu_forward(bn_forward_eval(model.bn_diff, z));
    fused = model.has_raw_stream() ? concat_cols(a_raw, a_diff) : a_diff;
  }
  const RealMatrix z_fuse = dense_forward(model.fc_fuse, fused);
  const RealMatrix a_fuse = relu_forward(bn_forward_eval(model.bn_fuse, z_fuse));
  return dense_forward(model.fc_out, a_fuse);
}

RealMatrix dataset_matrix(const FeatureDataset& dataset) {
  const std::size_t width = 3 * dataset.n_rx;
  RealMatrix x(dataset.size(), width);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const std::vector<double> row = dataset.features[r].concatenated();
    if (row.size() != width)
      throw std::invalid_argument("classifier: feature width mismatch in dataset");
    std::copy(row.begin(), row.end(), x.data.begin() + static_cast<long>(r * width));
  }
  return x;
}

int argmax_row(const RealMatrix& logits, std::size_t row) {
  int best = 0;
  for (std::size_t c = 1; c < logits.cols; ++c)
    if (logits.at(row, c) > logits.at(row, best)) best = static_cast<int>(c);
  return best;
}

}  // namespace

TwoStreamMlp::TwoStreamMlp(ClassifierVariant variant_, int n_rx_, int n_classes_,
                           std::uint64_t init_seed)
    : variant(variant_), n_rx(n_rx_), n_classes(n_classes_) {
  if (n_rx < 1) throw std::invalid_argument("classifier: n_rx must be >= 1");
  if (n_classes < 2) throw std::invalid_argument("classifier: need >= 2 classes");
  Rng rng(derive_seed(init_seed, 0));
  const std::size_t n = static_cast<std::size_t>(n_rx);
  if (has_raw_stream()) {
    init_dense(fc_raw, 2 * n, kStreamWidth, rng);
    init_bn(bn_raw, kStreamWidth);
  }
  if (has_diff_stream()) {
    init_dense(fc_diff, n, kStreamWidth, rng);
    init_bn(bn_diff, kStreamWidth);
  }
  const std::size_t fused =
      kStreamWidth * ((has_raw_stream() ? 1 : 0) + (has_diff_stream() ? 1 : 0));
  init_dense(fc_fuse, fused, kFusionWidth, rng);
  init_bn(bn_fuse, kFusionWidth);
  init_dense(fc_out, kFusionWidth, static_cast<std::size_t>(n_classes), rng);
  input_mean.assign(3 * n, 0.0);
  input_std.assign(3 * n, 1.0);
}

RealMatrix TwoStreamMlp::logits(const RealMatrix& raw_inputs) const {
  if (raw_inputs.cols != input_width())
    throw std::invalid_argument("classifier: input width mismatch");
  return eval_forward_std(*this, standardize(*this, raw_inputs));
}

std::vector<double> TwoStreamMlp::logits(const FeatureVector& f) const {
  const std::vector<double> row = f.concatenated();
  RealMatrix x(1, row.size());
  x.data = row;
  const RealMatrix out = logits(x);
  return out.data;
}

int TwoStreamMlp::predict(const FeatureVector& f) const {
  const std::vector<double> l = logits(f);
  int best = 0;
  for (std::size_t c = 1; c < l.size(); ++c)
    if (l[c] > l[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

std::vector<int> TwoStreamMlp::predict(const FeatureDataset& dataset) const {
  const RealMatrix out = logits(dataset_matrix(dataset));
  std::vector<int> labels(out.rows);
  for (std::size_t r = 0; r < out.rows; ++r) labels[r] = argmax_row(out, r);
  return labels;
}

double TwoStreamMlp::accuracy(const FeatureDataset& dataset) const {
  if (dataset.size() == 0)
    throw std::invalid_argument("classifier: empty evaluation set");
  const std::vector<int> predicted = predict(dataset);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == dataset.labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - peak);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

RealMatrix forward(const TwoStreamMlp& model, const RealMatrix& raw_inputs,
                   ForwardMode mode) {
  if (raw_inputs.cols != model.input_width())
    throw std::invalid_argument("classifier: input width mismatch");
  const RealMatrix x_std = standardize(model, raw_inputs);
  if (mode == ForwardMode::Eval) return eval_forward_std(model, x_std);
  // Batch statistics without disturbing the running averages: work on a copy.
  TwoStreamMlp scratch = model;
  ForwardCache cache;
  forward_train(scratch, x_std, 0.9, /*update_running=*/false, cache);
  return cache.logits;
}

std::vector<double> forward(const TwoStreamMlp& model, const FeatureVector& f,
                            ForwardMode mode) {
  const std::vector<double> row = f.concatenated();
  RealMatrix x(1, row.size());
  x.data = row;
  return forward(model, x, mode).data;
}

TrainResult train(TwoStreamMlp model, const FeatureDataset& train_set,
                  const FeatureDataset& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0 || val_set.size() == 0)
    throw std::invalid_argument("train: empty train or validation set");
  if (train_set.n_rx != val_set.n_rx)
    throw std::invalid_argument("train: train/val antenna count mismatch");
  if (static_cast<int>(train_set.n_rx) != model.n_rx)
    throw std::invalid_argument("train: model/dataset antenna count mismatch");
  for (int l : train_set.labels)
    if (l < 0 || l >= model.n_classes)
      throw std::invalid_argument("train: label outside [0, n_classes)");
  for (int l : val_set.labels)
    if (l < 0 || l >= model.n_classes)
      throw std::invalid_argument("train: label outside [0, n_classes)");

  const RealMatrix train_x_raw = dataset_matrix(train_set);
  const RealMatrix val_x_raw = dataset_matrix(val_set);
  const std::size_t n_train = train_x_raw.rows;
  const std::size_t width = train_x_raw.cols;

  if (cfg.standardize) {
    // Z-score fitted on the training set; population standard deviation with
    // a floor so constant dimensions pass through unscaled.
    for (std::size_t j = 0; j < width; ++j) {
      double mean = 0.0;
      for (std::size_t b = 0; b < n_train; ++b) mean += train_x_raw.at(b, j);
      mean /= static_cast<double>(n_train);
      double var = 0.0;
      for (std::size_t b = 0; b < n_train; ++b) {
        const double c = train_x_raw.at(b, j) - mean;
        var += c * c;
      }
      const double sd = std::sqrt(var / static_cast<double>(n_train));
      model.input_mean[j] = mean;
      model.input_std[j] = sd < kStdFloor ? 1.0 : sd;
    }
  }

  const RealMatrix train_x = standardize(model, train_x_raw);
  const RealMatrix val_x = standardize(model, val_x_raw);

  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
  Rng shuffle_rng(derive_seed(cfg.seed, 2));

  TrainResult result;
  result.model = model;
  TwoStreamMlp best = model;
  double best_val = -1.0;
  long step = 0;
  ForwardCache cache;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      for (std::size_t i = n_train - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_int(i + 1));
        std::swap(order[i], order[j]);
      }
    }
    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < n_train;
         start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t m =
          std::min(static_cast<std::size_t>(cfg.batch_size), n_train - start);
      RealMatrix x(m, width);
      std::vector<int> labels(m);
      for (std::size_t r = 0; r < m; ++r) {
        const std::size_t src = order[start + r];
        std::copy(train_x.data.begin() + static_cast<long>(src * width),
                  train_x.data.begin() + static_cast<long>((src + 1) * width),
                  x.data.begin() + static_cast<long>(r * width));
        labels[r] = train_set.labels[src];
      }

      zero_grads(result.model);
      forward_train(result.model, x, cfg.bn_momentum, /*update_running=*/true, cache);
      RealMatrix dlogits;
      const double loss = cross_entropy(cache.logits, labels, &dlogits);
      if (!std::isfinite(loss)) {
        char msg[96];
        std::snprintf(msg, sizeof(msg),
                      "training diverged: non-finite loss at epoch %d batch %d", epoch,
                      batch_index);
        throw NumericError(msg);
      }
      backward(result.model, cache, dlogits);

      ++step;
      const double beta1_t = std::pow(cfg.beta1, static_cast<double>(step));
      const double beta2_t = std::pow(cfg.beta2, static_cast<double>(step));
      for (auto& [name, p] : named_params(result.model))
        adam_step(*p, cfg, beta1_t, beta2_t);

      epoch_loss += loss * static_cast<double>(m);
    }

    const RealMatrix val_logits = eval_forward_std(result.model, val_x);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < val_logits.rows; ++r)
      if (argmax_row(val_logits, r) == val_set.labels[r]) ++hits;
    const double val_acc =
        static_cast<double>(hits) / static_cast<double>(val_logits.rows);

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(n_train);
    stats.val_accuracy = val_acc;
    result.history.push_back(stats);

    if (val_acc > best_val) {
      best_val = val_acc;
      best = result.model;  // snapshot of the best epoch so far
    }
  }

  result.model = std::move(best);
  return result;
}

TrainResult train_classifier(ClassifierVariant variant, const FeatureDataset& train_set,
                             const FeatureDataset& val_set, const TrainConfig& cfg,
                             int n_classes) {
  if (n_classes == 0) {
    for (int l : train_set.labels) n_classes = std::max(n_classes, l + 1);
    for (int l : val_set.labels) n_classes = std::max(n_classes, l + 1);
    n_classes = std::max(n_classes, 2);
  }
  TwoStreamMlp model(variant, static_cast<int>(train_set.n_rx), n_classes,
                     derive_seed(cfg.seed, 1));
  return train(std::move(model), train_set, val_set, cfg);
}

std::map<std::string, double> grad_check(TwoStreamMlp& model,
                                         const RealMatrix& raw_inputs,
                                         const std::vector<int>& labels,
                                         std::size_t samples_per_layer,
                                         std::uint64_t seed) {
  if (raw_inputs.rows == 0 || raw_inputs.rows != labels.size())
    throw std::invalid_argument("grad_check: batch/label size mismatch");
  if (raw_inputs.cols != model.input_width())
    throw std::invalid_argument("grad_check: input width mismatch");
  const RealMatrix x = standardize(model, raw_inputs);

  const auto loss_of = [&]() {
    ForwardCache cache;
    forward_train(model, x, 0.9, /*update_running=*/false, cache);
    return cross_entropy(cache.logits, labels, nullptr);
  };

  zero_grads(model);
  {
    ForwardCache cache;
    forward_train(model, x, 0.9, /*update_running=*/false, cache);
    RealMatrix dlogits;
    cross_entropy(cache.logits, labels, &dlogits);
    backward(model, cache, dlogits);
  }

  Rng rng(derive_seed(seed, 0));
  const double h = 1e-5;
  std::map<std::string, double> worst;
  for (auto& [name, p] : named_params(model)) {
    // Probe either every index or a random sample without replacement.
    std::vector<std::size_t> indices(p->size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    std::size_t probes = indices.size();
    if (samples_per_layer > 0 && samples_per_layer < probes) {
      for (std::size_t i = 0; i < samples_per_layer; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng.uniform_int(indices.size() - i));
        std::swap(indices[i], indices[j]);
      }
      probes = samples_per_layer;
    }
    double layer_worst = 0.0;
    for (std::size_t s = 0; s < probes; ++s) {
      const std::size_t i = indices[s];
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double loss_hi = loss_of();
      p->value[i] = saved - h;
      const double loss_lo = loss_of();
      p->value[i] = saved;
      const double numeric = (loss_hi - loss_lo) / (2.0 * h);
      const double analytic = p->grad[i];
      const double rel = std::abs(numeric - analytic) /
                         std::max({1.0, std::abs(numeric), std::abs(analytic)});
      layer_worst = std::max(layer_worst, rel);
    }
    worst[name] = layer_worst;
  }
  return worst;
}

std::map<std::string, double> gradient_check(ClassifierVariant variant, int n_rx,
                                             int n_classes, std::uint64_t seed) {
  TwoStreamMlp model(variant, n_rx, n_classes, derive_seed(seed, 1));
  Rng rng(derive_seed(seed, 2));
  const std::size_t m = 8;
  RealMatrix x(m, model.input_width());
  for (auto& v : x.data) v = rng.normal();
  std::vector<int> labels(m);
  for (auto& l : labels)
    l = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_classes)));
  return grad_check(model, x, labels, /*samples_per_layer=*/0, derive_seed(seed, 3));
}

}  // namespace covdiff
