#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "covdiff/sensing.hpp"

namespace covdiff {

/// Which feature streams the network consumes. Full fuses both; the other
/// two are ablations with the fusion width unchanged.
enum class ClassifierVariant { Full, RawOnly, DiffOnly };

const char* to_string(ClassifierVariant v);
ClassifierVariant classifier_variant_from_string(const std::string& s);

/// Dense row-major real matrix used by the network (batch x dim blocks).
struct RealMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Trainable tensor: value plus gradient and Adam moment buffers.
struct Param {
  std::vector<double> value, grad, m, v;

  void resize(std::size_t n) {
    value.assign(n, 0.0);
    grad.assign(n, 0.0);
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }
  std::size_t size() const { return value.size(); }
};

/// Fully connected layer, y = x W^T + b, with W stored out x in.
struct DenseLayer {
  std::size_t in = 0, out = 0;
  Param w, b;
};

/// Batch normalization with scale/shift and exponentially averaged running
/// statistics for evaluation mode.
struct BatchNormLayer {
  std::size_t dim = 0;
  Param gamma, beta;
  std::vector<double> running_mean, running_var;
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double bn_momentum = 0.9;  // running = momentum * running + (1-m) * batch
  bool shuffle = true;       // deterministic per-epoch reshuffle when on
  bool standardize = true;   // z-score inputs with training-set statistics
  std::uint64_t seed = 0;    // drives both weight init and shuffling

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;    // mean cross-entropy over the epoch
  double val_accuracy = 0.0;  // evaluation-mode accuracy after the epoch
};

/// Two-stream feature classifier. Stream 1 reads the per-window spectra
/// [s_t; s_t1], stream 2 reads the difference spectrum s_d; each passes
/// through FC(32) + batch norm + ReLU, the concatenation through FC(16) +
/// batch norm + ReLU, and a final FC produces one logit per class
/// (d = 0..n_classes-1 newly active streams).
struct TwoStreamMlp {
  static constexpr int kStreamWidth = 32;
  static constexpr int kFusionWidth = 16;

  ClassifierVariant variant = ClassifierVariant::Full;
  int n_rx = 0;
  int n_classes = 0;

  // Per-dimension z-score of the concatenated 3*n_rx input, fitted on the
  // training set.
  std::vector<double> input_mean, input_std;

  DenseLayer fc_raw;  // absent (empty) for DiffOnly
  BatchNormLayer bn_raw;
  DenseLayer fc_diff;  // absent (empty) for RawOnly
  BatchNormLayer bn_diff;
  DenseLayer fc_fuse;
  BatchNormLayer bn_fuse;
  DenseLayer fc_out;

  TwoStreamMlp() = default;
  TwoStreamMlp(ClassifierVariant variant, int n_rx, int n_classes,
               std::uint64_t init_seed);

  bool has_raw_stream() const { return variant != ClassifierVariant::DiffOnly; }
  bool has_diff_stream() const { return variant != ClassifierVariant::RawOnly; }
  std::size_t input_width() const { return static_cast<std::size_t>(3 * n_rx); }

  /// Evaluation-mode forward pass (running batch-norm statistics).
  RealMatrix logits(const RealMatrix& raw_inputs) const;
  std::vector<double> logits(const FeatureVector& f) const;

  /// Argmax class; ties resolve to the lowest class index.
  int predict(const FeatureVector& f) const;
  std::vector<int> predict(const FeatureDataset& dataset) const;
  double accuracy(const FeatureDataset& dataset) const;
};

/// Numerically stable softmax (invariant to a common shift of the logits).
std::vector<double> softmax(const std::vector<double>& logits);

/// Train mode normalizes with the statistics of the presented batch (without
/// touching the running averages); eval mode uses the running statistics.
enum class ForwardMode { Train, Eval };

/// Forward pass under an explicit batch-norm mode. Inputs are raw
/// (unstandardized) concatenated feature rows.
RealMatrix forward(const TwoStreamMlp& model, const RealMatrix& raw_inputs,
                   ForwardMode mode);
std::vector<double> forward(const TwoStreamMlp& model, const FeatureVector& f,
                            ForwardMode mode);

struct TrainResult {
  TwoStreamMlp model;  // parameters of the best-validation-accuracy epoch
  std::vector<EpochStats> history;
};

/// Mini-batch Adam training with cross-entropy loss, starting from the given
/// freshly initialized model. When cfg.standardize is on the z-score is
/// fitted on the training set and stored in the model. The checkpoint with
/// the highest validation accuracy (earliest on ties) is returned. Throws
/// NumericError naming the epoch and batch if the loss stops being finite.
TrainResult train(TwoStreamMlp model, const FeatureDataset& train_set,
                  const FeatureDataset& val_set, const TrainConfig& cfg);

/// Convenience wrapper: constructs the model from derive_seed(cfg.seed, 1)
/// and trains it. n_classes = 0 infers the class count from the labels.
TrainResult train_classifier(ClassifierVariant variant, const FeatureDataset& train,
                             const FeatureDataset& val, const TrainConfig& cfg,
                             int n_classes = 0);

/// Central-difference gradient verification (step 1e-5) of the analytic
/// backward pass against the training-mode loss on the given batch. At most
/// samples_per_layer randomly chosen parameters per tensor are probed (0 =
/// all). Returns the max relative error per parameter tensor (keys like
/// "fc_raw.w", "bn_fuse.gamma").
std::map<std::string, double> grad_check(TwoStreamMlp& model,
                                         const RealMatrix& raw_inputs,
                                         const std::vector<int>& labels,
                                         std::size_t samples_per_layer,
                                         std::uint64_t seed);

/// Self-contained variant on a fresh random model and batch of 8, probing
/// every parameter.
std::map<std::string, double> gradient_check(ClassifierVariant variant, int n_rx,
                                             int n_classes, std::uint64_t seed);

}  // namespace covdiff
