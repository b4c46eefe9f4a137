#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "usbt/mfcc.hpp"

namespace usbt {

enum class Architecture { SmallConv, LinearSoftmax };

std::string architecture_name(Architecture a);
Architecture architecture_from_name(const std::string& name);

struct ConvBlockSpec {
  int filters;
  int kernel;
  int pool;
};

struct ModelConfig {
  Architecture architecture = Architecture::SmallConv;
  std::vector<ConvBlockSpec> conv_blocks = {{8, 3, 2}, {16, 3, 2}};
  int hidden_units = 16;
  double dropout_pre_flatten = 0.5;
  double dropout_penultimate = 0.4;
  double l2_lambda = 1e-4;  // convolution kernels only
  int n_classes = 10;
  int input_frames = 98;
  int input_coeffs = 40;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 64;
  int max_epochs = 300;
  int patience = 20;
  uint64_t seed = 0;
};

struct EpochStats {
  double train_loss;
  double val_loss;
  double val_accuracy;
};

struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;  // row-major
};

struct TrainedModel {
  ModelConfig config;
  std::vector<Tensor> weights;
  std::vector<EpochStats> history;
  int best_epoch = -1;  // -1 when no epoch ran (max_epochs == 0)
};

// Minimizes mean cross-entropy + l2_lambda * sum ||conv kernels||^2 with
// Adam. Stops after `patience` epochs without validation-loss improvement
// or at max_epochs, and restores the best-epoch weights. Deterministic
// given the seed: data order, init, and dropout masks all derive from it.
TrainedModel train(const std::vector<FeatureMatrix>& train_x,
                   const std::vector<int>& train_y,
                   const std::vector<FeatureMatrix>& val_x,
                   const std::vector<int>& val_y, const ModelConfig& mcfg,
                   const TrainConfig& tcfg);

// Class probabilities; dropout disabled, pure function of (weights, input).
std::vector<double> predict(const TrainedModel& model,
                            const FeatureMatrix& features);

double evaluate_accuracy(const TrainedModel& model,
                         const std::vector<FeatureMatrix>& features,
                         const std::vector<int>& labels);

// Mean cross-entropy of the model on a labeled set, computed through the
// same float path as training-time validation.
double validation_loss(const TrainedModel& model,
                       const std::vector<FeatureMatrix>& features,
                       const std::vector<int>& labels);

// Versioned binary checkpoint: magic, config block, named f32 tensors.
// Round-trips bit-exactly.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace usbt
