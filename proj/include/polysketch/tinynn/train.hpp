#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "polysketch/tinynn/cnn.hpp"
#include "polysketch/tinynn/dataset.hpp"

namespace polysketch::tinynn {

enum class Optimizer { sgd, adam };

Optimizer parse_optimizer(const std::string& name);
std::string to_string(Optimizer optimizer);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 16;
  std::size_t epochs = 35;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;

  void validate() const;
};

struct Checkpoint {
  std::size_t epoch = 0;  // 1-based
  CnnModel<float> model;
  double val_loss = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<double> train_loss;  // one entry per optimizer step
  std::vector<double> val_loss;    // one entry per epoch
};

// Return false to stop after this epoch. Epochs are 1-based.
using EpochCallback = std::function<bool(std::size_t epoch, const CnnModel<float>& model)>;

/// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8, or plain SGD.
class OptimizerState {
public:
  OptimizerState(Optimizer kind, double learning_rate, const Parameters<float>& shape_like);
  void step(Parameters<float>& params, const Parameters<float>& grads);

private:
  Optimizer kind_;
  double learning_rate_;
  std::size_t steps_ = 0;
  Parameters<float> first_moment_;
  Parameters<float> second_moment_;
};

// Index of the smallest value, earliest on ties.
std::size_t select_checkpoint(std::span<const double> val_losses);

/// Mini-batch training at 32-bit. Each epoch reshuffles the training rows
/// with a generator seeded once from config.seed; the trailing partial batch
/// is kept. The returned checkpoint is the epoch with the lowest validation
/// loss.
TrainResult train(CnnModel<float> model, const ImageDataset& train_set, const ImageDataset& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

double dataset_loss(const CnnModel<float>& model, const ImageDataset& set, std::size_t batch_size = 64);
double dataset_accuracy(const CnnModel<float>& model, const ImageDataset& set, std::size_t batch_size = 64);

// `model.json` with the architecture plus `params.f32`, tensors concatenated
// in parameter_names() order.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace polysketch::tinynn
