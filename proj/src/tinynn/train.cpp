#include "polysketch/tinynn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "polysketch/error.hpp"
#include "polysketch/io.hpp"

namespace polysketch::tinynn {

namespace fs = std::filesystem;
using nlohmann::json;

Optimizer parse_optimizer(const std::string& name) {
  if (name == "adam") return Optimizer::adam;
  if (name == "sgd") return Optimizer::sgd;
  throw ValidationError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

std::string to_string(Optimizer optimizer) { return optimizer == Optimizer::adam ? "adam" : "sgd"; }

void TrainConfig::validate() const {
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate must be a non-negative number");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(epochs >= 1, "epochs must be at least 1");
}

OptimizerState::OptimizerState(Optimizer kind, double learning_rate, const Parameters<float>& shape_like)
    : kind_(kind), learning_rate_(learning_rate) {
  if (kind_ == Optimizer::adam) {
    for (const auto& t : shape_like.tensors) {
      first_moment_.tensors.emplace_back(t.size(), 0.0f);
      second_moment_.tensors.emplace_back(t.size(), 0.0f);
    }
  }
}

void OptimizerState::step(Parameters<float>& params, const Parameters<float>& grads) {
  ++steps_;
  if (kind_ == Optimizer::sgd) {
    const auto lr = static_cast<float>(learning_rate_);
    for (std::size_t t = 0; t < params.tensors.size(); ++t)
      for (std::size_t i = 0; i < params.tensors[t].size(); ++i) params.tensors[t][i] -= lr * grads.tensors[t][i];
    return;
  }
  constexpr float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;
  const double step = static_cast<double>(steps_);
  const auto correction1 = static_cast<float>(1.0 - std::pow(0.9, step));
  const auto correction2 = static_cast<float>(1.0 - std::pow(0.999, step));
  const auto lr = static_cast<float>(learning_rate_);
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    auto& p = params.tensors[t];
    const auto& g = grads.tensors[t];
    auto& m = first_moment_.tensors[t];
    auto& v = second_moment_.tensors[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
      const float m_hat = m[i] / correction1;
      const float v_hat = v[i] / correction2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

std::size_t select_checkpoint(std::span<const double> val_losses) {
  require(!val_losses.empty(), "select_checkpoint: no validation losses");
  std::size_t best = 0;
  for (std::size_t i = 1; i < val_losses.size(); ++i)
    if (val_losses[i] < val_losses[best]) best = i;
  return best;
}

namespace {

template <typename Fn>
void for_each_batch(const ImageDataset& set, std::size_t batch_size, Fn&& fn) {
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    rows.resize(std::min(batch_size, set.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    fn(std::span<const std::size_t>(rows));
  }
}

void check_compatible(const CnnConfig& cfg, const ImageDataset& set, const char* which) {
  require(set.channels == cfg.in_channels && set.height == cfg.height && set.width == cfg.width,
          std::string(which) + " images do not match the model input shape");
  for (auto l : set.labels) require(l < cfg.num_classes, std::string(which) + " label exceeds the model's class count");
}

}  // namespace

double dataset_loss(const CnnModel<float>& model, const ImageDataset& set, std::size_t batch_size) {
  require(set.size() > 0, "dataset_loss: empty dataset");
  double total = 0.0;
  for_each_batch(set, batch_size, [&](std::span<const std::size_t> rows) {
    const auto labels = set.batch_labels(rows);
    total += static_cast<double>(batch_loss(model, set.batch<float>(rows), labels)) * static_cast<double>(rows.size());
  });
  return total / static_cast<double>(set.size());
}

double dataset_accuracy(const CnnModel<float>& model, const ImageDataset& set, std::size_t batch_size) {
  require(set.size() > 0, "dataset_accuracy: empty dataset");
  std::size_t correct = 0;
  for_each_batch(set, batch_size, [&](std::span<const std::size_t> rows) {
    const auto predicted = predict(model, set.batch<float>(rows));
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (predicted[i] == set.labels[rows[i]]) ++correct;
  });
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

TrainResult train(CnnModel<float> model, const ImageDataset& train_set, const ImageDataset& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  require(val_set.size() > 0, "train: validation set is empty");
  require(config.batch_size <= train_set.size(), "train: batch_size " + std::to_string(config.batch_size) +
                                                     " exceeds the training set size " +
                                                     std::to_string(train_set.size()));
  check_compatible(model.config(), train_set, "training");
  check_compatible(model.config(), val_set, "validation");

  TrainResult result;
  Rng rng(config.seed);
  OptimizerState optimizer(config.optimizer, config.learning_rate, model.parameters());
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(config.batch_size, order.size() - start));
      const auto labels = train_set.batch_labels(rows);
      auto step = backward(model, train_set.batch<float>(rows), labels);
      result.train_loss.push_back(static_cast<double>(step.loss));
      optimizer.step(model.parameters(), step.gradients);
    }
    const double val_loss = dataset_loss(model, val_set);
    require(std::isfinite(val_loss), "train: validation loss diverged at epoch " + std::to_string(epoch));
    result.val_loss.push_back(val_loss);
    if (epoch == 1 || val_loss < result.best.val_loss) result.best = {epoch, model, val_loss};
    if (on_epoch && !on_epoch(epoch, model)) break;
  }
  return result;
}

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto& cfg = checkpoint.model.config();
  json meta = {{"version", 1},
               {"architecture",
                {{"in_channels", cfg.in_channels},
                 {"height", cfg.height},
                 {"width", cfg.width},
                 {"base_filters", cfg.base_filters},
                 {"num_classes", cfg.num_classes},
                 {"blocks", cfg.blocks},
                 {"kernel", 3},
                 {"stride", 1},
                 {"padding", 1},
                 {"pool", 2}}},
               {"parameter_order", parameter_names(cfg)},
               {"epoch", checkpoint.epoch},
               {"val_loss", checkpoint.val_loss}};
  io::write_text(dir / "model.json", meta.dump(2) + "\n");
  std::vector<float> payload;
  for (const auto& t : checkpoint.model.parameters().tensors) payload.insert(payload.end(), t.begin(), t.end());
  io::write_f32(dir / "params.f32", payload);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  for (const auto& p : {dir / "model.json", dir / "params.f32"})
    if (!fs::exists(p)) throw IoError("missing " + p.string());
  CnnConfig cfg;
  Checkpoint ckpt;
  try {
    const auto meta = json::parse(io::read_text(dir / "model.json"));
    require(meta.at("version").get<int>() == 1, "unsupported model.json version");
    const auto& arch = meta.at("architecture");
    cfg.in_channels = arch.at("in_channels").get<std::size_t>();
    cfg.height = arch.at("height").get<std::size_t>();
    cfg.width = arch.at("width").get<std::size_t>();
    cfg.base_filters = arch.at("base_filters").get<std::size_t>();
    cfg.num_classes = arch.at("num_classes").get<std::size_t>();
    cfg.blocks = arch.at("blocks").get<std::size_t>();
    ckpt.epoch = meta.at("epoch").get<std::size_t>();
    ckpt.val_loss = meta.at("val_loss").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError((dir / "model.json").string() + ": " + e.what());
  }
  ckpt.model = CnnModel<float>(cfg);
  const auto payload = io::read_f32(dir / "params.f32");
  require(payload.size() == ckpt.model.parameters().count(), "size mismatch: params.f32 does not match the architecture");
  std::size_t offset = 0;
  for (auto& t : ckpt.model.parameters().tensors) {
    std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.begin());
    offset += t.size();
  }
  return ckpt;
}

}  // namespace polysketch::tinynn
