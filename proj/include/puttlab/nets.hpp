#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "puttlab/autodiff.hpp"
#include "puttlab/waveform.hpp"

namespace puttlab::nets {

enum class Variant { approach, putt };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Architecture hyperparameters. Both networks are time-domain U-Nets built
// from CBP units (conv + batch norm + PReLU); the putt variant adds a stack
// of dilated dense blocks at full resolution, a Bi-LSTM bottleneck, and
// sub-pixel upsampling, while the approach variant unpools with transposed
// convolutions and has neither LSTM nor dense blocks.
struct ArchConfig {
  int depth = 5;
  std::vector<int> channels = {16, 32, 64, 128, 256};
  int kernel_size = 5;
  int pool_stride = 2;
  int lstm_layers = 2;
  int lstm_hidden = 0;  // 0 means "bottleneck channel count"
  int dense_blocks = 3;
  std::vector<int> dense_dilations = {1, 2, 4};
  Variant variant = Variant::putt;

  // Input lengths must be divisible by pool_stride^depth.
  std::int64_t alignment() const;
  int bottleneck_channels() const { return channels.back(); }
  int lstm_hidden_or_default() const { return lstm_hidden > 0 ? lstm_hidden : channels.back(); }
  int input_channels() const { return variant == Variant::putt ? 2 : 1; }
  void validate() const;

  static ArchConfig approach_default();
  static ArchConfig putt_default();
};

struct TensorData {
  ad::Shape shape;
  std::vector<double> data;
};

constexpr std::uint32_t kCheckpointVersion = 1;

struct ModelParams {
  ArchConfig arch;
  std::map<std::string, TensorData> tensors;
  std::uint32_t version = kCheckpointVersion;
};

// One parameter or buffer slot implied by an ArchConfig, in construction order.
struct ParamSlot {
  std::string name;
  ad::Shape shape;
  enum class Init { uniform, zero, one, prelu_alpha } init = Init::zero;
  std::int64_t fan_in = 1;
};

std::vector<ParamSlot> param_slots(const ArchConfig& arch);

// Running-statistics buffers are state, not parameters; they are excluded
// from gradients and optimizer updates but kept in checkpoints.
bool is_trainable(const std::string& name);

// Weights ~ U(-b, b) with b = sqrt(1/fan_in); biases zero; PReLU alpha 0.25;
// batch-norm gamma/var one, beta/mean zero. Deterministic per seed.
ModelParams init_params(const ArchConfig& arch, std::uint64_t seed);

// Builds the network graph over previously bound leaf tensors. `buffers`
// supplies the batch-norm running statistics by slot name; in train mode
// they are updated in place.
ad::Tensor forward_graph(const ArchConfig& arch,
                         const std::map<std::string, ad::Tensor>& leaves,
                         const std::map<std::string, std::vector<double>*>& buffers,
                         const ad::Tensor& input, ad::BnMode mode);

// Inference-side handle: owns a parameter snapshot, binds the graph leaves
// once, and runs batch norm in eval mode. Safe for concurrent forward calls.
class Model {
 public:
  explicit Model(ModelParams params);

  const ArchConfig& arch() const { return params_.arch; }
  Variant role() const { return params_.arch.variant; }

  // Sp(x); requires the approach role.
  signal::Waveform approach(const signal::Waveform& x) const;
  // Raw artifact prediction (the putt network output); requires the putt role.
  signal::Waveform putt_artifact(const signal::Waveform& enhanced,
                                 const signal::Waveform& noisy) const;
  // enhanced - putt_artifact(enhanced, noisy)
  signal::Waveform apply_putt(const signal::Waveform& enhanced,
                              const signal::Waveform& noisy) const;

 private:
  ad::Tensor run(const ad::Tensor& input) const;
  void check_aligned(std::size_t len) const;

  ModelParams params_;
  std::map<std::string, ad::Tensor> leaves_;
  std::map<std::string, std::vector<double>*> buffers_;
};

// Spec-shaped conveniences; they bind a fresh Model per call.
signal::Waveform approach_forward(const ModelParams& params, const signal::Waveform& x);
signal::Waveform putt_forward(const ModelParams& params, const signal::Waveform& enhanced,
                              const signal::Waveform& noisy);
signal::Waveform apply_putt(const ModelParams& params, const signal::Waveform& enhanced,
                            const signal::Waveform& noisy);

}  // namespace puttlab::nets
