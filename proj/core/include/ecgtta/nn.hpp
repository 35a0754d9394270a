#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ecgtta/augment.hpp"
#include "ecgtta/config.hpp"
#include "ecgtta/preprocess.hpp"
#include "ecgtta/tensor.hpp"
#include "ecgtta/types.hpp"

namespace ecgtta::nn {

struct ModelConfig {
  int d_model = 64;
  int n_heads = 2;
  int n_transformer_blocks = 2;
  int ffn_mult = 2;
  int patch_len = 50;
  std::vector<int> spec_channels = {8, 16};  // one residual block per entry
  int axial_blocks = 3;
  int axial_channels = 32;
  int n_classes = 4;
  double dropout = 0.1;

  static ModelConfig from_config(const Config& cfg);
  void validate(int input_len) const;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

class ForwardPlan;

// Two-branch classifier: a transformer encoder over signal patches whose
// pooled latent conditions (via conditional batch normalization) a
// convolutional + axial-attention encoder over the spectrogram; the two
// d_model vectors are summed and classified by an affine softmax head.
//
// Parameters and batch-norm running statistics live in `tensors` in a fixed
// registration order; trainable tensors also occupy a contiguous slice of
// the flat parameter/gradient vector at `grad_offset`. Values are kept
// binary32-representable so the model file round-trips exactly.
struct DualNetModel {
  ModelConfig cfg;
  int input_len = 0;
  int spec_frames = 0;
  int spec_bins = 0;
  std::vector<NamedTensor> tensors;
  std::map<std::string, std::size_t> by_name;
  std::vector<int> grad_offset;  // per tensor; -1 for non-trainable buffers
  int n_params = 0;
  std::shared_ptr<const ForwardPlan> plan;  // geometry-derived, shared on copy

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> flat);  // quantizes to binary32
};

DualNetModel init_model(const ModelConfig& cfg, int input_len, int spec_frames,
                        int spec_bins, std::uint64_t seed);

struct ForwardResult {
  ProbVector probs;
  std::vector<double> latent;       // signal-branch latent (d_model)
  std::vector<double> spec_latent;  // spectrogram-branch output (d_model)
};

// Runs the network on one preprocessed record. Eval phase is deterministic:
// dropout off, batch norm driven by the running statistics. Train phase uses
// per-record spatial statistics and needs an rng when dropout > 0.
ForwardResult forward(const DualNetModel& model, std::span<const float> signal,
                      const Spectrogram& spec, Phase phase, Rng* dropout_rng = nullptr);

// -ln(prob of the true class), probability floored at 1e-12.
double cross_entropy(const ProbVector& probs, Label label);

struct BatchItem {
  std::span<const float> signal;
  const Spectrogram* spec = nullptr;
  Label label = Label::Normal;
};

struct BackwardResult {
  double mean_loss = 0.0;
  std::vector<double> grad;  // d(mean loss)/d(theta), flat layout
  int correct = 0;
};

// Exact reverse-mode gradients of the mean batch loss (train phase).
// dropout_seed feeds per-record dropout substreams; irrelevant when the
// model's dropout rate is 0.
BackwardResult backward(const DualNetModel& model, std::span<const BatchItem> batch,
                        std::uint64_t dropout_seed = 0);

enum class Balance { None, Smote, Gaussian };

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  bool augment = true;
  Balance balance = Balance::None;
  std::uint64_t seed = 1;
  int threads = 1;

  static TrainConfig from_config(const Config& cfg);
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  DualNetModel model;
  std::vector<EpochMetrics> metrics;
  std::array<std::size_t, 4> balanced_counts{};  // class histogram after balancing
};

// Adam training over a preprocessed, labelled dataset. Balancing (if any)
// is applied once up front; augmentation (if on) is re-sampled for every
// record every epoch. Deterministic for a fixed seed, independent of the
// thread count. Throws on divergence (non-finite loss).
TrainResult train(const std::vector<EcgRecord>& dataset, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg, const AugmentPolicy& policy,
                  const PreprocessConfig& pre_cfg);

// Model file: magic "DNW1", u32 tensor count, per tensor (u16 name length,
// name, u8 rank, rank x u32 dims, row-major binary32 LE data), then u32
// config-blob length and the config as key=value text.
void save_model(const DualNetModel& model, const std::filesystem::path& path);
DualNetModel load_model(const std::filesystem::path& path);

// --- exposed for tests ------------------------------------------------------

// Single-head self-attention over a [T, C] sequence with the given
// projection tensors; used by the axial-equivalence property test.
Tensor reference_attention(const Tensor& seq, const Tensor& wq, const Tensor& bq,
                           const Tensor& wk, const Tensor& bk, const Tensor& wv,
                           const Tensor& bv, const Tensor& wo, const Tensor& bo);

// The axial-attention stage in isolation on a [C, h*w] map with explicit
// weights; time_axis selects factorization along h (one sequence per column)
// versus along w.
Tensor axial_attention_for_test(const Tensor& map, int h, int w, bool time_axis,
                                const Tensor& wq, const Tensor& bq, const Tensor& wk,
                                const Tensor& bk, const Tensor& wv, const Tensor& bv,
                                const Tensor& wo, const Tensor& bo);

}  // namespace ecgtta::nn
