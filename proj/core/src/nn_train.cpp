#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ecgtta/graph.hpp"
#include "ecgtta/nn.hpp"
#include "ecgtta/nn_forward.hpp"
#include "ecgtta/parallel.hpp"
#include "ecgtta/rng.hpp"

namespace ecgtta::nn {

namespace {

constexpr double kBnMomentum = 0.1;
constexpr double kGaussianBalanceSigmaRel = 0.05;
constexpr int kSmoteNeighbours = 5;

// Substream roles within a training seed.
enum : std::uint64_t { kSubInit = 0, kSubBalance = 1, kSubShuffle = 2, kSubRecord = 3 };

struct RecordPass {
  double loss = 0.0;
  bool correct = false;
  std::vector<double> grad;
  std::vector<BnSpatialStat> bn_stats;
};

RecordPass record_backward(const DualNetModel& m, std::span<const float> signal,
                           const Spectrogram& spec, Label label, Rng* rng,
                           bool want_stats) {
  Graph g(true);
  RecordPass rp;
  BuiltForward bf = build_forward(g, m, signal, spec, Phase::Train, rng,
                                  want_stats ? &rp.bn_stats : nullptr);
  Graph::NodeId loss = g.scale(
      g.log(g.clamp_min(g.pick(bf.probs, static_cast<int>(label)), 1e-12)), -1.0);
  rp.loss = g.value(loss).data[0];
  const Tensor& probs = g.value(bf.probs);
  int best = 0;
  for (int i = 1; i < kNumClasses; ++i)
    if (probs.data[static_cast<std::size_t>(i)] > probs.data[static_cast<std::size_t>(best)])
      best = i;
  rp.correct = static_cast<Label>(best) == label;
  rp.grad.assign(static_cast<std::size_t>(m.n_params), 0.0);
  g.backward(loss, rp.grad);
  return rp;
}

}  // namespace

BackwardResult backward(const DualNetModel& model, std::span<const BatchItem> batch,
                        std::uint64_t dropout_seed) {
  if (batch.empty()) throw std::invalid_argument("backward: empty batch");
  BackwardResult out;
  out.grad.assign(static_cast<std::size_t>(model.n_params), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Rng rng = Rng::substream(dropout_seed, i);
    RecordPass rp = record_backward(model, batch[i].signal, *batch[i].spec,
                                    batch[i].label, &rng, false);
    if (!std::isfinite(rp.loss))
      throw std::runtime_error("backward: non-finite loss at batch index " +
                               std::to_string(i));
    out.mean_loss += rp.loss * inv_n;
    out.correct += rp.correct ? 1 : 0;
    for (std::size_t j = 0; j < rp.grad.size(); ++j) out.grad[j] += rp.grad[j] * inv_n;
  }
  return out;
}

TrainResult train(const std::vector<EcgRecord>& dataset, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg, const AugmentPolicy& policy,
                  const PreprocessConfig& pre_cfg) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  for (const EcgRecord& r : dataset) {
    if (!r.label) throw std::invalid_argument("train: unlabelled record '" + r.id + "'");
    if (static_cast<int>(r.samples.size()) != pre_cfg.target_len)
      throw std::invalid_argument("train: record '" + r.id +
                                  "' is not preprocessed to target_len");
  }
  if (train_cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(train_cfg.lr > 0)) throw std::invalid_argument("train: learning_rate must be > 0");

  std::vector<EcgRecord> data = dataset;
  if (train_cfg.balance == Balance::Smote) {
    Rng rng = Rng::substream(train_cfg.seed, kSubBalance);
    data = smote_balance(data, kSmoteNeighbours, rng);
  } else if (train_cfg.balance == Balance::Gaussian) {
    Rng rng = Rng::substream(train_cfg.seed, kSubBalance);
    data = gaussian_balance(data, kGaussianBalanceSigmaRel, rng);
  }
  const std::size_t n = data.size();

  const int frames = (pre_cfg.target_len - pre_cfg.spec_window) / pre_cfg.spec_hop + 1;
  const int bins = pre_cfg.spec_window / 2 + 1;
  TrainResult result;
  for (const EcgRecord& r : data)
    result.balanced_counts[static_cast<std::size_t>(*r.label)] += 1;
  result.model = init_model(model_cfg, pre_cfg.target_len, frames, bins,
                            Rng::derive(train_cfg.seed, kSubInit));
  DualNetModel& model = result.model;

  // Batch-norm buffers in forward order.
  std::vector<std::pair<std::size_t, std::size_t>> bn_buffers;
  for (std::size_t i = 0; i < model.tensors.size(); ++i) {
    const std::string& name = model.tensors[i].name;
    if (name.size() > 9 && name.compare(name.size() - 9, 9, ".run_mean") == 0)
      bn_buffers.emplace_back(i, model.by_name.at(name.substr(0, name.size() - 9) +
                                                  ".run_var"));
  }

  std::vector<double> flat = model.flat_params();
  std::vector<double> adam_m(flat.size(), 0.0), adam_v(flat.size(), 0.0);
  long step = 0;

  for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng = Rng::substream(Rng::derive(train_cfg.seed, kSubShuffle),
                                     static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);

    double epoch_loss = 0.0;
    std::size_t epoch_correct = 0;

    for (std::size_t batch_start = 0; batch_start < n;
         batch_start += static_cast<std::size_t>(train_cfg.batch_size)) {
      const std::size_t batch_n =
          std::min(static_cast<std::size_t>(train_cfg.batch_size), n - batch_start);

      std::vector<const EcgRecord*> batch_records(batch_n);
      for (std::size_t b = 0; b < batch_n; ++b)
        batch_records[b] = &data[order[batch_start + b]];
      std::vector<EcgRecord> donor_pool;
      if (train_cfg.augment) {
        donor_pool.reserve(batch_n);
        for (const EcgRecord* r : batch_records) donor_pool.push_back(*r);
      }

      std::vector<RecordPass> passes(batch_n);
      const std::uint64_t epoch_seed =
          Rng::derive(Rng::derive(train_cfg.seed, kSubRecord),
                      static_cast<std::uint64_t>(epoch));
      parallel_for(batch_n, train_cfg.threads, [&](std::size_t b) {
        const std::size_t global_index = batch_start + b;
        Rng rng = Rng::substream(epoch_seed, global_index);
        const EcgRecord* rec = batch_records[b];
        EcgRecord augmented;
        if (train_cfg.augment) {
          augmented = augment_record(*rec, policy, rng, &donor_pool);
          rec = &augmented;
        }
        Spectrogram spec =
            compute_spectrogram(*rec, pre_cfg.spec_window, pre_cfg.spec_hop);
        passes[b] = record_backward(model, rec->samples, spec, *rec->label, &rng, true);
      });

      // Deterministic reductions in record order.
      std::vector<double> grad(flat.size(), 0.0);
      const double inv_b = 1.0 / static_cast<double>(batch_n);
      for (const RecordPass& rp : passes) {
        if (!std::isfinite(rp.loss))
          throw std::runtime_error("train: diverged (non-finite loss) at epoch " +
                                   std::to_string(epoch));
        epoch_loss += rp.loss;
        epoch_correct += rp.correct ? 1 : 0;
        for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += rp.grad[j] * inv_b;
      }

      ++step;
      const double bc1 = 1.0 - std::pow(train_cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(train_cfg.beta2, static_cast<double>(step));
      for (std::size_t j = 0; j < flat.size(); ++j) {
        double g = grad[j] + train_cfg.weight_decay * flat[j];
        adam_m[j] = train_cfg.beta1 * adam_m[j] + (1.0 - train_cfg.beta1) * g;
        adam_v[j] = train_cfg.beta2 * adam_v[j] + (1.0 - train_cfg.beta2) * g * g;
        flat[j] -= train_cfg.lr * (adam_m[j] / bc1) /
                   (std::sqrt(adam_v[j] / bc2) + train_cfg.eps);
      }
      model.set_flat_params(flat);
      // set_flat_params quantizes to binary32; keep the optimizer state in
      // sync with what the model actually holds.
      flat = model.flat_params();

      for (const RecordPass& rp : passes) {
        if (rp.bn_stats.size() != bn_buffers.size())
          throw std::logic_error("train: batch-norm layer count mismatch");
        for (std::size_t l = 0; l < bn_buffers.size(); ++l) {
          Tensor& rm = model.tensors[bn_buffers[l].first].tensor;
          Tensor& rv = model.tensors[bn_buffers[l].second].tensor;
          for (std::size_t c = 0; c < rm.size(); ++c) {
            rm.data[c] = (1.0 - kBnMomentum) * rm.data[c] +
                         kBnMomentum * rp.bn_stats[l].mean[c];
            rv.data[c] = (1.0 - kBnMomentum) * rv.data[c] +
                         kBnMomentum * rp.bn_stats[l].var[c];
          }
        }
      }
    }

    // Running statistics stay binary32-representable like the parameters.
    for (auto [mi, vi] : bn_buffers) {
      for (double& v : model.tensors[mi].tensor.data)
        v = static_cast<double>(static_cast<float>(v));
      for (double& v : model.tensors[vi].tensor.data)
        v = static_cast<double>(static_cast<float>(v));
    }

    result.metrics.push_back({epoch, epoch_loss / static_cast<double>(n),
                              static_cast<double>(epoch_correct) / static_cast<double>(n)});
  }
  return result;
}

TrainConfig TrainConfig::from_config(const Config& cfg) {
  TrainConfig t;
  t.epochs = static_cast<int>(cfg.get_int("train.epochs"));
  t.batch_size = static_cast<int>(cfg.get_int("train.batch_size"));
  t.lr = cfg.get_double("train.lr");
  t.beta1 = cfg.get_double("train.beta1");
  t.beta2 = cfg.get_double("train.beta2");
  t.eps = cfg.get_double("train.eps");
  t.weight_decay = cfg.get_double("train.weight_decay");
  t.augment = cfg.get_bool("train.augment");
  const std::string& bal = cfg.get_str("train.balance");
  if (bal == "none") t.balance = Balance::None;
  else if (bal == "smote") t.balance = Balance::Smote;
  else if (bal == "gaussian") t.balance = Balance::Gaussian;
  else throw std::runtime_error("train.balance must be none|smote|gaussian");
  t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed"));
  return t;
}

}  // namespace ecgtta::nn
