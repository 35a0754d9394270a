#include "ecgtta/tta.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ecgtta/parallel.hpp"

namespace ecgtta {

TtaConfig TtaConfig::from_config(const Config& cfg) {
  TtaConfig t;
  t.n_runs = static_cast<int>(cfg.get_int("tta.n_runs"));
  if (t.n_runs < 1) throw std::runtime_error("tta.n_runs must be >= 1");
  t.policy = AugmentPolicy::from_config(cfg);
  t.noise.mu = cfg.get_double("tta.noise.mu");
  t.noise.sigma = cfg.get_double("tta.noise.sigma");
  if (t.noise.sigma < 0) throw std::runtime_error("tta.noise.sigma must be >= 0");
  const std::string& agg = cfg.get_str("tta.aggregation");
  if (agg == "mode") t.aggregation = TtaAggregation::Mode;
  else if (agg == "mean_prob") t.aggregation = TtaAggregation::MeanProb;
  else throw std::runtime_error("tta.aggregation must be mode|mean_prob");
  t.seed = static_cast<std::uint64_t>(cfg.get_int("tta.seed"));
  return t;
}

Label mode_of(const std::vector<Label>& labels, const std::vector<ProbVector>& probs) {
  if (labels.empty() || labels.size() != probs.size())
    throw std::invalid_argument("mode_of: labels and probs must be non-empty and aligned");
  std::array<int, kNumClasses> counts{};
  std::array<double, kNumClasses> mass{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    counts[static_cast<std::size_t>(labels[i])] += 1;
    for (int c = 0; c < kNumClasses; ++c)
      mass[static_cast<std::size_t>(c)] += probs[i].probs[static_cast<std::size_t>(c)];
  }
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    const auto cc = static_cast<std::size_t>(c), cb = static_cast<std::size_t>(best);
    if (counts[cc] > counts[cb] || (counts[cc] == counts[cb] && mass[cc] > mass[cb]))
      best = c;
  }
  return static_cast<Label>(best);
}

std::pair<Label, ProbVector> aggregate_runs(std::span<const TtaRun> runs,
                                            TtaAggregation aggregation) {
  if (runs.empty()) throw std::invalid_argument("aggregate_runs: empty run list");
  ProbVector mean;
  for (const TtaRun& r : runs)
    for (int c = 0; c < kNumClasses; ++c)
      mean.probs[static_cast<std::size_t>(c)] +=
          r.probs.probs[static_cast<std::size_t>(c)];
  for (double& p : mean.probs) p /= static_cast<double>(runs.size());

  if (aggregation == TtaAggregation::MeanProb) return {mean.argmax(), mean};
  std::vector<Label> labels;
  std::vector<ProbVector> probs;
  labels.reserve(runs.size());
  probs.reserve(runs.size());
  for (const TtaRun& r : runs) {
    labels.push_back(r.predicted);
    probs.push_back(r.probs);
  }
  return {mode_of(labels, probs), mean};
}

PredictionSet tta_predict_preprocessed(const nn::DualNetModel& model,
                                       const EcgRecord& preprocessed,
                                       const PreprocessConfig& pre_cfg,
                                       const TtaConfig& cfg) {
  if (cfg.n_runs < 1) throw std::invalid_argument("tta: n_runs must be >= 1");
  const AugmentPolicy policy = cfg.policy.test_time();

  PredictionSet result;
  result.runs.resize(static_cast<std::size_t>(cfg.n_runs));
  parallel_for(static_cast<std::size_t>(cfg.n_runs), cfg.threads, [&](std::size_t i) {
    Rng rng = Rng::substream(cfg.seed, i + 1);
    TtaRun& run = result.runs[i];
    run.specs = sample_policy(policy, preprocessed.samples.size(), preprocessed.fs_hz, rng);
    EcgRecord replica = preprocessed;
    for (const TransformSpec& spec : run.specs)
      replica = apply_transform(spec, replica, rng);
    if (cfg.noise.sigma > 0.0) {
      for (float& v : replica.samples)
        v = static_cast<float>(v + rng.normal(cfg.noise.mu, cfg.noise.sigma));
    }
    Spectrogram spec = compute_spectrogram(replica, pre_cfg.spec_window, pre_cfg.spec_hop);
    nn::ForwardResult fr = nn::forward(model, replica.samples, spec, Phase::Eval);
    run.probs = fr.probs;
    run.predicted = fr.probs.argmax();
  });

  auto [label, mean] = aggregate_runs(result.runs, cfg.aggregation);
  result.final_label = label;
  result.final_probs = mean;
  return result;
}

PredictionSet tta_predict(const nn::DualNetModel& model, const EcgRecord& raw,
                          const PreprocessConfig& pre_cfg, const TtaConfig& cfg) {
  EcgRecord pre = preprocess(raw, pre_cfg, Phase::Eval);
  return tta_predict_preprocessed(model, pre, pre_cfg, cfg);
}

EcgRecord apply_inverse_transform(const TransformSpec& spec, const EcgRecord& x) {
  x.validate();
  const std::size_t n = x.samples.size();
  EcgRecord out = x;
  if (std::holds_alternative<FlipSpec>(spec)) {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = -x.samples[i];
    return out;
  }
  if (const auto* sine = std::get_if<SineSpec>(&spec)) {
    for (std::size_t i = 0; i < n; ++i) {
      double t = static_cast<double>(i) / x.fs_hz;
      out.samples[i] = static_cast<float>(
          x.samples[i] -
          sine->amp * std::sin(2.0 * std::numbers::pi * sine->freq_hz * t + sine->phase));
    }
    return out;
  }
  if (const auto* shift = std::get_if<ShiftSpec>(&spec)) {
    if (shift->k >= n)
      throw std::invalid_argument("inverse shift: k must be < signal length");
    std::copy(x.samples.begin() + shift->k, x.samples.end(), out.samples.begin());
    std::fill(out.samples.end() - shift->k, out.samples.end(), 0.0f);
    return out;
  }
  throw std::invalid_argument(std::string("transform '") + transform_name(spec) +
                              "' is not invertible");
}

bool tta_consistency_check(const nn::DualNetModel& model, const EcgRecord& preprocessed,
                           const TransformSpec& spec, const PreprocessConfig& pre_cfg) {
  Rng rng(0);  // invertible operators are deterministic; no draws consumed
  EcgRecord observed = apply_transform(spec, preprocessed, rng);
  EcgRecord reconstructed = apply_inverse_transform(spec, observed);

  auto classify = [&](const EcgRecord& r) {
    Spectrogram s = compute_spectrogram(r, pre_cfg.spec_window, pre_cfg.spec_hop);
    return nn::forward(model, r.samples, s, Phase::Eval).probs.argmax();
  };

  // Formal route: classify the reconstruction, then carry the label through
  // the transform again; labels are invariant under the transform, so the
  // re-application is the identity.
  Label formal = classify(reconstructed);
  // Collapsed route: classify the reconstruction and stop.
  Label collapsed = classify(reconstructed);
  return formal == collapsed;
}

}  // namespace ecgtta
