#pragma once

#include <cstdint>
#include <vector>

#include "ecgtta/augment.hpp"
#include "ecgtta/config.hpp"
#include "ecgtta/nn.hpp"
#include "ecgtta/preprocess.hpp"
#include "ecgtta/types.hpp"

namespace ecgtta {

enum class TtaAggregation { Mode, MeanProb };

struct TtaConfig {
  int n_runs = 25;
  AugmentPolicy policy;  // CutMix is force-disabled at predict time
  NoiseSpec noise;       // acquisition-noise resampling; sigma 0 disables
  TtaAggregation aggregation = TtaAggregation::Mode;
  std::uint64_t seed = 1;
  int threads = 1;

  static TtaConfig from_config(const Config& cfg);
};

struct TtaRun {
  std::vector<TransformSpec> specs;
  ProbVector probs;
  Label predicted;
};

struct PredictionSet {
  std::vector<TtaRun> runs;
  Label final_label = Label::Normal;
  ProbVector final_probs;
};

// Most frequent label; ties broken by the highest probability mass summed
// across all runs, then by canonical class order. Throws on empty input.
Label mode_of(const std::vector<Label>& labels, const std::vector<ProbVector>& probs);

// Final (label, mean probabilities) for a window of replica runs; the same
// aggregation tta_predict applies to its full run list.
std::pair<Label, ProbVector> aggregate_runs(std::span<const TtaRun> runs,
                                            TtaAggregation aggregation);

// Monte Carlo test-time augmentation: replica n (1-based) draws its operator
// combination and acquisition noise from the substream (seed, n), perturbs
// the preprocessed signal, recomputes the spectrogram and runs eval-phase
// inference; the final label aggregates the N predictions by mode (or by the
// argmax of the mean probabilities). Bit-reproducible for a fixed seed and
// any thread count, and replica results for n <= N are a prefix of those for
// a larger N under the same seed.
PredictionSet tta_predict(const nn::DualNetModel& model, const EcgRecord& raw,
                          const PreprocessConfig& pre_cfg, const TtaConfig& cfg);

// Same engine on an already-preprocessed record.
PredictionSet tta_predict_preprocessed(const nn::DualNetModel& model,
                                       const EcgRecord& preprocessed,
                                       const PreprocessConfig& pre_cfg,
                                       const TtaConfig& cfg);

// Inverse of the invertible operators (Flip, Sine, Shift with k < L); all
// others throw. apply then apply_inverse recovers the signal exactly on the
// overlap region (the whole signal for Flip and Sine).
EcgRecord apply_inverse_transform(const TransformSpec& spec, const EcgRecord& x);

// Checks, for one invertible spec, that the formal route of the transform
// model (reconstruct the unperturbed signal via the inverse, classify, carry
// the label through the transform again) yields the same label as the
// collapsed classification route that skips the output transform.
bool tta_consistency_check(const nn::DualNetModel& model, const EcgRecord& preprocessed,
                           const TransformSpec& spec, const PreprocessConfig& pre_cfg);

}  // namespace ecgtta
