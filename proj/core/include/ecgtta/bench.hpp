#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ecgtta/augment.hpp"
#include "ecgtta/nn.hpp"
#include "ecgtta/preprocess.hpp"
#include "ecgtta/tta.hpp"
#include "ecgtta/types.hpp"

namespace ecgtta::bench {

enum class SweepKind { Drop, Mask, Snr };

const char* sweep_kind_name(SweepKind k);

struct SweepConfig {
  SweepKind kind = SweepKind::Drop;
  // Perturbation intensities: drop rates ascending in [0,1], mask lengths in
  // samples ascending, or SNR in dB descending (+inf encodes the no-op).
  std::vector<double> grid;
  int repeats = 10;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

struct SweepResult {
  SweepKind kind = SweepKind::Drop;
  std::vector<double> grid;
  std::vector<std::vector<double>> raw;  // [grid point][repeat] accuracy
  std::vector<double> mean;
  std::vector<double> stddev;  // population std
};

// (truth, prediction) pairs from plain eval-phase inference.
std::vector<std::pair<Label, Label>> evaluate_plain(
    const nn::DualNetModel& model, const std::vector<EcgRecord>& test_pre,
    const PreprocessConfig& pre_cfg, int threads);

// For each grid intensity and repeat, perturbs every test record with the
// designated operator (positions and noise freshly seeded per record) and
// measures plain-inference binary accuracy. The model and the test set are
// never mutated.
SweepResult robustness_sweep(const nn::DualNetModel& model,
                             const std::vector<EcgRecord>& test_pre,
                             const PreprocessConfig& pre_cfg, const SweepConfig& cfg);

struct TtaCurvePoint {
  int n = 0;  // 0 means plain inference
  std::vector<double> raw_f1;
  double mean = 0.0;
  double stddev = 0.0;
};

// Binary-AF F1 as a function of the Monte Carlo run count, with `repeats`
// fresh TTA seeds per N plus the N = 0 plain-inference row. Replica streams
// extend across N, so every row of one repeat shares one set of runs.
std::vector<TtaCurvePoint> tta_curve(const nn::DualNetModel& model,
                                     const std::vector<EcgRecord>& test_pre,
                                     const PreprocessConfig& pre_cfg,
                                     const AugmentPolicy& policy,
                                     const std::vector<int>& n_grid, int repeats,
                                     std::uint64_t seed, int threads);

struct CompareResult {
  nn::DualNetModel model_augment_on;
  nn::DualNetModel model_augment_off;
  std::vector<SweepResult> augment_on;
  std::vector<SweepResult> augment_off;
};

// Trains two models differing only in the augment flag (same seed) and runs
// the same sweeps on both.
CompareResult compare_training(const std::vector<EcgRecord>& train_pre,
                               const std::vector<EcgRecord>& test_pre,
                               const nn::ModelConfig& model_cfg,
                               const nn::TrainConfig& train_cfg,
                               const AugmentPolicy& policy,
                               const PreprocessConfig& pre_cfg,
                               std::span<const SweepConfig> sweeps);

// Writes sweep.csv (kind,intensity,repeat,accuracy), summary.csv
// (kind,intensity,mean,std) and an SVG error-bar plot. Byte-reproducible.
void report(const SweepResult& result, const std::filesystem::path& out_dir);

// Writes ttacurve.csv (n,repeat,f1), ttacurve_summary.csv (n,mean_f1,std_f1)
// and ttacurve.svg.
void report_tta(const std::vector<TtaCurvePoint>& curve,
                const std::filesystem::path& out_dir);

}  // namespace ecgtta::bench
