#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ecgtta/config.hpp"
#include "ecgtta/rng.hpp"
#include "ecgtta/types.hpp"

namespace ecgtta {

// Concrete sampled transformation parameters, one alternative per operator.
// The canonical composition order is the declaration order below.
struct DropSpec { double rate = 0.0; };
struct MaskSpec { std::size_t start = 0, len = 0; };
struct ShiftSpec { std::size_t k = 0; };
struct SineSpec { double amp = 0.0, freq_hz = 0.0, phase = 0.0; };
struct BandPassSpec { double low_hz = 0.0, high_hz = 0.0; };
struct CutMixSpec { std::size_t start = 0, len = 0; std::string donor_id; };
struct FlipSpec {};
struct NoiseOpSpec { double snr_db = 0.0; };

using TransformSpec = std::variant<DropSpec, MaskSpec, ShiftSpec, SineSpec,
                                   BandPassSpec, CutMixSpec, FlipSpec, NoiseOpSpec>;

const char* transform_name(const TransformSpec& spec);

// Gaussian acquisition-noise parameters.
struct NoiseSpec {
  double mu = 0.0;
  double sigma = 0.0;
};

struct ParamRange {
  double lo = 0.0, hi = 0.0;
};

// Per-operator inclusion probabilities and uniform parameter ranges.
// Lengths (mask/shift/cut) are expressed as fractions of the signal length
// and concretized when a policy is sampled against a signal.
struct AugmentPolicy {
  double drop_prob = 0.3;
  ParamRange drop_rate{0.0, 0.1};
  double mask_prob = 0.3;
  ParamRange mask_frac{0.0, 0.1};
  double shift_prob = 0.3;
  ParamRange shift_frac{0.0, 0.1};
  double sine_prob = 0.3;
  ParamRange sine_amp{0.0, 0.2};
  ParamRange sine_freq_hz{0.1, 5.0};
  double bandpass_prob = 0.3;
  ParamRange bp_low_hz{0.5, 10.0};
  ParamRange bp_high_hz{20.0, 45.0};
  double cutmix_prob = 0.3;
  ParamRange cut_frac{0.1, 0.3};
  double flip_prob = 0.15;
  double noise_prob = 0.3;
  ParamRange snr_db{10.0, 30.0};
  int max_ops = 3;

  static AugmentPolicy from_config(const Config& cfg);
  // Same policy with CutMix disabled (test labels are unknown).
  AugmentPolicy test_time() const;
  void validate() const;
};

// Applies one operator. Every operator preserves length, sampling rate and
// label. CutMix requires a donor of the same label and length. rng is
// consumed only by the stochastic operators (Drop, Noise).
EcgRecord apply_transform(const TransformSpec& spec, const EcgRecord& x, Rng& rng,
                          const EcgRecord* donor = nullptr);

// Draws the operator combination for one signal: each operator is included
// independently with its policy probability (canonical order), parameters
// drawn uniformly from the policy ranges, and the list thinned to a uniform
// random subset of max_ops when more were included. CutMix donors are left
// unresolved here.
std::vector<TransformSpec> sample_policy(const AugmentPolicy& policy,
                                         std::size_t signal_len, std::uint32_t fs_hz,
                                         Rng& rng);

// sample_policy + sequential application. CutMix donors are drawn uniformly
// from same-label, same-length records in `pool`; with no eligible donor the
// operator degrades to the identity.
EcgRecord augment_record(const EcgRecord& x, const AugmentPolicy& policy, Rng& rng,
                         const std::vector<EcgRecord>* pool = nullptr);

// SMOTE-style balancing: duplicates each minority class with replacement
// toward parity (at most doubling it), then fills the remaining deficit with
// synthetic interpolates x + u * (nn - x), u ~ U(0,1), between a minority
// record and one of its k nearest same-class neighbours. Records must share
// one length. Throws when a minority class has fewer than k+1 members.
std::vector<EcgRecord> smote_balance(const std::vector<EcgRecord>& dataset, int k,
                                     Rng& rng);

// Random resampling to parity with additive Gaussian noise of
// std = sigma_rel * std(record) on each duplicate.
std::vector<EcgRecord> gaussian_balance(const std::vector<EcgRecord>& dataset,
                                        double sigma_rel, Rng& rng);

}  // namespace ecgtta
