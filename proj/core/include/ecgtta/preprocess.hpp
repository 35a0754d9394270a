#pragma once

#include <cstdint>
#include <vector>

#include "ecgtta/config.hpp"
#include "ecgtta/rng.hpp"
#include "ecgtta/types.hpp"

namespace ecgtta {

enum class Phase { Train, Eval };

struct PreprocessConfig {
  double median_window_s = 0.6;
  double bp_low_hz = 0.5;
  double bp_high_hz = 40.0;
  std::uint32_t target_fs_hz = 100;
  int target_len = 3000;
  int spec_window = 64;
  int spec_hop = 32;

  static PreprocessConfig from_config(const Config& cfg);
  void validate() const;
};

// Band-pass biquad, coefficients normalized so a0 = 1.
struct BiquadCoeffs {
  double b0, b1, b2;
  double a1, a2;
};

// Second-order band-pass Butterworth via analog prototype + bilinear
// transform with frequency pre-warping.
BiquadCoeffs design_bandpass_biquad(double fs_hz, double low_hz, double high_hz);

// Zero-phase (forward-backward) application of the band-pass biquad with
// mirror-reflected padding of 3x the filter order at each end. Operates
// in place on a double buffer; used by both the preprocessing chain and the
// band-pass augmentation operator.
void bandpass_zero_phase(std::vector<double>& x, double fs_hz, double low_hz,
                         double high_hz);

// Running-median subtraction (edge-replicated window). The window length is
// round(window_s * fs) forced odd and at least 3; throws if it exceeds the
// signal length.
EcgRecord remove_baseline(const EcgRecord& x, double window_s);

EcgRecord butterworth_bandpass(const EcgRecord& x, double low_hz, double high_hz);

// Linear-interpolation downsampling; output length floor(duration*target)+1.
// Throws if target_fs exceeds the source rate.
EcgRecord resample(const EcgRecord& x, std::uint32_t target_fs_hz);

// (x - mean) / population std; all zeros when std < 1e-8.
EcgRecord zscore(const EcgRecord& x);

// Longer signals are cropped to target_len (random offset in Train phase,
// offset 0 in Eval), shorter ones zero-padded at the tail.
EcgRecord fix_length(const EcgRecord& x, int target_len, Phase phase,
                     Rng* rng = nullptr);

struct Spectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<double> values;  // frames x bins, row-major log-magnitudes
  double frame_hop_s = 0.0;
  double bin_width_hz = 0.0;

  double at(int frame, int bin) const { return values[frame * bins + bin]; }
};

// Hann-windowed short-time Fourier log-magnitudes:
// frames = floor((L - window)/hop) + 1, bins = window/2 + 1,
// values = ln(|X| + 1e-10). Throws if the signal is shorter than the window.
Spectrogram compute_spectrogram(const EcgRecord& x, int window = 64, int hop = 32);

// Full conditioning chain: remove_baseline -> butterworth_bandpass ->
// resample -> fix_length -> zscore. Output has fs = target_fs_hz and
// length = target_len.
EcgRecord preprocess(const EcgRecord& x, const PreprocessConfig& cfg, Phase phase,
                     Rng* rng = nullptr);

}  // namespace ecgtta
