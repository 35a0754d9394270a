#include "ecgtta/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ecgtta {

namespace {

std::vector<double> to_double(const std::vector<float>& v) {
  return std::vector<double>(v.begin(), v.end());
}

std::vector<float> to_float(const std::vector<double>& v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

// One biquad pass, direct form II transposed, zero initial state.
void biquad_forward(const BiquadCoeffs& c, std::vector<double>& x) {
  double z1 = 0.0, z2 = 0.0;
  for (double& v : x) {
    double in = v;
    double out = c.b0 * in + z1;
    z1 = c.b1 * in - c.a1 * out + z2;
    z2 = c.b2 * in - c.a2 * out;
    v = out;
  }
}

}  // namespace

PreprocessConfig PreprocessConfig::from_config(const Config& cfg) {
  PreprocessConfig p;
  p.median_window_s = cfg.get_double("median_window_s");
  p.bp_low_hz = cfg.get_double("bp_low_hz");
  p.bp_high_hz = cfg.get_double("bp_high_hz");
  p.target_fs_hz = static_cast<std::uint32_t>(cfg.get_int("target_fs_hz"));
  p.target_len = static_cast<int>(cfg.get_int("target_len"));
  p.spec_window = static_cast<int>(cfg.get_int("spec_window"));
  p.spec_hop = static_cast<int>(cfg.get_int("spec_hop"));
  p.validate();
  return p;
}

void PreprocessConfig::validate() const {
  if (!(bp_low_hz > 0 && bp_low_hz < bp_high_hz && bp_high_hz < target_fs_hz / 2.0))
    throw std::invalid_argument("PreprocessConfig: need 0 < low < high < target_fs/2");
  if (median_window_s <= 0)
    throw std::invalid_argument("PreprocessConfig: median_window_s must be > 0");
  if (target_len <= 0)
    throw std::invalid_argument("PreprocessConfig: target_len must be > 0");
  if (spec_window < 2 || spec_hop < 1)
    throw std::invalid_argument("PreprocessConfig: bad spectrogram parameters");
}

BiquadCoeffs design_bandpass_biquad(double fs_hz, double low_hz, double high_hz) {
  if (!(low_hz > 0 && low_hz < high_hz && high_hz < fs_hz / 2.0))
    throw std::invalid_argument("band edges must satisfy 0 < low < high < Nyquist");
  // Pre-warped analog edges for the bilinear substitution s = K (1-z^-1)/(1+z^-1).
  const double k = 2.0 * fs_hz;
  const double wl = k * std::tan(std::numbers::pi * low_hz / fs_hz);
  const double wh = k * std::tan(std::numbers::pi * high_hz / fs_hz);
  const double bw = wh - wl;
  const double w0sq = wl * wh;
  // Analog prototype H(s) = bw*s / (s^2 + bw*s + w0sq), discretized.
  const double a0 = k * k + bw * k + w0sq;
  BiquadCoeffs c;
  c.b0 = bw * k / a0;
  c.b1 = 0.0;
  c.b2 = -bw * k / a0;
  c.a1 = 2.0 * (w0sq - k * k) / a0;
  c.a2 = (k * k - bw * k + w0sq) / a0;
  return c;
}

void bandpass_zero_phase(std::vector<double>& x, double fs_hz, double low_hz,
                         double high_hz) {
  const BiquadCoeffs c = design_bandpass_biquad(fs_hz, low_hz, high_hz);
  const std::size_t n = x.size();
  const std::size_t pad = 6;  // 3x filter order
  if (n <= pad)
    throw std::invalid_argument("signal too short for zero-phase filtering");

  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + pad);
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = x[n - 2 - i];

  biquad_forward(c, ext);
  std::reverse(ext.begin(), ext.end());
  biquad_forward(c, ext);
  std::reverse(ext.begin(), ext.end());

  std::copy(ext.begin() + pad, ext.begin() + pad + n, x.begin());
}

EcgRecord remove_baseline(const EcgRecord& x, double window_s) {
  x.validate();
  long w = std::lround(window_s * x.fs_hz);
  if (w % 2 == 0) ++w;
  w = std::max(w, 3L);
  const long n = static_cast<long>(x.samples.size());
  if (w > n)
    throw std::invalid_argument("median window (" + std::to_string(w) +
                                ") exceeds signal length (" + std::to_string(n) + ")");
  const long h = w / 2;

  std::vector<double> win(static_cast<std::size_t>(w));
  EcgRecord out = x;
  for (long i = 0; i < n; ++i) {
    for (long j = -h; j <= h; ++j) {
      long idx = std::clamp(i + j, 0L, n - 1);
      win[static_cast<std::size_t>(j + h)] = x.samples[static_cast<std::size_t>(idx)];
    }
    auto mid = win.begin() + h;
    std::nth_element(win.begin(), mid, win.end());
    out.samples[static_cast<std::size_t>(i)] =
        static_cast<float>(x.samples[static_cast<std::size_t>(i)] - *mid);
  }
  return out;
}

EcgRecord butterworth_bandpass(const EcgRecord& x, double low_hz, double high_hz) {
  x.validate();
  std::vector<double> buf = to_double(x.samples);
  bandpass_zero_phase(buf, x.fs_hz, low_hz, high_hz);
  EcgRecord out = x;
  out.samples = to_float(buf);
  return out;
}

EcgRecord resample(const EcgRecord& x, std::uint32_t target_fs_hz) {
  x.validate();
  if (target_fs_hz > x.fs_hz)
    throw std::invalid_argument("resample: upsampling unsupported (target " +
                                std::to_string(target_fs_hz) + " > source " +
                                std::to_string(x.fs_hz) + ")");
  if (target_fs_hz == x.fs_hz) return x;
  const std::size_t n = x.samples.size();
  // Last representable output index: k / target <= (n-1) / fs.
  const std::size_t out_len =
      static_cast<std::size_t>((n - 1) * static_cast<std::uint64_t>(target_fs_hz) /
                               x.fs_hz) + 1;
  EcgRecord out;
  out.id = x.id;
  out.label = x.label;
  out.fs_hz = target_fs_hz;
  out.samples.resize(out_len);
  for (std::size_t k = 0; k < out_len; ++k) {
    double pos = static_cast<double>(k) * x.fs_hz / target_fs_hz;
    auto i = static_cast<std::size_t>(pos);
    if (i >= n - 1) {
      out.samples[k] = x.samples[n - 1];
      continue;
    }
    double frac = pos - static_cast<double>(i);
    double v = x.samples[i] + (static_cast<double>(x.samples[i + 1]) - x.samples[i]) * frac;
    out.samples[k] = static_cast<float>(v);
  }
  return out;
}

EcgRecord zscore(const EcgRecord& x) {
  x.validate();
  if (x.samples.size() < 2)
    throw std::invalid_argument("zscore: signal length must be >= 2");
  const std::size_t n = x.samples.size();
  double mean = 0.0;
  for (float v : x.samples) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (float v : x.samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  double sd = std::sqrt(var);

  EcgRecord out = x;
  if (sd < 1e-8) {
    std::fill(out.samples.begin(), out.samples.end(), 0.0f);
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    out.samples[i] = static_cast<float>((x.samples[i] - mean) / sd);
  return out;
}

EcgRecord fix_length(const EcgRecord& x, int target_len, Phase phase, Rng* rng) {
  x.validate();
  if (target_len <= 0) throw std::invalid_argument("fix_length: target_len must be > 0");
  const auto n = static_cast<long>(x.samples.size());
  EcgRecord out = x;
  if (n == target_len) return out;
  if (n > target_len) {
    long offset = 0;
    if (phase == Phase::Train) {
      if (!rng) throw std::invalid_argument("fix_length: Train phase needs an rng");
      offset = static_cast<long>(rng->next_below(static_cast<std::uint64_t>(n - target_len + 1)));
    }
    out.samples.assign(x.samples.begin() + offset, x.samples.begin() + offset + target_len);
  } else {
    out.samples.resize(static_cast<std::size_t>(target_len), 0.0f);
  }
  return out;
}

Spectrogram compute_spectrogram(const EcgRecord& x, int window, int hop) {
  x.validate();
  const int n = static_cast<int>(x.samples.size());
  if (n < window)
    throw std::invalid_argument("spectrogram: signal shorter than the window");
  Spectrogram s;
  s.frames = (n - window) / hop + 1;
  s.bins = window / 2 + 1;
  s.frame_hop_s = static_cast<double>(hop) / x.fs_hz;
  s.bin_width_hz = static_cast<double>(x.fs_hz) / window;
  s.values.resize(static_cast<std::size_t>(s.frames) * s.bins);

  std::vector<double> hann(static_cast<std::size_t>(window));
  for (int i = 0; i < window; ++i)
    hann[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / (window - 1)));

  // Precomputed DFT twiddles; window sizes are small so the direct transform
  // is cheap.
  std::vector<double> cos_t(static_cast<std::size_t>(s.bins) * window);
  std::vector<double> sin_t(static_cast<std::size_t>(s.bins) * window);
  for (int b = 0; b < s.bins; ++b) {
    for (int i = 0; i < window; ++i) {
      double ang = -2.0 * std::numbers::pi * b * i / window;
      cos_t[static_cast<std::size_t>(b) * window + i] = std::cos(ang);
      sin_t[static_cast<std::size_t>(b) * window + i] = std::sin(ang);
    }
  }

  std::vector<double> frame(static_cast<std::size_t>(window));
  for (int f = 0; f < s.frames; ++f) {
    const int start = f * hop;
    for (int i = 0; i < window; ++i)
      frame[i] = static_cast<double>(x.samples[start + i]) * hann[i];
    for (int b = 0; b < s.bins; ++b) {
      const double* ct = &cos_t[static_cast<std::size_t>(b) * window];
      const double* st = &sin_t[static_cast<std::size_t>(b) * window];
      double re = 0.0, im = 0.0;
      for (int i = 0; i < window; ++i) {
        re += frame[i] * ct[i];
        im += frame[i] * st[i];
      }
      s.values[static_cast<std::size_t>(f) * s.bins + b] =
          std::log(std::sqrt(re * re + im * im) + 1e-10);
    }
  }
  return s;
}

EcgRecord preprocess(const EcgRecord& x, const PreprocessConfig& cfg, Phase phase,
                     Rng* rng) {
  cfg.validate();
  EcgRecord r = remove_baseline(x, cfg.median_window_s);
  r = butterworth_bandpass(r, cfg.bp_low_hz, cfg.bp_high_hz);
  r = resample(r, cfg.target_fs_hz);
  r = fix_length(r, cfg.target_len, phase, rng);
  r = zscore(r);
  return r;
}

}  // namespace ecgtta
