#include "ecgtta/augment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "ecgtta/preprocess.hpp"

namespace ecgtta {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double record_mean(const std::vector<float>& v) {
  double m = 0.0;
  for (float x : v) m += x;
  return m / static_cast<double>(v.size());
}

double record_power_zero_mean(const std::vector<float>& v) {
  double mean = record_mean(v);
  double p = 0.0;
  for (float x : v) p += (x - mean) * (x - mean);
  return p / static_cast<double>(v.size());
}

}  // namespace

const char* transform_name(const TransformSpec& spec) {
  return std::visit(Overloaded{[](const DropSpec&) { return "drop"; },
                               [](const MaskSpec&) { return "mask"; },
                               [](const ShiftSpec&) { return "shift"; },
                               [](const SineSpec&) { return "sine"; },
                               [](const BandPassSpec&) { return "bandpass"; },
                               [](const CutMixSpec&) { return "cutmix"; },
                               [](const FlipSpec&) { return "flip"; },
                               [](const NoiseOpSpec&) { return "noise"; }},
                    spec);
}

AugmentPolicy AugmentPolicy::from_config(const Config& cfg) {
  AugmentPolicy p;
  p.drop_prob = cfg.get_double("aug.drop.prob");
  p.drop_rate = {cfg.get_double("aug.drop.rate_min"), cfg.get_double("aug.drop.rate_max")};
  p.mask_prob = cfg.get_double("aug.mask.prob");
  p.mask_frac = {cfg.get_double("aug.mask.frac_min"), cfg.get_double("aug.mask.frac_max")};
  p.shift_prob = cfg.get_double("aug.shift.prob");
  p.shift_frac = {cfg.get_double("aug.shift.frac_min"), cfg.get_double("aug.shift.frac_max")};
  p.sine_prob = cfg.get_double("aug.sine.prob");
  p.sine_amp = {cfg.get_double("aug.sine.amp_min"), cfg.get_double("aug.sine.amp_max")};
  p.sine_freq_hz = {cfg.get_double("aug.sine.freq_min"), cfg.get_double("aug.sine.freq_max")};
  p.bandpass_prob = cfg.get_double("aug.bandpass.prob");
  p.bp_low_hz = {cfg.get_double("aug.bandpass.low_min"), cfg.get_double("aug.bandpass.low_max")};
  p.bp_high_hz = {cfg.get_double("aug.bandpass.high_min"), cfg.get_double("aug.bandpass.high_max")};
  p.cutmix_prob = cfg.get_double("aug.cutmix.prob");
  p.cut_frac = {cfg.get_double("aug.cutmix.frac_min"), cfg.get_double("aug.cutmix.frac_max")};
  p.flip_prob = cfg.get_double("aug.flip.prob");
  p.noise_prob = cfg.get_double("aug.noise.prob");
  p.snr_db = {cfg.get_double("aug.noise.snr_min"), cfg.get_double("aug.noise.snr_max")};
  p.max_ops = static_cast<int>(cfg.get_int("aug.max_ops"));
  p.validate();
  return p;
}

AugmentPolicy AugmentPolicy::test_time() const {
  AugmentPolicy p = *this;
  p.cutmix_prob = 0.0;
  return p;
}

void AugmentPolicy::validate() const {
  auto check_prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument(std::string("AugmentPolicy: ") + name +
                                  " must be in [0,1]");
  };
  auto check_range = [](ParamRange r, const char* name) {
    if (!(r.lo <= r.hi))
      throw std::invalid_argument(std::string("AugmentPolicy: empty range for ") + name);
  };
  check_prob(drop_prob, "drop_prob");
  check_prob(mask_prob, "mask_prob");
  check_prob(shift_prob, "shift_prob");
  check_prob(sine_prob, "sine_prob");
  check_prob(bandpass_prob, "bandpass_prob");
  check_prob(cutmix_prob, "cutmix_prob");
  check_prob(flip_prob, "flip_prob");
  check_prob(noise_prob, "noise_prob");
  check_range(drop_rate, "drop_rate");
  check_range(mask_frac, "mask_frac");
  check_range(shift_frac, "shift_frac");
  check_range(sine_amp, "sine_amp");
  check_range(sine_freq_hz, "sine_freq_hz");
  check_range(bp_low_hz, "bp_low_hz");
  check_range(bp_high_hz, "bp_high_hz");
  check_range(cut_frac, "cut_frac");
  check_range(snr_db, "snr_db");
  if (!(drop_rate.lo >= 0 && drop_rate.hi <= 1))
    throw std::invalid_argument("AugmentPolicy: drop_rate outside [0,1]");
  if (!(bp_low_hz.hi < bp_high_hz.lo))
    throw std::invalid_argument("AugmentPolicy: band-pass ranges must not overlap");
  if (max_ops < 0) throw std::invalid_argument("AugmentPolicy: max_ops must be >= 0");
}

EcgRecord apply_transform(const TransformSpec& spec, const EcgRecord& x, Rng& rng,
                          const EcgRecord* donor) {
  x.validate();
  const std::size_t n = x.samples.size();
  EcgRecord out = x;

  std::visit(
      Overloaded{
          [&](const DropSpec& s) {
            if (!(s.rate >= 0.0 && s.rate <= 1.0))
              throw std::invalid_argument("drop: rate outside [0,1]");
            for (std::size_t i = 0; i < n; ++i)
              if (rng.next_double() < s.rate) out.samples[i] = 0.0f;
          },
          [&](const MaskSpec& s) {
            if (s.start + s.len > n)
              throw std::invalid_argument("mask: interval exceeds signal");
            std::fill(out.samples.begin() + s.start,
                      out.samples.begin() + s.start + s.len, 0.0f);
          },
          [&](const ShiftSpec& s) {
            if (s.k > n) throw std::invalid_argument("shift: k exceeds signal length");
            std::fill(out.samples.begin(), out.samples.begin() + s.k, 0.0f);
            std::copy(x.samples.begin(), x.samples.end() - s.k,
                      out.samples.begin() + s.k);
          },
          [&](const SineSpec& s) {
            if (s.amp < 0) throw std::invalid_argument("sine: amp must be >= 0");
            if (!(s.freq_hz > 0 && s.freq_hz < x.fs_hz / 2.0))
              throw std::invalid_argument("sine: freq outside (0, Nyquist)");
            for (std::size_t i = 0; i < n; ++i) {
              double t = static_cast<double>(i) / x.fs_hz;
              out.samples[i] = static_cast<float>(
                  x.samples[i] +
                  s.amp * std::sin(2.0 * std::numbers::pi * s.freq_hz * t + s.phase));
            }
          },
          [&](const BandPassSpec& s) {
            std::vector<double> buf(x.samples.begin(), x.samples.end());
            bandpass_zero_phase(buf, x.fs_hz, s.low_hz, s.high_hz);
            for (std::size_t i = 0; i < n; ++i)
              out.samples[i] = static_cast<float>(buf[i]);
          },
          [&](const CutMixSpec& s) {
            if (!donor) throw std::invalid_argument("cutmix: donor record required");
            if (donor->samples.size() != n)
              throw std::invalid_argument("cutmix: donor length mismatch");
            if (donor->label != x.label)
              throw std::invalid_argument("cutmix: donor label mismatch");
            if (s.start + s.len > n)
              throw std::invalid_argument("cutmix: segment exceeds signal");
            std::copy(donor->samples.begin() + s.start,
                      donor->samples.begin() + s.start + s.len,
                      out.samples.begin() + s.start);
          },
          [&](const FlipSpec&) {
            for (std::size_t i = 0; i < n; ++i) out.samples[i] = -x.samples[i];
          },
          [&](const NoiseOpSpec& s) {
            if (!std::isfinite(s.snr_db))
              throw std::invalid_argument("noise: snr_db must be finite");
            double p_signal = record_power_zero_mean(x.samples);
            if (p_signal <= 0.0) return;  // silent signal: identity
            double sigma = std::sqrt(p_signal / std::pow(10.0, s.snr_db / 10.0));
            for (std::size_t i = 0; i < n; ++i)
              out.samples[i] = static_cast<float>(x.samples[i] + rng.normal(0.0, sigma));
          }},
      spec);
  return out;
}

std::vector<TransformSpec> sample_policy(const AugmentPolicy& policy,
                                         std::size_t signal_len, std::uint32_t fs_hz,
                                         Rng& rng) {
  policy.validate();
  const auto len = static_cast<double>(signal_len);
  std::vector<TransformSpec> specs;

  auto frac_to_len = [&](double frac) {
    auto v = static_cast<std::size_t>(std::llround(frac * len));
    return std::min(v, signal_len);
  };

  if (rng.bernoulli(policy.drop_prob))
    specs.push_back(DropSpec{rng.uniform(policy.drop_rate.lo, policy.drop_rate.hi)});
  if (rng.bernoulli(policy.mask_prob)) {
    std::size_t mlen = frac_to_len(rng.uniform(policy.mask_frac.lo, policy.mask_frac.hi));
    std::size_t start = rng.next_below(signal_len - mlen + 1);
    specs.push_back(MaskSpec{start, mlen});
  }
  if (rng.bernoulli(policy.shift_prob))
    specs.push_back(
        ShiftSpec{frac_to_len(rng.uniform(policy.shift_frac.lo, policy.shift_frac.hi))});
  if (rng.bernoulli(policy.sine_prob)) {
    double amp = rng.uniform(policy.sine_amp.lo, policy.sine_amp.hi);
    double freq = rng.uniform(policy.sine_freq_hz.lo, policy.sine_freq_hz.hi);
    double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    specs.push_back(SineSpec{amp, freq, phase});
  }
  if (rng.bernoulli(policy.bandpass_prob)) {
    double low = rng.uniform(policy.bp_low_hz.lo, policy.bp_low_hz.hi);
    double high = rng.uniform(policy.bp_high_hz.lo, policy.bp_high_hz.hi);
    high = std::min(high, fs_hz / 2.0 * 0.98);
    specs.push_back(BandPassSpec{low, high});
  }
  if (rng.bernoulli(policy.cutmix_prob)) {
    std::size_t clen = frac_to_len(rng.uniform(policy.cut_frac.lo, policy.cut_frac.hi));
    std::size_t start = rng.next_below(signal_len - clen + 1);
    specs.push_back(CutMixSpec{start, clen, ""});
  }
  if (rng.bernoulli(policy.flip_prob)) specs.push_back(FlipSpec{});
  if (rng.bernoulli(policy.noise_prob))
    specs.push_back(NoiseOpSpec{rng.uniform(policy.snr_db.lo, policy.snr_db.hi)});

  while (specs.size() > static_cast<std::size_t>(policy.max_ops))
    specs.erase(specs.begin() + static_cast<long>(rng.next_below(specs.size())));
  return specs;
}

EcgRecord augment_record(const EcgRecord& x, const AugmentPolicy& policy, Rng& rng,
                         const std::vector<EcgRecord>* pool) {
  std::vector<TransformSpec> specs = sample_policy(policy, x.samples.size(), x.fs_hz, rng);
  EcgRecord out = x;
  for (const TransformSpec& spec : specs) {
    if (const auto* cut = std::get_if<CutMixSpec>(&spec)) {
      const EcgRecord* donor = nullptr;
      if (pool && x.label) {
        std::vector<const EcgRecord*> candidates;
        for (const EcgRecord& r : *pool)
          if (r.label == x.label && r.samples.size() == x.samples.size() && r.id != x.id)
            candidates.push_back(&r);
        if (!candidates.empty())
          donor = candidates[rng.next_below(candidates.size())];
      }
      if (!donor) continue;  // no same-class donor: identity
      CutMixSpec resolved = *cut;
      resolved.donor_id = donor->id;
      out = apply_transform(resolved, out, rng, donor);
    } else {
      out = apply_transform(spec, out, rng);
    }
  }
  out.label = x.label;
  return out;
}

namespace {

std::map<Label, std::vector<std::size_t>> class_index(const std::vector<EcgRecord>& ds) {
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds[i].label)
      throw std::invalid_argument("balancing requires labelled records (record '" +
                                  ds[i].id + "')");
    by_class[*ds[i].label].push_back(i);
  }
  return by_class;
}

}  // namespace

std::vector<EcgRecord> smote_balance(const std::vector<EcgRecord>& dataset, int k,
                                     Rng& rng) {
  if (dataset.empty()) return {};
  if (k < 1) throw std::invalid_argument("smote_balance: k must be >= 1");
  auto by_class = class_index(dataset);
  std::size_t majority = 0;
  for (const auto& [label, idx] : by_class) majority = std::max(majority, idx.size());

  const std::size_t len = dataset.front().samples.size();
  for (const auto& r : dataset)
    if (r.samples.size() != len)
      throw std::invalid_argument("smote_balance: records must share one length");

  std::vector<EcgRecord> out = dataset;
  for (const auto& [label, idx] : by_class) {
    const std::size_t m = idx.size();
    if (m == majority) continue;
    if (m < static_cast<std::size_t>(k) + 1)
      throw std::invalid_argument(
          std::string("smote_balance: class ") + label_name(label) + " has " +
          std::to_string(m) + " members, needs at least k+1 = " + std::to_string(k + 1));

    const std::size_t deficit = majority - m;
    const std::size_t dup_count = std::min(m, deficit);
    const std::size_t synth_count = deficit - dup_count;

    for (std::size_t d = 0; d < dup_count; ++d) {
      EcgRecord copy = dataset[idx[rng.next_below(m)]];
      copy.id += "-rs" + std::to_string(d);
      out.push_back(std::move(copy));
    }

    // k nearest same-class neighbours on the raw sample vectors, self excluded,
    // distance ties broken by index.
    std::vector<std::vector<std::size_t>> knn(m);
    for (std::size_t a = 0; a < m; ++a) {
      std::vector<std::pair<double, std::size_t>> dist;
      dist.reserve(m - 1);
      const auto& va = dataset[idx[a]].samples;
      for (std::size_t b = 0; b < m; ++b) {
        if (b == a) continue;
        const auto& vb = dataset[idx[b]].samples;
        double d2 = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          double diff = static_cast<double>(va[i]) - vb[i];
          d2 += diff * diff;
        }
        dist.emplace_back(d2, b);
      }
      std::sort(dist.begin(), dist.end());
      knn[a].reserve(static_cast<std::size_t>(k));
      for (int j = 0; j < k; ++j) knn[a].push_back(dist[static_cast<std::size_t>(j)].second);
    }

    for (std::size_t s = 0; s < synth_count; ++s) {
      std::size_t a = rng.next_below(m);
      std::size_t b = knn[a][rng.next_below(static_cast<std::uint64_t>(k))];
      double u = rng.next_double();
      const auto& va = dataset[idx[a]].samples;
      const auto& vb = dataset[idx[b]].samples;
      EcgRecord synth;
      synth.id = std::string(1, label_code(label)) + "-smote-" + std::to_string(s);
      synth.fs_hz = dataset[idx[a]].fs_hz;
      synth.label = label;
      synth.samples.resize(len);
      for (std::size_t i = 0; i < len; ++i)
        synth.samples[i] = static_cast<float>(va[i] + u * (static_cast<double>(vb[i]) - va[i]));
      out.push_back(std::move(synth));
    }
  }
  return out;
}

std::vector<EcgRecord> gaussian_balance(const std::vector<EcgRecord>& dataset,
                                        double sigma_rel, Rng& rng) {
  if (sigma_rel < 0) throw std::invalid_argument("gaussian_balance: sigma_rel < 0");
  if (dataset.empty()) return {};
  auto by_class = class_index(dataset);
  std::size_t majority = 0;
  for (const auto& [label, idx] : by_class) majority = std::max(majority, idx.size());

  std::vector<EcgRecord> out = dataset;
  for (const auto& [label, idx] : by_class) {
    const std::size_t m = idx.size();
    for (std::size_t d = 0; d < majority - m; ++d) {
      EcgRecord copy = dataset[idx[rng.next_below(m)]];
      copy.id += "-gn" + std::to_string(d);
      double mean = 0.0;
      for (float v : copy.samples) mean += v;
      mean /= static_cast<double>(copy.samples.size());
      double var = 0.0;
      for (float v : copy.samples) var += (v - mean) * (v - mean);
      var /= static_cast<double>(copy.samples.size());
      double sigma = sigma_rel * std::sqrt(var);
      for (float& v : copy.samples)
        v = static_cast<float>(v + rng.normal(0.0, sigma));
      out.push_back(std::move(copy));
    }
  }
  return out;
}

}  // namespace ecgtta
