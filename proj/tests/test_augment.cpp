#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "ecgtta/augment.hpp"
#include "ecgtta/rng.hpp"

using namespace ecgtta;

namespace {

EcgRecord random_record(std::size_t n, std::uint32_t fs, Label label, Rng& rng,
                        const std::string& id = "r") {
  EcgRecord r;
  r.id = id;
  r.fs_hz = fs;
  r.label = label;
  r.samples.resize(n);
  for (auto& v : r.samples) v = static_cast<float>(rng.normal());
  return r;
}

double noise_power(const EcgRecord& before, const EcgRecord& after) {
  double p = 0;
  for (std::size_t i = 0; i < before.samples.size(); ++i) {
    double d = static_cast<double>(after.samples[i]) - before.samples[i];
    p += d * d;
  }
  return p / static_cast<double>(before.samples.size());
}

double signal_power_zero_mean(const EcgRecord& x) {
  double mean = 0;
  for (float v : x.samples) mean += v;
  mean /= static_cast<double>(x.samples.size());
  double p = 0;
  for (float v : x.samples) p += (v - mean) * (v - mean);
  return p / static_cast<double>(x.samples.size());
}

}  // namespace

TEST_CASE("drop boundary rates") {
  Rng rng(1);
  EcgRecord x = random_record(500, 100, Label::Normal, rng);
  Rng r1(2);
  CHECK(apply_transform(DropSpec{0.0}, x, r1).samples == x.samples);
  Rng r2(2);
  EcgRecord zeroed = apply_transform(DropSpec{1.0}, x, r2);
  for (float v : zeroed.samples) CHECK(v == 0.0f);
}

TEST_CASE("shift semantics and boundaries") {
  EcgRecord x;
  x.id = "s";
  x.fs_hz = 10;
  x.label = Label::AF;
  x.samples = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f};
  Rng rng(0);
  EcgRecord y = apply_transform(ShiftSpec{3}, x, rng);
  CHECK(y.samples == std::vector<float>{0, 0, 0, 1, 2});
  CHECK(apply_transform(ShiftSpec{0}, x, rng).samples == x.samples);
  EcgRecord full = apply_transform(ShiftSpec{5}, x, rng);
  for (float v : full.samples) CHECK(v == 0.0f);
  CHECK_THROWS(apply_transform(ShiftSpec{6}, x, rng));
}

TEST_CASE("mask zeroes exactly the interval") {
  Rng rng(5);
  EcgRecord x = random_record(100, 100, Label::Normal, rng);
  EcgRecord y = apply_transform(MaskSpec{20, 30}, x, rng);
  for (std::size_t i = 0; i < 100; ++i) {
    if (i >= 20 && i < 50) CHECK(y.samples[i] == 0.0f);
    else CHECK(y.samples[i] == x.samples[i]);
  }
  CHECK(apply_transform(MaskSpec{40, 0}, x, rng).samples == x.samples);
  CHECK_THROWS(apply_transform(MaskSpec{90, 20}, x, rng));
}

TEST_CASE("sine identity at zero amplitude and additivity") {
  Rng rng(6);
  EcgRecord x = random_record(200, 100, Label::Normal, rng);
  CHECK(apply_transform(SineSpec{0.0, 2.0, 0.3}, x, rng).samples == x.samples);
  EcgRecord y = apply_transform(SineSpec{0.5, 2.0, 0.3}, x, rng);
  for (std::size_t i = 0; i < x.samples.size(); ++i) {
    double t = static_cast<double>(i) / 100.0;
    double expect = x.samples[i] + 0.5 * std::sin(2.0 * std::numbers::pi * 2.0 * t + 0.3);
    CHECK(std::abs(y.samples[i] - expect) < 1e-6);
  }
}

TEST_CASE("flip is an exact involution") {
  Rng rng(7);
  EcgRecord x = random_record(300, 100, Label::AF, rng);
  EcgRecord y = apply_transform(FlipSpec{}, apply_transform(FlipSpec{}, x, rng), rng);
  CHECK(y.samples == x.samples);
}

TEST_CASE("cutmix agrees with donor on the cut and recipient elsewhere") {
  Rng rng(8);
  EcgRecord x = random_record(120, 100, Label::AF, rng, "recipient");
  EcgRecord donor = random_record(120, 100, Label::AF, rng, "donor");
  EcgRecord y = apply_transform(CutMixSpec{30, 40, "donor"}, x, rng, &donor);
  for (std::size_t i = 0; i < 120; ++i) {
    if (i >= 30 && i < 70) CHECK(y.samples[i] == donor.samples[i]);
    else CHECK(y.samples[i] == x.samples[i]);
  }
  EcgRecord other = random_record(120, 100, Label::Normal, rng, "other");
  CHECK_THROWS(apply_transform(CutMixSpec{30, 40, "other"}, x, rng, &other));
  CHECK_THROWS(apply_transform(CutMixSpec{30, 40, ""}, x, rng));
}

TEST_CASE("noise lands within 1 dB of the requested SNR") {
  Rng rng(9);
  EcgRecord x = random_record(3000, 100, Label::Normal, rng);
  Rng noise_rng(10);
  EcgRecord y = apply_transform(NoiseOpSpec{20.0}, x, noise_rng);
  double snr = 10.0 * std::log10(signal_power_zero_mean(x) / noise_power(x, y));
  CHECK(snr > 19.0);
  CHECK(snr < 21.0);
}

TEST_CASE("noise on a silent signal is the identity") {
  EcgRecord x;
  x.id = "flat";
  x.fs_hz = 100;
  x.samples.assign(100, 2.5f);  // constant: zero-mean power is 0
  Rng rng(11);
  CHECK(apply_transform(NoiseOpSpec{10.0}, x, rng).samples == x.samples);
}

TEST_CASE("every operator preserves length, rate and label: 1000 random cases") {
  Rng rng(1234);
  for (int iter = 0; iter < 1000; ++iter) {
    std::size_t n = 200 + rng.next_below(400);
    EcgRecord x = random_record(n, 100, rng.bernoulli(0.5) ? Label::AF : Label::Normal, rng);
    EcgRecord donor = random_record(n, 100, *x.label, rng, "donor");
    TransformSpec spec;
    switch (rng.next_below(8)) {
      case 0: spec = DropSpec{rng.uniform(0, 1)}; break;
      case 1: {
        std::size_t len = rng.next_below(n);
        spec = MaskSpec{rng.next_below(n - len + 1), len};
        break;
      }
      case 2: spec = ShiftSpec{rng.next_below(n + 1)}; break;
      case 3: spec = SineSpec{rng.uniform(0, 1), rng.uniform(0.1, 45), rng.uniform(0, 6.28)}; break;
      case 4: spec = BandPassSpec{rng.uniform(0.5, 5), rng.uniform(20, 45)}; break;
      case 5: {
        std::size_t len = rng.next_below(n);
        spec = CutMixSpec{rng.next_below(n - len + 1), len, "donor"};
        break;
      }
      case 6: spec = FlipSpec{}; break;
      default: spec = NoiseOpSpec{rng.uniform(0, 40)}; break;
    }
    EcgRecord y = apply_transform(spec, x, rng, &donor);
    CHECK(y.samples.size() == n);
    CHECK(y.fs_hz == x.fs_hz);
    CHECK(y.label == x.label);
  }
}

TEST_CASE("sample_policy inclusion boundaries") {
  AugmentPolicy all_off;
  all_off.drop_prob = all_off.mask_prob = all_off.shift_prob = all_off.sine_prob =
      all_off.bandpass_prob = all_off.cutmix_prob = all_off.flip_prob =
          all_off.noise_prob = 0.0;
  Rng rng(2);
  CHECK(sample_policy(all_off, 3000, 100, rng).empty());

  AugmentPolicy all_on = all_off;
  all_on.drop_prob = all_on.mask_prob = all_on.shift_prob = all_on.sine_prob =
      all_on.bandpass_prob = all_on.cutmix_prob = all_on.flip_prob =
          all_on.noise_prob = 1.0;
  all_on.max_ops = 8;
  auto specs = sample_policy(all_on, 3000, 100, rng);
  REQUIRE(specs.size() == 8);
  // Canonical order.
  CHECK(std::holds_alternative<DropSpec>(specs[0]));
  CHECK(std::holds_alternative<MaskSpec>(specs[1]));
  CHECK(std::holds_alternative<ShiftSpec>(specs[2]));
  CHECK(std::holds_alternative<SineSpec>(specs[3]));
  CHECK(std::holds_alternative<BandPassSpec>(specs[4]));
  CHECK(std::holds_alternative<CutMixSpec>(specs[5]));
  CHECK(std::holds_alternative<FlipSpec>(specs[6]));
  CHECK(std::holds_alternative<NoiseOpSpec>(specs[7]));

  SUBCASE("max_ops caps the combination") {
    all_on.max_ops = 3;
    Rng r2(5);
    for (int i = 0; i < 50; ++i)
      CHECK(sample_policy(all_on, 3000, 100, r2).size() == 3);
  }

  SUBCASE("fixed seed reproduces the spec list") {
    Rng a(42), b(42);
    auto sa = sample_policy(AugmentPolicy{}, 3000, 100, a);
    auto sb = sample_policy(AugmentPolicy{}, 3000, 100, b);
    REQUIRE(sa.size() == sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i)
      CHECK(sa[i].index() == sb[i].index());
  }
}

TEST_CASE("augment_record basics") {
  Rng rng(3);
  EcgRecord x = random_record(600, 100, Label::AF, rng);

  SUBCASE("empty policy is the identity") {
    AugmentPolicy off;
    off.drop_prob = off.mask_prob = off.shift_prob = off.sine_prob = off.bandpass_prob =
        off.cutmix_prob = off.flip_prob = off.noise_prob = 0.0;
    Rng r(1);
    CHECK(augment_record(x, off, r).samples == x.samples);
  }

  SUBCASE("flip-only policy applied twice returns the original") {
    AugmentPolicy fliponly;
    fliponly.drop_prob = fliponly.mask_prob = fliponly.shift_prob = fliponly.sine_prob =
        fliponly.bandpass_prob = fliponly.cutmix_prob = fliponly.noise_prob = 0.0;
    fliponly.flip_prob = 1.0;
    Rng r(1);
    EcgRecord once = augment_record(x, fliponly, r);
    EcgRecord twice = augment_record(once, fliponly, r);
    CHECK(twice.samples == x.samples);
    CHECK(once.samples != x.samples);
  }

  SUBCASE("label always preserved; cutmix degrades without a donor") {
    AugmentPolicy cutonly;
    cutonly.drop_prob = cutonly.mask_prob = cutonly.shift_prob = cutonly.sine_prob =
        cutonly.bandpass_prob = cutonly.flip_prob = cutonly.noise_prob = 0.0;
    cutonly.cutmix_prob = 1.0;
    Rng r(1);
    EcgRecord y = augment_record(x, cutonly, r);  // no pool: identity
    CHECK(y.samples == x.samples);
    CHECK(y.label == x.label);

    std::vector<EcgRecord> pool;
    Rng pr(4);
    pool.push_back(random_record(600, 100, Label::AF, pr, "donor1"));
    pool.push_back(random_record(600, 100, Label::Normal, pr, "n1"));
    Rng r2(1);
    EcgRecord z = augment_record(x, cutonly, r2, &pool);
    CHECK(z.label == Label::AF);
    CHECK(z.samples != x.samples);  // same-class donor found
  }

  SUBCASE("fixed seed makes augmentation a pure function") {
    AugmentPolicy policy;
    Rng a(9), b(9);
    CHECK(augment_record(x, policy, a).samples == augment_record(x, policy, b).samples);
  }
}

TEST_CASE("smote balances to exact parity with on-segment synthetics") {
  Rng gen(15);
  std::vector<EcgRecord> ds;
  for (int i = 0; i < 12; ++i) ds.push_back(random_record(40, 100, Label::Normal, gen, "n" + std::to_string(i)));
  for (int i = 0; i < 5; ++i) ds.push_back(random_record(40, 100, Label::AF, gen, "a" + std::to_string(i)));

  Rng rng(16);
  auto out = smote_balance(ds, 4, rng);
  std::size_t n = 0, a = 0;
  for (const auto& r : out) {
    n += r.label == Label::Normal;
    a += r.label == Label::AF;
  }
  CHECK(n == 12);
  CHECK(a == 12);

  // Synthetic records lie coordinate-wise inside the minority bounding box.
  float lo[40], hi[40];
  for (int j = 0; j < 40; ++j) {
    lo[j] = 1e9f;
    hi[j] = -1e9f;
  }
  for (const auto& r : ds) {
    if (r.label != Label::AF) continue;
    for (int j = 0; j < 40; ++j) {
      lo[j] = std::min(lo[j], r.samples[static_cast<std::size_t>(j)]);
      hi[j] = std::max(hi[j], r.samples[static_cast<std::size_t>(j)]);
    }
  }
  for (std::size_t i = ds.size(); i < out.size(); ++i) {
    if (out[i].label != Label::AF) continue;
    if (out[i].id.find("smote") == std::string::npos) continue;
    for (int j = 0; j < 40; ++j) {
      CHECK(out[i].samples[static_cast<std::size_t>(j)] >= lo[j]);
      CHECK(out[i].samples[static_cast<std::size_t>(j)] <= hi[j]);
    }
  }

  SUBCASE("already balanced dataset is returned unchanged") {
    std::vector<EcgRecord> even(ds.begin(), ds.begin() + 5);
    for (int i = 0; i < 5; ++i) even.push_back(random_record(40, 100, Label::AF, gen, "b" + std::to_string(i)));
    Rng r(1);
    auto same = smote_balance(even, 3, r);
    REQUIRE(same.size() == even.size());
    for (std::size_t i = 0; i < same.size(); ++i) CHECK(same[i].samples == even[i].samples);
  }

  SUBCASE("minority smaller than k+1 is an error") {
    std::vector<EcgRecord> tiny(ds.begin(), ds.begin() + 8);
    tiny.push_back(random_record(40, 100, Label::AF, gen, "lone"));
    Rng r(1);
    CHECK_THROWS(smote_balance(tiny, 5, r));
  }
}

TEST_CASE("smote synthetic lies on the segment between two parents") {
  // Two-point minority: every synthetic must be colinear between them.
  Rng gen(18);
  std::vector<EcgRecord> ds;
  for (int i = 0; i < 6; ++i) ds.push_back(random_record(2, 100, Label::Normal, gen, "n" + std::to_string(i)));
  EcgRecord a;
  a.id = "a0";
  a.fs_hz = 100;
  a.label = Label::AF;
  a.samples = {0.0f, 0.0f};
  EcgRecord b = a;
  b.id = "a1";
  b.samples = {1.0f, 1.0f};
  ds.push_back(a);
  ds.push_back(b);
  Rng rng(19);
  auto out = smote_balance(ds, 1, rng);
  int checked = 0;
  for (const auto& r : out) {
    if (r.id.find("smote") == std::string::npos) continue;
    CHECK(r.samples[0] == r.samples[1]);  // on the diagonal segment
    CHECK(r.samples[0] >= 0.0f);
    CHECK(r.samples[0] <= 1.0f);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("gaussian balancing") {
  Rng gen(20);
  std::vector<EcgRecord> ds;
  for (int i = 0; i < 9; ++i) ds.push_back(random_record(3000, 100, Label::Normal, gen, "n" + std::to_string(i)));
  ds.push_back(random_record(3000, 100, Label::AF, gen, "a0"));

  SUBCASE("sigma zero duplicates exactly") {
    Rng rng(21);
    auto out = gaussian_balance(ds, 0.0, rng);
    std::size_t n = 0, a = 0;
    for (const auto& r : out) {
      n += r.label == Label::Normal;
      a += r.label == Label::AF;
    }
    CHECK(n == 9);
    CHECK(a == 9);
    for (std::size_t i = ds.size(); i < out.size(); ++i)
      CHECK(out[i].samples == ds.back().samples);  // only one AF source record
  }

  SUBCASE("relative noise scale is honoured (sample-statistics oracle)") {
    Rng rng(22);
    auto out = gaussian_balance(ds, 0.05, rng);
    const EcgRecord& src = ds.back();
    double src_mean = 0;
    for (float v : src.samples) src_mean += v;
    src_mean /= 3000.0;
    double src_var = 0;
    for (float v : src.samples) src_var += (v - src_mean) * (v - src_mean);
    double src_std = std::sqrt(src_var / 3000.0);

    bool any_perturbed = false;
    for (std::size_t i = ds.size(); i < out.size(); ++i) {
      double dvar = 0, dmean = 0;
      for (std::size_t j = 0; j < 3000; ++j)
        dmean += static_cast<double>(out[i].samples[j]) - src.samples[j];
      dmean /= 3000.0;
      for (std::size_t j = 0; j < 3000; ++j) {
        double d = static_cast<double>(out[i].samples[j]) - src.samples[j] - dmean;
        dvar += d * d;
      }
      double dstd = std::sqrt(dvar / 3000.0);
      any_perturbed = any_perturbed || dstd > 0;
      CHECK(std::abs(dstd - 0.05 * src_std) < 0.1 * 0.05 * src_std);
    }
    CHECK(any_perturbed);
  }
}
