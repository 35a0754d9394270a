#include "ecgtta/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ecgtta/parallel.hpp"
#include "ecgtta/rng.hpp"

namespace ecgtta::bench {

namespace fs = std::filesystem;

const char* sweep_kind_name(SweepKind k) {
  switch (k) {
    case SweepKind::Drop: return "drop";
    case SweepKind::Mask: return "mask";
    case SweepKind::Snr: return "snr";
  }
  return "?";
}

void SweepConfig::validate() const {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  if (repeats < 1) throw std::invalid_argument("sweep: repeats must be >= 1");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    bool ok = kind == SweepKind::Snr ? grid[i] < grid[i - 1] : grid[i] > grid[i - 1];
    if (!ok)
      throw std::invalid_argument(std::string("sweep: ") + sweep_kind_name(kind) +
                                  " grid must be strictly " +
                                  (kind == SweepKind::Snr ? "descending" : "ascending"));
  }
  if (kind == SweepKind::Drop)
    for (double g : grid)
      if (!(g >= 0.0 && g <= 1.0))
        throw std::invalid_argument("sweep: drop rates must be in [0,1]");
  if (kind == SweepKind::Mask)
    for (double g : grid)
      if (g < 0.0) throw std::invalid_argument("sweep: mask lengths must be >= 0");
}

std::vector<std::pair<Label, Label>> evaluate_plain(
    const nn::DualNetModel& model, const std::vector<EcgRecord>& test_pre,
    const PreprocessConfig& pre_cfg, int threads) {
  std::vector<std::pair<Label, Label>> pairs(test_pre.size());
  parallel_for(test_pre.size(), threads, [&](std::size_t i) {
    const EcgRecord& r = test_pre[i];
    if (!r.label) throw std::invalid_argument("evaluation record '" + r.id + "' unlabelled");
    Spectrogram s = compute_spectrogram(r, pre_cfg.spec_window, pre_cfg.spec_hop);
    nn::ForwardResult fr = nn::forward(model, r.samples, s, Phase::Eval);
    pairs[i] = {*r.label, fr.probs.argmax()};
  });
  return pairs;
}

namespace {

double population_std(const std::vector<double>& xs, double mean) {
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

EcgRecord perturb(const EcgRecord& r, SweepKind kind, double intensity, Rng& rng) {
  switch (kind) {
    case SweepKind::Drop:
      return apply_transform(DropSpec{intensity}, r, rng);
    case SweepKind::Mask: {
      auto len = static_cast<std::size_t>(std::llround(intensity));
      len = std::min(len, r.samples.size());
      std::size_t start = rng.next_below(r.samples.size() - len + 1);
      return apply_transform(MaskSpec{start, len}, r, rng);
    }
    case SweepKind::Snr:
      if (!std::isfinite(intensity)) return r;  // SNR = inf encodes the no-op
      return apply_transform(NoiseOpSpec{intensity}, r, rng);
  }
  throw std::logic_error("perturb: bad kind");
}

}  // namespace

SweepResult robustness_sweep(const nn::DualNetModel& model,
                             const std::vector<EcgRecord>& test_pre,
                             const PreprocessConfig& pre_cfg, const SweepConfig& cfg) {
  cfg.validate();
  if (test_pre.empty()) throw std::invalid_argument("sweep: empty test set");

  SweepResult result;
  result.kind = cfg.kind;
  result.grid = cfg.grid;
  result.raw.assign(cfg.grid.size(), std::vector<double>(static_cast<std::size_t>(cfg.repeats)));

  for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) {
    for (int rep = 0; rep < cfg.repeats; ++rep) {
      const std::uint64_t cell_seed =
          Rng::derive(Rng::derive(cfg.seed, gi), static_cast<std::uint64_t>(rep));
      std::vector<std::pair<Label, Label>> pairs(test_pre.size());
      parallel_for(test_pre.size(), cfg.threads, [&](std::size_t i) {
        Rng rng = Rng::substream(cell_seed, i);
        EcgRecord perturbed = perturb(test_pre[i], cfg.kind, cfg.grid[gi], rng);
        Spectrogram s =
            compute_spectrogram(perturbed, pre_cfg.spec_window, pre_cfg.spec_hop);
        nn::ForwardResult fr = nn::forward(model, perturbed.samples, s, Phase::Eval);
        pairs[i] = {*test_pre[i].label, fr.probs.argmax()};
      });
      result.raw[gi][static_cast<std::size_t>(rep)] = binary_accuracy(pairs);
    }
  }

  result.mean.resize(result.raw.size());
  result.stddev.resize(result.raw.size());
  for (std::size_t gi = 0; gi < result.raw.size(); ++gi) {
    double m = 0.0;
    for (double v : result.raw[gi]) m += v;
    m /= static_cast<double>(result.raw[gi].size());
    result.mean[gi] = m;
    result.stddev[gi] = population_std(result.raw[gi], m);
  }
  return result;
}

std::vector<TtaCurvePoint> tta_curve(const nn::DualNetModel& model,
                                     const std::vector<EcgRecord>& test_pre,
                                     const PreprocessConfig& pre_cfg,
                                     const AugmentPolicy& policy,
                                     const std::vector<int>& n_grid, int repeats,
                                     std::uint64_t seed, int threads) {
  if (n_grid.empty()) throw std::invalid_argument("tta_curve: empty n grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1 || (i > 0 && n_grid[i] <= n_grid[i - 1]))
      throw std::invalid_argument("tta_curve: n grid must be ascending, each >= 1");
  }
  if (repeats < 1) throw std::invalid_argument("tta_curve: repeats must be >= 1");

  std::vector<TtaCurvePoint> curve(n_grid.size() + 1);
  curve[0].n = 0;
  for (std::size_t i = 0; i < n_grid.size(); ++i) curve[i + 1].n = n_grid[i];

  // Plain inference: no randomness, identical across repeats.
  double plain_f1 = f1_score(af_confusion(evaluate_plain(model, test_pre, pre_cfg, threads)));
  curve[0].raw_f1.assign(static_cast<std::size_t>(repeats), plain_f1);

  const int n_max = n_grid.back();
  for (int rep = 0; rep < repeats; ++rep) {
    const std::uint64_t rep_seed = Rng::derive(seed, static_cast<std::uint64_t>(rep));
    // One pass at the largest N per record; smaller N values aggregate a
    // prefix of the same replica stream, bit-identical to a direct run.
    std::vector<PredictionSet> sets(test_pre.size());
    parallel_for(test_pre.size(), threads, [&](std::size_t i) {
      TtaConfig cfg;
      cfg.n_runs = n_max;
      cfg.policy = policy;
      cfg.aggregation = TtaAggregation::Mode;
      cfg.seed = Rng::derive(rep_seed, i);
      cfg.threads = 1;
      sets[i] = tta_predict_preprocessed(model, test_pre[i], pre_cfg, cfg);
    });
    for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
      std::vector<std::pair<Label, Label>> pairs(test_pre.size());
      for (std::size_t i = 0; i < test_pre.size(); ++i) {
        auto [label, probs] = aggregate_runs(
            std::span<const TtaRun>(sets[i].runs.data(),
                                    static_cast<std::size_t>(n_grid[ni])),
            TtaAggregation::Mode);
        pairs[i] = {*test_pre[i].label, label};
      }
      curve[ni + 1].raw_f1.push_back(f1_score(af_confusion(pairs)));
    }
  }

  for (TtaCurvePoint& p : curve) {
    double m = 0.0;
    for (double v : p.raw_f1) m += v;
    m /= static_cast<double>(p.raw_f1.size());
    p.mean = m;
    p.stddev = population_std(p.raw_f1, m);
  }
  return curve;
}

CompareResult compare_training(const std::vector<EcgRecord>& train_pre,
                               const std::vector<EcgRecord>& test_pre,
                               const nn::ModelConfig& model_cfg,
                               const nn::TrainConfig& train_cfg,
                               const AugmentPolicy& policy,
                               const PreprocessConfig& pre_cfg,
                               std::span<const SweepConfig> sweeps) {
  nn::TrainConfig cfg_on = train_cfg;
  cfg_on.augment = true;
  nn::TrainConfig cfg_off = train_cfg;
  cfg_off.augment = false;

  CompareResult out;
  out.model_augment_on = nn::train(train_pre, model_cfg, cfg_on, policy, pre_cfg).model;
  out.model_augment_off = nn::train(train_pre, model_cfg, cfg_off, policy, pre_cfg).model;
  for (const SweepConfig& s : sweeps) {
    out.augment_on.push_back(robustness_sweep(out.model_augment_on, test_pre, pre_cfg, s));
    out.augment_off.push_back(robustness_sweep(out.model_augment_off, test_pre, pre_cfg, s));
  }
  return out;
}

// --- reports ------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_svg_errorbars(const fs::path& path, const std::string& title,
                         const std::string& x_label,
                         const std::vector<double>& x_ticks,
                         const std::vector<double>& mean,
                         const std::vector<double>& stddev) {
  const int w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  const double pw = w - ml - mr, ph = h - mt - mb;
  double y_min = 0.0, y_max = 1.0;
  const std::size_t n = mean.size();

  auto px = [&](std::size_t i) {
    return ml + (n == 1 ? pw / 2 : pw * static_cast<double>(i) / static_cast<double>(n - 1));
  };
  auto py = [&](double v) { return mt + ph * (1.0 - (v - y_min) / (y_max - y_min)); };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
      << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double v = y_min + (y_max - y_min) * i / 5.0;
    out << "<text x=\"" << ml - 8 << "\" y=\"" << fmt(py(v) + 4)
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(v) << "</text>\n";
    out << "<line x1=\"" << ml - 4 << "\" y1=\"" << fmt(py(v)) << "\" x2=\"" << ml
        << "\" y2=\"" << fmt(py(v)) << "\" stroke=\"black\"/>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    out << "<text x=\"" << fmt(px(i)) << "\" y=\"" << mt + ph + 20
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(x_ticks[i])
        << "</text>\n";
  }
  out << "<text x=\"" << w / 2 << "\" y=\"" << h - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";

  for (std::size_t i = 0; i < n; ++i) {
    double lo = std::max(y_min, mean[i] - stddev[i]);
    double hi = std::min(y_max, mean[i] + stddev[i]);
    out << "<line x1=\"" << fmt(px(i)) << "\" y1=\"" << fmt(py(lo)) << "\" x2=\""
        << fmt(px(i)) << "\" y2=\"" << fmt(py(hi)) << "\" stroke=\"#c0392b\"/>\n";
    out << "<line x1=\"" << fmt(px(i) - 4) << "\" y1=\"" << fmt(py(lo)) << "\" x2=\""
        << fmt(px(i) + 4) << "\" y2=\"" << fmt(py(lo)) << "\" stroke=\"#c0392b\"/>\n";
    out << "<line x1=\"" << fmt(px(i) - 4) << "\" y1=\"" << fmt(py(hi)) << "\" x2=\""
        << fmt(px(i) + 4) << "\" y2=\"" << fmt(py(hi)) << "\" stroke=\"#c0392b\"/>\n";
  }
  out << "<polyline fill=\"none\" stroke=\"#2471a3\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < n; ++i)
    out << fmt(px(i)) << "," << fmt(py(mean[i])) << (i + 1 < n ? " " : "");
  out << "\"/>\n";
  for (std::size_t i = 0; i < n; ++i)
    out << "<circle cx=\"" << fmt(px(i)) << "\" cy=\"" << fmt(py(mean[i]))
        << "\" r=\"3\" fill=\"#2471a3\"/>\n";
  out << "</svg>\n";
}

}  // namespace

void report(const SweepResult& result, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const char* kind = sweep_kind_name(result.kind);

  std::ofstream sweep(out_dir / "sweep.csv");
  if (!sweep) throw std::runtime_error("cannot write sweep.csv");
  sweep << "kind,intensity,repeat,accuracy\n";
  for (std::size_t gi = 0; gi < result.grid.size(); ++gi)
    for (std::size_t rep = 0; rep < result.raw[gi].size(); ++rep)
      sweep << kind << ',' << fmt(result.grid[gi]) << ',' << rep << ','
            << fmt(result.raw[gi][rep]) << '\n';

  std::ofstream summary(out_dir / "summary.csv");
  if (!summary) throw std::runtime_error("cannot write summary.csv");
  summary << "kind,intensity,mean,std\n";
  for (std::size_t gi = 0; gi < result.grid.size(); ++gi)
    summary << kind << ',' << fmt(result.grid[gi]) << ',' << fmt(result.mean[gi]) << ','
            << fmt(result.stddev[gi]) << '\n';

  write_svg_errorbars(out_dir / (std::string("sweep_") + kind + ".svg"),
                      std::string("accuracy vs ") + kind, kind, result.grid,
                      result.mean, result.stddev);
}

void report_tta(const std::vector<TtaCurvePoint>& curve, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream raw(out_dir / "ttacurve.csv");
  if (!raw) throw std::runtime_error("cannot write ttacurve.csv");
  raw << "n,repeat,f1\n";
  for (const TtaCurvePoint& p : curve)
    for (std::size_t rep = 0; rep < p.raw_f1.size(); ++rep)
      raw << p.n << ',' << rep << ',' << fmt(p.raw_f1[rep]) << '\n';

  std::ofstream summary(out_dir / "ttacurve_summary.csv");
  if (!summary) throw std::runtime_error("cannot write ttacurve_summary.csv");
  summary << "n,mean_f1,std_f1\n";
  for (const TtaCurvePoint& p : curve)
    summary << p.n << ',' << fmt(p.mean) << ',' << fmt(p.stddev) << '\n';

  std::vector<double> xs, mean, stddev;
  for (const TtaCurvePoint& p : curve) {
    xs.push_back(p.n);
    mean.push_back(p.mean);
    stddev.push_back(p.stddev);
  }
  write_svg_errorbars(out_dir / "ttacurve.svg", "binary-AF F1 vs Monte Carlo runs",
                      "N", xs, mean, stddev);
}

}  // namespace ecgtta::bench
