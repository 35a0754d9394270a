// ecgtta: synthesize data, ingest corpora, train, evaluate (plain or with
// test-time augmentation) and run the robustness benchmark sweeps.
//
// Machine-readable output (metrics lines, CSV) goes to stdout; progress and
// diagnostics go to stderr. Exit codes: 0 success, 1 runtime/I-O failure,
// 2 usage error. All randomness flows from --seed, so every command is
// deterministic given its flags, independent of --threads.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ecgtta/bench.hpp"
#include "ecgtta/config.hpp"
#include "ecgtta/dataio.hpp"
#include "ecgtta/nn.hpp"
#include "ecgtta/parallel.hpp"
#include "ecgtta/preprocess.hpp"
#include "ecgtta/tta.hpp"

namespace fs = std::filesystem;
using namespace ecgtta;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<EcgRecord> load_preprocessed(const std::string& manifest_path,
                                         const PreprocessConfig& pre, Phase phase,
                                         std::uint64_t seed, int threads) {
  std::vector<EcgRecord> raw = io::load_manifest(manifest_path);
  std::vector<EcgRecord> out(raw.size());
  parallel_for(raw.size(), threads, [&](std::size_t i) {
    Rng rng = Rng::substream(seed, i);
    out[i] = preprocess(raw[i], pre, phase, &rng);
  });
  return out;
}

void write_predictions(const fs::path& path, const std::vector<EcgRecord>& records,
                       const std::vector<std::pair<Label, ProbVector>>& preds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "id,true,pred,p_N,p_A,p_O,p_~\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ProbVector& p = preds[i].second;
    out << records[i].id << ',' << label_code(*records[i].label) << ','
        << label_code(preds[i].first);
    for (int c = 0; c < kNumClasses; ++c) out << ',' << fmt(p.probs[c]);
    out << '\n';
  }
}

struct CommonOpts {
  std::string config_path;
  int threads = 0;

  Config load() const {
    Config cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    return cfg;
  }
  int thread_count() const { return threads > 0 ? threads : default_threads(); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-domain AF detection with test-time augmentation"};
  app.require_subcommand(1);

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "generate a synthetic ECG dataset");
  struct {
    std::string out;
    int n_normal = 0, n_af = 0;
    std::uint32_t fs = 300;
    double duration_s = 30.0;
    std::string domain = "source";
    std::uint64_t seed = 1;
  } sy;
  synth->add_option("--out", sy.out, "output directory")->required();
  synth->add_option("--n-normal", sy.n_normal, "number of Normal records")->required();
  synth->add_option("--n-af", sy.n_af, "number of AF records")->required();
  synth->add_option("--fs", sy.fs, "sampling rate in Hz")->check(CLI::Range(100, 1000));
  synth->add_option("--duration-s", sy.duration_s, "record length in seconds")
      ->check(CLI::PositiveNumber);
  synth->add_option("--domain", sy.domain, "source|target")
      ->check(CLI::IsMember({"source", "target"}));
  synth->add_option("--seed", sy.seed, "generator seed");

  // --- ingest ---
  auto* ingest = app.add_subcommand("ingest", "convert a text-sample corpus");
  struct {
    std::string dir, reference, out;
  } ig;
  ingest->add_option("--dir", ig.dir, "directory of <id>.txt sample files")->required();
  ingest->add_option("--reference", ig.reference, "CSV of id,label rows")->required();
  ingest->add_option("--out", ig.out, "output directory")->required();

  // --- train ---
  auto* train_cmd = app.add_subcommand("train", "train a model from a manifest");
  struct {
    std::string manifest, out = "model.bin";
    CommonOpts common;
    std::string augment, balance;
    std::int64_t seed = -1, epochs = -1;
  } tr;
  train_cmd->add_option("--manifest", tr.manifest, "dataset manifest")->required();
  train_cmd->add_option("--config", tr.common.config_path, "key=value config file");
  train_cmd->add_option("--out", tr.out, "model file to write");
  train_cmd->add_option("--augment", tr.augment, "on|off")
      ->check(CLI::IsMember({"on", "off"}));
  train_cmd->add_option("--balance", tr.balance, "none|smote|gaussian")
      ->check(CLI::IsMember({"none", "smote", "gaussian"}));
  train_cmd->add_option("--seed", tr.seed, "training seed");
  train_cmd->add_option("--epochs", tr.epochs, "epoch count override");
  train_cmd->add_option("--threads", tr.common.threads, "worker thread cap");

  // --- eval ---
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a manifest");
  struct {
    std::string model, manifest, out = "predictions.csv";
    CommonOpts common;
    int tta = 0;
    std::int64_t seed = -1;
  } ev;
  eval_cmd->add_option("--model", ev.model, "model file")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "dataset manifest")->required();
  eval_cmd->add_option("--config", ev.common.config_path, "key=value config file");
  eval_cmd->add_option("--tta", ev.tta, "Monte Carlo runs (0 = plain inference)")
      ->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--seed", ev.seed, "TTA seed");
  eval_cmd->add_option("--out", ev.out, "predictions CSV path");
  eval_cmd->add_option("--threads", ev.common.threads, "worker thread cap");

  // --- sweep ---
  auto* sweep_cmd = app.add_subcommand("sweep", "robustness / TTA-curve benchmarks");
  struct {
    std::string kind, model, manifest, out = ".";
    CommonOpts common;
    int repeats = -1;
    std::int64_t seed = -1;
  } sw;
  sweep_cmd->add_option("--kind", sw.kind, "drop|mask|snr|ttacurve")
      ->required()
      ->check(CLI::IsMember({"drop", "mask", "snr", "ttacurve"}));
  sweep_cmd->add_option("--model", sw.model, "model file")->required();
  sweep_cmd->add_option("--manifest", sw.manifest, "dataset manifest")->required();
  sweep_cmd->add_option("--config", sw.common.config_path, "key=value config file");
  sweep_cmd->add_option("--repeats", sw.repeats, "repetitions per grid point");
  sweep_cmd->add_option("--seed", sw.seed, "sweep seed");
  sweep_cmd->add_option("--out", sw.out, "output directory");
  sweep_cmd->add_option("--threads", sw.common.threads, "worker thread cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      io::SynthConfig cfg;
      cfg.n_normal = sy.n_normal;
      cfg.n_af = sy.n_af;
      cfg.fs_hz = sy.fs;
      cfg.duration_s = sy.duration_s;
      cfg.domain = sy.domain == "target" ? io::Domain::Target : io::Domain::Source;
      cfg.seed = sy.seed;
      std::vector<io::SynthRecord> records = io::synth_dataset(cfg);
      io::write_synth_dataset(records, sy.out);
      std::cerr << "wrote " << records.size() << " records to " << sy.out << "\n";
      std::cout << "N," << cfg.n_normal << "\nA," << cfg.n_af << "\n";
      return 0;
    }

    if (*ingest) {
      io::Manifest m = io::ingest_physionet(ig.dir, ig.reference, ig.out);
      std::cerr << "ingested " << m.entries.size() << " records into " << ig.out << "\n";
      std::cout << "records," << m.entries.size() << "\n";
      return 0;
    }

    if (*train_cmd) {
      Config cfg = tr.common.load();
      if (!tr.augment.empty()) cfg.set("train.augment", tr.augment);
      if (!tr.balance.empty()) cfg.set("train.balance", tr.balance);
      if (tr.seed >= 0) cfg.set("train.seed", std::to_string(tr.seed));
      if (tr.epochs >= 0) cfg.set("train.epochs", std::to_string(tr.epochs));

      PreprocessConfig pre = PreprocessConfig::from_config(cfg);
      nn::ModelConfig model_cfg = nn::ModelConfig::from_config(cfg);
      nn::TrainConfig train_cfg = nn::TrainConfig::from_config(cfg);
      train_cfg.threads = tr.common.thread_count();
      AugmentPolicy policy = AugmentPolicy::from_config(cfg);

      std::vector<EcgRecord> data = load_preprocessed(
          tr.manifest, pre, Phase::Train, Rng::derive(train_cfg.seed, 0x9e7), train_cfg.threads);
      std::cerr << "training on " << data.size() << " records\n";
      nn::TrainResult result = nn::train(data, model_cfg, train_cfg, policy, pre);
      if (train_cfg.balance != nn::Balance::None) {
        std::cerr << "balanced class counts:";
        for (int c = 0; c < kNumClasses; ++c)
          if (result.balanced_counts[c] > 0)
            std::cerr << " " << label_name(static_cast<Label>(c)) << "="
                      << result.balanced_counts[c];
        std::cerr << "\n";
      }
      for (const nn::EpochMetrics& m : result.metrics)
        std::cout << m.epoch << ',' << fmt(m.loss) << ',' << fmt(m.accuracy) << "\n";
      nn::save_model(result.model, tr.out);
      std::cerr << "model written to " << tr.out << "\n";
      return 0;
    }

    if (*eval_cmd) {
      Config cfg = ev.common.load();
      if (ev.seed >= 0) cfg.set("tta.seed", std::to_string(ev.seed));
      PreprocessConfig pre = PreprocessConfig::from_config(cfg);
      const int threads = ev.common.thread_count();
      nn::DualNetModel model = nn::load_model(ev.model);
      std::vector<EcgRecord> data =
          load_preprocessed(ev.manifest, pre, Phase::Eval, 0, threads);

      std::vector<std::pair<Label, ProbVector>> preds(data.size());
      if (ev.tta == 0) {
        parallel_for(data.size(), threads, [&](std::size_t i) {
          Spectrogram s = compute_spectrogram(data[i], pre.spec_window, pre.spec_hop);
          nn::ForwardResult fr = nn::forward(model, data[i].samples, s, Phase::Eval);
          preds[i] = {fr.probs.argmax(), fr.probs};
        });
      } else {
        TtaConfig tta_cfg = TtaConfig::from_config(cfg);
        tta_cfg.n_runs = ev.tta;
        tta_cfg.threads = 1;
        const std::uint64_t base_seed = tta_cfg.seed;
        parallel_for(data.size(), threads, [&](std::size_t i) {
          TtaConfig per_record = tta_cfg;
          per_record.seed = Rng::derive(base_seed, i);
          PredictionSet ps = tta_predict_preprocessed(model, data[i], pre, per_record);
          preds[i] = {ps.final_label, ps.final_probs};
        });
      }

      std::vector<std::pair<Label, Label>> pairs(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) pairs[i] = {*data[i].label, preds[i].first};
      write_predictions(ev.out, data, preds);
      std::cout << "f1_af," << fmt(f1_score(af_confusion(pairs))) << "\n";
      std::cout << "f1_macro," << fmt(macro_f1(pairs)) << "\n";
      std::cout << "accuracy," << fmt(binary_accuracy(pairs)) << "\n";
      return 0;
    }

    if (*sweep_cmd) {
      Config cfg = sw.common.load();
      if (sw.seed >= 0) cfg.set("bench.seed", std::to_string(sw.seed));
      if (sw.repeats >= 0) cfg.set("bench.repeats", std::to_string(sw.repeats));
      PreprocessConfig pre = PreprocessConfig::from_config(cfg);
      const int threads = sw.common.thread_count();
      nn::DualNetModel model = nn::load_model(sw.model);
      std::vector<EcgRecord> data =
          load_preprocessed(sw.manifest, pre, Phase::Eval, 0, threads);

      if (sw.kind == "ttacurve") {
        std::vector<double> grid_d = cfg.get_list("bench.tta_n_grid");
        std::vector<int> n_grid(grid_d.begin(), grid_d.end());
        AugmentPolicy policy = AugmentPolicy::from_config(cfg);
        auto curve = bench::tta_curve(model, data, pre, policy, n_grid,
                                      static_cast<int>(cfg.get_int("bench.repeats")),
                                      static_cast<std::uint64_t>(cfg.get_int("bench.seed")),
                                      threads);
        bench::report_tta(curve, sw.out);
      } else {
        bench::SweepConfig scfg;
        scfg.kind = sw.kind == "drop"   ? bench::SweepKind::Drop
                    : sw.kind == "mask" ? bench::SweepKind::Mask
                                        : bench::SweepKind::Snr;
        scfg.grid = cfg.get_list(std::string("bench.") + sw.kind + "_grid");
        scfg.repeats = static_cast<int>(cfg.get_int("bench.repeats"));
        scfg.seed = static_cast<std::uint64_t>(cfg.get_int("bench.seed"));
        scfg.threads = threads;
        bench::SweepResult result = bench::robustness_sweep(model, data, pre, scfg);
        bench::report(result, sw.out);
      }
      std::cerr << "sweep outputs written to " << sw.out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
