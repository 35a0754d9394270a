#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ecgtta/types.hpp"

namespace ecgtta::io {

struct ManifestEntry {
  std::string id;
  std::string path;  // relative to the manifest's directory
  Label label;
  std::uint32_t fs_hz;
};

struct Manifest {
  std::filesystem::path dir;  // directory the entry paths are relative to
  std::vector<ManifestEntry> entries;
};

enum class Domain { Source, Target };

struct SynthConfig {
  int n_normal = 0;
  int n_af = 0;
  std::uint32_t fs_hz = 300;
  double duration_s = 30.0;
  Domain domain = Domain::Source;
  std::uint64_t seed = 1;

  void validate() const;  // counts >= 0, duration > 0, fs in [100, 1000]
};

// One synthetic record plus the ground truth the generator retains for
// oracle-based tests. The sidecar data never feeds the classifier.
struct SynthRecord {
  EcgRecord record;
  std::vector<float> clean;         // pre-noise waveform, same length
  std::vector<double> beat_times_s; // R-peak times
};

// --- binary signal format -------------------------------------------------
// 16-byte header: magic "ECG1", u32 LE sample count, u32 LE fs_hz,
// u32 reserved (0); then count IEEE-754 binary32 LE samples.

void write_record(const EcgRecord& record, const std::filesystem::path& path);
EcgRecord read_record(const std::filesystem::path& path);

// --- manifests --------------------------------------------------------------
// UTF-8 CSV with header `id,path,label,fs_hz`.

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& m, const std::filesystem::path& path);

// Reads the manifest and every signal file it references. Records are
// returned in manifest order with labels attached. Throws on unknown label
// codes, missing files, or an fs_hz mismatch between manifest row and file
// header.
std::vector<EcgRecord> load_manifest(const std::filesystem::path& path,
                                     Manifest* out_manifest = nullptr);

// --- synthetic generator ----------------------------------------------------
// PQRST trains built from Gaussian bumps. Normal rhythm: RR ~ N(0.8 s,
// 0.02 s) with a P bump on every beat. AF rhythm: RR ~ U(0.4 s, 1.2 s) and no
// P bump. Target-domain records additionally get a per-record amplitude scale
// from U(0.5, 1.5), a 0.2-0.5 Hz baseline-wander sinusoid, and white Gaussian
// noise at 15 dB SNR relative to the pre-noise waveform. Deterministic for a
// fixed seed: record i uses the substream Rng::substream(seed, i).
std::vector<SynthRecord> synth_dataset(const SynthConfig& cfg);

// Writes records, sidecars (`<id>.truth.csv`, `<id>.clean`) and a
// `manifest.csv` into out_dir. Returns the manifest.
Manifest write_synth_dataset(const std::vector<SynthRecord>& records,
                             const std::filesystem::path& out_dir);

// --- external corpus ingestion ----------------------------------------------
// Expects one plain-text sample file per record (`<id>.txt`, one voltage per
// line, native 300 Hz) plus a reference CSV of `id,label` rows. Converts each
// record to the binary format in out_dir and returns the written manifest.
// Records with labels outside {N, A, O, ~} are rejected with an error naming
// the id, as are records listed in the CSV whose sample file is missing.
Manifest ingest_physionet(const std::filesystem::path& dir,
                          const std::filesystem::path& reference_csv,
                          const std::filesystem::path& out_dir);

}  // namespace ecgtta::io
