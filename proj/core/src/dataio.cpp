#include "ecgtta/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ecgtta/rng.hpp"

namespace ecgtta::io {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'E', 'C', 'G', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(trim(f));
  return fields;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_normal < 0 || n_af < 0)
    throw std::invalid_argument("SynthConfig: counts must be >= 0");
  if (duration_s <= 0) throw std::invalid_argument("SynthConfig: duration_s must be > 0");
  if (fs_hz < 100 || fs_hz > 1000)
    throw std::invalid_argument("SynthConfig: fs_hz must be in [100, 1000]");
}

void write_record(const EcgRecord& record, const fs::path& path) {
  record.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(record.samples.size()));
  put_u32(out, record.fs_hz);
  put_u32(out, 0);
  static_assert(sizeof(float) == 4);
  // Little-endian host assumed for the payload fast path.
  out.write(reinterpret_cast<const char*>(record.samples.data()),
            static_cast<std::streamsize>(record.samples.size() * 4));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

EcgRecord read_record(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad magic in " + path.string());
  std::uint32_t count = get_u32(in);
  std::uint32_t fs = get_u32(in);
  get_u32(in);  // reserved
  if (!in) throw std::runtime_error("truncated header in " + path.string());
  if (count == 0) throw std::runtime_error("zero sample count in " + path.string());
  EcgRecord rec;
  rec.id = path.stem().string();
  rec.fs_hz = fs;
  rec.samples.resize(count);
  in.read(reinterpret_cast<char*>(rec.samples.data()),
          static_cast<std::streamsize>(count) * 4);
  if (in.gcount() != static_cast<std::streamsize>(count) * 4)
    throw std::runtime_error("truncated payload in " + path.string() + ": declared " +
                             std::to_string(count) + " samples");
  return rec;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path.string());
  Manifest m;
  m.dir = path.parent_path();
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,path,label,fs_hz")
    throw std::runtime_error("manifest " + path.string() +
                             ": expected header 'id,path,label,fs_hz'");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 4)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected 4 fields");
    if (f[2].size() != 1)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": bad label '" + f[2] + "'");
    ManifestEntry e;
    e.id = f[0];
    e.path = f[1];
    e.label = label_from_code(f[2][0]);
    e.fs_hz = static_cast<std::uint32_t>(std::stoul(f[3]));
    m.entries.push_back(std::move(e));
  }
  for (size_t i = 0; i < m.entries.size(); ++i)
    for (size_t j = i + 1; j < m.entries.size(); ++j)
      if (m.entries[i].id == m.entries[j].id)
        throw std::runtime_error("manifest: duplicate id '" + m.entries[i].id + "'");
  return m;
}

void write_manifest(const Manifest& m, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
  out << "id,path,label,fs_hz\n";
  for (const auto& e : m.entries)
    out << e.id << ',' << e.path << ',' << label_code(e.label) << ',' << e.fs_hz << '\n';
}

std::vector<EcgRecord> load_manifest(const fs::path& path, Manifest* out_manifest) {
  Manifest m = read_manifest(path);
  std::vector<EcgRecord> records;
  records.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    fs::path p = m.dir / e.path;
    if (!fs::exists(p))
      throw std::runtime_error("manifest entry '" + e.id + "': missing file " + p.string());
    EcgRecord rec = read_record(p);
    if (rec.fs_hz != e.fs_hz)
      throw std::runtime_error("manifest entry '" + e.id + "': fs mismatch (manifest " +
                               std::to_string(e.fs_hz) + " Hz, file header " +
                               std::to_string(rec.fs_hz) + " Hz)");
    rec.id = e.id;
    rec.label = e.label;
    records.push_back(std::move(rec));
  }
  if (out_manifest) *out_manifest = std::move(m);
  return records;
}

namespace {

struct Wave {
  double offset_s;  // relative to the R peak
  double amp;
  double sigma_s;
};

// P, Q, R, S, T as Gaussian bumps. AF records skip index 0 (the P bump).
constexpr Wave kPqrst[5] = {
    {-0.20, 0.15, 0.025},  // P
    {-0.035, -0.10, 0.010},
    {0.00, 1.00, 0.012},
    {0.035, -0.20, 0.012},
    {0.30, 0.35, 0.060},  // T
};

SynthRecord synth_one(const SynthConfig& cfg, Label label, std::uint64_t index) {
  Rng rng = Rng::substream(cfg.seed, index);
  const std::size_t n = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.fs_hz));
  const double dt = 1.0 / cfg.fs_hz;

  SynthRecord out;
  // Beat times over the record (plus one beat of margin at each end so edge
  // bumps are complete).
  double t = -1.2;
  while (t < cfg.duration_s + 1.2) {
    out.beat_times_s.push_back(t);
    double rr = label == Label::AF ? rng.uniform(0.4, 1.2) : rng.normal(0.8, 0.02);
    rr = std::max(rr, 0.25);
    t += rr;
  }

  std::vector<double> clean(n, 0.0);
  const int first_wave = label == Label::AF ? 1 : 0;
  for (double beat : out.beat_times_s) {
    for (int w = first_wave; w < 5; ++w) {
      const Wave& wv = kPqrst[w];
      double center = beat + wv.offset_s;
      // Gaussians are negligible past 5 sigma; only touch that span.
      long i0 = std::lround((center - 5 * wv.sigma_s) / dt);
      long i1 = std::lround((center + 5 * wv.sigma_s) / dt);
      i0 = std::max(i0, 0L);
      i1 = std::min(i1, static_cast<long>(n) - 1);
      for (long i = i0; i <= i1; ++i) {
        double d = i * dt - center;
        clean[i] += wv.amp * std::exp(-d * d / (2 * wv.sigma_s * wv.sigma_s));
      }
    }
  }

  if (cfg.domain == Domain::Target) {
    double scale = rng.uniform(0.5, 1.5);
    double wander_f = rng.uniform(0.2, 0.5);
    double wander_amp = scale * rng.uniform(0.2, 0.5);
    double wander_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i) {
      clean[i] = scale * clean[i] +
                 wander_amp * std::sin(2.0 * std::numbers::pi * wander_f * i * dt +
                                       wander_phase);
    }
  }

  out.clean.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.clean[i] = static_cast<float>(clean[i]);

  out.record.fs_hz = cfg.fs_hz;
  out.record.label = label;
  out.record.samples.resize(n);
  if (cfg.domain == Domain::Target) {
    double power = 0.0;
    for (std::size_t i = 0; i < n; ++i) power += clean[i] * clean[i];
    power /= static_cast<double>(n);
    const double snr_db = 15.0;
    double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    for (std::size_t i = 0; i < n; ++i)
      out.record.samples[i] = static_cast<float>(clean[i] + rng.normal(0.0, sigma));
  } else {
    out.record.samples = out.clean;
  }

  // Keep only beats inside the record for the sidecar.
  std::erase_if(out.beat_times_s,
                [&](double b) { return b < 0.0 || b > cfg.duration_s; });
  return out;
}

}  // namespace

std::vector<SynthRecord> synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SynthRecord> out;
  out.reserve(cfg.n_normal + cfg.n_af);
  const char* prefix = cfg.domain == Domain::Source ? "src" : "tgt";
  for (int i = 0; i < cfg.n_normal + cfg.n_af; ++i) {
    Label label = i < cfg.n_normal ? Label::Normal : Label::AF;
    SynthRecord r = synth_one(cfg, label, static_cast<std::uint64_t>(i));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s-%c-%04d", prefix, label_code(label), i);
    r.record.id = buf;
    out.push_back(std::move(r));
  }
  return out;
}

Manifest write_synth_dataset(const std::vector<SynthRecord>& records,
                             const fs::path& out_dir) {
  fs::create_directories(out_dir);
  Manifest m;
  m.dir = out_dir;
  for (const auto& r : records) {
    const std::string base = r.record.id;
    write_record(r.record, out_dir / (base + ".ecg"));

    EcgRecord clean;
    clean.id = base;
    clean.fs_hz = r.record.fs_hz;
    clean.samples = r.clean;
    write_record(clean, out_dir / (base + ".clean"));

    std::ofstream truth(out_dir / (base + ".truth.csv"));
    truth << "beat_time_s\n";
    char buf[32];
    for (double b : r.beat_times_s) {
      std::snprintf(buf, sizeof(buf), "%.9g", b);
      truth << buf << '\n';
    }

    m.entries.push_back({base, base + ".ecg", *r.record.label, r.record.fs_hz});
  }
  write_manifest(m, out_dir / "manifest.csv");
  return m;
}

Manifest ingest_physionet(const fs::path& dir, const fs::path& reference_csv,
                          const fs::path& out_dir) {
  std::ifstream ref(reference_csv);
  if (!ref) throw std::runtime_error("cannot open reference CSV: " + reference_csv.string());
  fs::create_directories(out_dir);

  Manifest m;
  m.dir = out_dir;
  std::string line;
  int lineno = 0;
  while (std::getline(ref, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 2)
      throw std::runtime_error(reference_csv.string() + ":" + std::to_string(lineno) +
                               ": expected 'id,label'");
    const std::string& id = f[0];
    if (f[1].size() != 1)
      throw std::runtime_error("record '" + id + "': rejected label '" + f[1] + "'");
    Label label;
    try {
      label = label_from_code(f[1][0]);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("record '" + id + "': rejected label '" + f[1] + "'");
    }

    fs::path sample_file = dir / (id + ".txt");
    if (!fs::exists(sample_file))
      throw std::runtime_error("record '" + id + "': sample file missing: " +
                               sample_file.string());
    std::ifstream in(sample_file);
    EcgRecord rec;
    rec.id = id;
    rec.fs_hz = 300;  // PhysioNet 2017 native rate
    rec.label = label;
    std::string sample_line;
    int sample_no = 0;
    while (std::getline(in, sample_line)) {
      ++sample_no;
      std::string t = trim(sample_line);
      if (t.empty()) continue;
      char* end = nullptr;
      double v = std::strtod(t.c_str(), &end);
      if (end == t.c_str() || *end != '\0')
        throw std::runtime_error("record '" + id + "': unparsable sample at line " +
                                 std::to_string(sample_no));
      rec.samples.push_back(static_cast<float>(v));
    }
    if (rec.samples.empty())
      throw std::runtime_error("record '" + id + "': no samples");

    write_record(rec, out_dir / (id + ".ecg"));
    m.entries.push_back({id, id + ".ecg", label, rec.fs_hz});
  }
  write_manifest(m, out_dir / "manifest.csv");
  return m;
}

}  // namespace ecgtta::io
