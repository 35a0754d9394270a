#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ecgtta/graph.hpp"
#include "ecgtta/nn.hpp"
#include "ecgtta/nn_plan.hpp"
#include "ecgtta/rng.hpp"

namespace ecgtta::nn {

ModelConfig ModelConfig::from_config(const Config& cfg) {
  ModelConfig m;
  m.d_model = static_cast<int>(cfg.get_int("model.d_model"));
  m.n_heads = static_cast<int>(cfg.get_int("model.n_heads"));
  m.n_transformer_blocks = static_cast<int>(cfg.get_int("model.n_transformer_blocks"));
  m.ffn_mult = static_cast<int>(cfg.get_int("model.ffn_mult"));
  m.patch_len = static_cast<int>(cfg.get_int("model.patch_len"));
  m.spec_channels.clear();
  for (double c : cfg.get_list("model.spec_channels"))
    m.spec_channels.push_back(static_cast<int>(c));
  m.axial_blocks = static_cast<int>(cfg.get_int("model.axial_blocks"));
  m.axial_channels = static_cast<int>(cfg.get_int("model.axial_channels"));
  m.n_classes = static_cast<int>(cfg.get_int("model.n_classes"));
  m.dropout = cfg.get_double("model.dropout");
  return m;
}

void ModelConfig::validate(int input_len) const {
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
    throw std::invalid_argument("ModelConfig: d_model must be a positive multiple of n_heads");
  if (patch_len < 1 || input_len % patch_len != 0)
    throw std::invalid_argument("ModelConfig: patch_len must divide the input length");
  if (n_classes != 4) throw std::invalid_argument("ModelConfig: n_classes must be 4");
  if (spec_channels.empty())
    throw std::invalid_argument("ModelConfig: spec_channels must name at least one block");
  for (int c : spec_channels)
    if (c < 1) throw std::invalid_argument("ModelConfig: spec_channels entries must be >= 1");
  if (n_transformer_blocks < 1 || axial_blocks < 1 || axial_channels < 1 || ffn_mult < 1)
    throw std::invalid_argument("ModelConfig: block/channel counts must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw std::invalid_argument("ModelConfig: dropout must be in [0, 1)");
}

namespace {

int conv_out(int n, int k, int stride, int pad) { return (n + 2 * pad - k) / stride + 1; }

std::vector<long> im2col_indices(int cin, int h, int w, int k, int stride, int pad,
                                 int h_out, int w_out) {
  std::vector<long> idx(static_cast<std::size_t>(cin) * k * k * h_out * w_out);
  std::size_t p = 0;
  for (int c = 0; c < cin; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx)
        for (int oy = 0; oy < h_out; ++oy)
          for (int ox = 0; ox < w_out; ++ox) {
            int iy = oy * stride - pad + ky;
            int ix = ox * stride - pad + kx;
            idx[p++] = (iy < 0 || iy >= h || ix < 0 || ix >= w)
                           ? -1
                           : static_cast<long>(c) * h * w + static_cast<long>(iy) * w + ix;
          }
  return idx;
}

}  // namespace

ConvGeom ConvGeom::make(int cin, int cout, int h_in, int w_in, int k, int stride) {
  ConvGeom g;
  g.cin = cin;
  g.cout = cout;
  g.h_in = h_in;
  g.w_in = w_in;
  g.k = k;
  g.stride = stride;
  const int pad = k == 1 ? 0 : 1;
  g.h_out = conv_out(h_in, k, stride, pad);
  g.w_out = conv_out(w_in, k, stride, pad);
  if (g.h_out < 1 || g.w_out < 1)
    throw std::invalid_argument("spectrogram too small for the convolution stack");
  g.im2col = im2col_indices(cin, h_in, w_in, k, stride, pad, g.h_out, g.w_out);
  return g;
}

ForwardPlan::ForwardPlan(const ModelConfig& cfg, int input_len, int frames, int bins) {
  tokens = input_len / cfg.patch_len;

  pos_encoding = Tensor({tokens, cfg.d_model});
  for (int t = 0; t < tokens; ++t)
    for (int i = 0; i < cfg.d_model; ++i) {
      double angle = t / std::pow(10000.0, 2.0 * (i / 2) / cfg.d_model);
      pos_encoding.at(t, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }

  // Spectrogram stack: strided residual blocks per the channel plan, then a
  // strided projection into the axial-attention width; every stage halves the
  // time-frequency map.
  int h = frames, w = bins, cin = 1;
  for (int cout : cfg.spec_channels) {
    ResGeom rg;
    rg.conv1 = ConvGeom::make(cin, cout, h, w, 3, 2);
    rg.conv2 = ConvGeom::make(cout, cout, rg.conv1.h_out, rg.conv1.w_out, 3, 1);
    rg.skip = ConvGeom::make(cin, cout, h, w, 1, 2);
    if (rg.skip.h_out != rg.conv1.h_out || rg.skip.w_out != rg.conv1.w_out)
      throw std::logic_error("residual skip geometry mismatch");
    h = rg.conv1.h_out;
    w = rg.conv1.w_out;
    cin = cout;
    res.push_back(std::move(rg));
  }
  proj = ConvGeom::make(cin, cfg.axial_channels, h, w, 3, 2);

  ax_h = proj.h_out;
  ax_w = proj.w_out;
  const int c = cfg.axial_channels, hw = ax_h * ax_w;
  time_gather.resize(static_cast<std::size_t>(hw) * c);
  time_scatter.resize(static_cast<std::size_t>(hw) * c);
  freq_gather.resize(static_cast<std::size_t>(hw) * c);
  freq_scatter.resize(static_cast<std::size_t>(hw) * c);
  for (int ch = 0; ch < c; ++ch)
    for (int hh = 0; hh < ax_h; ++hh)
      for (int ww = 0; ww < ax_w; ++ww) {
        long map_idx = static_cast<long>(ch) * hw + static_cast<long>(hh) * ax_w + ww;
        long tseq = (static_cast<long>(ww) * ax_h + hh) * c + ch;
        long fseq = (static_cast<long>(hh) * ax_w + ww) * c + ch;
        time_gather[static_cast<std::size_t>(tseq)] = map_idx;
        time_scatter[static_cast<std::size_t>(map_idx)] = tseq;
        freq_gather[static_cast<std::size_t>(fseq)] = map_idx;
        freq_scatter[static_cast<std::size_t>(map_idx)] = fseq;
      }
}

namespace {

struct Builder {
  DualNetModel& m;

  void add(const std::string& name, std::vector<int> shape, bool trainable = true) {
    NamedTensor nt;
    nt.name = name;
    nt.tensor = Tensor(std::move(shape));
    nt.trainable = trainable;
    m.by_name[name] = m.tensors.size();
    m.tensors.push_back(std::move(nt));
  }

  void add_cbn(const std::string& prefix, int channels, int d_model) {
    add(prefix + ".gamma", {channels});
    add(prefix + ".beta", {channels});
    add(prefix + ".cbn_scale", {channels, d_model});
    add(prefix + ".cbn_shift", {channels, d_model});
    add(prefix + ".run_mean", {channels}, false);
    add(prefix + ".run_var", {channels}, false);
  }

  void add_attention(const std::string& prefix, int dim) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) add(prefix + "." + w, {dim, dim});
    for (const char* b : {"bq", "bk", "bv", "bo"}) add(prefix + "." + b, {dim});
  }
};

DualNetModel build_structure(const ModelConfig& cfg, int input_len, int spec_frames,
                             int spec_bins) {
  cfg.validate(input_len);
  DualNetModel m;
  m.cfg = cfg;
  m.input_len = input_len;
  m.spec_frames = spec_frames;
  m.spec_bins = spec_bins;
  m.plan = std::make_shared<ForwardPlan>(cfg, input_len, spec_frames, spec_bins);

  Builder b{m};
  const int d = cfg.d_model;

  b.add("sig.embed.w", {cfg.patch_len, d});
  b.add("sig.embed.b", {d});
  for (int i = 0; i < cfg.n_transformer_blocks; ++i) {
    std::string p = "sig.block" + std::to_string(i);
    b.add_attention(p + ".attn", d);
    b.add(p + ".ln1.gamma", {d});
    b.add(p + ".ln1.beta", {d});
    b.add(p + ".ffn.w1", {d, d * cfg.ffn_mult});
    b.add(p + ".ffn.b1", {d * cfg.ffn_mult});
    b.add(p + ".ffn.w2", {d * cfg.ffn_mult, d});
    b.add(p + ".ffn.b2", {d});
    b.add(p + ".ln2.gamma", {d});
    b.add(p + ".ln2.beta", {d});
  }

  auto res_block = [&](const std::string& p, int cin, int cout) {
    b.add(p + ".conv1.w", {cout, cin * 9});
    b.add(p + ".conv1.b", {cout});
    b.add_cbn(p + ".bn1", cout, d);
    b.add(p + ".conv2.w", {cout, cout * 9});
    b.add(p + ".conv2.b", {cout});
    b.add_cbn(p + ".bn2", cout, d);
    b.add(p + ".skip.w", {cout, cin});
    b.add(p + ".skip.b", {cout});
  };
  int cin = 1;
  for (std::size_t i = 0; i < cfg.spec_channels.size(); ++i) {
    res_block("spec.res" + std::to_string(i), cin, cfg.spec_channels[i]);
    cin = cfg.spec_channels[i];
  }

  b.add("spec.proj.w", {cfg.axial_channels, cin * 9});
  b.add("spec.proj.b", {cfg.axial_channels});
  b.add_cbn("spec.proj.bn", cfg.axial_channels, d);

  for (int i = 0; i < cfg.axial_blocks; ++i) {
    std::string p = "spec.axial" + std::to_string(i);
    b.add_cbn(p + ".bn1", cfg.axial_channels, d);
    b.add_attention(p + ".time", cfg.axial_channels);
    b.add_cbn(p + ".bn2", cfg.axial_channels, d);
    b.add_attention(p + ".freq", cfg.axial_channels);
  }

  b.add("spec.out.w", {cfg.axial_channels, d});
  b.add("spec.out.b", {d});
  b.add("cls.w", {d, cfg.n_classes});
  b.add("cls.b", {cfg.n_classes});

  // Flat parameter layout over the trainable tensors.
  m.grad_offset.assign(m.tensors.size(), -1);
  int offset = 0;
  for (std::size_t i = 0; i < m.tensors.size(); ++i) {
    if (!m.tensors[i].trainable) continue;
    m.grad_offset[i] = offset;
    offset += static_cast<int>(m.tensors[i].tensor.size());
  }
  m.n_params = offset;
  return m;
}

double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

DualNetModel init_model(const ModelConfig& cfg, int input_len, int spec_frames,
                        int spec_bins, std::uint64_t seed) {
  DualNetModel m = build_structure(cfg, input_len, spec_frames, spec_bins);
  Rng rng(Rng::mix64(seed ^ 0x6e6e5f696e6974ULL));

  for (NamedTensor& nt : m.tensors) {
    Tensor& t = nt.tensor;
    const std::string& n = nt.name;
    std::string leaf = n.substr(n.rfind('.') + 1);
    if (leaf == "run_var" || leaf == "gamma") {
      std::fill(t.data.begin(), t.data.end(), 1.0);
    } else if (leaf[0] == 'b' || leaf == "run_mean" || leaf == "cbn_scale" ||
               leaf == "cbn_shift") {
      // Biases, BN shifts, running means and the conditional projections all
      // start at zero; zero conditional projections reduce every conditional
      // batch norm to its plain form.
      std::fill(t.data.begin(), t.data.end(), 0.0);
    } else {
      // Weight matrices: uniform +- sqrt(6 / (fan_in + fan_out)); the bound
      // is symmetric in the two fans, so matrix orientation does not matter.
      double bound = std::sqrt(6.0 / (t.rows() + t.cols()));
      for (double& v : t.data) v = quantize(rng.uniform(-bound, bound));
    }
  }
  return m;
}

Tensor& DualNetModel::at(const std::string& name) {
  auto it = by_name.find(name);
  if (it == by_name.end()) throw std::invalid_argument("no tensor named " + name);
  return tensors[it->second].tensor;
}

const Tensor& DualNetModel::at(const std::string& name) const {
  auto it = by_name.find(name);
  if (it == by_name.end()) throw std::invalid_argument("no tensor named " + name);
  return tensors[it->second].tensor;
}

std::vector<double> DualNetModel::flat_params() const {
  std::vector<double> flat(static_cast<std::size_t>(n_params));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (grad_offset[i] < 0) continue;
    std::copy(tensors[i].tensor.data.begin(), tensors[i].tensor.data.end(),
              flat.begin() + grad_offset[i]);
  }
  return flat;
}

void DualNetModel::set_flat_params(std::span<const double> flat) {
  if (flat.size() != static_cast<std::size_t>(n_params))
    throw std::invalid_argument("set_flat_params: size mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (grad_offset[i] < 0) continue;
    Tensor& t = tensors[i].tensor;
    for (std::size_t j = 0; j < t.size(); ++j)
      t.data[j] = quantize(flat[static_cast<std::size_t>(grad_offset[i]) + j]);
  }
}

double cross_entropy(const ProbVector& probs, Label label) {
  double p = probs.probs[static_cast<int>(label)];
  return -std::log(std::max(p, 1e-12));
}

// --- serialization -----------------------------------------------------------

namespace {
constexpr char kModelMagic[4] = {'D', 'N', 'W', '1'};

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
}  // namespace

void save_model(const DualNetModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(kModelMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(model.tensors.size()));
  for (const NamedTensor& nt : model.tensors) {
    const std::string& n = nt.name;
    std::uint16_t len = static_cast<std::uint16_t>(n.size());
    unsigned char lb[2] = {static_cast<unsigned char>(len & 0xFF),
                           static_cast<unsigned char>(len >> 8)};
    out.write(reinterpret_cast<const char*>(lb), 2);
    out.write(n.data(), len);
    unsigned char rank = static_cast<unsigned char>(nt.tensor.shape.size());
    out.write(reinterpret_cast<const char*>(&rank), 1);
    for (int d : nt.tensor.shape) put_u32(out, static_cast<std::uint32_t>(d));
    std::vector<float> buf(nt.tensor.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
      buf[i] = static_cast<float>(nt.tensor.data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * 4));
  }
  std::ostringstream blob;
  blob << "d_model=" << model.cfg.d_model << "\nn_heads=" << model.cfg.n_heads
       << "\nn_transformer_blocks=" << model.cfg.n_transformer_blocks
       << "\nffn_mult=" << model.cfg.ffn_mult << "\npatch_len=" << model.cfg.patch_len
       << "\nspec_channels=";
  for (std::size_t i = 0; i < model.cfg.spec_channels.size(); ++i)
    blob << (i ? "," : "") << model.cfg.spec_channels[i];
  blob << "\naxial_blocks=" << model.cfg.axial_blocks
       << "\naxial_channels=" << model.cfg.axial_channels
       << "\nn_classes=" << model.cfg.n_classes;
  char dbuf[40];
  std::snprintf(dbuf, sizeof(dbuf), "%.17g", model.cfg.dropout);
  blob << "\ndropout=" << dbuf << "\ninput_len=" << model.input_len
       << "\nspec_frames=" << model.spec_frames << "\nspec_bins=" << model.spec_bins
       << "\n";
  std::string blob_s = blob.str();
  put_u32(out, static_cast<std::uint32_t>(blob_s.size()));
  out.write(blob_s.data(), static_cast<std::streamsize>(blob_s.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

DualNetModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kModelMagic, 4) != 0)
    throw std::runtime_error("bad magic in model file " + path.string());
  std::uint32_t n_tensors = get_u32(in);
  if (!in) throw std::runtime_error("truncated model file " + path.string());

  struct RawTensor {
    std::vector<int> shape;
    std::vector<float> data;
  };
  std::map<std::string, RawTensor> raw;
  std::vector<std::string> order;
  for (std::uint32_t t = 0; t < n_tensors; ++t) {
    unsigned char lb[2];
    in.read(reinterpret_cast<char*>(lb), 2);
    std::uint16_t len = static_cast<std::uint16_t>(lb[0] | (lb[1] << 8));
    std::string name(len, '\0');
    in.read(name.data(), len);
    unsigned char rank = 0;
    in.read(reinterpret_cast<char*>(&rank), 1);
    if (!in) throw std::runtime_error("truncated tensor table in " + path.string());
    RawTensor rt;
    std::size_t count = 1;
    for (int r = 0; r < rank; ++r) {
      std::uint32_t d = get_u32(in);
      rt.shape.push_back(static_cast<int>(d));
      count *= d;
    }
    rt.data.resize(count);
    in.read(reinterpret_cast<char*>(rt.data.data()),
            static_cast<std::streamsize>(count * 4));
    if (in.gcount() != static_cast<std::streamsize>(count * 4))
      throw std::runtime_error("truncated tensor data for '" + name + "' in " +
                               path.string());
    order.push_back(name);
    raw[name] = std::move(rt);
  }
  std::uint32_t blob_len = get_u32(in);
  if (!in) throw std::runtime_error("missing config blob in " + path.string());
  std::string blob(blob_len, '\0');
  in.read(blob.data(), blob_len);
  if (in.gcount() != static_cast<std::streamsize>(blob_len))
    throw std::runtime_error("truncated config blob in " + path.string());

  std::map<std::string, std::string> kv;
  std::istringstream bs(blob);
  std::string line;
  while (std::getline(bs, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("bad config blob line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto req = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end())
      throw std::runtime_error(std::string("config blob missing key ") + key);
    return it->second;
  };
  ModelConfig cfg;
  cfg.d_model = std::stoi(req("d_model"));
  cfg.n_heads = std::stoi(req("n_heads"));
  cfg.n_transformer_blocks = std::stoi(req("n_transformer_blocks"));
  cfg.ffn_mult = std::stoi(req("ffn_mult"));
  cfg.patch_len = std::stoi(req("patch_len"));
  cfg.spec_channels.clear();
  {
    std::istringstream cs(req("spec_channels"));
    std::string item;
    while (std::getline(cs, item, ',')) cfg.spec_channels.push_back(std::stoi(item));
  }
  cfg.axial_blocks = std::stoi(req("axial_blocks"));
  cfg.axial_channels = std::stoi(req("axial_channels"));
  cfg.n_classes = std::stoi(req("n_classes"));
  cfg.dropout = std::stod(req("dropout"));

  DualNetModel m = build_structure(cfg, std::stoi(req("input_len")),
                                   std::stoi(req("spec_frames")),
                                   std::stoi(req("spec_bins")));
  for (const std::string& name : order) {
    auto it = m.by_name.find(name);
    if (it == m.by_name.end())
      throw std::runtime_error("model file " + path.string() +
                               ": unknown tensor name '" + name + "'");
    Tensor& dst = m.tensors[it->second].tensor;
    const RawTensor& src = raw[name];
    if (src.shape != dst.shape)
      throw std::runtime_error("model file " + path.string() + ": tensor '" + name +
                               "' shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst.data[i] = static_cast<double>(src.data[i]);
  }
  for (const NamedTensor& nt : m.tensors)
    if (!raw.count(nt.name))
      throw std::runtime_error("model file " + path.string() + ": missing tensor '" +
                               nt.name + "'");
  return m;
}

}  // namespace ecgtta::nn
