#include <cmath>

#include "ecgtta/graph.hpp"
#include "ecgtta/nn.hpp"
#include "ecgtta/nn_forward.hpp"
#include "ecgtta/nn_plan.hpp"
#include "ecgtta/rng.hpp"

namespace ecgtta::nn {

namespace {

constexpr double kNormEps = 1e-5;

struct Ctx {
  Graph& g;
  const DualNetModel& m;
  const ForwardPlan& plan;
  Phase phase;
  Rng* dropout_rng;
  std::vector<BnSpatialStat>* bn_stats;

  Graph::NodeId p(const std::string& name) {
    std::size_t idx = m.by_name.at(name);
    return g.param(m.tensors[idx].tensor, m.grad_offset[idx]);
  }
};

Graph::NodeId dropout(Ctx& ctx, Graph::NodeId x) {
  const double rate = ctx.m.cfg.dropout;
  if (ctx.phase != Phase::Train || rate <= 0.0) return x;
  if (!ctx.dropout_rng)
    throw std::invalid_argument("train-phase forward with dropout needs an rng");
  Tensor mask(ctx.g.value(x).shape);
  const double keep = 1.0 - rate;
  for (double& v : mask.data)
    v = ctx.dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
  return ctx.g.mul(x, ctx.g.input(std::move(mask)));
}

// Multi-head self-attention over a [T, C] sequence; head splitting along the
// feature axis. With n_heads = 1 this is plain single-head attention.
Graph::NodeId attention_seq(Graph& g, Graph::NodeId x, Graph::NodeId wq,
                            Graph::NodeId bq, Graph::NodeId wk, Graph::NodeId bk,
                            Graph::NodeId wv, Graph::NodeId bv, Graph::NodeId wo,
                            Graph::NodeId bo, int n_heads) {
  const int c = g.value(x).cols();
  const int t = g.value(x).rows();
  const int dh = c / n_heads;
  Graph::NodeId q = g.add_rowvec(g.matmul(x, wq), bq);
  Graph::NodeId k = g.add_rowvec(g.matmul(x, wk), bk);
  Graph::NodeId v = g.add_rowvec(g.matmul(x, wv), bv);
  const double scale = 1.0 / std::sqrt(dh);
  std::vector<Graph::NodeId> heads;
  for (int h = 0; h < n_heads; ++h) {
    Graph::NodeId qh = n_heads == 1 ? q : g.slice_cols(q, h * dh, (h + 1) * dh);
    Graph::NodeId kh = n_heads == 1 ? k : g.slice_cols(k, h * dh, (h + 1) * dh);
    Graph::NodeId vh = n_heads == 1 ? v : g.slice_cols(v, h * dh, (h + 1) * dh);
    heads.push_back(g.attention_pack(qh, kh, vh, 1, t, scale));
  }
  Graph::NodeId cat = n_heads == 1 ? heads[0] : g.concat_cols(heads);
  return g.add_rowvec(g.matmul(cat, wo), bo);
}

Graph::NodeId layernorm(Ctx& ctx, Graph::NodeId x, const std::string& prefix) {
  Graph& g = ctx.g;
  Graph::NodeId xhat = g.norm_rows(x, kNormEps);
  return g.add_rowvec(g.mul_rowvec(xhat, ctx.p(prefix + ".gamma")),
                      ctx.p(prefix + ".beta"));
}

// Conditional batch normalization on a [C, HW] feature map. Train phase
// standardizes each channel by its spatial statistics (captured for the
// running-average update); eval phase uses the stored running statistics.
// The affine terms are gamma/beta plus per-channel deltas projected from the
// signal-branch latent.
Graph::NodeId cbn(Ctx& ctx, Graph::NodeId x, const std::string& prefix,
                  Graph::NodeId latent) {
  Graph& g = ctx.g;
  const Tensor& tx = g.value(x);
  const int c = tx.rows(), n = tx.cols();

  Graph::NodeId xhat;
  if (ctx.phase == Phase::Train) {
    if (ctx.bn_stats) {
      BnSpatialStat st;
      st.mean.resize(static_cast<std::size_t>(c));
      st.var.resize(static_cast<std::size_t>(c));
      for (int i = 0; i < c; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += tx.at(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
          double d = tx.at(i, j) - mean;
          var += d * d;
        }
        st.mean[static_cast<std::size_t>(i)] = mean;
        st.var[static_cast<std::size_t>(i)] = var / n;
      }
      ctx.bn_stats->push_back(std::move(st));
    }
    xhat = g.norm_rows(x, kNormEps);
  } else {
    const Tensor& rm = ctx.m.at(prefix + ".run_mean");
    const Tensor& rv = ctx.m.at(prefix + ".run_var");
    Tensor neg_mean({c});
    Tensor inv_std({c});
    for (int i = 0; i < c; ++i) {
      neg_mean.data[static_cast<std::size_t>(i)] = -rm.data[static_cast<std::size_t>(i)];
      inv_std.data[static_cast<std::size_t>(i)] =
          1.0 / std::sqrt(rv.data[static_cast<std::size_t>(i)] + kNormEps);
    }
    xhat = g.mul_colvec(g.add_colvec(x, g.input(std::move(neg_mean))),
                        g.input(std::move(inv_std)));
  }

  Graph::NodeId latent_t = g.transpose(latent);  // [d, 1]
  Graph::NodeId dgamma = g.matmul(ctx.p(prefix + ".cbn_scale"), latent_t);  // [c,1]
  Graph::NodeId dbeta = g.matmul(ctx.p(prefix + ".cbn_shift"), latent_t);
  Graph::NodeId gamma = g.add(g.reshape(ctx.p(prefix + ".gamma"), {c, 1}), dgamma);
  Graph::NodeId beta = g.add(g.reshape(ctx.p(prefix + ".beta"), {c, 1}), dbeta);
  return g.add_colvec(g.mul_colvec(xhat, gamma), beta);
}

// Axial attention along one axis of a [C, HW] map: gather into stacked
// sequences, run shared-weight attention per sequence, scatter back.
Graph::NodeId axial_attention(Ctx& ctx, Graph::NodeId x, const std::string& prefix,
                              const std::vector<long>& gather_idx,
                              const std::vector<long>& scatter_idx, int seq_len,
                              int n_seqs) {
  Graph& g = ctx.g;
  const int c = g.value(x).rows();
  const int hw = g.value(x).cols();
  Graph::NodeId seqs = g.gather(x, gather_idx, {n_seqs * seq_len, c});

  Graph::NodeId wq = ctx.p(prefix + ".wq"), bq = ctx.p(prefix + ".bq");
  Graph::NodeId wk = ctx.p(prefix + ".wk"), bk = ctx.p(prefix + ".bk");
  Graph::NodeId wv = ctx.p(prefix + ".wv"), bv = ctx.p(prefix + ".bv");
  Graph::NodeId wo = ctx.p(prefix + ".wo"), bo = ctx.p(prefix + ".bo");

  Graph::NodeId q = g.add_rowvec(g.matmul(seqs, wq), bq);
  Graph::NodeId k = g.add_rowvec(g.matmul(seqs, wk), bk);
  Graph::NodeId v = g.add_rowvec(g.matmul(seqs, wv), bv);
  Graph::NodeId att =
      g.attention_pack(q, k, v, n_seqs, seq_len, 1.0 / std::sqrt(static_cast<double>(c)));
  Graph::NodeId proj = g.add_rowvec(g.matmul(att, wo), bo);
  return g.gather(proj, scatter_idx, {c, hw});
}

Graph::NodeId conv(Ctx& ctx, Graph::NodeId x, const ConvGeom& geom,
                   const std::string& prefix) {
  Graph& g = ctx.g;
  Graph::NodeId col =
      g.gather(x, geom.im2col, {geom.cin * geom.k * geom.k, geom.h_out * geom.w_out});
  return g.add_colvec(g.matmul(ctx.p(prefix + ".w"), col), ctx.p(prefix + ".b"));
}

Graph::NodeId res_block(Ctx& ctx, Graph::NodeId x, const std::string& prefix,
                        const ConvGeom& g1, const ConvGeom& g2, const ConvGeom& gs,
                        Graph::NodeId latent) {
  Graph& g = ctx.g;
  Graph::NodeId y = conv(ctx, x, g1, prefix + ".conv1");
  y = g.relu(cbn(ctx, y, prefix + ".bn1", latent));
  y = conv(ctx, y, g2, prefix + ".conv2");
  y = cbn(ctx, y, prefix + ".bn2", latent);
  Graph::NodeId skip = conv(ctx, x, gs, prefix + ".skip");
  return g.relu(g.add(y, skip));
}

}  // namespace

BuiltForward build_forward(Graph& g, const DualNetModel& m,
                           std::span<const float> signal, const Spectrogram& spec,
                           Phase phase, Rng* dropout_rng,
                           std::vector<BnSpatialStat>* bn_stats) {
  if (static_cast<int>(signal.size()) != m.input_len)
    throw std::invalid_argument("forward: signal length " +
                                std::to_string(signal.size()) + " != model input " +
                                std::to_string(m.input_len));
  if (spec.frames != m.spec_frames || spec.bins != m.spec_bins)
    throw std::invalid_argument("forward: spectrogram shape mismatch");
  const ForwardPlan& plan = *m.plan;
  Ctx ctx{g, m, plan, phase, dropout_rng, bn_stats};
  const ModelConfig& cfg = m.cfg;

  // Signal branch: patch tokens -> transformer encoder -> mean-pooled latent.
  Tensor tokens({plan.tokens, cfg.patch_len});
  for (std::size_t i = 0; i < signal.size(); ++i)
    tokens.data[i] = static_cast<double>(signal[i]);
  Graph::NodeId e = g.add_rowvec(g.matmul(g.input(std::move(tokens)), ctx.p("sig.embed.w")),
                                 ctx.p("sig.embed.b"));
  e = g.add(e, g.input(plan.pos_encoding));
  for (int i = 0; i < cfg.n_transformer_blocks; ++i) {
    std::string p = "sig.block" + std::to_string(i);
    Graph::NodeId a = attention_seq(
        g, e, ctx.p(p + ".attn.wq"), ctx.p(p + ".attn.bq"), ctx.p(p + ".attn.wk"),
        ctx.p(p + ".attn.bk"), ctx.p(p + ".attn.wv"), ctx.p(p + ".attn.bv"),
        ctx.p(p + ".attn.wo"), ctx.p(p + ".attn.bo"), cfg.n_heads);
    e = layernorm(ctx, g.add(e, dropout(ctx, a)), p + ".ln1");
    Graph::NodeId f = g.add_rowvec(
        g.matmul(g.relu(g.add_rowvec(g.matmul(e, ctx.p(p + ".ffn.w1")),
                                     ctx.p(p + ".ffn.b1"))),
                 ctx.p(p + ".ffn.w2")),
        ctx.p(p + ".ffn.b2"));
    e = layernorm(ctx, g.add(e, dropout(ctx, f)), p + ".ln2");
  }
  Graph::NodeId latent = g.colmean(e);  // [1, d]

  // Spectrogram branch, conditioned on the signal latent. Log-magnitudes are
  // standardized per record, mirroring the z-scored signal input; additive
  // noise shifts the whole log floor, and without this the eval-phase batch
  // norms drift off their running statistics on out-of-domain records.
  Tensor spec_map({1, spec.frames * spec.bins});
  double mean = 0.0;
  for (double v : spec.values) mean += v;
  mean /= static_cast<double>(spec.values.size());
  double var = 0.0;
  for (double v : spec.values) var += (v - mean) * (v - mean);
  double istd = 1.0 / (std::sqrt(var / static_cast<double>(spec.values.size())) + 1e-8);
  for (std::size_t i = 0; i < spec.values.size(); ++i)
    spec_map.data[i] = (spec.values[i] - mean) * istd;
  Graph::NodeId map = g.input(std::move(spec_map));
  for (std::size_t i = 0; i < plan.res.size(); ++i)
    map = res_block(ctx, map, "spec.res" + std::to_string(i), plan.res[i].conv1,
                    plan.res[i].conv2, plan.res[i].skip, latent);
  map = conv(ctx, map, plan.proj, "spec.proj");
  map = g.relu(cbn(ctx, map, "spec.proj.bn", latent));

  for (int i = 0; i < cfg.axial_blocks; ++i) {
    std::string p = "spec.axial" + std::to_string(i);
    Graph::NodeId t = cbn(ctx, map, p + ".bn1", latent);
    t = axial_attention(ctx, t, p + ".time", plan.time_gather, plan.time_scatter,
                        plan.ax_h, plan.ax_w);
    map = g.add(map, t);
    Graph::NodeId u = cbn(ctx, map, p + ".bn2", latent);
    u = axial_attention(ctx, u, p + ".freq", plan.freq_gather, plan.freq_scatter,
                        plan.ax_w, plan.ax_h);
    map = g.add(map, u);
  }

  Graph::NodeId gap = g.rowmean_vec(map);  // [1, C]
  Graph::NodeId spec_latent =
      g.add_rowvec(g.matmul(gap, ctx.p("spec.out.w")), ctx.p("spec.out.b"));

  Graph::NodeId fused = g.add(latent, spec_latent);
  Graph::NodeId logits = g.add_rowvec(g.matmul(fused, ctx.p("cls.w")), ctx.p("cls.b"));
  Graph::NodeId probs = g.softmax_rows(logits);

  return BuiltForward{probs, latent, spec_latent, logits};
}

ForwardResult forward(const DualNetModel& model, std::span<const float> signal,
                      const Spectrogram& spec, Phase phase, Rng* dropout_rng) {
  Graph g(false);
  BuiltForward bf = build_forward(g, model, signal, spec, phase, dropout_rng, nullptr);
  ForwardResult r;
  const Tensor& p = g.value(bf.probs);
  for (int i = 0; i < kNumClasses; ++i) r.probs.probs[static_cast<std::size_t>(i)] = p.data[static_cast<std::size_t>(i)];
  r.latent = g.value(bf.latent_sig).data;
  r.spec_latent = g.value(bf.latent_spec).data;
  return r;
}

Tensor reference_attention(const Tensor& seq, const Tensor& wq, const Tensor& bq,
                           const Tensor& wk, const Tensor& bk, const Tensor& wv,
                           const Tensor& bv, const Tensor& wo, const Tensor& bo) {
  Graph g(false);
  Graph::NodeId out = attention_seq(g, g.input(seq), g.input(wq), g.input(bq),
                                    g.input(wk), g.input(bk), g.input(wv), g.input(bv),
                                    g.input(wo), g.input(bo), 1);
  return g.value(out);
}

Tensor axial_attention_for_test(const Tensor& map, int h, int w, bool time_axis,
                                const Tensor& wq, const Tensor& bq, const Tensor& wk,
                                const Tensor& bk, const Tensor& wv, const Tensor& bv,
                                const Tensor& wo, const Tensor& bo) {
  const int c = map.rows();
  const int hw = h * w;
  std::vector<long> gather_idx(static_cast<std::size_t>(hw) * c);
  std::vector<long> scatter_idx(static_cast<std::size_t>(hw) * c);
  for (int ch = 0; ch < c; ++ch)
    for (int hh = 0; hh < h; ++hh)
      for (int ww = 0; ww < w; ++ww) {
        long map_idx = static_cast<long>(ch) * hw + static_cast<long>(hh) * w + ww;
        long seq_idx = time_axis ? (static_cast<long>(ww) * h + hh) * c + ch
                                 : (static_cast<long>(hh) * w + ww) * c + ch;
        gather_idx[static_cast<std::size_t>(seq_idx)] = map_idx;
        scatter_idx[static_cast<std::size_t>(map_idx)] = seq_idx;
      }
  const int seq_len = time_axis ? h : w;
  const int n_seqs = time_axis ? w : h;

  Graph g(false);
  Graph::NodeId seqs = g.gather(g.input(map), gather_idx, {n_seqs * seq_len, c});
  Graph::NodeId q = g.add_rowvec(g.matmul(seqs, g.input(wq)), g.input(bq));
  Graph::NodeId k = g.add_rowvec(g.matmul(seqs, g.input(wk)), g.input(bk));
  Graph::NodeId v = g.add_rowvec(g.matmul(seqs, g.input(wv)), g.input(bv));
  Graph::NodeId att =
      g.attention_pack(q, k, v, n_seqs, seq_len, 1.0 / std::sqrt(static_cast<double>(c)));
  Graph::NodeId proj = g.add_rowvec(g.matmul(att, g.input(wo)), g.input(bo));
  Graph::NodeId out = g.gather(proj, scatter_idx, {c, hw});
  return g.value(out);
}

}  // namespace ecgtta::nn
