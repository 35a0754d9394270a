#pragma once

#include <vector>

#include "ecgtta/nn.hpp"
#include "ecgtta/tensor.hpp"

namespace ecgtta::nn {

// Geometry of one convolution stage plus its precomputed im2col index table
// ([cin*k*k, h_out*w_out], -1 marking zero padding).
struct ConvGeom {
  int cin = 0, cout = 0;
  int h_in = 0, w_in = 0, h_out = 0, w_out = 0;
  int k = 0, stride = 0;
  std::vector<long> im2col;

  static ConvGeom make(int cin, int cout, int h_in, int w_in, int k, int stride);
};

// Everything derived from (ModelConfig, input geometry) that forward passes
// share: token count, positional encodings, convolution index tables and the
// axial sequence permutations. Immutable after construction, safe to share
// across threads.
class ForwardPlan {
 public:
  ForwardPlan(const ModelConfig& cfg, int input_len, int frames, int bins);

  int tokens = 0;
  Tensor pos_encoding;  // [tokens, d_model]

  struct ResGeom {
    ConvGeom conv1, conv2, skip;
  };
  std::vector<ResGeom> res;  // one strided residual block per channel-plan entry
  ConvGeom proj;

  int ax_h = 0, ax_w = 0;
  // Map [C, H*W] <-> stacked sequences. Time sequences run along H (one per
  // column), frequency sequences along W (one per row).
  std::vector<long> time_gather, time_scatter, freq_gather, freq_scatter;
};

}  // namespace ecgtta::nn
