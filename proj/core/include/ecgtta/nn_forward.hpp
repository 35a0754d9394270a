#pragma once

#include <span>
#include <vector>

#include "ecgtta/graph.hpp"
#include "ecgtta/nn.hpp"
#include "ecgtta/preprocess.hpp"

namespace ecgtta::nn {

// Spatial mean/variance of one batch-norm layer's input during a train-phase
// forward, in network order; the trainer folds these into the running
// statistics.
struct BnSpatialStat {
  std::vector<double> mean;
  std::vector<double> var;
};

struct BuiltForward {
  Graph::NodeId probs;
  Graph::NodeId latent_sig;
  Graph::NodeId latent_spec;
  Graph::NodeId logits;
};

// Builds the full two-branch forward pass on the given graph. With a
// recording graph the caller can attach a loss and run backward.
BuiltForward build_forward(Graph& g, const DualNetModel& m,
                           std::span<const float> signal, const Spectrogram& spec,
                           Phase phase, Rng* dropout_rng,
                           std::vector<BnSpatialStat>* bn_stats);

}  // namespace ecgtta::nn
