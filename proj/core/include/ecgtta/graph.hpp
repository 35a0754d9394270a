#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ecgtta/tensor.hpp"

namespace ecgtta::nn {

// Minimal reverse-mode tape. Each op appends a node holding its forward
// value and, when recording, a closure that scatters the node's gradient to
// its inputs. With recording off the same builder code runs as a plain
// forward evaluator. One graph serves one forward pass; graphs are
// independent, so records can be processed in parallel.
class Graph {
 public:
  using NodeId = int;

  explicit Graph(bool record) : record_(record) {}

  bool recording() const { return record_; }

  NodeId input(Tensor value);
  // Parameter leaf; grad_slot is the offset of this tensor in the flat
  // gradient vector (pass -1 for frozen values such as running statistics).
  NodeId param(const Tensor& value, int grad_slot);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  // --- ops ---
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId add(NodeId a, NodeId b);
  NodeId add_rowvec(NodeId a, NodeId v);  // v broadcast over rows
  NodeId add_colvec(NodeId a, NodeId v);  // v broadcast over columns
  NodeId mul_rowvec(NodeId a, NodeId v);
  NodeId mul_colvec(NodeId a, NodeId v);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId relu(NodeId a);
  NodeId softmax_rows(NodeId a);
  // Block-diagonal single-head attention over n_seqs stacked sequences of
  // seq_len rows: per sequence s, out_s = softmax(Q_s K_s^T * scale) V_s.
  // Q, K, V are [n_seqs*seq_len, C].
  NodeId attention_pack(NodeId q, NodeId k, NodeId v, int n_seqs, int seq_len,
                        double scale);
  // Per-row standardization (x - mean) / sqrt(var + eps); no affine.
  NodeId norm_rows(NodeId a, double eps);
  NodeId colmean(NodeId a);      // [m,n] -> [1,n]
  NodeId rowmean_vec(NodeId a);  // [m,n] -> [1,m]
  NodeId slice_rows(NodeId a, int r0, int r1);
  NodeId slice_cols(NodeId a, int c0, int c1);
  NodeId concat_rows(const std::vector<NodeId>& parts);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  // y.flat[i] = indices[i] < 0 ? 0 : x.flat[indices[i]].
  // The index table is borrowed and must outlive the graph.
  NodeId gather(NodeId a, const std::vector<long>& indices, std::vector<int> out_shape);
  NodeId pick(NodeId a, int flat_index);  // [1,1]
  NodeId log(NodeId a);
  NodeId clamp_min(NodeId a, double floor);
  NodeId reshape(NodeId a, std::vector<int> shape);  // same element count

  // Seeds d(loss)/d(loss) = scale and accumulates parameter gradients into
  // grad_out at each param node's grad_slot. loss must be a [1,1] node.
  void backward(NodeId loss, std::span<double> grad_out, double seed_scale = 1.0);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Graph&)> backfn;
    int grad_slot = -1;
  };

  NodeId push(Tensor value, std::function<void(Graph&)> backfn);
  Tensor& grad(NodeId id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  std::vector<Node> nodes_;
  bool record_;
};

}  // namespace ecgtta::nn
