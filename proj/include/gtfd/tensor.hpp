#ifndef GTFD_TENSOR_HPP
#define GTFD_TENSOR_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gtfd {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;
using NodeId = int32_t;
inline constexpr NodeId kNoNode = -1;

// Dense 64-bit tensor. Data is shared between copies; an optional
// (tape, node) handle ties the tensor into a recorded computation graph.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const { return shape_; }
  int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
  std::span<double> data() { return {data_->data(), data_->size()}; }
  std::span<const double> data() const { return {data_->data(), data_->size()}; }
  double item() const;

  bool defined() const { return static_cast<bool>(data_); }
  bool tracked() const { return node_ != kNoNode; }
  Tape* tape() const { return tape_; }
  NodeId node() const { return node_; }

  // Same storage, no tape handle.
  Tensor detached() const;
  // Fresh storage copy, no tape handle.
  Tensor clone() const;

 private:
  friend class Tape;
  std::shared_ptr<std::vector<double>> data_;
  Shape shape_;
  Tape* tape_ = nullptr;
  NodeId node_ = kNoNode;
};

enum class Op : uint8_t {
  kConst,
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kNeg,
  kScale,
  kAddConst,
  kRelu,
  kLeakyRelu,
  kClampAbsMin,
  kReciprocal,
  kSqrtEps,
  kSum,
  kMean,
  kPsum,
  kBcastBatch,
  kBcastFull,
  kBcastFeat,
  kBatchSum,
  kMatmul,
  kTranspose,
  kColSum,
  kBroadcastRow,
  kConv1d,
  kConv1dIgrad,
  kConv1dWgrad,
  kConv2d,
  kConv2dIgrad,
  kConv2dWgrad,
  kAddChannelBias,
  kChannelSum,
  kBcastChannel,
  kChannelConcat,
  kChannelSlice,
  kSubsample2,
  kUpsample2,
  kReshape,
};

const char* op_name(Op op);

struct OpAttrs {
  int64_t i0 = 0;
  int64_t i1 = 0;
  double d0 = 0.0;
  Shape shape;
};

struct Node {
  Op op;
  std::vector<NodeId> inputs;
  Tensor value;
  OpAttrs attrs;
  bool requires_grad = false;
};

// Append-only op tape. Nodes are topologically ordered by construction.
// backward() with create_graph emits the adjoint computation as further
// nodes on the same tape, so returned gradients are differentiable again.
class Tape {
 public:
  Tensor leaf(const Tensor& value);
  Tensor constant(const Tensor& value);

  std::vector<Tensor> backward(const Tensor& output, std::span<const Tensor> wrt,
                               bool create_graph = false);

  size_t num_nodes() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }
  void clear() { nodes_.clear(); }

  Tensor emit(Op op, std::vector<NodeId> inputs, Tensor value, OpAttrs attrs = {});

 private:
  void input_grads(NodeId id, const Tensor& cot, std::vector<Tensor>& out);
  std::vector<Node> nodes_;
};

// Primitive and composite tensor operations. Inputs may mix tracked and
// untracked tensors; untracked inputs are recorded as constants on the
// tape of the tracked ones. With no tracked input the result is untracked.
namespace ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor add_const(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor leakyrelu(const Tensor& a, double slope = 0.2);
Tensor clamp_abs_min(const Tensor& a, double min_abs);
Tensor reciprocal(const Tensor& a);
Tensor sqrt_eps(const Tensor& a, double eps);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Per-sample sum over all non-batch axes: [N,...] -> [N].
Tensor psum(const Tensor& a);
Tensor bcast_batch(const Tensor& per_sample, const Shape& shape);
Tensor bcast_full(const Tensor& scalar, const Shape& shape);
Tensor bcast_feat(const Tensor& feat, int64_t batch);
Tensor batch_sum(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor colsum(const Tensor& a);
Tensor broadcast_row(const Tensor& row, int64_t rows);

// x:[N,Ci,L], w:[Co,Ci,K], zero padding, same spatial size.
Tensor conv1d(const Tensor& x, const Tensor& w);
Tensor conv1d_igrad(const Tensor& gy, const Tensor& w);
Tensor conv1d_wgrad(const Tensor& x, const Tensor& gy, int64_t kernel);
// x:[N,Ci,H,W], w:[Co,Ci,K,K].
Tensor conv2d(const Tensor& x, const Tensor& w);
Tensor conv2d_igrad(const Tensor& gy, const Tensor& w);
Tensor conv2d_wgrad(const Tensor& x, const Tensor& gy, int64_t kernel);

Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
Tensor channel_sum(const Tensor& x);
Tensor bcast_channel(const Tensor& per_channel, const Shape& shape);
Tensor channel_concat(const Tensor& a, const Tensor& b);
Tensor channel_slice(const Tensor& x, int64_t c0, int64_t c1);

// Average pooling / nearest-neighbor upsampling, factor 2, over the
// spatial axes of [N,C,L] or [N,C,H,W].
Tensor subsample2(const Tensor& x);
Tensor upsample2(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

// Composites.
// x:[N,Fin], w:[Fout,Fin], b:[Fout] -> [N,Fout].
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);
// Normalizes each sample over all non-batch axes; gain/bias per feature.
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps = 1e-5);
// Euclidean norm per sample over all non-batch axes: [N,...] -> [N].
Tensor l2norm(const Tensor& x);

}  // namespace ops

}  // namespace gtfd

#endif  // GTFD_TENSOR_HPP
