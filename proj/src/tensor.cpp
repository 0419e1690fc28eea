#include "gtfd/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace gtfd {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

const char* op_name(Op op) {
  switch (op) {
    case Op::kConst: return "const";
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kNeg: return "neg";
    case Op::kScale: return "scale";
    case Op::kAddConst: return "add_const";
    case Op::kRelu: return "relu";
    case Op::kLeakyRelu: return "leakyrelu";
    case Op::kClampAbsMin: return "clamp_abs_min";
    case Op::kReciprocal: return "reciprocal";
    case Op::kSqrtEps: return "sqrt_eps";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kPsum: return "psum";
    case Op::kBcastBatch: return "bcast_batch";
    case Op::kBcastFull: return "bcast_full";
    case Op::kBcastFeat: return "bcast_feat";
    case Op::kBatchSum: return "batch_sum";
    case Op::kMatmul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kColSum: return "colsum";
    case Op::kBroadcastRow: return "broadcast_row";
    case Op::kConv1d: return "conv1d";
    case Op::kConv1dIgrad: return "conv1d_igrad";
    case Op::kConv1dWgrad: return "conv1d_wgrad";
    case Op::kConv2d: return "conv2d";
    case Op::kConv2dIgrad: return "conv2d_igrad";
    case Op::kConv2dWgrad: return "conv2d_wgrad";
    case Op::kAddChannelBias: return "add_channel_bias";
    case Op::kChannelSum: return "channel_sum";
    case Op::kBcastChannel: return "bcast_channel";
    case Op::kChannelConcat: return "channel_concat";
    case Op::kChannelSlice: return "channel_slice";
    case Op::kSubsample2: return "subsample2";
    case Op::kUpsample2: return "upsample2";
    case Op::kReshape: return "reshape";
  }
  return "?";
}

namespace {

[[noreturn]] void fail(Op op, const std::string& msg) {
  throw std::runtime_error(std::string(op_name(op)) + ": " + msg);
}

void check_same_shape(Op op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (numel(shape_) != static_cast<int64_t>(values.size()))
    throw std::runtime_error("tensor: shape " + shape_str(shape_) + " does not match " +
                             std::to_string(values.size()) + " values");
  data_ = std::make_shared<std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) {
  int64_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  int64_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

double Tensor::item() const {
  if (size() != 1) throw std::runtime_error("item: tensor has " + std::to_string(size()) + " elements");
  return (*data_)[0];
}

Tensor Tensor::detached() const {
  Tensor t;
  t.data_ = data_;
  t.shape_ = shape_;
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.data_ = std::make_shared<std::vector<double>>(*data_);
  t.shape_ = shape_;
  return t;
}

Tensor Tape::emit(Op op, std::vector<NodeId> inputs, Tensor value, OpAttrs attrs) {
  bool rg = (op == Op::kLeaf);
  for (NodeId in : inputs)
    if (nodes_[static_cast<size_t>(in)].requires_grad) rg = true;
  value.tape_ = this;
  value.node_ = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(Node{op, std::move(inputs), value, std::move(attrs), rg});
  return value;
}

Tensor Tape::leaf(const Tensor& value) { return emit(Op::kLeaf, {}, value.detached()); }

Tensor Tape::constant(const Tensor& value) { return emit(Op::kConst, {}, value.detached()); }

// ---------------------------------------------------------------------------
// Op recording

namespace ops {

namespace {

Tape* resolve_tape(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->tracked()) continue;
    if (tape && tape != t->tape())
      throw std::runtime_error("op inputs live on different tapes");
    tape = t->tape();
  }
  return tape;
}

NodeId as_node(Tape* tape, const Tensor& t) {
  if (t.tracked()) return t.node();
  return tape->constant(t).node();
}

Tensor record1(Op op, const Tensor& a, Tensor value, OpAttrs attrs = {}) {
  Tape* tape = resolve_tape({&a});
  if (!tape) return value;
  return tape->emit(op, {as_node(tape, a)}, std::move(value), std::move(attrs));
}

Tensor record2(Op op, const Tensor& a, const Tensor& b, Tensor value, OpAttrs attrs = {}) {
  Tape* tape = resolve_tape({&a, &b});
  if (!tape) return value;
  NodeId na = as_node(tape, a);
  NodeId nb = as_node(tape, b);
  return tape->emit(op, {na, nb}, std::move(value), std::move(attrs));
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(Op::kAdd, a, b);
  Tensor y = a.clone();
  auto yd = y.data();
  auto bd = b.data();
  for (size_t i = 0; i < yd.size(); ++i) yd[i] += bd[i];
  return record2(Op::kAdd, a, b, std::move(y));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(Op::kSub, a, b);
  Tensor y = a.clone();
  auto yd = y.data();
  auto bd = b.data();
  for (size_t i = 0; i < yd.size(); ++i) yd[i] -= bd[i];
  return record2(Op::kSub, a, b, std::move(y));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(Op::kMul, a, b);
  Tensor y = a.clone();
  auto yd = y.data();
  auto bd = b.data();
  for (size_t i = 0; i < yd.size(); ++i) yd[i] *= bd[i];
  return record2(Op::kMul, a, b, std::move(y));
}

Tensor neg(const Tensor& a) {
  Tensor y = a.clone();
  for (double& v : y.data()) v = -v;
  return record1(Op::kNeg, a, std::move(y));
}

Tensor scale(const Tensor& a, double s) {
  Tensor y = a.clone();
  for (double& v : y.data()) v *= s;
  OpAttrs at;
  at.d0 = s;
  return record1(Op::kScale, a, std::move(y), std::move(at));
}

Tensor add_const(const Tensor& a, double c) {
  Tensor y = a.clone();
  for (double& v : y.data()) v += c;
  OpAttrs at;
  at.d0 = c;
  return record1(Op::kAddConst, a, std::move(y), std::move(at));
}

Tensor relu(const Tensor& a) {
  Tensor y = a.clone();
  for (double& v : y.data()) v = v > 0 ? v : 0.0;
  return record1(Op::kRelu, a, std::move(y));
}

Tensor leakyrelu(const Tensor& a, double slope) {
  Tensor y = a.clone();
  for (double& v : y.data()) v = v > 0 ? v : slope * v;
  OpAttrs at;
  at.d0 = slope;
  return record1(Op::kLeakyRelu, a, std::move(y), std::move(at));
}

Tensor clamp_abs_min(const Tensor& a, double min_abs) {
  Tensor y = a.clone();
  for (double& v : y.data()) {
    if (v >= min_abs || v <= -min_abs) continue;
    v = v >= 0 ? min_abs : -min_abs;  // sign of 0 treated as +
  }
  OpAttrs at;
  at.d0 = min_abs;
  return record1(Op::kClampAbsMin, a, std::move(y), std::move(at));
}

Tensor reciprocal(const Tensor& a) {
  Tensor y = a.clone();
  for (double& v : y.data()) v = 1.0 / v;
  return record1(Op::kReciprocal, a, std::move(y));
}

Tensor sqrt_eps(const Tensor& a, double eps) {
  Tensor y = a.clone();
  for (double& v : y.data()) v = std::sqrt(v + eps);
  OpAttrs at;
  at.d0 = eps;
  return record1(Op::kSqrtEps, a, std::move(y), std::move(at));
}

// ---- reductions and broadcasts --------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0;
  for (double v : a.data()) s += v;
  return record1(Op::kSum, a, Tensor::scalar(s));
}

Tensor mean(const Tensor& a) {
  double s = 0;
  for (double v : a.data()) s += v;
  return record1(Op::kMean, a, Tensor::scalar(s / static_cast<double>(a.size())));
}

Tensor psum(const Tensor& a) {
  if (a.shape().empty()) fail(Op::kPsum, "rank-0 input");
  int64_t n = a.shape()[0];
  int64_t per = a.size() / n;
  Tensor y = Tensor::zeros({n});
  auto yd = y.data();
  auto ad = a.data();
  for (int64_t i = 0; i < n; ++i) {
    double s = 0;
    const double* p = ad.data() + i * per;
    for (int64_t j = 0; j < per; ++j) s += p[j];
    yd[static_cast<size_t>(i)] = s;
  }
  return record1(Op::kPsum, a, std::move(y));
}

Tensor bcast_batch(const Tensor& per_sample, const Shape& shape) {
  if (per_sample.shape().size() != 1 || shape.empty() || shape[0] != per_sample.shape()[0])
    fail(Op::kBcastBatch, "expected [N] and target with leading N");
  int64_t n = shape[0];
  int64_t per = numel(shape) / n;
  Tensor y = Tensor::zeros(shape);
  auto yd = y.data();
  auto vd = per_sample.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < per; ++j) yd[static_cast<size_t>(i * per + j)] = vd[static_cast<size_t>(i)];
  return record1(Op::kBcastBatch, per_sample, std::move(y));
}

Tensor bcast_full(const Tensor& scalar, const Shape& shape) {
  if (scalar.size() != 1) fail(Op::kBcastFull, "expected single-element input");
  Tensor y = Tensor::full(shape, scalar.data()[0]);
  return record1(Op::kBcastFull, scalar, std::move(y));
}

Tensor bcast_feat(const Tensor& feat, int64_t batch) {
  Shape shape;
  shape.push_back(batch);
  for (int64_t d : feat.shape()) shape.push_back(d);
  int64_t per = feat.size();
  Tensor y = Tensor::zeros(shape);
  auto yd = y.data();
  auto fd = feat.data();
  for (int64_t i = 0; i < batch; ++i)
    std::memcpy(yd.data() + i * per, fd.data(), static_cast<size_t>(per) * sizeof(double));
  return record1(Op::kBcastFeat, feat, std::move(y));
}

Tensor batch_sum(const Tensor& a) {
  if (a.shape().size() < 2) fail(Op::kBatchSum, "need rank >= 2");
  int64_t n = a.shape()[0];
  Shape shape(a.shape().begin() + 1, a.shape().end());
  int64_t per = numel(shape);
  Tensor y = Tensor::zeros(shape);
  auto yd = y.data();
  auto ad = a.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < per; ++j) yd[static_cast<size_t>(j)] += ad[static_cast<size_t>(i * per + j)];
  return record1(Op::kBatchSum, a, std::move(y));
}

// ---- dense algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    fail(Op::kMatmul, "incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor y = Tensor::zeros({m, n});
  auto yd = y.data();
  auto ad = a.data();
  auto bd = b.data();
  for (int64_t i = 0; i < m; ++i) {
    double* yrow = yd.data() + i * n;
    for (int64_t p = 0; p < k; ++p) {
      double av = ad[static_cast<size_t>(i * k + p)];
      if (av == 0) continue;
      const double* brow = bd.data() + p * n;
      for (int64_t j = 0; j < n; ++j) yrow[j] += av * brow[j];
    }
  }
  return record2(Op::kMatmul, a, b, std::move(y));
}

Tensor transpose(const Tensor& a) {
  if (a.shape().size() != 2) fail(Op::kTranspose, "need rank 2");
  int64_t m = a.shape()[0], n = a.shape()[1];
  Tensor y = Tensor::zeros({n, m});
  auto yd = y.data();
  auto ad = a.data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) yd[static_cast<size_t>(j * m + i)] = ad[static_cast<size_t>(i * n + j)];
  return record1(Op::kTranspose, a, std::move(y));
}

Tensor colsum(const Tensor& a) {
  if (a.shape().size() != 2) fail(Op::kColSum, "need rank 2");
  int64_t m = a.shape()[0], n = a.shape()[1];
  Tensor y = Tensor::zeros({n});
  auto yd = y.data();
  auto ad = a.data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) yd[static_cast<size_t>(j)] += ad[static_cast<size_t>(i * n + j)];
  return record1(Op::kColSum, a, std::move(y));
}

Tensor broadcast_row(const Tensor& row, int64_t rows) {
  if (row.shape().size() != 1) fail(Op::kBroadcastRow, "need rank 1");
  int64_t n = row.shape()[0];
  Tensor y = Tensor::zeros({rows, n});
  auto yd = y.data();
  auto rd = row.data();
  for (int64_t i = 0; i < rows; ++i)
    std::memcpy(yd.data() + i * n, rd.data(), static_cast<size_t>(n) * sizeof(double));
  return record1(Op::kBroadcastRow, row, std::move(y));
}

// ---- convolutions ----------------------------------------------------------

namespace {

void conv1d_shapes(Op op, const Tensor& x, const Tensor& w) {
  if (x.shape().size() != 3) fail(op, "input must be [N,C,L], got " + shape_str(x.shape()));
  if (w.shape().size() != 3) fail(op, "weight must be [Co,Ci,K], got " + shape_str(w.shape()));
  if (w.shape()[2] % 2 == 0) fail(op, "kernel size must be odd");
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w) {
  conv1d_shapes(Op::kConv1d, x, w);
  int64_t n = x.shape()[0], ci = x.shape()[1], len = x.shape()[2];
  int64_t co = w.shape()[0], k = w.shape()[2], pad = (k - 1) / 2;
  if (w.shape()[1] != ci)
    fail(Op::kConv1d, "channel mismatch: input " + shape_str(x.shape()) + " weight " + shape_str(w.shape()));
  Tensor y = Tensor::zeros({n, co, len});
  auto yd = y.data();
  auto xd = x.data();
  auto wd = w.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t o = 0; o < co; ++o) {
      double* yrow = yd.data() + (b * co + o) * len;
      for (int64_t c = 0; c < ci; ++c) {
        const double* xrow = xd.data() + (b * ci + c) * len;
        const double* wk = wd.data() + (o * ci + c) * k;
        for (int64_t t = 0; t < k; ++t) {
          double wv = wk[t];
          if (wv == 0) continue;
          int64_t off = t - pad;  // y[l] += wv * x[l+off]
          int64_t lo = std::max<int64_t>(0, -off), hi = std::min(len, len - off);
          const double* xs = xrow + off;
          for (int64_t l = lo; l < hi; ++l) yrow[l] += wv * xs[l];
        }
      }
    }
  return record2(Op::kConv1d, x, w, std::move(y));
}

Tensor conv1d_igrad(const Tensor& gy, const Tensor& w) {
  conv1d_shapes(Op::kConv1dIgrad, gy, w);
  int64_t n = gy.shape()[0], co = gy.shape()[1], len = gy.shape()[2];
  int64_t ci = w.shape()[1], k = w.shape()[2], pad = (k - 1) / 2;
  if (w.shape()[0] != co) fail(Op::kConv1dIgrad, "channel mismatch");
  Tensor y = Tensor::zeros({n, ci, len});
  auto yd = y.data();
  auto gd = gy.data();
  auto wd = w.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t c = 0; c < ci; ++c) {
      double* yrow = yd.data() + (b * ci + c) * len;
      for (int64_t o = 0; o < co; ++o) {
        const double* grow = gd.data() + (b * co + o) * len;
        const double* wk = wd.data() + (o * ci + c) * k;
        for (int64_t t = 0; t < k; ++t) {
          double wv = wk[t];
          if (wv == 0) continue;
          int64_t off = pad - t;  // y[l] += wv * g[l+off]
          int64_t lo = std::max<int64_t>(0, -off), hi = std::min(len, len - off);
          const double* gs = grow + off;
          for (int64_t l = lo; l < hi; ++l) yrow[l] += wv * gs[l];
        }
      }
    }
  return record2(Op::kConv1dIgrad, gy, w, std::move(y));
}

Tensor conv1d_wgrad(const Tensor& x, const Tensor& gy, int64_t kernel) {
  if (x.shape().size() != 3 || gy.shape().size() != 3)
    fail(Op::kConv1dWgrad, "inputs must be [N,C,L]");
  if (x.shape()[0] != gy.shape()[0] || x.shape()[2] != gy.shape()[2])
    fail(Op::kConv1dWgrad, "batch/length mismatch");
  int64_t n = x.shape()[0], ci = x.shape()[1], len = x.shape()[2];
  int64_t co = gy.shape()[1], pad = (kernel - 1) / 2;
  Tensor y = Tensor::zeros({co, ci, kernel});
  auto yd = y.data();
  auto xd = x.data();
  auto gd = gy.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t o = 0; o < co; ++o) {
      const double* grow = gd.data() + (b * co + o) * len;
      for (int64_t c = 0; c < ci; ++c) {
        const double* xrow = xd.data() + (b * ci + c) * len;
        double* wk = yd.data() + (o * ci + c) * kernel;
        for (int64_t t = 0; t < kernel; ++t) {
          int64_t off = t - pad;  // dw[t] += sum_l x[l+off] g[l]
          int64_t lo = std::max<int64_t>(0, -off), hi = std::min(len, len - off);
          const double* xs = xrow + off;
          double s = 0;
          for (int64_t l = lo; l < hi; ++l) s += xs[l] * grow[l];
          wk[t] += s;
        }
      }
    }
  OpAttrs at;
  at.i0 = kernel;
  return record2(Op::kConv1dWgrad, x, gy, std::move(y), std::move(at));
}

namespace {

void conv2d_shapes(Op op, const Tensor& x, const Tensor& w) {
  if (x.shape().size() != 4) fail(op, "input must be [N,C,H,W], got " + shape_str(x.shape()));
  if (w.shape().size() != 4) fail(op, "weight must be [Co,Ci,K,K], got " + shape_str(w.shape()));
  if (w.shape()[2] != w.shape()[3] || w.shape()[2] % 2 == 0) fail(op, "kernel must be odd square");
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w) {
  conv2d_shapes(Op::kConv2d, x, w);
  int64_t n = x.shape()[0], ci = x.shape()[1], h = x.shape()[2], wd_ = x.shape()[3];
  int64_t co = w.shape()[0], k = w.shape()[2], pad = (k - 1) / 2;
  if (w.shape()[1] != ci) fail(Op::kConv2d, "channel mismatch");
  Tensor y = Tensor::zeros({n, co, h, wd_});
  auto yd = y.data();
  auto xd = x.data();
  auto kd = w.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t o = 0; o < co; ++o) {
      double* yimg = yd.data() + (b * co + o) * h * wd_;
      for (int64_t c = 0; c < ci; ++c) {
        const double* ximg = xd.data() + (b * ci + c) * h * wd_;
        const double* wk = kd.data() + (o * ci + c) * k * k;
        for (int64_t th = 0; th < k; ++th)
          for (int64_t tw = 0; tw < k; ++tw) {
            double wv = wk[th * k + tw];
            if (wv == 0) continue;
            int64_t oh = th - pad, ow = tw - pad;
            int64_t h0 = std::max<int64_t>(0, -oh), h1 = std::min(h, h - oh);
            int64_t w0 = std::max<int64_t>(0, -ow), w1 = std::min(wd_, wd_ - ow);
            for (int64_t r = h0; r < h1; ++r) {
              double* yrow = yimg + r * wd_;
              const double* xrow = ximg + (r + oh) * wd_ + ow;
              for (int64_t cidx = w0; cidx < w1; ++cidx) yrow[cidx] += wv * xrow[cidx];
            }
          }
      }
    }
  return record2(Op::kConv2d, x, w, std::move(y));
}

Tensor conv2d_igrad(const Tensor& gy, const Tensor& w) {
  conv2d_shapes(Op::kConv2dIgrad, gy, w);
  int64_t n = gy.shape()[0], co = gy.shape()[1], h = gy.shape()[2], wd_ = gy.shape()[3];
  int64_t ci = w.shape()[1], k = w.shape()[2], pad = (k - 1) / 2;
  if (w.shape()[0] != co) fail(Op::kConv2dIgrad, "channel mismatch");
  Tensor y = Tensor::zeros({n, ci, h, wd_});
  auto yd = y.data();
  auto gd = gy.data();
  auto kd = w.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t c = 0; c < ci; ++c) {
      double* yimg = yd.data() + (b * ci + c) * h * wd_;
      for (int64_t o = 0; o < co; ++o) {
        const double* gimg = gd.data() + (b * co + o) * h * wd_;
        const double* wk = kd.data() + (o * ci + c) * k * k;
        for (int64_t th = 0; th < k; ++th)
          for (int64_t tw = 0; tw < k; ++tw) {
            double wv = wk[th * k + tw];
            if (wv == 0) continue;
            int64_t oh = pad - th, ow = pad - tw;
            int64_t h0 = std::max<int64_t>(0, -oh), h1 = std::min(h, h - oh);
            int64_t w0 = std::max<int64_t>(0, -ow), w1 = std::min(wd_, wd_ - ow);
            for (int64_t r = h0; r < h1; ++r) {
              double* yrow = yimg + r * wd_;
              const double* grow = gimg + (r + oh) * wd_ + ow;
              for (int64_t cidx = w0; cidx < w1; ++cidx) yrow[cidx] += wv * grow[cidx];
            }
          }
      }
    }
  return record2(Op::kConv2dIgrad, gy, w, std::move(y));
}

Tensor conv2d_wgrad(const Tensor& x, const Tensor& gy, int64_t kernel) {
  if (x.shape().size() != 4 || gy.shape().size() != 4)
    fail(Op::kConv2dWgrad, "inputs must be [N,C,H,W]");
  if (x.shape()[0] != gy.shape()[0] || x.shape()[2] != gy.shape()[2] || x.shape()[3] != gy.shape()[3])
    fail(Op::kConv2dWgrad, "batch/spatial mismatch");
  int64_t n = x.shape()[0], ci = x.shape()[1], h = x.shape()[2], wd_ = x.shape()[3];
  int64_t co = gy.shape()[1], pad = (kernel - 1) / 2;
  Tensor y = Tensor::zeros({co, ci, kernel, kernel});
  auto yd = y.data();
  auto xd = x.data();
  auto gd = gy.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t o = 0; o < co; ++o) {
      const double* gimg = gd.data() + (b * co + o) * h * wd_;
      for (int64_t c = 0; c < ci; ++c) {
        const double* ximg = xd.data() + (b * ci + c) * h * wd_;
        double* wk = yd.data() + (o * ci + c) * kernel * kernel;
        for (int64_t th = 0; th < kernel; ++th)
          for (int64_t tw = 0; tw < kernel; ++tw) {
            int64_t oh = th - pad, ow = tw - pad;
            int64_t h0 = std::max<int64_t>(0, -oh), h1 = std::min(h, h - oh);
            int64_t w0 = std::max<int64_t>(0, -ow), w1 = std::min(wd_, wd_ - ow);
            double s = 0;
            for (int64_t r = h0; r < h1; ++r) {
              const double* grow = gimg + r * wd_;
              const double* xrow = ximg + (r + oh) * wd_ + ow;
              for (int64_t cidx = w0; cidx < w1; ++cidx) s += xrow[cidx] * grow[cidx];
            }
            wk[th * kernel + tw] += s;
          }
      }
    }
  OpAttrs at;
  at.i0 = kernel;
  return record2(Op::kConv2dWgrad, x, gy, std::move(y), std::move(at));
}

// ---- channel ops -----------------------------------------------------------

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.shape().size() < 2 || bias.shape().size() != 1 || bias.shape()[0] != x.shape()[1])
    fail(Op::kAddChannelBias, "expected [N,C,...] and [C]");
  int64_t n = x.shape()[0], c = x.shape()[1];
  int64_t per = x.size() / (n * c);
  Tensor y = x.clone();
  auto yd = y.data();
  auto bd = bias.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t ch = 0; ch < c; ++ch) {
      double bv = bd[static_cast<size_t>(ch)];
      double* p = yd.data() + (b * c + ch) * per;
      for (int64_t j = 0; j < per; ++j) p[j] += bv;
    }
  return record2(Op::kAddChannelBias, x, bias, std::move(y));
}

Tensor channel_sum(const Tensor& x) {
  if (x.shape().size() < 2) fail(Op::kChannelSum, "need rank >= 2");
  int64_t n = x.shape()[0], c = x.shape()[1];
  int64_t per = x.size() / (n * c);
  Tensor y = Tensor::zeros({c});
  auto yd = y.data();
  auto xd = x.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* p = xd.data() + (b * c + ch) * per;
      double s = 0;
      for (int64_t j = 0; j < per; ++j) s += p[j];
      yd[static_cast<size_t>(ch)] += s;
    }
  return record1(Op::kChannelSum, x, std::move(y));
}

Tensor bcast_channel(const Tensor& per_channel, const Shape& shape) {
  if (per_channel.shape().size() != 1 || shape.size() < 2 || shape[1] != per_channel.shape()[0])
    fail(Op::kBcastChannel, "expected [C] and [N,C,...]");
  int64_t n = shape[0], c = shape[1];
  int64_t per = numel(shape) / (n * c);
  Tensor y = Tensor::zeros(shape);
  auto yd = y.data();
  auto vd = per_channel.data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t ch = 0; ch < c; ++ch) {
      double v = vd[static_cast<size_t>(ch)];
      double* p = yd.data() + (b * c + ch) * per;
      for (int64_t j = 0; j < per; ++j) p[j] = v;
    }
  return record1(Op::kBcastChannel, per_channel, std::move(y));
}

Tensor channel_concat(const Tensor& a, const Tensor& b) {
  if (a.shape().size() < 2 || a.shape().size() != b.shape().size())
    fail(Op::kChannelConcat, "rank mismatch");
  for (size_t i = 0; i < a.shape().size(); ++i)
    if (i != 1 && a.shape()[i] != b.shape()[i])
      fail(Op::kChannelConcat, shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  int64_t n = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
  int64_t per = a.size() / (n * ca);
  Shape shape = a.shape();
  shape[1] = ca + cb;
  Tensor y = Tensor::zeros(shape);
  auto yd = y.data();
  auto ad = a.data();
  auto bd = b.data();
  for (int64_t i = 0; i < n; ++i) {
    std::memcpy(yd.data() + i * (ca + cb) * per, ad.data() + i * ca * per,
                static_cast<size_t>(ca * per) * sizeof(double));
    std::memcpy(yd.data() + (i * (ca + cb) + ca) * per, bd.data() + i * cb * per,
                static_cast<size_t>(cb * per) * sizeof(double));
  }
  return record2(Op::kChannelConcat, a, b, std::move(y));
}

Tensor channel_slice(const Tensor& x, int64_t c0, int64_t c1) {
  if (x.shape().size() < 2 || c0 < 0 || c1 <= c0 || c1 > x.shape()[1])
    fail(Op::kChannelSlice, "bad channel range");
  int64_t n = x.shape()[0], c = x.shape()[1];
  int64_t per = x.size() / (n * c);
  Shape shape = x.shape();
  shape[1] = c1 - c0;
  Tensor y = Tensor::zeros(shape);
  auto yd = y.data();
  auto xd = x.data();
  for (int64_t i = 0; i < n; ++i)
    std::memcpy(yd.data() + i * (c1 - c0) * per, xd.data() + (i * c + c0) * per,
                static_cast<size_t>((c1 - c0) * per) * sizeof(double));
  OpAttrs at;
  at.i0 = c0;
  at.i1 = c1;
  return record1(Op::kChannelSlice, x, std::move(y), std::move(at));
}

// ---- resampling ------------------------------------------------------------

Tensor subsample2(const Tensor& x) {
  if (x.shape().size() == 3) {
    int64_t n = x.shape()[0], c = x.shape()[1], len = x.shape()[2];
    if (len % 2) fail(Op::kSubsample2, "odd length " + std::to_string(len));
    Tensor y = Tensor::zeros({n, c, len / 2});
    auto yd = y.data();
    auto xd = x.data();
    for (int64_t i = 0; i < n * c; ++i) {
      const double* p = xd.data() + i * len;
      double* q = yd.data() + i * (len / 2);
      for (int64_t l = 0; l < len / 2; ++l) q[l] = 0.5 * (p[2 * l] + p[2 * l + 1]);
    }
    return record1(Op::kSubsample2, x, std::move(y));
  }
  if (x.shape().size() == 4) {
    int64_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    if (h % 2 || w % 2) fail(Op::kSubsample2, "odd spatial extent");
    Tensor y = Tensor::zeros({n, c, h / 2, w / 2});
    auto yd = y.data();
    auto xd = x.data();
    for (int64_t i = 0; i < n * c; ++i) {
      const double* p = xd.data() + i * h * w;
      double* q = yd.data() + i * (h / 2) * (w / 2);
      for (int64_t r = 0; r < h / 2; ++r)
        for (int64_t cc = 0; cc < w / 2; ++cc)
          q[r * (w / 2) + cc] = 0.25 * (p[2 * r * w + 2 * cc] + p[2 * r * w + 2 * cc + 1] +
                                        p[(2 * r + 1) * w + 2 * cc] + p[(2 * r + 1) * w + 2 * cc + 1]);
    }
    return record1(Op::kSubsample2, x, std::move(y));
  }
  fail(Op::kSubsample2, "need [N,C,L] or [N,C,H,W]");
}

Tensor upsample2(const Tensor& x) {
  if (x.shape().size() == 3) {
    int64_t n = x.shape()[0], c = x.shape()[1], len = x.shape()[2];
    Tensor y = Tensor::zeros({n, c, len * 2});
    auto yd = y.data();
    auto xd = x.data();
    for (int64_t i = 0; i < n * c; ++i) {
      const double* p = xd.data() + i * len;
      double* q = yd.data() + i * len * 2;
      for (int64_t l = 0; l < len; ++l) q[2 * l] = q[2 * l + 1] = p[l];
    }
    return record1(Op::kUpsample2, x, std::move(y));
  }
  if (x.shape().size() == 4) {
    int64_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    Tensor y = Tensor::zeros({n, c, h * 2, w * 2});
    auto yd = y.data();
    auto xd = x.data();
    for (int64_t i = 0; i < n * c; ++i) {
      const double* p = xd.data() + i * h * w;
      double* q = yd.data() + i * 4 * h * w;
      for (int64_t r = 0; r < h; ++r)
        for (int64_t cc = 0; cc < w; ++cc) {
          double v = p[r * w + cc];
          q[2 * r * 2 * w + 2 * cc] = v;
          q[2 * r * 2 * w + 2 * cc + 1] = v;
          q[(2 * r + 1) * 2 * w + 2 * cc] = v;
          q[(2 * r + 1) * 2 * w + 2 * cc + 1] = v;
        }
    }
    return record1(Op::kUpsample2, x, std::move(y));
  }
  fail(Op::kUpsample2, "need [N,C,L] or [N,C,H,W]");
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    fail(Op::kReshape, shape_str(x.shape()) + " -> " + shape_str(shape) + " changes element count");
  Tensor y = x.clone();
  // clone keeps the flat data; just restamp the shape
  Tensor out(std::move(shape), std::vector<double>(y.data().begin(), y.data().end()));
  OpAttrs at;
  at.shape = x.shape();
  return record1(Op::kReshape, x, std::move(out), std::move(at));
}

// ---- composites ------------------------------------------------------------

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.shape().size() != 2 || w.shape().size() != 2 || x.shape()[1] != w.shape()[1])
    throw std::runtime_error("dense: incompatible " + shape_str(x.shape()) + " and weight " +
                             shape_str(w.shape()));
  Tensor y = matmul(x, transpose(w));
  return add(y, broadcast_row(b, x.shape()[0]));
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.shape().size() < 2) throw std::runtime_error("layernorm: need rank >= 2");
  int64_t n = x.shape()[0];
  int64_t feat = x.size() / n;
  double inv_m = 1.0 / static_cast<double>(feat);
  Tensor mu = bcast_batch(scale(psum(x), inv_m), x.shape());
  Tensor c = sub(x, mu);
  Tensor var = scale(psum(mul(c, c)), inv_m);
  Tensor inv = reciprocal(sqrt_eps(var, eps));
  Tensor xhat = mul(c, bcast_batch(inv, x.shape()));
  return add(mul(xhat, bcast_feat(gain, n)), bcast_feat(bias, n));
}

Tensor l2norm(const Tensor& x) {
  // 1e-12 guard keeps the norm differentiable at 0
  return sqrt_eps(psum(mul(x, x)), 1e-12);
}

}  // namespace ops

// ---------------------------------------------------------------------------
// Reverse sweep

void Tape::input_grads(NodeId id, const Tensor& g, std::vector<Tensor>& out) {
  // Copy up front: emitting adjoint nodes below reallocates nodes_.
  const Node nd = nodes_[static_cast<size_t>(id)];
  std::vector<Tensor> ivals;
  std::vector<char> ineeds;
  ivals.reserve(nd.inputs.size());
  for (NodeId in : nd.inputs) {
    ivals.push_back(nodes_[static_cast<size_t>(in)].value);
    ineeds.push_back(nodes_[static_cast<size_t>(in)].requires_grad ? 1 : 0);
  }
  out.assign(nd.inputs.size(), Tensor());
  auto in_val = [&](size_t i) -> const Tensor& { return ivals[i]; };
  auto needs = [&](size_t i) { return ineeds[i] != 0; };
  const Tensor y = nd.value;

  auto mask_grad = [&](auto pred) {
    const Tensor& a = in_val(0);
    Tensor mask = Tensor::zeros(a.shape());
    auto md = mask.data();
    auto ad = a.data();
    for (size_t i = 0; i < md.size(); ++i) md[i] = pred(ad[i]) ? 1.0 : 0.0;
    out[0] = ops::mul(g, mask);
  };

  switch (nd.op) {
    case Op::kConst:
    case Op::kLeaf:
      break;
    case Op::kAdd:
      if (needs(0)) out[0] = g;
      if (needs(1)) out[1] = g;
      break;
    case Op::kSub:
      if (needs(0)) out[0] = g;
      if (needs(1)) out[1] = ops::neg(g);
      break;
    case Op::kMul:
      if (needs(0)) out[0] = ops::mul(g, in_val(1));
      if (needs(1)) out[1] = ops::mul(g, in_val(0));
      break;
    case Op::kNeg:
      if (needs(0)) out[0] = ops::neg(g);
      break;
    case Op::kScale:
      if (needs(0)) out[0] = ops::scale(g, nd.attrs.d0);
      break;
    case Op::kAddConst:
      if (needs(0)) out[0] = g;
      break;
    case Op::kRelu:
      if (needs(0)) mask_grad([](double v) { return v > 0; });
      break;
    case Op::kLeakyRelu:
      if (needs(0)) {
        double slope = nd.attrs.d0;
        const Tensor& a = in_val(0);
        Tensor mask = Tensor::zeros(a.shape());
        auto md = mask.data();
        auto ad = a.data();
        for (size_t i = 0; i < md.size(); ++i) md[i] = ad[i] > 0 ? 1.0 : slope;
        out[0] = ops::mul(g, mask);
      }
      break;
    case Op::kClampAbsMin:
      if (needs(0)) {
        double m = nd.attrs.d0;
        mask_grad([m](double v) { return v >= m || v <= -m; });
      }
      break;
    case Op::kReciprocal:
      if (needs(0)) out[0] = ops::neg(ops::mul(g, ops::mul(y, y)));
      break;
    case Op::kSqrtEps:
      if (needs(0)) out[0] = ops::mul(g, ops::scale(ops::reciprocal(y), 0.5));
      break;
    case Op::kSum:
      if (needs(0)) out[0] = ops::bcast_full(g, in_val(0).shape());
      break;
    case Op::kMean:
      if (needs(0))
        out[0] = ops::scale(ops::bcast_full(g, in_val(0).shape()),
                            1.0 / static_cast<double>(in_val(0).size()));
      break;
    case Op::kPsum:
      if (needs(0)) out[0] = ops::bcast_batch(g, in_val(0).shape());
      break;
    case Op::kBcastBatch:
      if (needs(0)) out[0] = ops::psum(g);
      break;
    case Op::kBcastFull:
      if (needs(0)) out[0] = ops::sum(g);
      break;
    case Op::kBcastFeat:
      if (needs(0)) out[0] = ops::batch_sum(g);
      break;
    case Op::kBatchSum:
      if (needs(0)) out[0] = ops::bcast_feat(g, in_val(0).shape()[0]);
      break;
    case Op::kMatmul:
      if (needs(0)) out[0] = ops::matmul(g, ops::transpose(in_val(1)));
      if (needs(1)) out[1] = ops::matmul(ops::transpose(in_val(0)), g);
      break;
    case Op::kTranspose:
      if (needs(0)) out[0] = ops::transpose(g);
      break;
    case Op::kColSum:
      if (needs(0)) out[0] = ops::broadcast_row(g, in_val(0).shape()[0]);
      break;
    case Op::kBroadcastRow:
      if (needs(0)) out[0] = ops::colsum(g);
      break;
    case Op::kConv1d:
      if (needs(0)) out[0] = ops::conv1d_igrad(g, in_val(1));
      if (needs(1)) out[1] = ops::conv1d_wgrad(in_val(0), g, in_val(1).shape()[2]);
      break;
    case Op::kConv1dIgrad:
      if (needs(0)) out[0] = ops::conv1d(g, in_val(1));
      if (needs(1)) out[1] = ops::conv1d_wgrad(g, in_val(0), in_val(1).shape()[2]);
      break;
    case Op::kConv1dWgrad:
      if (needs(0)) out[0] = ops::conv1d_igrad(in_val(1), g);
      if (needs(1)) out[1] = ops::conv1d(in_val(0), g);
      break;
    case Op::kConv2d:
      if (needs(0)) out[0] = ops::conv2d_igrad(g, in_val(1));
      if (needs(1)) out[1] = ops::conv2d_wgrad(in_val(0), g, in_val(1).shape()[2]);
      break;
    case Op::kConv2dIgrad:
      if (needs(0)) out[0] = ops::conv2d(g, in_val(1));
      if (needs(1)) out[1] = ops::conv2d_wgrad(g, in_val(0), in_val(1).shape()[2]);
      break;
    case Op::kConv2dWgrad:
      if (needs(0)) out[0] = ops::conv2d_igrad(in_val(1), g);
      if (needs(1)) out[1] = ops::conv2d(in_val(0), g);
      break;
    case Op::kAddChannelBias:
      if (needs(0)) out[0] = g;
      if (needs(1)) out[1] = ops::channel_sum(g);
      break;
    case Op::kChannelSum:
      if (needs(0)) out[0] = ops::bcast_channel(g, in_val(0).shape());
      break;
    case Op::kBcastChannel:
      if (needs(0)) out[0] = ops::channel_sum(g);
      break;
    case Op::kChannelConcat:
      if (needs(0)) out[0] = ops::channel_slice(g, 0, in_val(0).shape()[1]);
      if (needs(1))
        out[1] = ops::channel_slice(g, in_val(0).shape()[1],
                                    in_val(0).shape()[1] + in_val(1).shape()[1]);
      break;
    case Op::kChannelSlice:
      if (needs(0)) {
        const Shape& xs = in_val(0).shape();
        int64_t c0 = nd.attrs.i0, c1 = nd.attrs.i1;
        Tensor dx = g;
        if (c0 > 0) {
          Shape ls = xs;
          ls[1] = c0;
          dx = ops::channel_concat(Tensor::zeros(ls), dx);
        }
        if (c1 < xs[1]) {
          Shape rs = xs;
          rs[1] = xs[1] - c1;
          dx = ops::channel_concat(dx, Tensor::zeros(rs));
        }
        out[0] = dx;
      }
      break;
    case Op::kSubsample2:
      if (needs(0))
        out[0] = ops::scale(ops::upsample2(g), in_val(0).shape().size() == 3 ? 0.5 : 0.25);
      break;
    case Op::kUpsample2:
      if (needs(0))
        out[0] = ops::scale(ops::subsample2(g), in_val(0).shape().size() == 3 ? 2.0 : 4.0);
      break;
    case Op::kReshape:
      if (needs(0)) out[0] = ops::reshape(g, nd.attrs.shape);
      break;
  }
}

std::vector<Tensor> Tape::backward(const Tensor& output, std::span<const Tensor> wrt,
                                   bool create_graph) {
  if (!output.tracked() || output.tape() != this)
    throw std::runtime_error("backward: output is not recorded on this tape");
  if (output.size() != 1)
    throw std::runtime_error("backward: output must have exactly one element, has " +
                             std::to_string(output.size()));
  for (const Tensor& t : wrt)
    if (!t.tracked() || t.tape() != this)
      throw std::runtime_error("backward: wrt tensor is not recorded on this tape");

  NodeId root = output.node();
  std::vector<Tensor> cot(static_cast<size_t>(root) + 1);
  cot[static_cast<size_t>(root)] = constant(Tensor::full(output.shape(), 1.0));

  std::vector<Tensor> gins;
  for (NodeId id = root; id >= 0; --id) {
    Tensor gy = cot[static_cast<size_t>(id)];
    if (!gy.defined()) continue;
    {
      const Node& nd = nodes_[static_cast<size_t>(id)];
      if (!nd.requires_grad || nd.op == Op::kLeaf || nd.op == Op::kConst) continue;
    }
    input_grads(id, gy, gins);
    const std::vector<NodeId> inputs = nodes_[static_cast<size_t>(id)].inputs;
    for (size_t i = 0; i < gins.size(); ++i) {
      if (!gins[i].defined()) continue;
      NodeId in = inputs[i];
      Tensor prev = cot[static_cast<size_t>(in)];
      cot[static_cast<size_t>(in)] = prev.defined() ? ops::add(prev, gins[i]) : gins[i];
    }
  }

  std::vector<Tensor> grads;
  grads.reserve(wrt.size());
  for (const Tensor& t : wrt) {
    Tensor g = cot[static_cast<size_t>(t.node())];
    if (!g.defined()) g = create_graph ? constant(Tensor::zeros(t.shape())) : Tensor::zeros(t.shape());
    grads.push_back(create_graph ? g : g.detached());
  }
  return grads;
}

}  // namespace gtfd
