#include "headlab/ad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace headlab::ad {

namespace {

double stable_softplus(double x) {
  // log(1 + e^x) without overflow.
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

void check(bool cond, const std::string& msg) {
  if (!cond) throw HeadlabError("ad: " + msg);
}

struct ConvDims {
  int N, Ci, H, W, Co, kh, kw, s, p, Ho, Wo;
};

ConvDims conv_dims(const Shape& x, const Shape& w, int stride, int pad) {
  check(x.nd == 4 && w.nd == 4, "conv: expects 4D tensors");
  ConvDims d;
  d.N = x.d[0];
  d.Ci = x.d[1];
  d.H = x.d[2];
  d.W = x.d[3];
  d.Co = w.d[0];
  check(w.d[1] == d.Ci, "conv: channel mismatch " + x.str() + " vs " + w.str());
  d.kh = w.d[2];
  d.kw = w.d[3];
  d.s = stride;
  d.p = pad;
  d.Ho = (d.H + 2 * pad - d.kh) / stride + 1;
  d.Wo = (d.W + 2 * pad - d.kw) / stride + 1;
  check(d.Ho > 0 && d.Wo > 0, "conv: empty output");
  return d;
}

// Gathers conv patches of sample n into a [Ci*kh*kw, Ho*Wo] matrix.
void im2col(const double* x, const ConvDims& d, int n, RMat& col) {
  col.setZero(d.Ci * d.kh * d.kw, d.Ho * d.Wo);
  const double* xs = x + static_cast<long>(n) * d.Ci * d.H * d.W;
  for (int ci = 0; ci < d.Ci; ++ci) {
    const double* xc = xs + static_cast<long>(ci) * d.H * d.W;
    for (int ki = 0; ki < d.kh; ++ki)
      for (int kj = 0; kj < d.kw; ++kj) {
        int row = (ci * d.kh + ki) * d.kw + kj;
        for (int ho = 0; ho < d.Ho; ++ho) {
          int hi = ho * d.s + ki - d.p;
          if (hi < 0 || hi >= d.H) continue;
          for (int wo = 0; wo < d.Wo; ++wo) {
            int wi = wo * d.s + kj - d.p;
            if (wi < 0 || wi >= d.W) continue;
            col(row, ho * d.Wo + wo) = xc[hi * d.W + wi];
          }
        }
      }
  }
}

// Scatter-adds a [Ci*kh*kw, Ho*Wo] matrix back into sample n of x.
void col2im_add(double* x, const ConvDims& d, int n, const RMat& col) {
  double* xs = x + static_cast<long>(n) * d.Ci * d.H * d.W;
  for (int ci = 0; ci < d.Ci; ++ci) {
    double* xc = xs + static_cast<long>(ci) * d.H * d.W;
    for (int ki = 0; ki < d.kh; ++ki)
      for (int kj = 0; kj < d.kw; ++kj) {
        int row = (ci * d.kh + ki) * d.kw + kj;
        for (int ho = 0; ho < d.Ho; ++ho) {
          int hi = ho * d.s + ki - d.p;
          if (hi < 0 || hi >= d.H) continue;
          for (int wo = 0; wo < d.Wo; ++wo) {
            int wi = wo * d.s + kj - d.p;
            if (wi < 0 || wi >= d.W) continue;
            xc[hi * d.W + wi] += col(row, ho * d.Wo + wo);
          }
        }
      }
  }
}

// Bilinear x2 upsampling taps: output index i reads input cells (i0,i1) with
// weights (1-t, t); half-pixel centers, edges clamped.
inline void up2_taps(int i, int in_len, int& i0, int& i1, double& t) {
  double y = (i + 0.5) * 0.5 - 0.5;
  int f = static_cast<int>(std::floor(y));
  t = y - f;
  i0 = std::min(std::max(f, 0), in_len - 1);
  i1 = std::min(std::max(f + 1, 0), in_len - 1);
}

}  // namespace

std::string Shape::str() const {
  std::ostringstream ss;
  ss << "[";
  for (int i = 0; i < nd; ++i) ss << (i ? "," : "") << d[i];
  ss << "]";
  return ss.str();
}

const Arr& Var::value() const { return tape->node(idx).val; }
const Shape& Var::shape() const { return tape->node(idx).shape; }
double Var::scalar() const {
  check(shape().size() == 1, "scalar() on non-scalar var");
  return value()[0];
}

Eigen::Map<const RMat> as_matrix(const Node& n) {
  check(n.shape.nd == 2, "as_matrix: not 2D: " + n.shape.str());
  return Eigen::Map<const RMat>(n.val.data(), n.shape.rows(), n.shape.cols());
}

Var Tape::leaf(const Arr& v, const Shape& s, bool needs_grad) {
  check(v.size() == s.size(), "leaf: data size does not match shape " + s.str());
  Node n;
  n.op = Op::kLeaf;
  n.shape = s;
  n.val = v;
  n.needs_grad = needs_grad;
  return emit(std::move(n));
}

Var Tape::leaf(const Mat& m, bool needs_grad) {
  Arr v(m.size());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
  return leaf(v, Shape(static_cast<int>(m.rows()), static_cast<int>(m.cols())), needs_grad);
}

Var Tape::scalar_leaf(double v, bool needs_grad) {
  Arr a(1);
  a[0] = v;
  return leaf(a, Shape(1, 1), needs_grad);
}

Var Tape::emit(Node n) {
  if (n.op != Op::kLeaf) {
    bool ng = false;
    if (n.in0 >= 0) ng = ng || nodes_[n.in0].needs_grad;
    if (n.in1 >= 0) ng = ng || nodes_[n.in1].needs_grad;
    // Mask/gate ops never propagate gradient.
    if (n.op == Op::kLreluMask || n.op == Op::kStepAbove1 || n.op == Op::kIn01Mask)
      ng = false;
    n.needs_grad = ng;
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

// ---------------------------------------------------------------------------
// Forward constructors
// ---------------------------------------------------------------------------

namespace {

Var unary(Op op, Var a, double payload = 0.0) {
  Node n;
  n.op = op;
  n.in0 = a.idx;
  n.shape = a.shape();
  n.a = payload;
  const Arr& x = a.value();
  switch (op) {
    case Op::kNeg: n.val = -x; break;
    case Op::kScale: n.val = x * payload; break;
    case Op::kAddScalar: n.val = x + payload; break;
    case Op::kExp: n.val = x.exp(); break;
    case Op::kRecip: n.val = x.inverse(); break;
    case Op::kRsqrt: n.val = x.rsqrt(); break;
    case Op::kSoftplus:
      n.val = x.unaryExpr([](double v) { return stable_softplus(v); });
      break;
    case Op::kSigmoid:
      n.val = x.unaryExpr([](double v) { return stable_sigmoid(v); });
      break;
    case Op::kTanh: n.val = x.tanh(); break;
    case Op::kLreluMask:
      n.val = x.unaryExpr([payload](double v) { return v >= 0.0 ? 1.0 : payload; });
      break;
    case Op::kStepAbove1:
      n.val = x.unaryExpr([](double v) { return v > 1.0 ? 1.0 : 0.0; });
      break;
    case Op::kIn01Mask:
      n.val = x.unaryExpr([](double v) { return (v >= 0.0 && v <= 1.0) ? 1.0 : 0.0; });
      break;
    default: check(false, "unary: bad op");
  }
  return a.tape->emit(std::move(n));
}

Var binary_ew(Op op, Var a, Var b) {
  check(a.tape == b.tape, "ops on different tapes");
  check(a.shape() == b.shape(),
        "elementwise shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Node n;
  n.op = op;
  n.in0 = a.idx;
  n.in1 = b.idx;
  n.shape = a.shape();
  switch (op) {
    case Op::kAdd: n.val = a.value() + b.value(); break;
    case Op::kSub: n.val = a.value() - b.value(); break;
    case Op::kMul: n.val = a.value() * b.value(); break;
    default: check(false, "binary: bad op");
  }
  return a.tape->emit(std::move(n));
}

}  // namespace

Var add(Var a, Var b) { return binary_ew(Op::kAdd, a, b); }
Var sub(Var a, Var b) { return binary_ew(Op::kSub, a, b); }
Var mul(Var a, Var b) { return binary_ew(Op::kMul, a, b); }
Var neg(Var a) { return unary(Op::kNeg, a); }
Var scale(Var a, double s) { return unary(Op::kScale, a, s); }
Var add_scalar(Var a, double s) { return unary(Op::kAddScalar, a, s); }
Var vexp(Var a) { return unary(Op::kExp, a); }
Var recip(Var a) { return unary(Op::kRecip, a); }
Var rsqrt(Var a) { return unary(Op::kRsqrt, a); }
Var softplus(Var a) { return unary(Op::kSoftplus, a); }
Var sigmoid(Var a) { return unary(Op::kSigmoid, a); }
Var vtanh(Var a) { return unary(Op::kTanh, a); }

Var lrelu(Var a, double slope) { return mul(a, unary(Op::kLreluMask, a, slope)); }

Var clamp01(Var a) {
  // x within [0,1] passes through; above 1 contributes the constant 1.
  return add(mul(a, unary(Op::kIn01Mask, a)), unary(Op::kStepAbove1, a));
}

Var square(Var a) { return mul(a, a); }

Var sum_all(Var a) {
  Node n;
  n.op = Op::kSumAll;
  n.in0 = a.idx;
  n.shape = Shape(1, 1);
  n.val = Arr::Constant(1, a.value().sum());
  return a.tape->emit(std::move(n));
}

Var mean_all(Var a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.shape().size())); }

Var broadcast_all(Var s, const Shape& shape) {
  check(s.shape().size() == 1, "broadcast_all: source must be scalar");
  Node n;
  n.op = Op::kBroadcastAll;
  n.in0 = s.idx;
  n.shape = shape;
  n.val = Arr::Constant(shape.size(), s.value()[0]);
  return s.tape->emit(std::move(n));
}

Var sum_cols(Var a) {
  check(a.shape().nd == 2, "sum_cols: 2D only");
  const int m = a.shape().rows(), c = a.shape().cols();
  Node n;
  n.op = Op::kSumCols;
  n.in0 = a.idx;
  n.shape = Shape(m, 1);
  n.val = Arr::Zero(m);
  Eigen::Map<const RMat> x(a.value().data(), m, c);
  Eigen::Map<Eigen::VectorXd>(n.val.data(), m) = x.rowwise().sum();
  return a.tape->emit(std::move(n));
}

Var broadcast_cols(Var a, int cols) {
  check(a.shape().nd == 2 && a.shape().cols() == 1, "broadcast_cols: expects [m,1]");
  const int m = a.shape().rows();
  Node n;
  n.op = Op::kBroadcastCols;
  n.in0 = a.idx;
  n.shape = Shape(m, cols);
  n.val = Arr::Zero(static_cast<long>(m) * cols);
  Eigen::Map<RMat> out(n.val.data(), m, cols);
  out = Eigen::Map<const Eigen::VectorXd>(a.value().data(), m).replicate(1, cols);
  return a.tape->emit(std::move(n));
}

Var sum_rows(Var a) {
  check(a.shape().nd == 2, "sum_rows: 2D only");
  const int m = a.shape().rows(), c = a.shape().cols();
  Node n;
  n.op = Op::kSumRows;
  n.in0 = a.idx;
  n.shape = Shape(1, c);
  n.val = Arr::Zero(c);
  Eigen::Map<const RMat> x(a.value().data(), m, c);
  Eigen::Map<Eigen::RowVectorXd>(n.val.data(), c) = x.colwise().sum();
  return a.tape->emit(std::move(n));
}

Var broadcast_rows(Var a, int rows) {
  check(a.shape().nd == 2 && a.shape().rows() == 1, "broadcast_rows: expects [1,n]");
  const int c = a.shape().cols();
  Node n;
  n.op = Op::kBroadcastRows;
  n.in0 = a.idx;
  n.shape = Shape(rows, c);
  n.val = Arr::Zero(static_cast<long>(rows) * c);
  Eigen::Map<RMat> out(n.val.data(), rows, c);
  out = Eigen::Map<const Eigen::RowVectorXd>(a.value().data(), c).replicate(rows, 1);
  return a.tape->emit(std::move(n));
}

Var matmul(Var a, Var b, bool ta, bool tb) {
  check(a.tape == b.tape, "matmul: different tapes");
  check(a.shape().nd == 2 && b.shape().nd == 2, "matmul: 2D only");
  const int am = ta ? a.shape().cols() : a.shape().rows();
  const int ak = ta ? a.shape().rows() : a.shape().cols();
  const int bk = tb ? b.shape().cols() : b.shape().rows();
  const int bn = tb ? b.shape().rows() : b.shape().cols();
  check(ak == bk, "matmul: inner dims " + a.shape().str() + " x " + b.shape().str());
  Node n;
  n.op = Op::kMatmul;
  n.in0 = a.idx;
  n.in1 = b.idx;
  n.meta[0] = ta;
  n.meta[1] = tb;
  n.shape = Shape(am, bn);
  n.val = Arr::Zero(static_cast<long>(am) * bn);
  Eigen::Map<const RMat> A(a.value().data(), a.shape().rows(), a.shape().cols());
  Eigen::Map<const RMat> B(b.value().data(), b.shape().rows(), b.shape().cols());
  Eigen::Map<RMat> C(n.val.data(), am, bn);
  if (!ta && !tb) C.noalias() = A * B;
  else if (ta && !tb) C.noalias() = A.transpose() * B;
  else if (!ta && tb) C.noalias() = A * B.transpose();
  else C.noalias() = A.transpose() * B.transpose();
  return a.tape->emit(std::move(n));
}

Var transpose(Var a) {
  check(a.shape().nd == 2, "transpose: 2D only");
  const int m = a.shape().rows(), c = a.shape().cols();
  Node n;
  n.op = Op::kTranspose;
  n.in0 = a.idx;
  n.shape = Shape(c, m);
  n.val = Arr::Zero(static_cast<long>(m) * c);
  Eigen::Map<const RMat> x(a.value().data(), m, c);
  Eigen::Map<RMat> out(n.val.data(), c, m);
  out = x.transpose();
  return a.tape->emit(std::move(n));
}

Var reshape(Var a, const Shape& s) {
  check(s.size() == a.shape().size(),
        "reshape: size mismatch " + a.shape().str() + " -> " + s.str());
  Node n;
  n.op = Op::kReshape;
  n.in0 = a.idx;
  n.shape = s;
  n.val = a.value();
  return a.tape->emit(std::move(n));
}

Var concat_rows(Var a, Var b) {
  check(a.tape == b.tape, "concat: different tapes");
  check(a.shape().nd == 2 && b.shape().nd == 2 && a.shape().cols() == b.shape().cols(),
        "concat_rows: col mismatch");
  const int ma = a.shape().rows(), mb = b.shape().rows(), c = a.shape().cols();
  Node n;
  n.op = Op::kConcatRows;
  n.in0 = a.idx;
  n.in1 = b.idx;
  n.shape = Shape(ma + mb, c);
  n.val = Arr::Zero(static_cast<long>(ma + mb) * c);
  n.val.head(static_cast<long>(ma) * c) = a.value();
  n.val.tail(static_cast<long>(mb) * c) = b.value();
  n.meta[0] = ma;
  return a.tape->emit(std::move(n));
}

Var concat_rows(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_rows: empty list");
  Var out = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) out = concat_rows(out, parts[i]);
  return out;
}

Var slice_rows(Var a, int r0, int nr) {
  check(a.shape().nd == 2, "slice_rows: 2D only");
  const int m = a.shape().rows(), c = a.shape().cols();
  check(r0 >= 0 && nr >= 0 && r0 + nr <= m, "slice_rows: out of range");
  Node n;
  n.op = Op::kSliceRows;
  n.in0 = a.idx;
  n.shape = Shape(nr, c);
  n.meta[0] = r0;
  n.meta[1] = m;
  n.val = a.value().segment(static_cast<long>(r0) * c, static_cast<long>(nr) * c);
  return a.tape->emit(std::move(n));
}

Var concat_chan(Var a, Var b) {
  check(a.tape == b.tape, "concat_chan: different tapes");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  check(sa.nd == 4 && sb.nd == 4 && sa.d[0] == sb.d[0] && sa.d[2] == sb.d[2] &&
            sa.d[3] == sb.d[3],
        "concat_chan: shape mismatch " + sa.str() + " vs " + sb.str());
  const int N = sa.d[0], Ca = sa.d[1], Cb = sb.d[1], H = sa.d[2], W = sa.d[3];
  Node n;
  n.op = Op::kConcatChan;
  n.in0 = a.idx;
  n.in1 = b.idx;
  n.shape = Shape(N, Ca + Cb, H, W);
  n.meta[0] = Ca;
  n.val = Arr::Zero(n.shape.size());
  const long hw = static_cast<long>(H) * W;
  for (int i = 0; i < N; ++i) {
    n.val.segment(static_cast<long>(i) * (Ca + Cb) * hw, Ca * hw) =
        a.value().segment(static_cast<long>(i) * Ca * hw, Ca * hw);
    n.val.segment(static_cast<long>(i) * (Ca + Cb) * hw + Ca * hw, Cb * hw) =
        b.value().segment(static_cast<long>(i) * Cb * hw, Cb * hw);
  }
  return a.tape->emit(std::move(n));
}

Var slice_chan(Var a, int c0, int nc) {
  const Shape& s = a.shape();
  check(s.nd == 4, "slice_chan: 4D only");
  check(c0 >= 0 && nc > 0 && c0 + nc <= s.d[1], "slice_chan: out of range");
  const int N = s.d[0], C = s.d[1], H = s.d[2], W = s.d[3];
  Node n;
  n.op = Op::kSliceChan;
  n.in0 = a.idx;
  n.shape = Shape(N, nc, H, W);
  n.meta[0] = c0;
  n.meta[1] = C;
  n.val = Arr::Zero(n.shape.size());
  const long hw = static_cast<long>(H) * W;
  for (int i = 0; i < N; ++i)
    n.val.segment(static_cast<long>(i) * nc * hw, nc * hw) =
        a.value().segment((static_cast<long>(i) * C + c0) * hw, nc * hw);
  return a.tape->emit(std::move(n));
}

Var cumsum_excl_rows(Var a, bool reverse) {
  check(a.shape().nd == 2, "cumsum_excl_rows: 2D only");
  const int m = a.shape().rows(), c = a.shape().cols();
  Node n;
  n.op = Op::kCumsumExclRows;
  n.in0 = a.idx;
  n.shape = a.shape();
  n.meta[0] = reverse ? 1 : 0;
  n.val = Arr::Zero(static_cast<long>(m) * c);
  const double* x = a.value().data();
  double* y = n.val.data();
  for (int i = 0; i < m; ++i) {
    const double* xr = x + static_cast<long>(i) * c;
    double* yr = y + static_cast<long>(i) * c;
    double acc = 0.0;
    if (!reverse) {
      for (int j = 0; j < c; ++j) {
        yr[j] = acc;
        acc += xr[j];
      }
    } else {
      for (int j = c - 1; j >= 0; --j) {
        yr[j] = acc;
        acc += xr[j];
      }
    }
  }
  return a.tape->emit(std::move(n));
}

Var conv2d(Var x, Var w, int stride, int pad) {
  check(x.tape == w.tape, "conv2d: different tapes");
  ConvDims d = conv_dims(x.shape(), w.shape(), stride, pad);
  Node n;
  n.op = Op::kConv2d;
  n.in0 = x.idx;
  n.in1 = w.idx;
  n.shape = Shape(d.N, d.Co, d.Ho, d.Wo);
  n.meta[0] = stride;
  n.meta[1] = pad;
  n.val = Arr::Zero(n.shape.size());
  Eigen::Map<const RMat> Wm(w.value().data(), d.Co, d.Ci * d.kh * d.kw);
  RMat col;
  for (int i = 0; i < d.N; ++i) {
    im2col(x.value().data(), d, i, col);
    Eigen::Map<RMat> out(n.val.data() + static_cast<long>(i) * d.Co * d.Ho * d.Wo, d.Co,
                         d.Ho * d.Wo);
    out.noalias() = Wm * col;
  }
  return x.tape->emit(std::move(n));
}

Var conv_dx(Var g, Var w, int stride, int pad, int H, int W) {
  check(g.tape == w.tape, "conv_dx: different tapes");
  const Shape& gs = g.shape();
  const Shape& ws = w.shape();
  check(gs.nd == 4 && ws.nd == 4, "conv_dx: 4D only");
  ConvDims d = conv_dims(Shape(gs.d[0], ws.d[1], H, W), ws, stride, pad);
  check(d.Ho == gs.d[2] && d.Wo == gs.d[3] && d.Co == gs.d[1], "conv_dx: dim mismatch");
  Node n;
  n.op = Op::kConvDx;
  n.in0 = g.idx;
  n.in1 = w.idx;
  n.shape = Shape(d.N, d.Ci, H, W);
  n.meta[0] = stride;
  n.meta[1] = pad;
  n.meta[2] = H;
  n.meta[3] = W;
  n.val = Arr::Zero(n.shape.size());
  Eigen::Map<const RMat> Wm(w.value().data(), d.Co, d.Ci * d.kh * d.kw);
  RMat col(d.Ci * d.kh * d.kw, d.Ho * d.Wo);
  for (int i = 0; i < d.N; ++i) {
    Eigen::Map<const RMat> gi(g.value().data() + static_cast<long>(i) * d.Co * d.Ho * d.Wo,
                              d.Co, d.Ho * d.Wo);
    col.noalias() = Wm.transpose() * gi;
    col2im_add(n.val.data(), d, i, col);
  }
  return g.tape->emit(std::move(n));
}

Var conv_dw(Var x, Var g, int stride, int pad, int kh, int kw) {
  check(x.tape == g.tape, "conv_dw: different tapes");
  const Shape& xs = x.shape();
  const Shape& gs = g.shape();
  check(xs.nd == 4 && gs.nd == 4 && xs.d[0] == gs.d[0], "conv_dw: dim mismatch");
  ConvDims d = conv_dims(xs, Shape(gs.d[1], xs.d[1], kh, kw), stride, pad);
  check(d.Ho == gs.d[2] && d.Wo == gs.d[3], "conv_dw: output mismatch");
  Node n;
  n.op = Op::kConvDw;
  n.in0 = x.idx;
  n.in1 = g.idx;
  n.shape = Shape(gs.d[1], xs.d[1], kh, kw);
  n.meta[0] = stride;
  n.meta[1] = pad;
  n.meta[2] = kh;
  n.meta[3] = kw;
  n.val = Arr::Zero(n.shape.size());
  Eigen::Map<RMat> Wg(n.val.data(), d.Co, d.Ci * d.kh * d.kw);
  RMat col;
  for (int i = 0; i < d.N; ++i) {
    im2col(x.value().data(), d, i, col);
    Eigen::Map<const RMat> gi(g.value().data() + static_cast<long>(i) * d.Co * d.Ho * d.Wo,
                              d.Co, d.Ho * d.Wo);
    Wg.noalias() += gi * col.transpose();
  }
  return x.tape->emit(std::move(n));
}

Var sum_nhw(Var x) {
  const Shape& s = x.shape();
  check(s.nd == 4, "sum_nhw: 4D only");
  const int N = s.d[0], C = s.d[1];
  const long hw = static_cast<long>(s.d[2]) * s.d[3];
  Node n;
  n.op = Op::kSumNHW;
  n.in0 = x.idx;
  n.shape = Shape(1, C);
  n.val = Arr::Zero(C);
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c)
      n.val[c] += x.value().segment((static_cast<long>(i) * C + c) * hw, hw).sum();
  return x.tape->emit(std::move(n));
}

Var broadcast_chan(Var b, int N, int H, int W) {
  check(b.shape().nd == 2 && b.shape().rows() == 1, "broadcast_chan: expects [1,C]");
  const int C = b.shape().cols();
  Node n;
  n.op = Op::kBroadcastChan;
  n.in0 = b.idx;
  n.shape = Shape(N, C, H, W);
  n.meta[0] = N;
  n.meta[1] = H;
  n.meta[2] = W;
  n.val = Arr::Zero(n.shape.size());
  const long hw = static_cast<long>(H) * W;
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c)
      n.val.segment((static_cast<long>(i) * C + c) * hw, hw).setConstant(b.value()[c]);
  return b.tape->emit(std::move(n));
}

Var channel_scale(Var x, Var s) {
  check(x.tape == s.tape, "channel_scale: different tapes");
  const Shape& xs = x.shape();
  check(xs.nd == 4, "channel_scale: x must be 4D");
  check(s.shape().nd == 2 && s.shape().rows() == xs.d[0] && s.shape().cols() == xs.d[1],
        "channel_scale: s must be [N,C]");
  Node n;
  n.op = Op::kChannelScale;
  n.in0 = x.idx;
  n.in1 = s.idx;
  n.shape = xs;
  n.val = Arr::Zero(xs.size());
  const int N = xs.d[0], C = xs.d[1];
  const long hw = static_cast<long>(xs.d[2]) * xs.d[3];
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c) {
      const long off = (static_cast<long>(i) * C + c) * hw;
      n.val.segment(off, hw) = x.value().segment(off, hw) * s.value()[i * C + c];
    }
  return x.tape->emit(std::move(n));
}

Var channel_dot(Var a, Var b) {
  check(a.tape == b.tape && a.shape() == b.shape() && a.shape().nd == 4,
        "channel_dot: expects matching 4D");
  const Shape& s = a.shape();
  const int N = s.d[0], C = s.d[1];
  const long hw = static_cast<long>(s.d[2]) * s.d[3];
  Node n;
  n.op = Op::kChannelDot;
  n.in0 = a.idx;
  n.in1 = b.idx;
  n.shape = Shape(N, C);
  n.val = Arr::Zero(static_cast<long>(N) * C);
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c) {
      const long off = (static_cast<long>(i) * C + c) * hw;
      n.val[i * C + c] = (a.value().segment(off, hw) * b.value().segment(off, hw)).sum();
    }
  return a.tape->emit(std::move(n));
}

Var bilinear_up2(Var x) {
  const Shape& s = x.shape();
  check(s.nd == 4, "bilinear_up2: 4D only");
  const int N = s.d[0], C = s.d[1], H = s.d[2], W = s.d[3];
  Node n;
  n.op = Op::kBilinearUp2;
  n.in0 = x.idx;
  n.shape = Shape(N, C, 2 * H, 2 * W);
  n.val = Arr::Zero(n.shape.size());
  for (int nc = 0; nc < N * C; ++nc) {
    const double* in = x.value().data() + static_cast<long>(nc) * H * W;
    double* out = n.val.data() + static_cast<long>(nc) * 4 * H * W;
    for (int i = 0; i < 2 * H; ++i) {
      int i0, i1;
      double ti;
      up2_taps(i, H, i0, i1, ti);
      for (int j = 0; j < 2 * W; ++j) {
        int j0, j1;
        double tj;
        up2_taps(j, W, j0, j1, tj);
        out[i * 2 * W + j] = (1 - ti) * ((1 - tj) * in[i0 * W + j0] + tj * in[i0 * W + j1]) +
                             ti * ((1 - tj) * in[i1 * W + j0] + tj * in[i1 * W + j1]);
      }
    }
  }
  return x.tape->emit(std::move(n));
}

Var bilinear_up2_t(Var g, int H, int W) {
  const Shape& s = g.shape();
  check(s.nd == 4 && s.d[2] == 2 * H && s.d[3] == 2 * W, "bilinear_up2_t: dim mismatch");
  const int N = s.d[0], C = s.d[1];
  Node n;
  n.op = Op::kBilinearUp2T;
  n.in0 = g.idx;
  n.shape = Shape(N, C, H, W);
  n.meta[0] = H;
  n.meta[1] = W;
  n.val = Arr::Zero(n.shape.size());
  for (int nc = 0; nc < N * C; ++nc) {
    const double* in = g.value().data() + static_cast<long>(nc) * 4 * H * W;
    double* out = n.val.data() + static_cast<long>(nc) * H * W;
    for (int i = 0; i < 2 * H; ++i) {
      int i0, i1;
      double ti;
      up2_taps(i, H, i0, i1, ti);
      for (int j = 0; j < 2 * W; ++j) {
        int j0, j1;
        double tj;
        up2_taps(j, W, j0, j1, tj);
        const double v = in[i * 2 * W + j];
        out[i0 * W + j0] += (1 - ti) * (1 - tj) * v;
        out[i0 * W + j1] += (1 - ti) * tj * v;
        out[i1 * W + j0] += ti * (1 - tj) * v;
        out[i1 * W + j1] += ti * tj * v;
      }
    }
  }
  return g.tape->emit(std::move(n));
}

Var sample_planes(std::shared_ptr<const SpMat> w, Var planes) {
  const Shape& s = planes.shape();
  check(s.nd == 2, "sample_planes: planes must be [C,R2]");
  check(w && w->cols() == s.cols(), "sample_planes: sampler/plane size mismatch");
  const int P = static_cast<int>(w->rows());
  const int C = s.rows();
  Node n;
  n.op = Op::kSamplePlanes;
  n.in0 = planes.idx;
  n.shape = Shape(P, C);
  n.sp = w;
  n.val = Arr::Zero(static_cast<long>(P) * C);
  Eigen::Map<const RMat> M(planes.value().data(), C, s.cols());
  Eigen::Map<RMat> out(n.val.data(), P, C);
  out.noalias() = (*w) * M.transpose();
  return planes.tape->emit(std::move(n));
}

Var sample_planes_adj(std::shared_ptr<const SpMat> w, Var u, int r2) {
  const Shape& s = u.shape();
  check(s.nd == 2 && w && s.rows() == w->rows(), "sample_planes_adj: dim mismatch");
  const int C = s.cols();
  Node n;
  n.op = Op::kSamplePlanesAdj;
  n.in0 = u.idx;
  n.shape = Shape(C, r2);
  n.sp = w;
  n.val = Arr::Zero(static_cast<long>(C) * r2);
  Eigen::Map<const RMat> U(u.value().data(), s.rows(), C);
  Eigen::Map<RMat> out(n.val.data(), C, r2);
  out.noalias() = U.transpose() * (*w);
  return u.tape->emit(std::move(n));
}

Var detach(Var a) {
  return a.tape->leaf(a.value(), a.shape(), false);
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

std::vector<Var> Tape::gradients(Var loss, const std::vector<Var>& wrt) {
  check(loss.tape == this, "gradients: loss not on this tape");
  check(loss.shape().size() == 1, "gradients: loss must be scalar");

  const int start = loss.idx;
  std::vector<Var> grad_of(static_cast<size_t>(start) + 1);
  grad_of[start] = scalar_leaf(1.0);
  if (loss.shape() != Shape(1, 1))
    grad_of[start] = reshape(broadcast_all(grad_of[start], Shape(1, 1)), loss.shape());

  auto accum = [this](Var& slot, Var g) {
    if (!slot.valid()) slot = g;
    else slot = add(slot, g);
  };

  // Light snapshot of a node's wiring; emits below may reallocate nodes_.
  struct Wiring {
    Op op;
    int in0, in1;
    Shape shape;
    bool needs_grad;
    double a;
    std::array<int, 4> meta;
    std::shared_ptr<const SpMat> sp;
  };

  for (int i = start; i >= 0; --i) {
    if (!grad_of[i].valid()) continue;
    const Node& nd = nodes_[i];
    Wiring snap{nd.op, nd.in0, nd.in1, nd.shape, nd.needs_grad, nd.a, nd.meta, nd.sp};
    if (!snap.needs_grad || snap.op == Op::kLeaf) continue;
    Var g = grad_of[i];
    Var a{this, snap.in0}, b{this, snap.in1};
    const bool ga = snap.in0 >= 0 && nodes_[snap.in0].needs_grad;
    const bool gb = snap.in1 >= 0 && nodes_[snap.in1].needs_grad;
    Var self{this, i};

    switch (snap.op) {
      case Op::kAdd:
        if (ga) accum(grad_of[snap.in0], g);
        if (gb) accum(grad_of[snap.in1], g);
        break;
      case Op::kSub:
        if (ga) accum(grad_of[snap.in0], g);
        if (gb) accum(grad_of[snap.in1], neg(g));
        break;
      case Op::kMul:
        if (ga) accum(grad_of[snap.in0], mul(g, b));
        if (gb) accum(grad_of[snap.in1], mul(g, a));
        break;
      case Op::kNeg:
        if (ga) accum(grad_of[snap.in0], neg(g));
        break;
      case Op::kScale:
        if (ga) accum(grad_of[snap.in0], scale(g, snap.a));
        break;
      case Op::kAddScalar:
        if (ga) accum(grad_of[snap.in0], g);
        break;
      case Op::kExp:
        if (ga) accum(grad_of[snap.in0], mul(g, self));
        break;
      case Op::kRecip:
        if (ga) accum(grad_of[snap.in0], neg(mul(g, mul(self, self))));
        break;
      case Op::kRsqrt:
        if (ga) accum(grad_of[snap.in0], scale(mul(g, mul(self, mul(self, self))), -0.5));
        break;
      case Op::kSoftplus:
        if (ga) accum(grad_of[snap.in0], mul(g, sigmoid(a)));
        break;
      case Op::kSigmoid:
        if (ga) accum(grad_of[snap.in0], mul(g, mul(self, add_scalar(neg(self), 1.0))));
        break;
      case Op::kTanh:
        if (ga) accum(grad_of[snap.in0], mul(g, add_scalar(neg(mul(self, self)), 1.0)));
        break;
      case Op::kSumAll:
        if (ga) accum(grad_of[snap.in0], broadcast_all(g, a.shape()));
        break;
      case Op::kBroadcastAll:
        if (ga) accum(grad_of[snap.in0], reshape(sum_all(g), a.shape()));
        break;
      case Op::kSumCols:
        if (ga) accum(grad_of[snap.in0], broadcast_cols(g, a.shape().cols()));
        break;
      case Op::kBroadcastCols:
        if (ga) accum(grad_of[snap.in0], sum_cols(g));
        break;
      case Op::kSumRows:
        if (ga) accum(grad_of[snap.in0], broadcast_rows(g, a.shape().rows()));
        break;
      case Op::kBroadcastRows:
        if (ga) accum(grad_of[snap.in0], sum_rows(g));
        break;
      case Op::kMatmul: {
        const bool ta = snap.meta[0], tb = snap.meta[1];
        if (ga) {
          Var da = ta ? matmul(b, g, tb, true) : matmul(g, b, false, !tb);
          accum(grad_of[snap.in0], da);
        }
        if (gb) {
          Var db = tb ? matmul(g, a, true, ta) : matmul(a, g, !ta, false);
          accum(grad_of[snap.in1], db);
        }
        break;
      }
      case Op::kTranspose:
        if (ga) accum(grad_of[snap.in0], transpose(g));
        break;
      case Op::kReshape:
        if (ga) accum(grad_of[snap.in0], reshape(g, a.shape()));
        break;
      case Op::kConcatRows: {
        const int ma = snap.meta[0];
        if (ga) accum(grad_of[snap.in0], slice_rows(g, 0, ma));
        if (gb) accum(grad_of[snap.in1], slice_rows(g, ma, g.shape().rows() - ma));
        break;
      }
      case Op::kSliceRows: {
        if (ga) {
          // Scatter back into a zero tensor of the input size.
          const int r0 = snap.meta[0], m = snap.meta[1];
          const int c = a.shape().cols();
          Var z_top = leaf(Arr::Zero(static_cast<long>(r0) * c), Shape(r0, c));
          Var z_bot = leaf(Arr::Zero(static_cast<long>(m - r0 - snap.shape.rows()) * c),
                           Shape(m - r0 - snap.shape.rows(), c));
          Var stacked = g;
          if (r0 > 0) stacked = concat_rows(z_top, stacked);
          if (m - r0 - snap.shape.rows() > 0) stacked = concat_rows(stacked, z_bot);
          accum(grad_of[snap.in0], stacked);
        }
        break;
      }
      case Op::kConcatChan: {
        const int Ca = snap.meta[0];
        if (ga) accum(grad_of[snap.in0], slice_chan(g, 0, Ca));
        if (gb) accum(grad_of[snap.in1], slice_chan(g, Ca, snap.shape.d[1] - Ca));
        break;
      }
      case Op::kSliceChan: {
        if (ga) {
          const int c0 = snap.meta[0], C = snap.meta[1];
          const Shape s = a.shape();
          const int nc = snap.shape.d[1];
          std::vector<Var> parts;
          if (c0 > 0)
            parts.push_back(leaf(Arr::Zero(static_cast<long>(s.d[0]) * c0 * s.d[2] * s.d[3]),
                                 Shape(s.d[0], c0, s.d[2], s.d[3])));
          parts.push_back(g);
          if (C - c0 - nc > 0)
            parts.push_back(
                leaf(Arr::Zero(static_cast<long>(s.d[0]) * (C - c0 - nc) * s.d[2] * s.d[3]),
                     Shape(s.d[0], C - c0 - nc, s.d[2], s.d[3])));
          Var stacked = parts[0];
          for (size_t k = 1; k < parts.size(); ++k) stacked = concat_chan(stacked, parts[k]);
          accum(grad_of[snap.in0], stacked);
        }
        break;
      }
      case Op::kCumsumExclRows:
        if (ga) accum(grad_of[snap.in0], cumsum_excl_rows(g, snap.meta[0] == 0));
        break;
      case Op::kConv2d: {
        const int st = snap.meta[0], pd = snap.meta[1];
        if (ga) accum(grad_of[snap.in0],
                      conv_dx(g, b, st, pd, a.shape().d[2], a.shape().d[3]));
        if (gb) accum(grad_of[snap.in1],
                      conv_dw(a, g, st, pd, b.shape().d[2], b.shape().d[3]));
        break;
      }
      case Op::kConvDx: {
        const int st = snap.meta[0], pd = snap.meta[1];
        if (ga) accum(grad_of[snap.in0], conv2d(g, b, st, pd));
        if (gb) accum(grad_of[snap.in1],
                      conv_dw(g, a, st, pd, b.shape().d[2], b.shape().d[3]));
        break;
      }
      case Op::kConvDw: {
        const int st = snap.meta[0], pd = snap.meta[1];
        if (ga) accum(grad_of[snap.in0],
                      conv_dx(b, g, st, pd, a.shape().d[2], a.shape().d[3]));
        if (gb) accum(grad_of[snap.in1], conv2d(a, g, st, pd));
        break;
      }
      case Op::kSumNHW: {
        const Shape s = a.shape();
        if (ga) accum(grad_of[snap.in0], broadcast_chan(g, s.d[0], s.d[2], s.d[3]));
        break;
      }
      case Op::kBroadcastChan:
        if (ga) accum(grad_of[snap.in0], sum_nhw(g));
        break;
      case Op::kChannelScale:
        if (ga) accum(grad_of[snap.in0], channel_scale(g, b));
        if (gb) accum(grad_of[snap.in1], channel_dot(g, a));
        break;
      case Op::kChannelDot: {
        // value[n,c] = sum_hw a*b; d/da = broadcast(g) * b.
        if (ga) accum(grad_of[snap.in0], channel_scale(b, g));
        if (gb) accum(grad_of[snap.in1], channel_scale(a, g));
        break;
      }
      case Op::kBilinearUp2:
        if (ga) accum(grad_of[snap.in0], bilinear_up2_t(g, a.shape().d[2], a.shape().d[3]));
        break;
      case Op::kBilinearUp2T:
        if (ga) accum(grad_of[snap.in0], bilinear_up2(g));
        break;
      case Op::kSamplePlanes:
        if (ga) accum(grad_of[snap.in0], sample_planes_adj(snap.sp, g, a.shape().cols()));
        break;
      case Op::kSamplePlanesAdj:
        if (ga) accum(grad_of[snap.in0], sample_planes(snap.sp, g));
        break;
      case Op::kLreluMask:
      case Op::kStepAbove1:
      case Op::kIn01Mask:
      case Op::kLeaf:
        break;
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& v : wrt) {
    check(v.tape == this, "gradients: wrt var not on this tape");
    if (v.idx <= start && grad_of[v.idx].valid()) out.push_back(grad_of[v.idx]);
    else out.push_back(Var{});
  }
  return out;
}

}  // namespace headlab::ad
