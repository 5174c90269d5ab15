#pragma once

#include "headlab/core/common.hpp"

#include <Eigen/Sparse>

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace headlab::ad {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Logical tensor extents, row-major. nd==2 tensors act as [rows, cols]
/// matrices; nd==4 tensors act as [N, C, H, W] image stacks.
struct Shape {
  std::array<int, 4> d{1, 1, 1, 1};
  int nd = 2;

  Shape() = default;
  Shape(int rows, int cols) : d{rows, cols, 1, 1}, nd(2) {}
  Shape(int n, int c, int h, int w) : d{n, c, h, w}, nd(4) {}

  long size() const {
    long s = 1;
    for (int i = 0; i < nd; ++i) s *= d[i];
    return s;
  }
  int rows() const { return d[0]; }
  int cols() const { return d[1]; }
  bool operator==(const Shape& o) const { return nd == o.nd && d == o.d; }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const;
};

enum class Op : uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kNeg,
  kScale,       // a * const
  kAddScalar,   // a + const
  kExp,
  kRecip,
  kRsqrt,
  kSoftplus,
  kSigmoid,
  kTanh,
  kLreluMask,   // non-differentiable gate values
  kStepAbove1,  // non-differentiable: 1 where x > 1 else 0
  kIn01Mask,    // non-differentiable: 1 where 0 <= x <= 1 else 0
  kSumAll,
  kBroadcastAll,
  kSumCols,
  kBroadcastCols,
  kSumRows,
  kBroadcastRows,
  kMatmul,
  kTranspose,
  kReshape,
  kConcatRows,
  kSliceRows,
  kConcatChan,
  kSliceChan,
  kCumsumExclRows,  // payload i0: 0 forward-exclusive, 1 reverse-exclusive
  kConv2d,
  kConvDx,
  kConvDw,
  kSumNHW,
  kBroadcastChan,
  kChannelScale,
  kChannelDot,
  kBilinearUp2,
  kBilinearUp2T,
  kSamplePlanes,
  kSamplePlanesAdj,
};

struct Node {
  Op op = Op::kLeaf;
  int in0 = -1, in1 = -1;
  Shape shape;
  Arr val;
  bool needs_grad = false;
  double a = 0.0;            // scalar payload
  std::array<int, 4> meta{0, 0, 0, 0};  // op-specific ints (stride, pad, offsets)
  std::shared_ptr<const SpMat> sp;      // plane samplers
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int idx = -1;

  bool valid() const { return tape != nullptr && idx >= 0; }
  const Arr& value() const;
  const Shape& shape() const;
  double scalar() const;
};

class Tape {
 public:
  Var leaf(const Arr& v, const Shape& s, bool needs_grad = false);
  Var leaf(const Mat& m, bool needs_grad = false);
  Var scalar_leaf(double v, bool needs_grad = false);

  Node& node(int i) { return nodes_[i]; }
  const Node& node(int i) const { return nodes_[i]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  void clear() { nodes_.clear(); }

  Var emit(Node n);

  /// Reverse-mode gradients of a scalar w.r.t. the given vars. The returned
  /// vars live on the same tape, so gradient expressions themselves are
  /// differentiable (used by the gradient penalty). Vars not reached by the
  /// backward sweep come back invalid and mean an exact zero gradient.
  std::vector<Var> gradients(Var loss, const std::vector<Var>& wrt);

 private:
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Op constructors (free functions, value-semantics handles)
// ---------------------------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var vexp(Var a);
Var recip(Var a);
Var rsqrt(Var a);
Var softplus(Var a);
Var sigmoid(Var a);
Var vtanh(Var a);
Var lrelu(Var a, double slope = 0.2);
Var clamp01(Var a);
Var square(Var a);

Var sum_all(Var a);
Var mean_all(Var a);
Var broadcast_all(Var scalar, const Shape& s);
Var sum_cols(Var a);                    // [m,n] -> [m,1]
Var broadcast_cols(Var a, int n);       // [m,1] -> [m,n]
Var sum_rows(Var a);                    // [m,n] -> [1,n]
Var broadcast_rows(Var a, int m);       // [1,n] -> [m,n]

Var matmul(Var a, Var b, bool ta = false, bool tb = false);
Var transpose(Var a);
Var reshape(Var a, const Shape& s);
Var concat_rows(Var a, Var b);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, int r0, int nr);
Var concat_chan(Var a, Var b);
Var slice_chan(Var a, int c0, int nc);
Var cumsum_excl_rows(Var a, bool reverse = false);

Var conv2d(Var x, Var w, int stride, int pad);
Var conv_dx(Var g, Var w, int stride, int pad, int H, int W);
Var conv_dw(Var x, Var g, int stride, int pad, int kh, int kw);
Var sum_nhw(Var x);                     // [N,C,H,W] -> [1,C]
Var broadcast_chan(Var b, int n, int h, int w);  // [1,C] -> [N,C,H,W]
Var channel_scale(Var x, Var s);        // x:[N,C,H,W], s:[N,C]
Var channel_dot(Var a, Var b);          // -> [N,C]
Var bilinear_up2(Var x);
Var bilinear_up2_t(Var g, int H, int W);

Var sample_planes(std::shared_ptr<const SpMat> w, Var planes);      // planes [C,R2] -> [P,C]
Var sample_planes_adj(std::shared_ptr<const SpMat> w, Var u, int r2);  // u [P,C] -> [C,R2]

/// Copies a value into a fresh constant leaf (cuts the gradient path).
Var detach(Var a);

/// Maps a 2D var as a row-major matrix view of its flat storage.
Eigen::Map<const RMat> as_matrix(const Node& n);

}  // namespace headlab::ad
