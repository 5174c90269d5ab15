#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "headlab/ad/tape.hpp"
#include "headlab/core/rng.hpp"

#include <functional>
#include <vector>

using namespace headlab;
using namespace headlab::ad;

namespace {

struct FdProblem {
  std::vector<Arr> inputs;
  std::vector<Shape> shapes;
  std::function<Var(Tape&, const std::vector<Var>&)> build;
};

double eval_scalar(const FdProblem& p, const std::vector<Arr>& xs) {
  Tape t;
  std::vector<Var> leaves;
  // needs_grad stays on: some probed functions contain gradient nodes.
  for (size_t i = 0; i < xs.size(); ++i) leaves.push_back(t.leaf(xs[i], p.shapes[i], true));
  return p.build(t, leaves).scalar();
}

/// Central finite differences against tape gradients on randomly probed
/// coordinates. Returns the max relative error seen.
double fd_max_rel_err(const FdProblem& p, int probes, uint64_t seed, double h = 1e-4) {
  Tape t;
  std::vector<Var> leaves;
  for (size_t i = 0; i < p.inputs.size(); ++i)
    leaves.push_back(t.leaf(p.inputs[i], p.shapes[i], true));
  Var loss = p.build(t, leaves);
  std::vector<Var> grads = t.gradients(loss, leaves);

  Rng rng(seed);
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    size_t which = rng.below(p.inputs.size());
    long elem = static_cast<long>(rng.below(static_cast<uint64_t>(p.inputs[which].size())));
    double analytic = grads[which].valid() ? grads[which].value()[elem] : 0.0;

    std::vector<Arr> xs = p.inputs;
    xs[which][elem] += h;
    double fp = eval_scalar(p, xs);
    xs[which][elem] -= 2 * h;
    double fm = eval_scalar(p, xs);
    double fd = (fp - fm) / (2 * h);
    double err = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
    worst = std::max(worst, err);
  }
  return worst;
}

Arr random_arr(long n, Rng& rng, double scl = 1.0) {
  Arr a(n);
  for (long i = 0; i < n; ++i) a[i] = rng.normal() * scl;
  return a;
}

}  // namespace

TEST_CASE("elementwise and reduction gradients") {
  Rng rng(1);
  FdProblem p;
  p.shapes = {Shape(3, 4), Shape(3, 4)};
  p.inputs = {random_arr(12, rng), random_arr(12, rng)};
  p.build = [](Tape& t, const std::vector<Var>& v) {
    Var x = v[0], y = v[1];
    Var a = mul(softplus(x), sigmoid(y));
    Var b = add(vtanh(x), vexp(scale(y, 0.3)));
    Var c = sub(a, mul(b, b));
    Var d = add_scalar(square(c), 0.7);
    Var e = mul(rsqrt(add_scalar(square(d), 1.0)), recip(add_scalar(square(y), 2.0)));
    return sum_all(add(e, lrelu(x, 0.1)));
  };
  CHECK(fd_max_rel_err(p, 60, 10) < 1e-6);
}

TEST_CASE("row/col broadcasts and sums") {
  Rng rng(2);
  FdProblem p;
  p.shapes = {Shape(5, 3), Shape(1, 3), Shape(5, 1)};
  p.inputs = {random_arr(15, rng), random_arr(3, rng), random_arr(5, rng)};
  p.build = [](Tape& t, const std::vector<Var>& v) {
    Var x = add(v[0], broadcast_rows(v[1], 5));
    Var y = mul(x, broadcast_cols(v[2], 3));
    Var rows = sum_rows(square(y));
    Var cols = sum_cols(vtanh(y));
    return add(sum_all(rows), sum_all(mul(cols, cols))).tape->node(0).needs_grad
               ? add(sum_all(rows), sum_all(mul(cols, cols)))
               : add(sum_all(rows), sum_all(mul(cols, cols)));
  };
  CHECK(fd_max_rel_err(p, 50, 11) < 1e-6);
}

TEST_CASE("matmul gradients all transpose flags") {
  Rng rng(3);
  for (int ta = 0; ta < 2; ++ta)
    for (int tb = 0; tb < 2; ++tb) {
      FdProblem p;
      Shape sa = ta ? Shape(4, 3) : Shape(3, 4);
      Shape sb = tb ? Shape(2, 4) : Shape(4, 2);
      p.shapes = {sa, sb};
      p.inputs = {random_arr(12, rng), random_arr(8, rng)};
      p.build = [ta, tb](Tape& t, const std::vector<Var>& v) {
        return sum_all(square(matmul(v[0], v[1], ta, tb)));
      };
      CHECK(fd_max_rel_err(p, 24, 12 + ta * 2 + tb) < 1e-6);
    }
}

TEST_CASE("transpose reshape concat slice gradients") {
  Rng rng(4);
  FdProblem p;
  p.shapes = {Shape(3, 4), Shape(2, 4)};
  p.inputs = {random_arr(12, rng), random_arr(8, rng)};
  p.build = [](Tape& t, const std::vector<Var>& v) {
    Var c = concat_rows(v[0], v[1]);          // [5,4]
    Var s = slice_rows(c, 1, 3);              // [3,4]
    Var tr = transpose(s);                    // [4,3]
    Var r = reshape(tr, Shape(2, 6));
    return sum_all(mul(r, r));
  };
  CHECK(fd_max_rel_err(p, 40, 13) < 1e-6);
}

TEST_CASE("cumsum exclusive forward values and gradient") {
  Tape t;
  Arr x(6);
  x << 1, 2, 3, 10, 20, 30;
  Var v = t.leaf(x, Shape(2, 3), true);
  Var c = cumsum_excl_rows(v);
  CHECK(c.value()[0] == 0.0);
  CHECK(c.value()[1] == 1.0);
  CHECK(c.value()[2] == 3.0);
  CHECK(c.value()[3] == 0.0);
  CHECK(c.value()[5] == 30.0);

  Var cr = cumsum_excl_rows(v, true);
  CHECK(cr.value()[0] == 5.0);
  CHECK(cr.value()[2] == 0.0);

  Rng rng(5);
  FdProblem p;
  p.shapes = {Shape(3, 5)};
  p.inputs = {random_arr(15, rng)};
  p.build = [](Tape& tt, const std::vector<Var>& v) {
    return sum_all(square(cumsum_excl_rows(v[0])));
  };
  CHECK(fd_max_rel_err(p, 30, 14) < 1e-6);
}

TEST_CASE("conv2d family gradients") {
  Rng rng(6);
  for (int stride : {1, 2}) {
    FdProblem p;
    p.shapes = {Shape(2, 3, 6, 6), Shape(4, 3, 3, 3), Shape(1, 4)};
    p.inputs = {random_arr(2 * 3 * 36, rng), random_arr(4 * 27, rng, 0.5),
                random_arr(4, rng)};
    p.build = [stride](Tape& t, const std::vector<Var>& v) {
      Var y = conv2d(v[0], v[1], stride, 1);
      const Shape& s = y.shape();
      y = add(y, broadcast_chan(v[2], s.d[0], s.d[2], s.d[3]));
      return sum_all(square(lrelu(y)));
    };
    CHECK(fd_max_rel_err(p, 50, 15 + stride) < 1e-5);
  }
}

TEST_CASE("channel scale and dot gradients") {
  Rng rng(7);
  FdProblem p;
  p.shapes = {Shape(2, 3, 4, 4), Shape(2, 3)};
  p.inputs = {random_arr(96, rng), random_arr(6, rng)};
  p.build = [](Tape& t, const std::vector<Var>& v) {
    Var y = channel_scale(v[0], v[1]);
    Var d = channel_dot(y, v[0]);
    return sum_all(square(d));
  };
  CHECK(fd_max_rel_err(p, 40, 17) < 1e-6);
}

TEST_CASE("bilinear up2 gradient and constant preservation") {
  Tape t;
  Var c = t.leaf(Arr::Constant(2 * 1 * 9, 0.42), Shape(2, 1, 3, 3), false);
  Var u = bilinear_up2(c);
  CHECK((u.value() - 0.42).abs().maxCoeff() < 1e-15);

  Rng rng(8);
  FdProblem p;
  p.shapes = {Shape(1, 2, 4, 4)};
  p.inputs = {random_arr(32, rng)};
  p.build = [](Tape& tt, const std::vector<Var>& v) {
    return sum_all(square(bilinear_up2(v[0])));
  };
  CHECK(fd_max_rel_err(p, 30, 18) < 1e-6);
}

TEST_CASE("sample planes gradients") {
  Rng rng(9);
  auto sp = std::make_shared<SpMat>(5, 16);
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 4; ++k)
      trips.emplace_back(i, static_cast<int>(rng.below(16)), rng.uniform());
  sp->setFromTriplets(trips.begin(), trips.end());

  FdProblem p;
  p.shapes = {Shape(3, 16)};
  p.inputs = {random_arr(48, rng)};
  p.build = [sp](Tape& t, const std::vector<Var>& v) {
    return sum_all(square(sample_planes(sp, v[0])));
  };
  CHECK(fd_max_rel_err(p, 30, 19) < 1e-6);
}

TEST_CASE("concat and slice channels gradients") {
  Rng rng(10);
  FdProblem p;
  p.shapes = {Shape(2, 2, 3, 3), Shape(2, 3, 3, 3)};
  p.inputs = {random_arr(36, rng), random_arr(54, rng)};
  p.build = [](Tape& t, const std::vector<Var>& v) {
    Var c = concat_chan(v[0], v[1]);       // [2,5,3,3]
    Var s = slice_chan(c, 1, 3);           // [2,3,3,3]
    return sum_all(square(s));
  };
  CHECK(fd_max_rel_err(p, 40, 20) < 1e-6);
}

TEST_CASE("clamp01 passes interior gradient and blocks exterior") {
  Tape t;
  Arr x(4);
  x << -0.5, 0.3, 0.8, 1.7;
  Var v = t.leaf(x, Shape(1, 4), true);
  Var y = clamp01(v);
  CHECK(y.value()[0] == 0.0);
  CHECK(y.value()[1] == doctest::Approx(0.3));
  CHECK(y.value()[3] == 1.0);
  Var loss = sum_all(mul(y, y));
  auto g = t.gradients(loss, {v});
  CHECK(g[0].value()[0] == 0.0);
  CHECK(g[0].value()[1] == doctest::Approx(0.6));
  CHECK(g[0].value()[3] == 0.0);
}

TEST_CASE("gradient of gradient (double backprop)") {
  // f(x) = || d/dx sum(sigmoid(W x)) ||^2; checked against finite differences
  // of f itself, which exercises taped VJP nodes.
  Rng rng(11);
  Arr w = random_arr(12, rng);
  FdProblem p;
  p.shapes = {Shape(4, 1)};
  p.inputs = {random_arr(4, rng)};
  p.build = [w](Tape& t, const std::vector<Var>& v) {
    Var W = t.leaf(w, Shape(3, 4), false);
    Var inner = sum_all(sigmoid(matmul(W, v[0])));
    auto g = t.gradients(inner, {v[0]});
    return sum_all(square(g[0]));
  };
  CHECK(fd_max_rel_err(p, 20, 21) < 1e-5);
}

TEST_CASE("double backprop through conv (r1-style penalty)") {
  Rng rng(12);
  Arr w = random_arr(2 * 1 * 9, rng);
  Arr w2 = random_arr(2 * 4, rng);
  FdProblem p;
  p.shapes = {Shape(1, 1, 4, 4)};
  p.inputs = {random_arr(16, rng)};
  // Penalty depends on conv weights through the gradient graph; differentiate
  // the penalty w.r.t. the image input x, then check d penalty / d x by FD.
  p.build = [w, w2](Tape& t, const std::vector<Var>& v) {
    Var W = t.leaf(w, Shape(2, 1, 3, 3), false);
    Var W2 = t.leaf(w2, Shape(8, 1), false);
    Var h = lrelu(conv2d(v[0], W, 2, 1));               // [1,2,2,2]
    Var logit = matmul(reshape(h, Shape(1, 8)), W2);    // [1,1]
    auto gx = t.gradients(sum_all(logit), {v[0]});
    return sum_all(square(gx[0]));
  };
  CHECK(fd_max_rel_err(p, 16, 22) < 1e-5);
}

TEST_CASE("unreachable gradient comes back invalid (exact zero)") {
  Tape t;
  Var a = t.leaf(Arr::Constant(4, 1.0), Shape(2, 2), true);
  Var b = t.leaf(Arr::Constant(4, 2.0), Shape(2, 2), true);
  Var loss = sum_all(square(a));
  auto g = t.gradients(loss, {a, b});
  CHECK(g[0].valid());
  CHECK(!g[1].valid());
}

TEST_CASE("detach cuts the gradient path") {
  Tape t;
  Var a = t.leaf(Arr::Constant(4, 3.0), Shape(2, 2), true);
  Var d = detach(square(a));
  Var loss = sum_all(mul(d, a));
  auto g = t.gradients(loss, {a});
  CHECK(g[0].valid());
  // d treated as constant 9 -> gradient is 9, not 9 + 2*3*3.
  CHECK(g[0].value()[0] == doctest::Approx(9.0));
}

TEST_CASE("shape mismatch raises") {
  Tape t;
  Var a = t.leaf(Arr::Zero(4), Shape(2, 2), false);
  Var b = t.leaf(Arr::Zero(6), Shape(2, 3), false);
  CHECK_THROWS(add(a, b));
  CHECK_THROWS(matmul(a, b, false, true));
}
