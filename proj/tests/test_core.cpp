#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "headlab/core/hash.hpp"
#include "headlab/core/image.hpp"
#include "headlab/core/png_io.hpp"
#include "headlab/core/rng.hpp"
#include "headlab/core/tsv.hpp"

#include <cstdio>
#include <filesystem>

using namespace headlab;

TEST_CASE("rng determinism and uniformity") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.u64() == b.u64());

  Rng r(7);
  int bins[8] = {0};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    bins[static_cast<int>(u * 8)]++;
  }
  int mn = bins[0], mx = bins[0];
  for (int v : bins) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  CHECK(static_cast<double>(mx) / mn < 1.1);
}

TEST_CASE("rng normal moments") {
  Rng r(3);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("rng stream derivation differs") {
  Rng a = Rng::from(0, 1);
  Rng b = Rng::from(0, 2);
  CHECK(a.u64() != b.u64());
}

TEST_CASE("fnv hash stable") {
  CHECK(fnv1a64(std::string("")) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64(std::string("a")) != fnv1a64(std::string("b")));
}

TEST_CASE("g9 quantization round trips through text") {
  Rng r(5);
  for (int i = 0; i < 1000; ++i) {
    double v = quantize_g9(r.normal() * std::pow(10.0, r.uniform(-6, 6)));
    double w = std::strtod(format_g9(v).c_str(), nullptr);
    CHECK(w == v);
  }
}

TEST_CASE("png round trip rgb and gray") {
  auto dir = std::filesystem::temp_directory_path() / "headlab_png_test";
  std::filesystem::create_directories(dir);
  Rng r(11);
  Image img(17, 23);
  for (int i = 0; i < 17; ++i)
    for (int j = 0; j < 23; ++j) {
      img.r(i, j) = r.uniform();
      img.g(i, j) = r.uniform();
      img.b(i, j) = r.uniform();
    }
  Image q = quantize8(img);
  std::string p = (dir / "t.png").string();
  write_png_rgb(p, img, "hash=deadbeef");
  Image back = read_png_rgb(p);
  CHECK(image_mad(q, back) == 0.0);
  CHECK(read_png_comment(p).value() == "hash=deadbeef");

  Mat m = Mat::Random(9, 9).cwiseAbs();
  std::string pg = (dir / "g.png").string();
  write_png_gray(pg, m);
  Mat mb = read_png_gray(pg);
  CHECK((quantize8(m) - mb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("png read rejects corruption") {
  auto dir = std::filesystem::temp_directory_path() / "headlab_png_test";
  std::filesystem::create_directories(dir);
  std::string p = (dir / "c.png").string();
  write_png_gray(p, Mat::Constant(8, 8, 0.5));
  std::string bytes = read_text(p);
  bytes[bytes.size() / 2] ^= 0x5a;
  write_text(p, bytes);
  CHECK_THROWS(read_png_gray(p));
}

TEST_CASE("bilinear resize preserves constants") {
  Mat m = Mat::Constant(8, 8, 0.37);
  Mat up = resize_bilinear(m, 16, 16);
  CHECK((up.array() - 0.37).abs().maxCoeff() < 1e-12);
}
