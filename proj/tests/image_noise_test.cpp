#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "core/image.hpp"
#include "core/noise.hpp"
#include "core/rng.hpp"
#include "doctest.h"
#include "support/synth.hpp"

using namespace mlpd;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() / "mlpd_image_test";
  fs::create_directories(dir);
  return dir;
}

// Independent reflect-101 index fold.
std::size_t fold(long long x, long long n) {
  while (x < 0 || x >= n) {
    if (x < 0) x = -x;
    if (x >= n) x = 2 * (n - 1) - x;
  }
  return static_cast<std::size_t>(x);
}

}  // namespace

TEST_CASE("pixel normalization maps the 8-bit range symmetrically") {
  CHECK(normalize_pixel(127.5) == 0.0);
  CHECK(normalize_pixel(0.0) == doctest::Approx(-0.5));
  CHECK(normalize_pixel(255.0) == doctest::Approx(0.5));
  CHECK(denormalize_pixel(normalize_pixel(73.0)) == doctest::Approx(73.0));
}

TEST_CASE("psnr matches the closed form") {
  ImageBuffer a(10, 6), b(10, 6);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    a.data[i] = 100.0;
    b.data[i] = 125.0;  // constant error of 25
  }
  double expect = 10.0 * std::log10(255.0 * 255.0 / (25.0 * 25.0));
  CHECK(psnr(a, b) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::isinf(psnr(a, a)));
  CHECK(psnr(a, a) > 0);

  ImageBuffer c(6, 10);
  CHECK_THROWS_AS(psnr(a, c), invalid_argument);
  CHECK_THROWS_AS(psnr(ImageBuffer(), ImageBuffer()), invalid_argument);
}

TEST_CASE("pgm roundtrip is exact for 8-bit content") {
  fs::path dir = temp_dir();
  ImageBuffer img = test::synth_image(33, 17, 5);
  fs::path path = dir / "roundtrip.pgm";
  save_image(img, path);
  ImageBuffer back = load_image(path);
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == img.data[i]);
}

TEST_CASE("png roundtrip is exact for 8-bit content") {
  fs::path dir = temp_dir();
  ImageBuffer img = test::synth_image(24, 31, 9);
  fs::path path = dir / "roundtrip.png";
  save_image(img, path);
  ImageBuffer back = load_image(path);
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == img.data[i]);
}

TEST_CASE("saving clips and rounds to the 8-bit range") {
  fs::path dir = temp_dir();
  ImageBuffer img(4, 1);
  img.data = {-20.0, 300.0, 99.4, 99.6};
  fs::path path = dir / "clip.pgm";
  save_image(img, path);
  ImageBuffer back = load_image(path);
  CHECK(back.data[0] == 0.0);
  CHECK(back.data[1] == 255.0);
  CHECK(back.data[2] == 99.0);
  CHECK(back.data[3] == 100.0);
}

TEST_CASE("pgm parser handles comments and rejects wide maxval") {
  fs::path dir = temp_dir();
  fs::path ok = dir / "comment.pgm";
  {
    std::ofstream f(ok, std::ios::binary);
    f << "P5\n# a comment\n2 # trailing\n2\n255\n";
    f.write("\x01\x02\x03\x04", 4);
  }
  ImageBuffer img = load_image(ok);
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.at(1, 1) == 4.0);

  fs::path wide = dir / "wide.pgm";
  {
    std::ofstream f(wide, std::ios::binary);
    f << "P5\n2 2\n65535\n";
    f.write("\0\1\0\2\0\3\0\4", 8);
  }
  CHECK_THROWS_AS(load_image(wide), io_error);

  fs::path truncated = dir / "short.pgm";
  {
    std::ofstream f(truncated, std::ios::binary);
    f << "P5\n4 4\n255\n";
    f.write("\x01\x02", 2);
  }
  CHECK_THROWS_AS(load_image(truncated), io_error);
}

TEST_CASE("ppm converts through bt601 luma") {
  fs::path dir = temp_dir();
  fs::path path = dir / "color.ppm";
  {
    std::ofstream f(path, std::ios::binary);
    f << "P6\n2 1\n255\n";
    unsigned char px[6] = {255, 0, 0, 10, 200, 30};
    f.write(reinterpret_cast<char*>(px), 6);
  }
  ImageBuffer img = load_image(path);
  REQUIRE(img.width == 2);
  CHECK(img.at(0, 0) == doctest::Approx(0.299 * 255.0));
  CHECK(img.at(0, 1) == doctest::Approx(0.299 * 10 + 0.587 * 200 + 0.114 * 30));
}

TEST_CASE("load failures carry io errors") {
  fs::path dir = temp_dir();
  CHECK_THROWS_AS(load_image(dir / "missing.pgm"), io_error);
  fs::path junk = dir / "junk.bin";
  {
    std::ofstream f(junk, std::ios::binary);
    f << "not an image at all";
  }
  CHECK_THROWS_AS(load_image(junk), io_error);
  ImageBuffer img(2, 2);
  CHECK_THROWS_AS(save_image(img, dir / "weird.bmp"), invalid_argument);
  CHECK_THROWS_AS(save_image(ImageBuffer(), dir / "x.pgm"), invalid_argument);
}

TEST_CASE("mirror_pad folds without repeating the edge") {
  ImageBuffer img(3, 3);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) img.at(r, c) = 10.0 * r + c;
  ImageBuffer padded = mirror_pad(img, 2);
  REQUIRE(padded.width == 7);
  REQUIRE(padded.height == 7);
  for (long long r = -2; r < 5; ++r)
    for (long long c = -2; c < 5; ++c)
      CHECK(padded.at(r + 2, c + 2) == img.at(fold(r, 3), fold(c, 3)));

  ImageBuffer one(1, 1);
  one.at(0, 0) = 42.0;
  ImageBuffer padded_one = mirror_pad(one, 3);
  REQUIRE(padded_one.width == 7);
  for (double v : padded_one.data) CHECK(v == 42.0);

  ImageBuffer same = mirror_pad(img, 0);
  CHECK(same.width == 3);
  CHECK(same.at(2, 2) == img.at(2, 2));
  CHECK_THROWS_AS(mirror_pad(ImageBuffer(), 1), invalid_argument);
}

TEST_CASE("montage layout, scaling and degenerate patches") {
  // Two 2x2 patches, 2 columns, 1px gutters: 2*2 + 3*1 wide, 1*2 + 2*1 tall.
  std::vector<std::vector<double>> patches = {{0, 1, 2, 3}, {5, 5, 5, 5}};
  ImageBuffer m = render_montage(patches, 2, 2, 1);
  REQUIRE(m.width == 7);
  REQUIRE(m.height == 4);
  // Border and gutters are mid-gray.
  CHECK(m.at(0, 0) == 128.0);
  CHECK(m.at(1, 3) == 128.0);
  // First patch stretches 0..3 to 0..255.
  CHECK(m.at(1, 1) == 0.0);
  CHECK(m.at(1, 2) == doctest::Approx(255.0 / 3.0));
  CHECK(m.at(2, 2) == 255.0);
  // Flat patch renders mid-gray.
  CHECK(m.at(1, 4) == 128.0);
  CHECK(m.at(2, 5) == 128.0);

  // Three patches in 2 columns leave a trailing mid-gray cell.
  std::vector<std::vector<double>> three = {{0, 1, 2, 3}, {1, 0, 0, 0}, {0, 2, 0, 0}};
  ImageBuffer m3 = render_montage(three, 2, 2, 1);
  REQUIRE(m3.height == 7);
  CHECK(m3.at(4, 4) == 128.0);
  CHECK(m3.at(5, 5) == 128.0);

  CHECK_THROWS_AS(render_montage({}, 2, 2, 1), invalid_argument);
  CHECK_THROWS_AS(render_montage(patches, 3, 2, 1), invalid_argument);
  CHECK_THROWS_AS(render_montage(patches, 2, 0, 1), invalid_argument);
}

TEST_CASE("awg noise adds unclipped gaussian offsets") {
  ImageBuffer img(200, 200);
  for (auto& v : img.data) v = 5.0;  // near-black so negatives prove no clip
  NoiseSpec spec;
  spec.kind = NoiseKind::awg;
  spec.sigma = 25.0;
  Rng rng(77);
  ImageBuffer noisy = apply_noise(img, spec, rng);

  double sum = 0, sum_sq = 0;
  bool below_zero = false;
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    double d = noisy.data[i] - img.data[i];
    sum += d;
    sum_sq += d * d;
    below_zero = below_zero || noisy.data[i] < 0.0;
  }
  double n = static_cast<double>(img.data.size());
  double mean = sum / n;
  double stddev = std::sqrt(sum_sq / n - mean * mean);
  CHECK(std::abs(mean) < 0.5);  // se = 25/200 = 0.125
  CHECK(stddev > 24.5);
  CHECK(stddev < 25.5);
  CHECK(below_zero);  // clipping would erase the negative tail

  Rng rng2(77);
  ImageBuffer again = apply_noise(img, spec, rng2);
  CHECK(again.data == noisy.data);

  spec.sigma = 0.0;
  Rng rng3(1);
  CHECK(apply_noise(img, spec, rng3).data == img.data);
}

TEST_CASE("salt and pepper corrupts the expected fraction") {
  ImageBuffer img(300, 300);
  for (auto& v : img.data) v = 90.0;
  NoiseSpec spec;
  spec.kind = NoiseKind::salt_pepper;
  spec.p = 0.1;
  Rng rng(13);
  ImageBuffer noisy = apply_noise(img, spec, rng);

  std::size_t zeros = 0, whites = 0, untouched = 0;
  for (double v : noisy.data) {
    if (v == 0.0)
      ++zeros;
    else if (v == 255.0)
      ++whites;
    else {
      CHECK(v == 90.0);
      ++untouched;
    }
  }
  double n = static_cast<double>(img.data.size());
  double frac = static_cast<double>(zeros + whites) / n;
  CHECK(frac > 0.09);
  CHECK(frac < 0.11);
  // Salt and pepper are an even coin among corrupted pixels.
  double salt_share = static_cast<double>(whites) / (zeros + whites);
  CHECK(salt_share > 0.45);
  CHECK(salt_share < 0.55);
  CHECK(untouched > 0);

  spec.p = 1.5;
  CHECK_THROWS_AS(apply_noise(img, spec, rng), invalid_argument);
}

TEST_CASE("stripe noise offsets whole rows") {
  ImageBuffer img = test::synth_image(64, 120, 3);
  NoiseSpec spec;
  spec.kind = NoiseKind::stripe;
  spec.sigma_s = 25.0;
  Rng rng(8);
  ImageBuffer noisy = apply_noise(img, spec, rng);

  double sum = 0, sum_sq = 0;
  for (std::size_t r = 0; r < img.height; ++r) {
    double offset = noisy.at(r, 0) - img.at(r, 0);
    for (std::size_t c = 1; c < img.width; ++c)
      CHECK(noisy.at(r, c) - img.at(r, c) == doctest::Approx(offset).epsilon(1e-12));
    sum += offset;
    sum_sq += offset * offset;
  }
  double n = static_cast<double>(img.height);
  double stddev = std::sqrt(sum_sq / n - (sum / n) * (sum / n));
  CHECK(stddev > 15.0);  // loose: only 120 rows
  CHECK(stddev < 35.0);
}

TEST_CASE("jpeg degradation is deterministic and quality-monotone") {
  ImageBuffer img = test::synth_image(50, 41, 77);  // exercises partial blocks
  NoiseSpec spec;
  spec.kind = NoiseKind::jpeg_block;
  spec.quality = 50;

  Rng rng(123), rng_ref(123);
  ImageBuffer a = apply_noise(img, spec, rng);
  ImageBuffer b = apply_noise(img, spec, rng);
  CHECK(a.data == b.data);
  // The rng was never consumed.
  CHECK(rng.next_u64() == rng_ref.next_u64());

  double q50 = psnr(img, a);
  spec.quality = 10;
  ImageBuffer rough = apply_noise(img, spec, rng);
  spec.quality = 100;
  ImageBuffer fine = apply_noise(img, spec, rng);
  CHECK(psnr(img, rough) < q50);
  CHECK(psnr(img, fine) > q50);
  CHECK(psnr(img, fine) >= 50.0);

  // The level-shifted DC leaves a uniform mid-gray block untouched.
  ImageBuffer flat(16, 16);
  for (auto& v : flat.data) v = 128.0;
  spec.quality = 50;
  ImageBuffer flat_out = apply_noise(flat, spec, rng);
  CHECK(flat_out.data == flat.data);

  spec.quality = 0;
  CHECK_THROWS_AS(apply_noise(img, spec, rng), invalid_argument);
  spec.quality = 101;
  CHECK_THROWS_AS(apply_noise(img, spec, rng), invalid_argument);
}

TEST_CASE("noise kind names parse both ways") {
  CHECK(noise_kind_from_string("awg") == NoiseKind::awg);
  CHECK(noise_kind_from_string("salt_pepper") == NoiseKind::salt_pepper);
  CHECK(noise_kind_from_string("salt-pepper") == NoiseKind::salt_pepper);
  CHECK(noise_kind_from_string("stripe") == NoiseKind::stripe);
  CHECK(noise_kind_from_string("jpeg_block") == NoiseKind::jpeg_block);
  CHECK(noise_kind_from_string("jpeg") == NoiseKind::jpeg_block);
  CHECK_THROWS_AS(noise_kind_from_string("speckle"), invalid_argument);
  CHECK(std::string(noise_kind_name(NoiseKind::stripe)) == "stripe");
  for (const char* name : {"awg", "salt_pepper", "stripe", "jpeg_block"})
    CHECK(std::string(noise_kind_name(noise_kind_from_string(name))) == name);
}

TEST_CASE("synthetic corpus generator is deterministic and 8-bit valued") {
  ImageBuffer a = test::synth_image(40, 30, 7);
  ImageBuffer b = test::synth_image(40, 30, 7);
  ImageBuffer c = test::synth_image(40, 30, 8);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
  double lo = 255, hi = 0;
  for (double v : a.data) {
    CHECK(v == std::floor(v));
    CHECK(v >= 0.0);
    CHECK(v <= 255.0);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi - lo > 30.0);  // has real contrast
}
