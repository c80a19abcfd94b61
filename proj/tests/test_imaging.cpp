#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "omnifuse/error.hpp"
#include "omnifuse/image_io.hpp"
#include "omnifuse/imaging.hpp"

using namespace omnifuse;

namespace {

RgbImage gradient(int w, int h) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto* p = img.at(x, y);
      p[0] = static_cast<std::uint8_t>(std::lround(40.0 + 170.0 * x / (w - 1)));
      p[1] = static_cast<std::uint8_t>(std::lround(30.0 + 190.0 * y / (h - 1)));
      p[2] = static_cast<std::uint8_t>(std::lround(60.0 + 60.0 * x / (w - 1) + 60.0 * y / (h - 1)));
    }
  }
  return img;
}

CalibrationTransform random_transform(std::mt19937_64& rng, int src_w, int src_h) {
  std::uniform_real_distribution<double> rot(-180.0, 180.0), scale(0.8, 1.5), shift(-15.0, 15.0);
  CalibrationTransform t;
  t.rotation_deg = rot(rng);
  t.scale_x = scale(rng);
  t.scale_y = scale(rng);
  t.translate_x = shift(rng);
  t.translate_y = shift(rng);
  t.target_width = 240;
  t.target_height = 180;
  t.crop = {0, 0, 240, 180};
  return t.with_source(src_w, src_h);
}

}  // namespace

TEST_CASE("colormaps") {
  for (auto name : {ColormapName::thermal_iron, ColormapName::spectral_jet, ColormapName::grayscale}) {
    const Colormap map(name);
    CHECK(map.table().size() == 256);
    CHECK(!(map[0] == map[255]));
    CHECK(colormap_from_string(to_string(name)) == name);
  }
  CHECK_THROWS_AS(colormap_from_string("viridis"), InputError);
  CHECK(Colormap::index_of(0.0) == 0);
  CHECK(Colormap::index_of(1.0) == 255);
  CHECK(Colormap::index_of(0.5) == 128);
}

TEST_CASE("colorize examples") {
  const Colormap iron(ColormapName::thermal_iron);
  const auto zeros = colorize(ScalarImage(4, 3, 0.0), iron);
  const auto ones = colorize(ScalarImage(4, 3, 1.0), iron);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(zeros.pixels[3 * i] == iron[0].r);
    CHECK(zeros.pixels[3 * i + 1] == iron[0].g);
    CHECK(ones.pixels[3 * i] == iron[255].r);
    CHECK(ones.pixels[3 * i + 2] == iron[255].b);
  }
  ScalarImage pair(2, 1);
  pair.values = {0.0, 1.0};
  const auto gray = colorize(pair, Colormap(ColormapName::grayscale));
  CHECK(gray.pixels == std::vector<std::uint8_t>{0, 0, 0, 255, 255, 255});

  ScalarImage bad(1, 1, 1.01);
  CHECK_THROWS_AS(colorize(bad, iron), InputError);
  bad.values[0] = -0.1;
  CHECK_THROWS_AS(colorize(bad, iron), InputError);
  bad.values[0] = NAN;
  CHECK_THROWS_AS(colorize(bad, iron), InputError);
}

TEST_CASE("colormap index is monotone") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    CHECK(Colormap::index_of(a) <= Colormap::index_of(b));
  }
}

TEST_CASE("normalize_thermal") {
  ThermalFrame f{3, 1, {10.0, 20.0, 40.0}, 0};
  const auto n = normalize_thermal(f, 10.0, 30.0);
  CHECK(n.values[0] == 0.0);
  CHECK(n.values[1] == 0.5);
  CHECK(n.values[2] == 1.0);
  ThermalFrame mid{2, 2, std::vector<double>(4, 25.0), 0};
  for (double v : normalize_thermal(mid, 20.0, 30.0).values) CHECK(v == 0.5);
  CHECK_THROWS_AS(normalize_thermal(f, 30.0, 30.0), InputError);
  CHECK_THROWS_AS(normalize_thermal(f, 31.0, 30.0), InputError);
  const auto b = frame_bounds(f);
  CHECK(b.lo == 10.0);
  CHECK(b.hi == 40.0);
  const auto flat = frame_bounds(mid);
  CHECK(flat.hi > flat.lo);
}

TEST_CASE("identity calibration is a pixel-exact no-op") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> byte(0, 255);
  RgbImage img(37, 23);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(byte(rng));
  const auto out = calibrate(img, CalibrationTransform::identity(37, 23));
  CHECK(out.image == img);
  CHECK(out.validity.count() == 37u * 23u);
}

TEST_CASE("90 degree rotation of a 2x2 pattern") {
  RgbImage img(2, 2);
  const std::uint8_t R[3] = {255, 0, 0}, G[3] = {0, 255, 0}, B[3] = {0, 0, 255}, W[3] = {255, 255, 255};
  std::copy(R, R + 3, img.at(0, 0));
  std::copy(G, G + 3, img.at(1, 0));
  std::copy(B, B + 3, img.at(0, 1));
  std::copy(W, W + 3, img.at(1, 1));
  auto t = CalibrationTransform::identity(2, 2);
  t.rotation_deg = 90.0;
  const auto out = calibrate(img, t);
  CHECK(std::equal(B, B + 3, out.image.at(0, 0)));
  CHECK(std::equal(R, R + 3, out.image.at(1, 0)));
  CHECK(std::equal(W, W + 3, out.image.at(0, 1)));
  CHECK(std::equal(G, G + 3, out.image.at(1, 1)));
  CHECK(out.validity.count() == 4);
}

TEST_CASE("crop and out-of-footprint pixels are black and invalid") {
  RgbImage img(10, 10, 200);
  CalibrationTransform t;
  t.target_width = 20;
  t.target_height = 20;
  t.crop = {2, 2, 14, 14};
  const auto out = calibrate(img, t);
  // Source footprint is the centred 10x10 block [5, 15).
  CHECK(out.validity.at(4, 10) == 0);
  CHECK(out.validity.at(5, 10) == 1);
  CHECK(out.validity.at(15, 10) == 0);
  CHECK(out.image.at(4, 10)[0] == 0);
  CHECK(out.image.at(10, 10)[0] == 200);
  t.crop = {2, 2, 8, 8};
  const auto cropped = calibrate(img, t);
  CHECK(cropped.validity.at(12, 12) == 0);
  CHECK(cropped.validity.at(9, 9) == 1);
}

TEST_CASE("calibration transform validation") {
  auto t = CalibrationTransform::identity(8, 8);
  t.crop.w = 0;
  CHECK_THROWS_AS(calibrate(RgbImage(8, 8), t), InputError);
  t = CalibrationTransform::identity(8, 8);
  t.scale_x = 0.0;
  CHECK_THROWS_AS(t.validate(), InputError);
  t = CalibrationTransform::identity(8, 8);
  t.crop = {4, 4, 8, 8};
  CHECK_THROWS_AS(t.validate(), InputError);
}

TEST_CASE("calibration never exceeds the source range") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> byte(20, 180);
  RgbImage img(31, 17);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(byte(rng));
  const auto max_src = *std::max_element(img.pixels.begin(), img.pixels.end());
  for (int i = 0; i < 20; ++i) {
    const auto t = random_transform(rng, 31, 17);
    const auto out = calibrate(img, t);
    for (std::size_t p = 0; p < out.validity.bits.size(); ++p) {
      for (int c = 0; c < 3; ++c) CHECK(out.image.pixels[3 * p + c] <= max_src);
    }
  }
}

TEST_CASE("invert examples") {
  const auto id = CalibrationTransform::identity(16, 9);
  const auto inv = invert(id);
  CHECK(inv.rotation_deg == 0.0);
  CHECK(inv.scale_x == 1.0);
  CHECK(inv.scale_y == 1.0);
  CHECK(inv.translate_x == 0.0);
  CHECK(inv.translate_y == 0.0);
  CHECK(inv.target_width == 16);
  CHECK(inv.target_height == 9);

  auto rot = CalibrationTransform::identity(16, 16);
  rot.rotation_deg = 30.0;
  rot.translate_x = 4.0;
  const auto rinv = invert(rot);
  CHECK(rinv.rotation_deg == -30.0);
  // Compensating translation: -R(-30) t.
  CHECK(rinv.translate_x == doctest::Approx(-4.0 * std::cos(deg_to_rad(30.0))));
  CHECK(rinv.translate_y == doctest::Approx(4.0 * std::sin(deg_to_rad(30.0))));

  CalibrationTransform no_source;
  no_source.target_width = no_source.target_height = 4;
  no_source.crop = {0, 0, 4, 4};
  CHECK_THROWS_AS(invert(no_source), InputError);
}

TEST_CASE("forward then inverse maps points to themselves") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto t = random_transform(rng, 91, 61);
    const auto inv = invert(t);
    std::uniform_real_distribution<double> px(0.0, 91.0), py(0.0, 61.0);
    for (int k = 0; k < 100; ++k) {
      const Point2 p{px(rng), py(rng)};
      const Point2 q = map_point(inv, map_point(t, p));
      CHECK(std::abs(q.x - p.x) < 1e-6);
      CHECK(std::abs(q.y - p.y) < 1e-6);
      const Point2 r = unmap_point(t, map_point(t, p));
      CHECK(std::abs(r.x - p.x) < 1e-6);
    }
    CHECK(invert(inv).scale_first == t.scale_first);
  }
}

TEST_CASE("image round trip through a transform and its inverse") {
  std::mt19937_64 rng(6);
  const auto src = gradient(160, 120);
  int worst = 0;
  for (int i = 0; i < 100; ++i) {
    const auto t = random_transform(rng, 160, 120);
    const auto there = calibrate(src, t);
    const auto back = calibrate(there.image, invert(t), &there.validity);
    std::size_t valid = 0;
    for (int y = 0; y < 120; ++y) {
      for (int x = 0; x < 160; ++x) {
        if (!back.validity.at(x, y)) continue;
        ++valid;
        for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(back.image.at(x, y)[c] - src.at(x, y)[c]));
      }
    }
    CHECK(valid > 0);
  }
  CHECK(worst <= 2);
}

TEST_CASE("calibration file round trip and errors") {
  const auto dir = std::filesystem::temp_directory_path() / "omnifuse_calib_test";
  std::filesystem::create_directories(dir);
  CalibrationTransform t;
  t.sensor_id = "mic0";
  t.rotation_deg = 1.5;
  t.scale_x = 7.0;
  t.scale_y = 7.5;
  t.translate_x = -3.0;
  t.translate_y = 2.0;
  t.target_width = 640;
  t.target_height = 480;
  t.crop = {10, 0, 620, 480};
  save_calibration(t, dir / "c.json");
  const auto back = load_calibration(dir / "c.json");
  CHECK(back.sensor_id == "mic0");
  CHECK(back.rotation_deg == 1.5);
  CHECK(back.scale_y == 7.5);
  CHECK(back.crop == t.crop);
  CHECK(back.source_width == 0);
  CHECK_THROWS_AS(calibration_from_json_text(R"({"scale":[1,1],"translate_px":[0,0],"crop":[0,0,0,5],"target":[5,5]})"),
                  InputError);
  CHECK_THROWS_AS(calibration_from_json_text("{\n\"scale\": [1,\n"), ParseError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("PNG and thermal file formats") {
  const auto dir = std::filesystem::temp_directory_path() / "omnifuse_io_test";
  std::filesystem::create_directories(dir);
  const auto img = gradient(33, 21);
  save_png(img, dir / "g.png");
  CHECK(load_png_rgb(dir / "g.png") == img);
  CHECK_THROWS_AS(decode_png_gray8(encode_png(img)), ParseError);
  CHECK_THROWS_AS(decode_png_rgb(std::vector<std::uint8_t>{1, 2, 3}), ParseError);

  ThermalFrame f{4, 2, {1.5, 2, 3, 4, 5, 6, 7, 1000.25}, 0};
  save_thermal_csv(f, dir / "t.csv");
  const auto csv = load_thermal_csv(dir / "t.csv");
  CHECK(csv.width == 4);
  CHECK(csv.height == 2);
  CHECK(csv.values == f.values);
  CHECK_THROWS_AS(parse_thermal_csv("1,2\n3\n"), ParseError);
  CHECK_THROWS_AS(parse_thermal_csv("1,x\n"), ParseError);

  ThermalFrame ints{3, 2, {0, 1, 255, 256, 40000, 65535}, 0};
  save_thermal_pgm(ints, dir / "t.pgm");
  const auto pgm = load_thermal(dir / "t.pgm");
  CHECK(pgm.values == ints.values);
  std::filesystem::remove_all(dir);
}
