#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "omnifuse/error.hpp"
#include "omnifuse/file_util.hpp"
#include "omnifuse/sensor_model.hpp"
#include "oracles.hpp"

using namespace omnifuse;

namespace {

double wrap(double a) { return std::remainder(a, 2.0 * kPi); }

ArrayGeometry pair_geometry(double lambda) {
  return ArrayGeometry({{0.0, 0.0}, {lambda / 2.0, 0.0}}, lambda, SensorKind::mmwave_radar);
}

}  // namespace

TEST_CASE("geometry invariants") {
  CHECK_THROWS_AS(ArrayGeometry({{0, 0}}, 0.1, SensorKind::mmwave_radar), GeometryError);
  CHECK_THROWS_AS(ArrayGeometry({{0, 0}, {1, 0}}, 0.0, SensorKind::mmwave_radar), GeometryError);
  CHECK_THROWS_AS(ArrayGeometry({{0, 0}, {1, 0}}, -1.0, SensorKind::mmwave_radar), GeometryError);
  CHECK_THROWS_AS(ArrayGeometry({{0, 0}, {0, 0}}, 0.1, SensorKind::mmwave_radar), GeometryError);
  CHECK_THROWS_AS(ArrayGeometry({{0, 0}, {NAN, 0}}, 0.1, SensorKind::mmwave_radar), GeometryError);
  CHECK_NOTHROW(ArrayGeometry({{0, 0}, {1, 0}}, 0.1, SensorKind::microphone_array));
}

TEST_CASE("steering_phase examples") {
  const ArrayGeometry g({{0.05, 0.0}, {0.0, 0.05}, {0.0, 0.0}}, 0.1, SensorKind::mmwave_radar);
  CHECK(steering_phase(g, 0, 30.0, 0.0) == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(steering_phase(g, 1, 0.0, 30.0) == doctest::Approx(kPi / 2).epsilon(1e-12));
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(steering_phase(g, k, 0.0, 0.0) == 0.0);
  CHECK_THROWS_AS(steering_phase(g, 3, 0.0, 0.0), InputError);
}

TEST_CASE("steering_phase is linear in element coordinates") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(-0.2, 0.2), ang(-89.0, 89.0);
  for (int i = 0; i < 200; ++i) {
    const Point2 p{pos(rng), pos(rng)};
    const double lambda = 0.01 + std::abs(pos(rng));
    const double az = deg_to_rad(ang(rng)), el = deg_to_rad(ang(rng));
    const double single = steering_phase(p, lambda, az, el);
    const double doubled = steering_phase(Point2{2 * p.x, 2 * p.y}, lambda, az, el);
    CHECK(doubled == doctest::Approx(2 * single).epsilon(1e-12));
    CHECK(single == doctest::Approx(oracle::phase({p.x, p.y}, lambda, rad_to_deg(az), rad_to_deg(el))).epsilon(1e-9));
  }
}

TEST_CASE("circular_array") {
  const auto g = circular_array(4, 1.0, 0.5);
  const std::vector<Point2> expected{{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(g.elements()[k].x == doctest::Approx(expected[k].x).epsilon(1e-12));
    CHECK(std::abs(g.elements()[k].y - expected[k].y) < 1e-12);
  }
  const auto six = circular_array(6, 0.05, 0.0857);
  CHECK(six.size() == 6);
  for (const auto& p : six.elements()) CHECK(std::hypot(p.x, p.y) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK_THROWS_AS(circular_array(1, 1.0, 0.5), InputError);
  CHECK_THROWS_AS(circular_array(4, 0.0, 0.5), InputError);
  CHECK_THROWS_AS(circular_array(4, -1.0, 0.5), InputError);
}

TEST_CASE("simulate_snapshot examples") {
  const auto g = circular_array(6, 0.05, 0.0857);
  const PointSource boresight{0.0, 0.0, 1.0, 0.0};
  const auto snap = simulate_snapshot(g, std::span(&boresight, 1), 0.0, 1);
  for (const auto& s : snap.samples) {
    CHECK(s.real() == 1.0);
    CHECK(s.imag() == 0.0);
  }

  const ArrayGeometry with_origin({{0.0, 0.0}, {0.03, 0.01}}, 0.1, SensorKind::mmwave_radar);
  const PointSource off{35.0, -20.0, 2.0, 0.7};
  const auto s2 = simulate_snapshot(with_origin, std::span(&off, 1), 0.0, 1);
  CHECK(std::arg(s2.samples[0]) == doctest::Approx(0.7).epsilon(1e-12));

  const auto pair = pair_geometry(0.1);
  const PointSource endfire{90.0, 0.0, 1.0, 0.0};
  const auto s3 = simulate_snapshot(pair, std::span(&endfire, 1), 0.0, 1);
  CHECK(std::abs(wrap(std::arg(s3.samples[1]) - std::arg(s3.samples[0]))) == doctest::Approx(kPi).epsilon(1e-9));
}

TEST_CASE("simulate_snapshot errors") {
  const auto g = circular_array(4, 0.05, 0.1);
  const PointSource bad{NAN, 0.0, 1.0, 0.0};
  CHECK_THROWS_AS(simulate_snapshot(g, std::span(&bad, 1), 0.0, 1), InputError);
  const PointSource neg{0.0, 0.0, -1.0, 0.0};
  CHECK_THROWS_AS(simulate_snapshot(g, std::span(&neg, 1), 0.0, 1), InputError);
  CHECK_THROWS_AS(simulate_snapshot(g, {}, -1.0, 1), InputError);
  const auto noise_only = simulate_snapshot(g, {}, 0.0, 1);
  for (const auto& s : noise_only.samples) CHECK(s == Complex{0.0, 0.0});
}

TEST_CASE("simulate_snapshot properties") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(-80.0, 80.0), amp(0.1, 3.0), ph(-3.0, 3.0);
  const auto g = circular_array(8, 0.04, 0.07);
  for (int i = 0; i < 100; ++i) {
    PointSource src{ang(rng), ang(rng), amp(rng), ph(rng)};
    const auto a = simulate_snapshot(g, std::span(&src, 1), 0.0, 3);
    // Phase equals steering phase plus offset.
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double expected = steering_phase(g, k, src.azimuth_deg, src.elevation_deg) + src.phase_offset_rad;
      CHECK(std::abs(wrap(std::arg(a.samples[k]) - expected)) < 1e-9);
    }
    // Linear in amplitude.
    PointSource twice = src;
    twice.amplitude *= 2.0;
    const auto b = simulate_snapshot(g, std::span(&twice, 1), 0.0, 3);
    for (std::size_t k = 0; k < g.size(); ++k) {
      CHECK(std::abs(b.samples[k]) == doctest::Approx(2.0 * std::abs(a.samples[k])).epsilon(1e-12));
    }
  }
}

TEST_CASE("simulated noise is seeded and has the requested power") {
  const auto g = circular_array(6, 0.05, 0.0857);
  const PointSource src{10.0, 5.0, 1.0, 0.0};
  const auto a = simulate_snapshot(g, std::span(&src, 1), 0.1, 42);
  const auto b = simulate_snapshot(g, std::span(&src, 1), 0.1, 42);
  const auto c = simulate_snapshot(g, std::span(&src, 1), 0.1, 43);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);

  const ArrayGeometry big(std::vector<Point2>([] {
                            std::vector<Point2> v;
                            for (int i = 0; i < 20000; ++i) v.push_back({i * 1e-3, 0.0});
                            return v;
                          }()),
                          0.1, SensorKind::mmwave_radar);
  const auto noise = simulate_snapshot(big, {}, 0.5, 9);
  double power = 0.0;
  for (const auto& s : noise.samples) power += std::norm(s);
  power /= static_cast<double>(noise.samples.size());
  CHECK(power == doctest::Approx(0.25).epsilon(0.03));
  CHECK(noise_std_for_snr(1.0, 20.0) == doctest::Approx(0.1));
}

TEST_CASE("geometry and snapshot files") {
  const auto dir = std::filesystem::temp_directory_path() / "omnifuse_sensor_model_test";
  std::filesystem::create_directories(dir);
  const auto g = circular_array(6, 0.05, 0.0857);
  save_geometry(g, dir / "g.json");
  const auto back = load_geometry(dir / "g.json");
  CHECK(back.elements() == g.elements());
  CHECK(back.wavelength() == g.wavelength());
  CHECK(back.kind() == SensorKind::microphone_array);

  CHECK_THROWS_AS(geometry_from_json_text(R"({"sensor_kind":"mmwave_radar","wavelength_m":0.1,"elements":[[0,0]]})"),
                  GeometryError);
  CHECK_THROWS_AS(geometry_from_json_text("{\n\"sensor_kind\": ,\n}"), ParseError);

  const PointSource src{12.0, -4.0, 1.5, 0.2};
  auto snap = simulate_snapshot(g, std::span(&src, 1), 0.05, 5);
  snap.timestamp = -123456789012345;
  const auto bytes = encode_snapshot(snap);
  REQUIRE(bytes.size() == 8 + 4 + 6 * 16 + 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "OMNISNAP");
  CHECK(bytes[8] == 6);
  CHECK(bytes[9] == 0);
  const auto decoded = decode_snapshot(bytes);
  CHECK(decoded.samples == snap.samples);
  CHECK(decoded.timestamp == snap.timestamp);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_snapshot(truncated), ParseError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_snapshot(bad_magic), ParseError);

  ArraySnapshot short_snap{"x", {Complex{1, 0}}, 0};
  CHECK_THROWS_AS(short_snap.validate_against(g), InputError);
  std::filesystem::remove_all(dir);
}
