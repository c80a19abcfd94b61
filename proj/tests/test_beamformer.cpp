#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>

#include "omnifuse/audio.hpp"
#include "omnifuse/beamformer.hpp"
#include "omnifuse/error.hpp"
#include "omnifuse/image_io.hpp"
#include "omnifuse/file_util.hpp"
#include "oracles.hpp"

using namespace omnifuse;

namespace {

std::vector<oracle::Element> to_oracle(const ArrayGeometry& g) {
  std::vector<oracle::Element> out;
  for (const auto& p : g.elements()) out.push_back({p.x, p.y});
  return out;
}

ArraySnapshot unit_snapshot(std::size_t k) { return ArraySnapshot{"u", std::vector<Complex>(k, Complex{1, 0}), 0}; }

AudioBlock tone(std::vector<std::pair<double, double>> freq_amp, int channels, double rate, std::size_t n) {
  AudioBlock a;
  a.sample_rate = rate;
  a.channels.assign(static_cast<std::size_t>(channels), std::vector<double>(n));
  for (int c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      for (auto [f, amp] : freq_amp) v += amp * std::sin(2.0 * kPi * f * i / rate + 0.3 * c);
      a.channels[c][i] = v;
    }
  }
  return a;
}

}  // namespace

TEST_CASE("angle grid validation") {
  AngleGrid g;
  CHECK_NOTHROW(g.validate());
  CHECK(g.az_steps == 91);
  CHECK(g.el_steps == 61);
  CHECK(g.az_step() == doctest::Approx(1.0));
  CHECK(g.azimuth(45) == 0.0);
  CHECK(g.elevation(30) == 0.0);
  CHECK(g.elevation(0) == 30.0);
  auto bad = g;
  bad.az_steps = 1;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = g;
  bad.el_min_deg = 40.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = g;
  bad.az_max_deg = 90.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("coherent sum of six unit phasors at boresight") {
  const auto g = circular_array(6, 0.05, 0.0857);
  const auto hm = beamform(unit_snapshot(6), g, AngleGrid{});
  CHECK(hm.at(30, 45) == doctest::Approx(20.0 * std::log10(6.0)).epsilon(1e-12));
  CHECK(hm.at(30, 45) == doctest::Approx(15.563).epsilon(1e-4));
}

TEST_CASE("all-zero snapshot sits on the floor") {
  const auto g = circular_array(6, 0.05, 0.0857);
  ArraySnapshot zero{"z", std::vector<Complex>(6), 0};
  const auto hm = beamform(zero, g, AngleGrid{}, -120.0);
  for (double v : hm.values_db) CHECK(v == -120.0);
  const SteeringTable table(g, AngleGrid{});
  for (double v : table.beamform(zero, -80.0).values_db) CHECK(v == -80.0);
}

TEST_CASE("beamform errors") {
  const auto g = circular_array(6, 0.05, 0.0857);
  CHECK_THROWS_AS(beamform(unit_snapshot(5), g, AngleGrid{}), InputError);
  CHECK_THROWS_AS(beamform(unit_snapshot(6), g, AngleGrid{}, NAN), InputError);
  const SteeringTable table(g, AngleGrid{});
  CHECK_THROWS_AS(table.beamform(unit_snapshot(5)), InputError);
}

TEST_CASE("single source peak lands within one grid step (exhaustive oracle)") {
  const auto g = circular_array(6, 0.05, 0.0857);
  const PointSource src{20.0, 10.0, 1.0, 0.0};
  const auto snap = simulate_snapshot(g, std::span(&src, 1), 0.0, 1);
  const AngleGrid grid{};
  const auto hm = beamform(snap, g, grid);
  const auto peak = hm.argmax();
  const auto truth = oracle::exhaustive_argmax(snap.samples, to_oracle(g), g.wavelength(), -45, 45, 91, -30, 30, 61);
  CHECK(peak.col == truth.az_idx);
  CHECK(peak.row == truth.el_idx);
  CHECK(std::abs(grid.azimuth(peak.col) - 20.0) <= 1.0);
  CHECK(std::abs(grid.elevation(peak.row) - 10.0) <= 1.0);
}

TEST_CASE("beamform matches the direct oracle on every cell") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  const auto g = circular_array(8, 0.06, 0.09);
  ArraySnapshot snap{"r", {}, 0};
  for (int k = 0; k < 8; ++k) snap.samples.emplace_back(n01(rng), n01(rng));
  AngleGrid grid{-40, 40, 17, -20, 20, 9};
  const auto hm = beamform(snap, g, grid, -200.0);
  for (int r = 0; r < grid.el_steps; ++r) {
    for (int c = 0; c < grid.az_steps; ++c) {
      const double expect =
          oracle::das_db(snap.samples, to_oracle(g), g.wavelength(), grid.azimuth(c), grid.elevation(r), -200.0);
      CHECK(hm.at(r, c) == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("cached and direct beamforming agree") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  const auto g = circular_array(6, 0.05, 0.0857);
  const SteeringTable table(g, AngleGrid{});
  for (int t = 0; t < 10; ++t) {
    ArraySnapshot snap{"r", {}, 0};
    for (int k = 0; k < 6; ++k) snap.samples.emplace_back(n01(rng), n01(rng));
    const auto a = beamform(snap, g, AngleGrid{});
    const auto b = table.beamform(snap);
    for (std::size_t i = 0; i < a.values_db.size(); ++i) CHECK(std::abs(a.values_db[i] - b.values_db[i]) < 1e-9);
  }
}

TEST_CASE("on-grid source peak equals 20 log10(K amp)") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> az_idx(0, 90), el_idx(0, 60);
  std::uniform_real_distribution<double> amp(0.2, 5.0);
  const AngleGrid grid{};
  const auto g = circular_array(6, 0.04, 0.0857);
  const SteeringTable table(g, grid);
  for (int t = 0; t < 50; ++t) {
    const int c = az_idx(rng), r = el_idx(rng);
    const PointSource src{grid.azimuth(c), grid.elevation(r), amp(rng), 0.4};
    const auto hm = table.beamform(simulate_snapshot(g, std::span(&src, 1), 0.0, 1));
    CHECK(std::abs(hm.at(r, c) - 20.0 * std::log10(6.0 * src.amplitude)) < 1e-6);
    CHECK(hm.argmax() == GridCell{r, c});
  }
}

TEST_CASE("global phase invariance and amplitude scaling") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> gamma(-kPi, kPi), scale(0.01, 100.0);
  const auto g = circular_array(6, 0.05, 0.0857);
  const SteeringTable table(g, AngleGrid{});
  for (int t = 0; t < 20; ++t) {
    ArraySnapshot snap{"r", {}, 0};
    for (int k = 0; k < 6; ++k) snap.samples.emplace_back(n01(rng), n01(rng));
    const auto base = table.beamform(snap, -300.0);

    ArraySnapshot rotated = snap;
    const Complex rot = std::polar(1.0, gamma(rng));
    for (auto& s : rotated.samples) s *= rot;
    const auto hr = table.beamform(rotated, -300.0);
    for (std::size_t i = 0; i < base.values_db.size(); ++i) CHECK(std::abs(hr.values_db[i] - base.values_db[i]) < 1e-9);

    ArraySnapshot scaled = snap;
    const double c = scale(rng);
    for (auto& s : scaled.samples) s *= c;
    const auto hs = table.beamform(scaled, -300.0);
    for (std::size_t i = 0; i < base.values_db.size(); ++i) {
      CHECK(std::abs(hs.values_db[i] - base.values_db[i] - 20.0 * std::log10(c)) < 1e-9);
    }
    CHECK(hs.argmax() == base.argmax());
  }
}

TEST_CASE("normalize") {
  Heatmap hm{AngleGrid{-10, 10, 3, -10, 10, 2}, -120.0, {15.56, -14.44, 0.0, 5.0, 15.56, -50.0}};
  const auto n = normalize(hm, 30.0);
  CHECK(n.width == 3);
  CHECK(n.height == 2);
  CHECK(n.values[0] == doctest::Approx(1.0));
  CHECK(n.values[1] == doctest::Approx(0.0));
  CHECK(n.values[5] == 0.0);
  CHECK(n.values[2] == doctest::Approx((0.0 - (15.56 - 30.0)) / 30.0));

  Heatmap uniform{hm.grid, -120.0, std::vector<double>(6, -3.0)};
  for (double v : normalize(uniform, 10.0).values) CHECK(v == 1.0);
  Heatmap floor{hm.grid, -120.0, std::vector<double>(6, -120.0)};
  for (double v : normalize(floor, 10.0).values) CHECK(v == 0.0);
  CHECK_THROWS_AS(normalize(hm, 0.0), InputError);
  CHECK_THROWS_AS(normalize(hm, -3.0), InputError);
}

TEST_CASE("normalize is bounded and offset invariant") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> val(-60.0, 20.0), off(-30.0, 30.0), dr(1.0, 60.0);
  for (int t = 0; t < 100; ++t) {
    Heatmap hm{AngleGrid{-10, 10, 5, -10, 10, 4}, -100.0, std::vector<double>(20)};
    for (auto& v : hm.values_db) v = val(rng);
    const double range = dr(rng);
    const auto a = normalize(hm, range);
    Heatmap shifted = hm;
    const double o = off(rng);
    for (auto& v : shifted.values_db) v += o;
    shifted.floor_db += o;
    const auto b = normalize(shifted, range);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      CHECK(a.values[i] >= 0.0);
      CHECK(a.values[i] <= 1.0);
      CHECK(std::abs(a.values[i] - b.values[i]) < 1e-9);
    }
  }
}

TEST_CASE("two symmetric sources normalize to matching peaks") {
  const auto g = circular_array(6, 0.05, 0.0857);
  const PointSource sources[] = {{20.0, 0.0, 1.0, 0.0}, {-20.0, 0.0, 1.0, 0.0}};
  const AngleGrid grid{};
  const auto hm = beamform(simulate_snapshot(g, sources, 0.0, 1), g, grid);
  const auto n = normalize(hm, 30.0);
  // Oracle: direct evaluation at the two source cells.
  const int row = 30;
  const int left = 25, right = 65;
  REQUIRE(grid.azimuth(left) == -20.0);
  REQUIRE(grid.azimuth(right) == 20.0);
  const auto snap = simulate_snapshot(g, sources, 0.0, 1);
  const double oracle_left = oracle::das_db(snap.samples, to_oracle(g), g.wavelength(), -20.0, 0.0, -120.0);
  const double oracle_right = oracle::das_db(snap.samples, to_oracle(g), g.wavelength(), 20.0, 0.0, -120.0);
  CHECK(hm.at(row, left) == doctest::Approx(oracle_left).epsilon(1e-9));
  CHECK(hm.at(row, right) == doctest::Approx(oracle_right).epsilon(1e-9));
  CHECK(std::abs(n.at(left, row) - n.at(right, row)) <= 0.05);
}

TEST_CASE("cached steering table is much faster than direct evaluation") {
  const auto g = circular_array(6, 0.05, 0.0857);
  const SteeringTable table(g, AngleGrid{});
  const PointSource src{5.0, 5.0, 1.0, 0.0};
  const auto snap = simulate_snapshot(g, std::span(&src, 1), 0.1, 1);
  using clock = std::chrono::steady_clock;
  double sink = 0.0;
  auto t0 = clock::now();
  for (int i = 0; i < 20; ++i) sink += beamform(snap, g, AngleGrid{}).values_db[0];
  auto t1 = clock::now();
  for (int i = 0; i < 20; ++i) sink += table.beamform(snap).values_db[0];
  auto t2 = clock::now();
  const double direct = std::chrono::duration<double>(t1 - t0).count();
  const double cached = std::chrono::duration<double>(t2 - t1).count();
  MESSAGE("direct/cached speedup " << direct / cached);
  CHECK(direct / cached >= 5.0);
  CHECK(sink != 0.0);
}

TEST_CASE("heatmap export") {
  const auto dir = std::filesystem::temp_directory_path() / "omnifuse_bf_test";
  std::filesystem::create_directories(dir);
  const auto g = circular_array(6, 0.05, 0.0857);
  const PointSource src{10.0, -5.0, 1.0, 0.0};
  const auto hm = beamform(simulate_snapshot(g, std::span(&src, 1), 0.0, 1), g, AngleGrid{});
  save_heatmap_pfm(hm, dir / "h.pfm");
  const auto back = load_heatmap_pfm(dir / "h.pfm", hm.grid, hm.floor_db);
  for (std::size_t i = 0; i < hm.values_db.size(); ++i) {
    CHECK(back.values_db[i] == static_cast<double>(static_cast<float>(hm.values_db[i])));
  }
  save_heatmap_png16(hm, 30.0, dir / "h.png");
  const auto png = decode_png_gray16(read_file_bytes(dir / "h.png"));
  CHECK(png.width == 91);
  CHECK(png.height == 61);
  const auto peak = hm.argmax();
  CHECK(png.values[static_cast<std::size_t>(peak.row) * 91 + peak.col] == 65535);
  std::filesystem::remove_all(dir);
}

TEST_CASE("dominant bin of a pure tone") {
  const double rate = 16000.0;
  const auto a = tone({{1000.0, 1.0}}, 6, rate, 1024);
  const auto bin = find_dominant_bin(a, 343.0);
  CHECK(std::abs(bin.frequency_hz - 1000.0) <= bin.bin_width_hz);
  const double lambda = dominant_bin_wavelength(a, 343.0);
  CHECK(std::abs(lambda - 0.343) <= 343.0 / (1000.0 - bin.bin_width_hz) - 0.343);
}

TEST_CASE("dominant bin prefers the stronger tone (naive DFT oracle)") {
  const double rate = 16000.0;
  const auto a = tone({{1000.0, 1.0}, {3000.0, 0.1}}, 4, rate, 2048);
  // Oracle: compare summed magnitudes with a direct DFT.
  const std::size_t k1 = 128, k3 = 384;  // 1 kHz and 3 kHz at 7.8125 Hz per bin
  double m1 = 0.0, m3 = 0.0;
  for (const auto& ch : a.channels) {
    m1 += oracle::dft_magnitude(ch, k1);
    m3 += oracle::dft_magnitude(ch, k3);
  }
  REQUIRE(m1 > m3);
  const auto bin = find_dominant_bin(a);
  CHECK(bin.bin == k1);
  CHECK(bin.frequency_hz == doctest::Approx(1000.0));
}

TEST_CASE("dominant bin errors") {
  AudioBlock silence;
  silence.sample_rate = 16000.0;
  silence.channels.assign(2, std::vector<double>(256, 0.0));
  CHECK_THROWS_WITH_AS(find_dominant_bin(silence), "no dominant frequency", InputError);
  AudioBlock shortblock = silence;
  shortblock.channels.assign(2, std::vector<double>(63, 1.0));
  CHECK_THROWS_AS(find_dominant_bin(shortblock), InputError);
  AudioBlock norate = silence;
  norate.sample_rate = 0.0;
  CHECK_THROWS_AS(find_dominant_bin(norate), InputError);
}

TEST_CASE("audio snapshot carries per-channel DFT phases") {
  const auto a = tone({{2000.0, 1.0}}, 3, 16000.0, 512);
  const auto snap = audio_to_snapshot(a, 64);
  REQUIRE(snap.samples.size() == 3);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto expect = oracle::dft(a.channels[c], 64);
    CHECK(std::abs(snap.samples[c] - expect) < 1e-9 * std::abs(expect));
  }
}

TEST_CASE("WAV round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "omnifuse_wav_test";
  std::filesystem::create_directories(dir);
  auto a = tone({{500.0, 0.5}}, 6, 16000.0, 300);
  save_wav(a, dir / "a.wav");
  const auto b = load_wav(dir / "a.wav");
  CHECK(b.sample_rate == 16000.0);
  REQUIRE(b.channels.size() == 6);
  for (std::size_t c = 0; c < 6; ++c) {
    for (std::size_t i = 0; i < 300; ++i) CHECK(b.channels[c][i] == static_cast<double>(static_cast<float>(a.channels[c][i])));
  }
  std::filesystem::remove_all(dir);
}
