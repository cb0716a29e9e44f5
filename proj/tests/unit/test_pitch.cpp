#include <doctest.h>

#include <fstream>

#include "primadnn/corpus.hpp"
#include "primadnn/pitch.hpp"
#include "test_util.hpp"

using namespace primadnn;

namespace {

MelFilterbank default_fb() {
  FrontendConfig cfg;
  return build_mel_filterbank(cfg, kSampleRate);
}

PitchContour constant_contour(double hz, double conf, double seconds) {
  PitchContour c;
  for (int i = 0; i * 0.01 < seconds; ++i) c.entries.push_back({i * 0.01, hz, conf});
  return c;
}

}  // namespace

TEST_CASE("pitch csv parsing") {
  const PitchContour c = parse_pitch_csv("0.00,440.0,0.95\n0.01,441.0,0.96");
  REQUIRE(c.size() == 2);
  CHECK(c.entries[1].time == 0.01);
  CHECK(c.entries[1].frequency == 441.0);
  CHECK(c.entries[1].confidence == 0.96);

  CHECK(parse_pitch_csv("").empty());
  CHECK(parse_pitch_csv("time,frequency,confidence\n0,100,1\n").size() == 1);

  try {
    parse_pitch_csv("0.00,440.0,0.95\n0.01,abc,0.9");
    FAIL("bad row accepted");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_pitch_csv("0.02,440,1\n0.01,440,1"), InputError);
  CHECK_THROWS_AS(parse_pitch_csv("0.01,440,1\n0.01,440,1"), InputError);
  CHECK_THROWS_AS(parse_pitch_csv("0.00,-5,1"), InputError);
  CHECK_THROWS_AS(parse_pitch_csv("0.00,440,1.5"), InputError);
}

TEST_CASE("pitch csv files round trip") {
  testutil::TempDir dir("pitch");
  const PitchContour c = constant_contour(123.456789, 0.75, 0.2);
  save_pitch_csv(dir / "c.csv", c);
  const PitchContour back = load_pitch_csv(dir / "c.csv");
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(back.entries[i].time == c.entries[i].time);
    CHECK(back.entries[i].frequency == c.entries[i].frequency);
    CHECK(back.entries[i].confidence == c.entries[i].confidence);
  }
  std::ofstream(dir / "empty.csv").flush();
  CHECK(load_pitch_csv(dir / "empty.csv").empty());
  CHECK_THROWS_AS(load_pitch_csv(dir / "missing.csv"), InputError);
}

TEST_CASE("fallback estimator tracks a 220 Hz sine") {
  const auto clip = testutil::sine(220.0, 2.0);
  const PitchContour c = estimate_pitch_fallback(clip);
  CHECK(static_cast<int>(c.size()) == clip.duration_frames());
  int voiced = 0, close = 0;
  for (const auto& e : c.entries) {
    if (e.frequency <= 0.0) continue;
    ++voiced;
    close += std::abs(e.frequency - 220.0) <= 0.03 * 220.0;
  }
  CHECK(voiced > static_cast<int>(c.size()) * 9 / 10);
  CHECK(close >= 0.95 * voiced);
}

TEST_CASE("fallback estimator on silence and noise") {
  const PitchContour s = estimate_pitch_fallback(testutil::make_clip(std::vector<double>(22050, 0.0)));
  REQUIRE(!s.empty());
  for (const auto& e : s.entries) {
    CHECK(e.frequency == 0.0);
    CHECK(e.confidence < kDefaultVoicingThreshold);
  }
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const PitchContour n = estimate_pitch_fallback(testutil::noise(1.0, seed));
    double mean = 0.0;
    for (const auto& e : n.entries) {
      mean += e.confidence;
      CHECK(e.confidence >= 0.0);
      CHECK(e.confidence <= 1.0);
      if (e.confidence < kDefaultVoicingThreshold) CHECK(e.frequency == 0.0);
    }
    CHECK(mean / static_cast<double>(n.size()) < kDefaultVoicingThreshold);
  }
}

TEST_CASE("pitchgram of an empty contour is all zero") {
  const MelFilterbank fb = default_fb();
  const Pitchgram g = contour_to_pitchgram({}, fb, 50);
  CHECK(g.n_mels == 160);
  CHECK(g.n_frames == 50);
  for (float v : g.data) CHECK(v == 0.0f);
  CHECK_THROWS(contour_to_pitchgram({}, fb, 0));
}

TEST_CASE("constant 440 Hz lights the nearest band in every column") {
  const MelFilterbank fb = default_fb();
  int best = 0;
  for (int m = 1; m < 160; ++m) {
    const double c = 700.0 * (std::pow(10.0, (2595.0 * std::log10(1.0 + 22050.0 / 700.0)) * (m + 1) / 161.0 / 2595.0) - 1.0);
    const double cb = 700.0 * (std::pow(10.0, (2595.0 * std::log10(1.0 + 22050.0 / 700.0)) * (best + 1) / 161.0 / 2595.0) - 1.0);
    if (std::abs(c - 440.0) < std::abs(cb - 440.0)) best = m;
  }
  const Pitchgram g = contour_to_pitchgram(constant_contour(440.0, 1.0, 1.0), fb, 100);
  for (int t = 0; t < 100; ++t) {
    CHECK(g.active_band(t) == best);
    float sum = 0.0f;
    for (int m = 0; m < 160; ++m) sum += g.at(m, t);
    CHECK(sum == 1.0f);
  }
  CHECK(best == 22);
}

TEST_CASE("low confidence gives an all-zero pitchgram") {
  const Pitchgram g = contour_to_pitchgram(constant_contour(440.0, 0.3, 1.0), default_fb(), 100, 0.5);
  for (float v : g.data) CHECK(v == 0.0f);
  const Pitchgram h = contour_to_pitchgram(constant_contour(440.0, 0.5, 1.0), default_fb(), 100, 0.5);
  for (int t = 0; t < 100; ++t) CHECK(h.active_band(t) >= 0);
}

TEST_CASE("pitchgram uses nearest-time sampling") {
  PitchContour c;
  c.entries = {{0.0, 200.0, 1.0}, {0.034, 800.0, 1.0}};
  const MelFilterbank fb = default_fb();
  const Pitchgram g = contour_to_pitchgram(c, fb, 6);
  CHECK(g.active_band(0) == nearest_band(fb, 200.0));
  CHECK(g.active_band(1) == nearest_band(fb, 200.0));
  CHECK(g.active_band(2) == nearest_band(fb, 800.0));
  CHECK(g.active_band(5) == nearest_band(fb, 800.0));
}

TEST_CASE("pitchgram properties on random contours") {
  const MelFilterbank fb = default_fb();
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    PitchContour c;
    double t = 0.0;
    for (int i = 0; i < 200; ++i) {
      t += 0.001 + 0.02 * u(rng);
      c.entries.push_back({t, u(rng) < 0.2 ? 0.0 : 30.0 + 3000.0 * u(rng), u(rng)});
    }
    const double thr = u(rng);
    const Pitchgram g = contour_to_pitchgram(c, fb, 150, thr);
    for (int f = 0; f < 150; ++f) {
      int ones = 0;
      for (int m = 0; m < 160; ++m) {
        const float v = g.at(m, f);
        CHECK((v == 0.0f || v == 1.0f));
        ones += v == 1.0f;
      }
      CHECK(ones <= 1);
      CHECK((ones == 1) == (g.active_band(f) >= 0));
    }
  }
}

TEST_CASE("rising pitch gives a non-decreasing active band") {
  const MelFilterbank fb = default_fb();
  PitchContour c;
  for (int i = 0; i < 300; ++i) c.entries.push_back({i * 0.01, 80.0 * std::pow(1.01, i), 0.9});
  const Pitchgram g = contour_to_pitchgram(c, fb, 300);
  int prev = -1;
  for (int t = 0; t < 300; ++t) {
    const int b = g.active_band(t);
    REQUIRE(b >= 0);
    CHECK(b >= prev);
    prev = b;
  }
  CHECK(prev > g.active_band(0));
}

TEST_CASE("pitchgram ignores waveform amplitude when the contour is given") {
  FrontendConfig cfg;
  const auto clip = testutil::sine(330.0, 1.0, 0.5);
  auto quiet = clip;
  for (auto& v : quiet.samples) v *= 0.01;
  const PitchContour c = constant_contour(330.0, 0.9, 1.0);
  const FeatureStack a = extract_clip_features(clip, c, cfg, 100);
  const FeatureStack b = extract_clip_features(quiet, c, cfg, 100);
  const int pa = a.channel_index(kPitchgramChannel), pb = b.channel_index(kPitchgramChannel);
  REQUIRE(pa == 3);
  CHECK(std::equal(a.channel(pa).begin(), a.channel(pa).end(), b.channel(pb).begin()));
}
