#include <doctest.h>

#include <complex>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "primadnn/annotations.hpp"
#include "primadnn/corpus.hpp"
#include "primadnn/folds.hpp"
#include "primadnn/synth.hpp"
#include "test_util.hpp"

using namespace primadnn;
using TL = TechniqueLabel;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// Magnitude of a Hann-windowed DFT evaluated at exactly `hz`.
double tone_level(const std::vector<double>& s, std::size_t start, std::size_t n, double hz) {
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    acc += w * s[start + i] * std::polar(1.0, -2.0 * std::numbers::pi * hz * static_cast<double>(i) / kSampleRate);
  }
  return std::abs(acc);
}

double semitones(double hz, double ref) { return 12.0 * std::log2(hz / ref); }

}  // namespace

TEST_CASE("label set") {
  CHECK(kNumClasses == 9);
  const char* names[] = {"bend", "breathy", "drop", "falsetto", "hiccup", "rasp", "scooping", "vibrato", "vocal_fry"};
  for (int i = 0; i < 9; ++i) {
    CHECK(label_name(label_from_index(i)) == names[i]);
    CHECK(parse_label(names[i]) == label_from_index(i));
  }
  CHECK_FALSE(parse_label("yodel").has_value());
}

TEST_CASE("segment track examples") {
  const auto audio = testutil::make_clip(std::vector<double>(25 * kSampleRate, 0.1));
  const auto segs = segment_track(audio, {{9.5, 10.5, TL::kVibrato}, {21.0, 22.0, TL::kRasp}});
  REQUIRE(segs.size() == 3);
  CHECK(segs[0].clip.samples.size() == 10u * kSampleRate);
  CHECK(segs[1].clip.samples.size() == 10u * kSampleRate);
  CHECK(segs[2].clip.samples.size() == 5u * kSampleRate);
  CHECK(segs[2].start_seconds == 20.0);
  REQUIRE(segs[0].events.size() == 1);
  CHECK(segs[0].events[0].onset == doctest::Approx(9.5));
  CHECK(segs[0].events[0].offset == doctest::Approx(10.0));
  REQUIRE(segs[1].events.size() == 1);
  CHECK(segs[1].events[0].onset == doctest::Approx(0.0));
  CHECK(segs[1].events[0].offset == doctest::Approx(0.5));
  REQUIRE(segs[2].events.size() == 1);
  CHECK(segs[2].events[0].onset == doctest::Approx(1.0));

  const auto empty = segment_track(audio, {});
  CHECK(empty.size() == 3);
  for (const auto& s : empty) CHECK(s.events.empty());

  const auto past = segment_track(audio, {{24.0, 30.0, TL::kDrop}});
  CHECK(past[2].events[0].offset == doctest::Approx(5.0));
}

TEST_CASE("segmentation preserves total event duration") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 37.0);
  const auto audio = testutil::make_clip(std::vector<double>(38 * kSampleRate, 0.0));
  for (int trial = 0; trial < 50; ++trial) {
    EventList ev;
    double total = 0.0;
    for (int i = 0; i < 6; ++i) {
      const double on = u(rng), off = std::min(38.0, on + 0.1 + u(rng) / 10);
      ev.push_back({on, off, label_from_index(i)});
      total += off - on;
    }
    double after = 0.0;
    for (const auto& s : segment_track(audio, ev))
      for (const auto& e : s.events) after += e.offset - e.onset;
    CHECK(after == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("annotation parsing") {
  const EventList one = parse_annotations("0.5,1.2,vibrato");
  REQUIRE(one.size() == 1);
  CHECK(one[0] == Event{0.5, 1.2, TL::kVibrato});
  CHECK(parse_annotations("onset,offset,label\n0,1,bend\n").size() == 1);
  CHECK(parse_annotations("").empty());
  for (const char* bad : {"1.2,0.5,vibrato", "0.5,0.5,drop", "0.1,0.2,yodel", "0.1,x,bend", "0.1,0.2"}) {
    try {
      parse_annotations(bad);
      FAIL("accepted " << bad);
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
  }
  try {
    parse_annotations("0,1,bend\n2,1,bend");
    FAIL("accepted");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("annotation files round trip exactly") {
  testutil::TempDir dir("ann");
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    EventList ev;
    const int n = static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) {
      const double on = u(rng);
      ev.push_back({on, on + 1e-3 + u(rng) / 7.0, label_from_index(static_cast<int>(rng() % 9))});
    }
    save_annotations(dir / "a.csv", ev);
    CHECK(load_annotations(dir / "a.csv") == ev);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK_THROWS_AS(load_annotations(dir / "nope.csv"), InputError);
}

TEST_CASE("synth spec validation and json") {
  SynthSpec s;
  CHECK_NOTHROW(s.validate());
  s.vibrato_rate_min_hz = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  SynthSpec t;
  t.fry_pulse_rate_hz = 55.0;
  const nlohmann::json j = t;
  CHECK(j.get<SynthSpec>().fry_pulse_rate_hz == 55.0);
}

TEST_CASE("synthesized technique is reproducible") {
  for (int i = 0; i < 9; ++i) {
    std::mt19937_64 a(10 + i), b(10 + i);
    const auto x = synth_technique(label_from_index(i), SynthSpec{}, a);
    const auto y = synth_technique(label_from_index(i), SynthSpec{}, b);
    CHECK(x.audio.samples == y.audio.samples);
    CHECK(x.event == y.event);
    CHECK(x.event.label == label_from_index(i));
    CHECK(x.event.onset >= 0.0);
    CHECK(x.event.offset <= x.audio.duration_seconds() + 1e-9);
    for (double v : x.audio.samples) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("vibrato f0 oscillates at the generated rate") {
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const auto v = synth_technique(TL::kVibrato, SynthSpec{}, rng);
    CHECK(v.motif_rate_hz >= 5.0);
    CHECK(v.motif_rate_hz <= 7.0);
    const PitchContour c = estimate_pitch_fallback(v.audio);
    std::vector<double> st;
    for (const auto& e : c.entries)
      if (e.time >= v.event.onset && e.time < v.event.offset && e.frequency > 0.0) st.push_back(semitones(e.frequency, v.note_hz));
    REQUIRE(st.size() > 40);
    double mean = 0.0;
    for (double x : st) mean += x;
    mean /= static_cast<double>(st.size());
    double best_hz = 0.0, best = -1.0;
    for (double hz = 1.0; hz <= 15.0; hz += 0.02) {
      std::complex<double> acc = 0.0;
      for (std::size_t i = 0; i < st.size(); ++i) acc += (st[i] - mean) * std::polar(1.0, -2.0 * std::numbers::pi * hz * 0.01 * static_cast<double>(i));
      if (std::abs(acc) > best) best = std::abs(acc), best_hz = hz;
    }
    INFO("seed " << seed << " rate " << v.motif_rate_hz << " measured " << best_hz);
    CHECK(std::abs(best_hz - v.motif_rate_hz) <= 0.2 * v.motif_rate_hz);
  }
}

TEST_CASE("vibrato modulation appears only inside the event") {
  int inside_wins = 0;
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(300 + seed);
    const auto v = synth_technique(TL::kVibrato, SynthSpec{}, rng);
    const PitchContour c = estimate_pitch_fallback(v.audio);
    double in_dev = 0.0, out_dev = 0.0;
    int n_in = 0, n_out = 0;
    for (const auto& e : c.entries) {
      if (e.frequency <= 0.0) continue;
      const double d = std::abs(semitones(e.frequency, v.note_hz));
      // Skip frames whose analysis window straddles an event boundary.
      if (e.time >= v.event.onset + 0.03 && e.time < v.event.offset - 0.03) in_dev += d, ++n_in;
      else if (e.time < v.event.onset - 0.03 || e.time >= v.event.offset + 0.03) out_dev += d, ++n_out;
    }
    REQUIRE(n_in > 0);
    if (n_out == 0) continue;
    in_dev /= n_in;
    out_dev /= n_out;
    CHECK(out_dev < 0.2);
    inside_wins += in_dev > 0.4 && in_dev > 3 * out_dev;
  }
  CHECK(inside_wins >= 9);
}

TEST_CASE("rasp carries a subharmonic about 6 dB down") {
  for (int seed = 0; seed < 8; ++seed) {
    std::mt19937_64 rng(500 + seed);
    const auto r = synth_technique(TL::kRasp, SynthSpec{}, rng);
    const std::size_t n = 8192;
    const auto mid = static_cast<std::size_t>(0.5 * (r.event.onset + r.event.offset) * kSampleRate);
    REQUIRE(mid >= n / 2);
    const double f0 = tone_level(r.audio.samples, mid - n / 2, n, r.note_hz);
    const double sub = tone_level(r.audio.samples, mid - n / 2, n, r.note_hz / 2);
    const double db = 20.0 * std::log10(sub / f0);
    INFO("seed " << seed << " level " << db);
    CHECK(std::abs(db - (-6.0)) <= 3.0);
  }
}

TEST_CASE("synthesized clip structure") {
  const SynthSpec spec;
  const SingerProfile singer = make_singer(3, 7);
  const auto a = synth_clip(spec, singer, 42), b = synth_clip(spec, singer, 42);
  CHECK(a.audio.samples == b.audio.samples);
  CHECK(a.events == b.events);
  CHECK(a.audio.samples.size() == 10u * kSampleRate);
  CHECK(a.events.size() >= 3);
  CHECK(a.events.size() <= 8);
  std::set<TL> labels;
  for (const auto& e : a.events) {
    labels.insert(e.label);
    CHECK(e.onset < e.offset);
    CHECK(e.offset <= 10.0 + 1e-9);
  }
  CHECK(labels.size() == a.events.size());
  CHECK(a.pitch.size() == 1000);
  CHECK(synth_clip(spec, singer, 43).audio.samples != a.audio.samples);
}

TEST_CASE("200-clip corpus: balance, fold coverage and reproducibility") {
  testutil::TempDir dir("corpus");
  const CorpusManifest m = synth_corpus(SynthSpec{}, 200, 14, 2024, dir.path());
  REQUIRE(m.clips.size() == 200);
  CHECK(m.singers().size() == 14);
  std::map<TL, int> counts;
  std::map<std::string, std::set<TL>> by_singer;
  for (const auto& c : m.clips) {
    CHECK(std::filesystem::exists(dir / c.wav));
    CHECK(std::filesystem::exists(dir / c.annotation_csv));
    CHECK(std::filesystem::exists(dir / c.pitch_csv));
    for (const auto& e : load_annotations(dir / c.annotation_csv)) {
      ++counts[e.label];
      by_singer[c.singer_id].insert(e.label);
    }
  }
  for (int i = 0; i < 9; ++i) {
    INFO(label_name(label_from_index(i)));
    CHECK(counts[label_from_index(i)] >= 50);
  }
  const FoldPlan plan = make_fold_plan(m.singers(), 7, 2024);
  for (int f = 0; f < 7; ++f) {
    std::set<TL> seen;
    for (const auto& s : plan.split(f).train) seen.insert(by_singer[s].begin(), by_singer[s].end());
    CHECK(seen.size() == 9);
  }

  const CorpusManifest loaded = load_manifest(dir / "manifest.json");
  CHECK(manifest_to_json(loaded) == manifest_to_json(m));

  testutil::TempDir d1("c1"), d2("c2");
  const CorpusManifest a = synth_corpus(SynthSpec{}, 6, 3, 9, d1.path(), 1);
  const CorpusManifest b = synth_corpus(SynthSpec{}, 6, 3, 9, d2.path(), 2);
  CHECK(manifest_to_json(a) == manifest_to_json(b));
  for (const auto& c : a.clips) {
    CHECK(slurp(d1 / c.wav) == slurp(d2 / c.wav));
    CHECK(slurp(d1 / c.annotation_csv) == slurp(d2 / c.annotation_csv));
    CHECK(slurp(d1 / c.pitch_csv) == slurp(d2 / c.pitch_csv));
  }
}

TEST_CASE("dataset loading, caching and bit-identical feature files") {
  testutil::TempDir dir("ds");
  const CorpusManifest m = synth_corpus(SynthSpec{}, 3, 3, 5, dir / "corpus");
  DatasetOptions o;
  o.cache_dir = dir / "cache1";
  const Dataset a = load_dataset(load_manifest(dir / "corpus" / "manifest.json"), o);
  REQUIRE(a.clips.size() == 3);
  for (const auto& c : a.clips) {
    CHECK(c.features.channels == 4);
    CHECK(c.features.n_mels == 160);
    CHECK(c.features.n_frames == 1000);
    CHECK(c.features.has_pitchgram());
  }
  CHECK(a.singers().size() == 3);
  o.cache_dir = dir / "cache2";
  o.threads = 2;
  const Dataset b = load_dataset(load_manifest(dir / "corpus" / "manifest.json"), o);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "cache1")) {
    ++files;
    CHECK(slurp(e.path()) == slurp(dir / "cache2" / e.path().filename()));
  }
  CHECK(files == 3);
  const Dataset cached = load_dataset(load_manifest(dir / "corpus" / "manifest.json"), o);
  for (std::size_t i = 0; i < 3; ++i) CHECK(cached.clips[i].features.data == a.clips[i].features.data);
}
