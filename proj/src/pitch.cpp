#include "primadnn/pitch.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace primadnn {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(trim(f));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

void validate_contour(const PitchContour& contour) {
  for (std::size_t i = 0; i < contour.entries.size(); ++i) {
    const auto& e = contour.entries[i];
    if (i > 0 && !(e.time > contour.entries[i - 1].time)) {
      throw InputError("pitch contour times must be strictly increasing (entry " +
                       std::to_string(i) + ")");
    }
    if (!(e.frequency >= 0.0)) throw InputError("negative pitch frequency");
    if (!(e.confidence >= 0.0 && e.confidence <= 1.0)) {
      throw InputError("pitch confidence outside [0, 1]");
    }
  }
}

PitchContour parse_pitch_csv(const std::string& text, const std::string& source) {
  PitchContour contour;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    const auto fields = split_csv(row);
    double vals[3];
    if (line_no == 1 && !fields.empty() && !parse_double(fields[0], vals[0])) continue;  // header
    const auto where = source + " line " + std::to_string(line_no);
    if (fields.size() != 3) throw InputError(where + ": expected 3 fields (time,frequency,confidence)");
    for (int i = 0; i < 3; ++i) {
      if (!parse_double(fields[static_cast<std::size_t>(i)], vals[i])) {
        throw InputError(where + ": cannot parse '" + fields[static_cast<std::size_t>(i)] + "'");
      }
    }
    if (!contour.entries.empty() && !(vals[0] > contour.entries.back().time)) {
      throw InputError(where + ": time " + fields[0] + " is not after the previous row");
    }
    if (vals[1] < 0.0) throw InputError(where + ": negative frequency");
    if (vals[2] < 0.0 || vals[2] > 1.0) throw InputError(where + ": confidence outside [0, 1]");
    contour.entries.push_back({vals[0], vals[1], vals[2]});
  }
  return contour;
}

PitchContour load_pitch_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open pitch file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pitch_csv(buf.str(), path.string());
}

void save_pitch_csv(const std::filesystem::path& path, const PitchContour& contour) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write pitch file: " + path.string());
  out << "time,frequency,confidence\n";
  char buf[96];
  for (const auto& e : contour.entries) {
    // %.17g keeps the round-trip exact.
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", e.time, e.frequency, e.confidence);
    out << buf;
  }
}

PitchContour estimate_pitch_fallback(const AudioClip& clip, const FallbackPitchOptions& opts) {
  validate_clip(clip);
  const int sr = clip.sample_rate;
  const int min_lag = static_cast<int>(std::floor(sr / opts.max_hz));
  const int max_lag = static_cast<int>(std::ceil(sr / opts.min_hz));
  const int w = opts.integration_samples;
  const int span = w + max_lag;
  const auto n = static_cast<long long>(clip.samples.size());
  const int n_frames = clip.duration_frames();

  std::vector<double> seg(static_cast<std::size_t>(span));
  std::vector<double> energy(static_cast<std::size_t>(max_lag) + 1);
  std::vector<double> nacf(static_cast<std::size_t>(max_lag) + 2, 0.0);
  PitchContour contour;
  contour.entries.reserve(static_cast<std::size_t>(n_frames));
  for (int t = 0; t < n_frames; ++t) {
    const long long start = static_cast<long long>(t) * kHopSamples - span / 2;
    for (int i = 0; i < span; ++i) {
      const long long j = start + i;
      seg[static_cast<std::size_t>(i)] = (j >= 0 && j < n) ? clip.samples[static_cast<std::size_t>(j)] : 0.0;
    }
    // energy[tau] = sum_{i<w} seg[i + tau]^2, by a sliding update.
    double e = 0.0;
    for (int i = 0; i < w; ++i) e += seg[static_cast<std::size_t>(i)] * seg[static_cast<std::size_t>(i)];
    energy[0] = e;
    for (int tau = 1; tau <= max_lag; ++tau) {
      const double out = seg[static_cast<std::size_t>(tau - 1)];
      const double in = seg[static_cast<std::size_t>(tau + w - 1)];
      e += in * in - out * out;
      energy[static_cast<std::size_t>(tau)] = std::max(e, 0.0);
    }

    PitchEntry entry{t * kFrameSeconds, 0.0, 0.0};
    if (energy[0] > 1e-10) {
      for (int tau = min_lag - 1; tau <= max_lag; ++tau) {
        double acc = 0.0;
        for (int i = 0; i < w; ++i) {
          acc += seg[static_cast<std::size_t>(i)] * seg[static_cast<std::size_t>(i + tau)];
        }
        const double denom = std::sqrt(energy[0] * energy[static_cast<std::size_t>(tau)]);
        nacf[static_cast<std::size_t>(tau)] = denom > 0.0 ? acc / denom : 0.0;
      }
      double best = 0.0;
      for (int tau = min_lag; tau < max_lag; ++tau) best = std::max(best, nacf[static_cast<std::size_t>(tau)]);
      // Smallest-lag local maximum close to the global one avoids picking
      // a multiple of the true period.
      int pick = -1;
      for (int tau = min_lag; tau < max_lag; ++tau) {
        const double v = nacf[static_cast<std::size_t>(tau)];
        if (v >= nacf[static_cast<std::size_t>(tau - 1)] && v >= nacf[static_cast<std::size_t>(tau + 1)] &&
            v >= 0.9 * best && v > 0.0) {
          pick = tau;
          break;
        }
      }
      if (pick > 0) {
        const double a = nacf[static_cast<std::size_t>(pick - 1)];
        const double b = nacf[static_cast<std::size_t>(pick)];
        const double c = nacf[static_cast<std::size_t>(pick + 1)];
        const double den = a - 2.0 * b + c;
        const double shift = den < 0.0 ? std::clamp(0.5 * (a - c) / den, -0.5, 0.5) : 0.0;
        entry.confidence = std::clamp(b, 0.0, 1.0);
        if (entry.confidence >= opts.voicing_threshold) entry.frequency = sr / (pick + shift);
      }
    }
    contour.entries.push_back(entry);
  }
  return contour;
}

int Pitchgram::active_band(int t) const {
  for (int m = 0; m < n_mels; ++m) {
    if (at(m, t) != 0.0f) return m;
  }
  return -1;
}

int nearest_band(const MelFilterbank& fb, double hz) {
  const auto& c = fb.band_center_hz;
  const auto it = std::lower_bound(c.begin(), c.end(), hz);
  if (it == c.begin()) return 0;
  if (it == c.end()) return static_cast<int>(c.size()) - 1;
  const auto hi = static_cast<int>(it - c.begin());
  return (hz - c[static_cast<std::size_t>(hi - 1)] <= c[static_cast<std::size_t>(hi)] - hz) ? hi - 1 : hi;
}

Pitchgram contour_to_pitchgram(const PitchContour& contour, const MelFilterbank& fb, int n_frames,
                               double voicing_threshold, double frame_seconds) {
  if (n_frames <= 0) throw std::invalid_argument("pitchgram needs a positive frame count");
  Pitchgram pg;
  pg.n_mels = fb.n_mels();
  pg.n_frames = n_frames;
  pg.data.assign(static_cast<std::size_t>(pg.n_mels) * n_frames, 0.0f);
  const auto& e = contour.entries;
  if (e.empty()) return pg;

  std::size_t j = 0;
  for (int t = 0; t < n_frames; ++t) {
    const double time = t * frame_seconds;
    while (j + 1 < e.size() && e[j + 1].time <= time) ++j;
    std::size_t k = j;
    if (j + 1 < e.size() && std::abs(e[j + 1].time - time) < std::abs(time - e[j].time)) k = j + 1;
    const auto& p = e[k];
    if (p.frequency > 0.0 && p.confidence >= voicing_threshold) {
      pg.data[static_cast<std::size_t>(nearest_band(fb, p.frequency)) * n_frames + t] = 1.0f;
    }
  }
  return pg;
}

}  // namespace primadnn
