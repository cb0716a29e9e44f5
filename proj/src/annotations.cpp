#include "primadnn/annotations.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

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

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

EventList parse_annotations(const std::string& text, const std::string& source) {
  EventList events;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(row);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    double onset = 0.0, offset = 0.0;
    if (line_no == 1 && !fields.empty() && !parse_double(fields[0], onset)) continue;  // header
    const std::string where = source + " line " + std::to_string(line_no);
    if (fields.size() != 3) throw InputError(where + ": expected onset,offset,label");
    if (!parse_double(fields[0], onset) || !parse_double(fields[1], offset)) {
      throw InputError(where + ": cannot parse event times");
    }
    if (!(onset < offset)) throw InputError(where + ": onset must be before offset");
    if (onset < 0.0) throw InputError(where + ": negative onset");
    const auto label = parse_label(fields[2]);
    if (!label) throw InputError(where + ": unknown label '" + fields[2] + "'");
    events.push_back({onset, offset, *label});
  }
  return events;
}

EventList load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open annotation file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_annotations(buf.str(), path.string());
}

std::string format_annotations(const EventList& events) {
  std::string out = "onset,offset,label\n";
  for (const auto& e : events) {
    out += format_double(e.onset) + "," + format_double(e.offset) + "," +
           std::string(label_name(e.label)) + "\n";
  }
  return out;
}

void save_annotations(const std::filesystem::path& path, const EventList& events) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write annotation file: " + path.string());
  out << format_annotations(events);
}

std::vector<ClipSegment> segment_track(const AudioClip& audio, const EventList& events,
                                       double clip_seconds) {
  if (!(clip_seconds > 0.0)) throw std::invalid_argument("clip length must be positive");
  const auto clip_samples = static_cast<std::size_t>(std::llround(clip_seconds * audio.sample_rate));
  const double duration = audio.duration_seconds();
  EventList clipped;
  for (const auto& e : events) {
    Event c = e;
    if (c.offset > duration) {
      std::cerr << "warning: event " << label_name(e.label) << " [" << e.onset << ", " << e.offset
                << ") extends past the audio end (" << duration << " s); truncated\n";
      c.offset = duration;
    }
    if (c.onset < c.offset) clipped.push_back(c);
  }

  std::vector<ClipSegment> out;
  for (std::size_t start = 0; start < audio.samples.size(); start += clip_samples) {
    const std::size_t end = std::min(audio.samples.size(), start + clip_samples);
    ClipSegment seg;
    seg.clip.sample_rate = audio.sample_rate;
    seg.clip.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(start),
                            audio.samples.begin() + static_cast<std::ptrdiff_t>(end));
    seg.start_seconds = static_cast<double>(start) / audio.sample_rate;
    const double t0 = seg.start_seconds;
    const double t1 = static_cast<double>(end) / audio.sample_rate;
    for (const auto& e : clipped) {
      const double on = std::max(e.onset, t0), off = std::min(e.offset, t1);
      if (on < off) seg.events.push_back({on - t0, off - t0, e.label});
    }
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace primadnn
