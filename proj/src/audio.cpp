#include "primadnn/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

namespace primadnn {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

void validate_clip(const AudioClip& clip) {
  if (clip.sample_rate != kSampleRate) {
    throw InputError("unsupported sample rate " + std::to_string(clip.sample_rate) +
                     " Hz (expected 44100)");
  }
  if (clip.samples.empty()) throw InputError("empty audio clip");
  for (double s : clip.samples) {
    if (!std::isfinite(s)) throw InputError("audio clip contains non-finite samples");
  }
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open WAV file: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw InputError(path.string() + ": not a RIFF/WAVE file");
  }

  int channels = 0, rate = 0, bits = 0, format = 0;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_bytes = 0;
  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const std::uint32_t chunk_size = read_u32(data + pos + 4);
    const unsigned char* body = data + pos + 8;
    const std::size_t avail = std::min<std::size_t>(chunk_size, size - pos - 8);
    if (std::memcmp(data + pos, "fmt ", 4) == 0 && avail >= 16) {
      format = read_u16(body);
      channels = read_u16(body + 2);
      rate = static_cast<int>(read_u32(body + 4));
      bits = read_u16(body + 14);
      if (format == 0xFFFE && avail >= 26) format = read_u16(body + 24);  // extensible
    } else if (std::memcmp(data + pos, "data", 4) == 0) {
      pcm = body;
      pcm_bytes = avail;
    }
    pos += 8 + chunk_size + (chunk_size & 1u);
  }
  if (format == 0 || pcm == nullptr) throw InputError(path.string() + ": missing fmt or data chunk");
  if (format != 1) throw InputError(path.string() + ": only PCM WAV is supported");
  if (channels != 1) {
    throw InputError(path.string() + ": expected mono audio, got " + std::to_string(channels) +
                     " channels");
  }
  if (rate != kSampleRate) {
    throw InputError(path.string() + ": unsupported sample rate " + std::to_string(rate) +
                     " Hz (expected 44100)");
  }
  if (bits != 16 && bits != 24) {
    throw InputError(path.string() + ": unsupported bit depth " + std::to_string(bits));
  }

  AudioClip clip;
  clip.sample_rate = rate;
  const std::size_t width = static_cast<std::size_t>(bits / 8);
  const std::size_t n = pcm_bytes / width;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* p = pcm + i * width;
    if (bits == 16) {
      const auto v = static_cast<std::int16_t>(read_u16(p));
      clip.samples[i] = v / 32768.0;
    } else {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      clip.samples[i] = v / 8388608.0;
    }
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put_u32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, 2 * n);
  for (double s : clip.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::lround(std::min(c * 32768.0, 32767.0)));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write WAV file: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace primadnn
