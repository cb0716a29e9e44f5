#include "primadnn/feature_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace primadnn {

namespace {

static_assert(std::endian::native == std::endian::little,
              "feature files are written in host order on little-endian targets only");

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw InputError(path.string() + ": truncated feature header");
  }
  return v;
}

}  // namespace

std::vector<std::string> default_channel_names(int channels) {
  if (channels == 4) return {"mel2048", "mel1024", "mel512", kPitchgramChannel};
  if (channels == 3) return {"mel2048", "mel1024", "mel512"};
  std::vector<std::string> names;
  for (int c = 0; c < channels; ++c) names.push_back("ch" + std::to_string(c));
  return names;
}

void write_feature_file(const std::filesystem::path& path, const FeatureStack& stack) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write feature file: " + path.string());
  out.write("PDNF", 4);
  put_u32(out, kFeatureFileVersion);
  put_u32(out, static_cast<std::uint32_t>(stack.channels));
  put_u32(out, static_cast<std::uint32_t>(stack.n_mels));
  put_u32(out, static_cast<std::uint32_t>(stack.n_frames));
  out.write(reinterpret_cast<const char*>(stack.data.data()),
            static_cast<std::streamsize>(stack.data.size() * sizeof(float)));
  if (!out) throw InputError("failed writing feature file: " + path.string());
}

FeatureStack read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open feature file: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PDNF", 4) != 0) {
    throw InputError(path.string() + ": not a feature file (bad magic)");
  }
  const std::uint32_t version = get_u32(in, path);
  if (version != kFeatureFileVersion) {
    throw InputError(path.string() + ": unsupported feature file version " +
                     std::to_string(version));
  }
  const auto channels = static_cast<int>(get_u32(in, path));
  const auto mels = static_cast<int>(get_u32(in, path));
  const auto frames = static_cast<int>(get_u32(in, path));
  FeatureStack stack(default_channel_names(channels), mels, frames);
  if (!in.read(reinterpret_cast<char*>(stack.data.data()),
               static_cast<std::streamsize>(stack.data.size() * sizeof(float)))) {
    throw InputError(path.string() + ": truncated feature payload");
  }
  return stack;
}

}  // namespace primadnn
