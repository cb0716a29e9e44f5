#include "primadnn/checkpoint.hpp"

#include <bit>
#include <algorithm>
#include <cstring>
#include <fstream>

#include "primadnn/run_config.hpp"

namespace primadnn {

static_assert(std::endian::native == std::endian::little,
              "checkpoints are written in host order on little-endian targets only");

namespace {

constexpr char kMagic[4] = {'P', 'D', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw InputError(path + ": truncated checkpoint");
  return v;
}

std::string get_string(std::ifstream& in, std::size_t n, const std::string& path) {
  if (n > (1u << 26)) throw InputError(path + ": corrupt checkpoint (oversized field)");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw InputError(path + ": truncated checkpoint");
  return s;
}

void put_block(std::ofstream& out, const std::string& name, const std::vector<int>& shape,
               const float* data, std::size_t count) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (int d : shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  put<std::uint64_t>(out, count);
  const std::vector<double> wide(data, data + count);
  out.write(reinterpret_cast<const char*>(wide.data()), static_cast<std::streamsize>(count * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  header["model"] = to_json_value(ckpt.params.config);
  header["channels"] = ckpt.channels;
  header["stats"] = {{"names", ckpt.stats.names}, {"mean", ckpt.stats.mean}, {"std", ckpt.stats.std}};
  header["loss"] = to_string(ckpt.loss);
  header["focal"] = to_json_value(ckpt.focal);
  header["run_config"] = ckpt.run_config;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint: " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto& specs = ckpt.params.layout.specs();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(specs.size() + 1));
  for (const auto& s : specs) put_block(out, s.name, s.shape, ckpt.params.values.data() + s.offset, s.size);
  put_block(out, "running", {static_cast<int>(ckpt.params.running.size())}, ckpt.params.running.data(),
            ckpt.params.running.size());
  if (!out) throw InputError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + p);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw InputError(p + ": not a checkpoint file");
  const auto version = get<std::uint32_t>(in, p);
  if (version != kVersion) throw InputError(p + ": unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get<std::uint32_t>(in, p);
  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(get_string(in, header_len, p));
    const ModelConfig config = model_from_json(header.at("model"));
    config.validate();
    ckpt.params.config = config;
    ckpt.params.layout = ParamLayout(config);
    ckpt.channels = header.at("channels").get<std::vector<std::string>>();
    const auto& st = header.at("stats");
    ckpt.stats.names = st.at("names").get<std::vector<std::string>>();
    ckpt.stats.mean = st.at("mean").get<std::vector<double>>();
    ckpt.stats.std = st.at("std").get<std::vector<double>>();
    ckpt.loss = parse_loss_kind(header.at("loss").get<std::string>());
    ckpt.focal = focal_from_json(header.at("focal"));
    ckpt.run_config = header.value("run_config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(p + ": malformed checkpoint header: " + e.what());
  }
  auto& params = ckpt.params;
  params.values.assign(params.layout.total(), 0.0f);
  params.running.assign(params.layout.running_total(), 0.0f);

  const auto n_blocks = get<std::uint32_t>(in, p);
  std::size_t seen = 0;
  bool running_seen = false;
  for (std::uint32_t b = 0; b < n_blocks; ++b) {
    const std::string name = get_string(in, get<std::uint32_t>(in, p), p);
    const auto rank = get<std::uint32_t>(in, p);
    if (rank > 8) throw InputError(p + ": corrupt block '" + name + "'");
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(get<std::uint32_t>(in, p));
    const auto count = get<std::uint64_t>(in, p);
    float* dst = nullptr;
    if (name == "running") {
      if (count != params.running.size()) throw InputError(p + ": running-statistics size mismatch");
      dst = params.running.data();
      running_seen = true;
    } else {
      const ParamSpec* spec = nullptr;
      try {
        spec = &params.layout.spec(name);
      } catch (const std::out_of_range&) {
        throw InputError(p + ": unexpected block '" + name + "'");
      }
      if (shape != spec->shape || count != spec->size) throw InputError(p + ": shape mismatch in block '" + name + "'");
      dst = params.values.data() + spec->offset;
      ++seen;
    }
    std::vector<double> wide(count);
    in.read(reinterpret_cast<char*>(wide.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw InputError(p + ": truncated block '" + name + "'");
    std::copy(wide.begin(), wide.end(), dst);
  }
  if (seen != params.layout.specs().size() || !running_seen) throw InputError(p + ": checkpoint is missing blocks");
  return ckpt;
}

}  // namespace primadnn
