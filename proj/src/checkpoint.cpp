#include "apdm/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace apdm {

using nlohmann::json;

namespace {

template <typename T>
void put_le(std::ofstream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
bool get_le(std::ifstream& in, T& v) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) return false;
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    acc |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  v = static_cast<T>(acc);
  return true;
}

}  // namespace

void save_params(const std::filesystem::path& path, const ParamVector& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("checkpoint: cannot open '" + path.string() + "'");
  out.write(kCheckpointMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, params.size());
  for (double p : params) {
    std::uint64_t bits;
    std::memcpy(&bits, &p, sizeof(bits));
    put_le<std::uint64_t>(out, bits);
  }
  if (!out) throw FormatError("checkpoint: write failed for '" + path.string() + "'");
}

ParamVector load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open '" + path.string() + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic in '" + path.string() + "'");
  std::uint32_t version = 0;
  if (!get_le(in, version))
    throw FormatError("checkpoint: truncated version field");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " +
                      std::to_string(version));
  std::uint64_t count = 0;
  if (!get_le(in, count))
    throw FormatError("checkpoint: truncated parameter count field");

  ParamVector params(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t bits;
    if (!get_le(in, bits))
      throw FormatError("checkpoint: parameter count exceeds file length");
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    if (!std::isfinite(v))
      throw FormatError("checkpoint: non-finite parameter data");
    params[i] = v;
  }
  // Trailing bytes mean the count field lied.
  if (in.peek() != std::ifstream::traits_type::eof())
    throw FormatError("checkpoint: file length exceeds parameter count");
  return params;
}

json arch_to_json(const Arch& arch) {
  return {{"sample_dim", arch.sample_dim},
          {"cond_dim", arch.cond_dim},
          {"hidden", arch.hidden}};
}

Arch arch_from_json(const json& j) {
  Arch a;
  a.sample_dim = j.at("sample_dim").get<int>();
  a.cond_dim = j.at("cond_dim").get<int>();
  a.hidden = j.at("hidden").get<std::vector<int>>();
  a.validate();
  return a;
}

void save_checkpoint(const std::filesystem::path& path,
                     const ConditionalDenoiser& model,
                     const NoiseSchedule& sched, std::uint64_t seed,
                     const std::string& stage) {
  save_params(path, model.params);
  json sidecar = {{"arch", arch_to_json(model.arch)},
                  {"schedule",
                   {{"T", sched.T},
                    {"beta_start", sched.beta_start},
                    {"beta_end", sched.beta_end}}},
                  {"seed", seed},
                  {"stage", stage}};
  std::ofstream out(path.string() + ".json");
  if (!out)
    throw FormatError("checkpoint: cannot open sidecar for '" + path.string() + "'");
  out << sidecar.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  ParamVector params = load_params(path);
  std::ifstream in(path.string() + ".json");
  if (!in)
    throw FormatError("checkpoint: missing sidecar '" + path.string() + ".json'");
  json sidecar;
  try {
    in >> sidecar;
  } catch (const json::exception& e) {
    throw FormatError("checkpoint: invalid sidecar JSON: " + std::string(e.what()));
  }
  LoadedCheckpoint ck;
  try {
    ck.model.arch = arch_from_json(sidecar.at("arch"));
    const auto& sj = sidecar.at("schedule");
    ck.schedule = build_schedule(sj.at("T").get<int>(),
                                 sj.at("beta_start").get<double>(),
                                 sj.at("beta_end").get<double>());
    ck.seed = sidecar.at("seed").get<std::uint64_t>();
    ck.stage = sidecar.at("stage").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError("checkpoint: sidecar field error: " + std::string(e.what()));
  }
  if (ck.model.arch.param_count() != params.size())
    throw FormatError("checkpoint: parameter count does not match arch");
  ck.model.params = std::move(params);
  return ck;
}

}  // namespace apdm
