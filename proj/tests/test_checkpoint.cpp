#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "apdm/checkpoint.hpp"

using namespace apdm;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "apdm_ckpt_tests";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string from_hex(const std::string& hex) {
  std::string out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
    out.push_back(static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  return out;
}

}  // namespace

TEST_CASE("parameter blobs round-trip byte-exactly") {
  const fs::path path = temp_dir() / "roundtrip.ckpt";
  Rng rng(1);
  const ParamVector params = normal_vec(rng, 137);
  save_params(path, params);
  CHECK(load_params(path) == params);

  // Re-saving produces identical bytes.
  const std::string first = slurp(path);
  save_params(path, params);
  CHECK(slurp(path) == first);
}

TEST_CASE("truncated checkpoints are rejected without a partial model") {
  const fs::path path = temp_dir() / "truncated.ckpt";
  Rng rng(2);
  save_params(path, normal_vec(rng, 10));
  const std::string bytes = slurp(path);
  spit(path, bytes.substr(0, bytes.size() - 13));
  CHECK_THROWS_AS(load_params(path), FormatError);
}

TEST_CASE("bad magic, version and length are named") {
  const fs::path path = temp_dir() / "corrupt.ckpt";
  Rng rng(3);
  save_params(path, normal_vec(rng, 4));
  std::string bytes = slurp(path);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  spit(path, bad_magic);
  try {
    load_params(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }

  std::string bad_version = bytes;
  bad_version[4] = 9;
  spit(path, bad_version);
  try {
    load_params(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  std::string trailing = bytes + "zz";
  spit(path, trailing);
  try {
    load_params(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("count") != std::string::npos);
  }
}

TEST_CASE("reference hex fixture parses to the documented 4-parameter model") {
  // Authored from the format description: magic, version 1, count 4, then
  // 1.0, -0.5, 0.25, 42.0 as little-endian doubles.
  const std::string hex =
      "4150444d"           // 'A' 'P' 'D' 'M'
      "01000000"           // version 1
      "0400000000000000"   // count 4
      "000000000000f03f"   // 1.0
      "000000000000e0bf"   // -0.5
      "000000000000d03f"   // 0.25
      "0000000000004540";  // 42.0
  const fs::path path = temp_dir() / "fixture.ckpt";
  spit(path, from_hex(hex));
  const ParamVector params = load_params(path);
  REQUIRE(params.size() == 4);
  CHECK(params[0] == 1.0);
  CHECK(params[1] == -0.5);
  CHECK(params[2] == 0.25);
  CHECK(params[3] == 42.0);
}

TEST_CASE("non-finite parameter data is rejected") {
  const fs::path path = temp_dir() / "nonfinite.ckpt";
  ParamVector params = {1.0, std::numeric_limits<double>::infinity()};
  save_params(path, params);
  CHECK_THROWS_AS(load_params(path), FormatError);
}

TEST_CASE("full checkpoints carry arch, schedule, seed and stage") {
  const fs::path path = temp_dir() / "full.ckpt";
  Arch arch;
  arch.sample_dim = 2;
  arch.cond_dim = 4;
  arch.hidden = {5, 3};
  Rng rng(4);
  const ConditionalDenoiser m = init_denoiser(arch, rng);
  const NoiseSchedule sched = build_schedule(12, 0.01, 0.22);
  save_checkpoint(path, m, sched, 909, "pretrain");

  const LoadedCheckpoint ck = load_checkpoint(path);
  CHECK(ck.model.params == m.params);
  CHECK(ck.model.arch == arch);
  CHECK(ck.schedule.T == 12);
  CHECK(ck.schedule.beta_start == 0.01);
  CHECK(ck.schedule.beta_end == 0.22);
  CHECK(ck.seed == 909);
  CHECK(ck.stage == "pretrain");
}

TEST_CASE("sidecar arch must match the parameter count") {
  const fs::path path = temp_dir() / "mismatch.ckpt";
  Arch arch;
  arch.hidden = {5};
  Rng rng(5);
  const ConditionalDenoiser m = init_denoiser(arch, rng);
  const NoiseSchedule sched = build_schedule(4, 0.05, 0.2);
  save_checkpoint(path, m, sched, 1, "pretrain");

  // Corrupt the sidecar arch.
  nlohmann::json sidecar;
  {
    std::ifstream in(path.string() + ".json");
    in >> sidecar;
  }
  sidecar["arch"]["hidden"] = {9, 9};
  {
    std::ofstream out(path.string() + ".json");
    out << sidecar.dump();
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
}
