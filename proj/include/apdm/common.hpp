#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace apdm {

using Vec = std::vector<double>;
using Sample = Vec;
using ParamVector = Vec;

// Error taxonomy used across the library. The CLI maps these onto exit codes:
// usage/config problems exit 2, everything else that fails a run exits 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Seeded random stream. The engine is std::mt19937_64 (fully specified by the
// standard) and all output transforms are explicit, so the same seed yields
// bit-identical draws on every platform and every draw can be replayed from a
// recorded value.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (cosine branch only, no cached spare, so
  // one call consumes exactly two engine outputs).
  double normal();

  // Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi);

 private:
  std::mt19937_64 eng_;
};

// Derives an independent stream seed for a named stage. Stages draw from
// their own derived stream so re-running one stage never shifts another.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// FNV-1a over a byte string; also the basis of config hashing.
std::uint64_t fnv1a64(std::string_view bytes);

Vec normal_vec(Rng& rng, std::size_t n);

double dot(const Vec& a, const Vec& b);
double squared_norm(const Vec& a);
double norm(const Vec& a);
double squared_distance(const Vec& a, const Vec& b);

// y += a * x
void axpy(double a, const Vec& x, Vec& y);
Vec scaled(const Vec& x, double a);
Vec sum(const Vec& a, const Vec& b);

bool all_finite(const Vec& v);

// Shortest round-trip decimal form of a double; used for every CSV/JSON
// number we emit so ledgers are byte-stable and parse back exactly.
std::string format_double(double v);

}  // namespace apdm
