#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace irlrec {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using UserId = std::int64_t;
using ItemId = std::int64_t;

// Error taxonomy mapped to CLI exit codes (usage=1, data=2, numeric=3, provider=4).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProviderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d649bb133111ebull;
  return x ^ (x >> 31);
}

// Stable sub-seed scheme: splitmix64 chain over the master seed, a stage tag
// and up to three integer coordinates (user id, epoch, step). Identical
// arguments always yield the identical stream seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage,
                                 std::uint64_t a = 0, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(master ^ fnv1a64(stage));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

// Deterministic helpers on top of any 64-bit engine. std::uniform_*
// distributions are implementation-defined, so sampling that must be
// reproducible across platforms goes through these.
template <typename Rng>
double next_double(Rng& rng) {  // uniform in [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Rng>
std::uint64_t next_below(Rng& rng, std::uint64_t n) {  // uniform in [0, n)
  if (n == 0) throw UsageError("next_below: empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

// Softmax with max-subtraction; entries positive, sums to one.
template <typename Derived>
Vec softmax(const Eigen::MatrixBase<Derived>& scores) {
  const double shift = scores.maxCoeff();
  Vec p = (scores.array() - shift).exp();
  return p / p.sum();
}

template <typename Derived>
double logsumexp(const Eigen::MatrixBase<Derived>& scores) {
  const double shift = scores.maxCoeff();
  return shift + std::log((scores.array() - shift).exp().sum());
}

// Cosine of two dense vectors; zero vectors yield 0.
template <typename A, typename B>
double cosine(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace irlrec
