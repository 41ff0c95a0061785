#include "lqg/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace lqg {

int log2_exact(long long n) {
  if (!is_power_of_two(n)) throw DomainError("value is not a power of two: " + std::to_string(n));
  int k = 0;
  while ((1LL << k) < n) ++k;
  return k;
}

GridIndex ScalarGrid::cell_of(Point p) const noexcept {
  auto clamp_index = [this](double c) {
    int i = static_cast<int>(std::floor(c * n_));
    return std::clamp(i, 0, n_ - 1);
  };
  return {clamp_index(p.x), clamp_index(p.y)};
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, StreamRole role) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ index);
  h = splitmix64(h ^ (static_cast<std::uint64_t>(role) << 48));
  return h;
}

Philox::Philox(std::uint64_t key) noexcept
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

void Philox::refill() noexcept {
  std::array<std::uint32_t, 4> c = counter_;
  std::array<std::uint32_t, 2> k = key_;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    k[0] += kPhiloxW0;
    k[1] += kPhiloxW1;
  }
  block_ = c;
  used_ = 0;
  for (auto& word : counter_) {
    if (++word != 0) break;
  }
}

std::uint32_t Philox::next_u32() noexcept {
  if (used_ == 4) refill();
  return block_[used_++];
}

std::uint64_t Philox::next_u64() noexcept {
  const std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double Philox::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Philox::uniform_pos() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double Philox::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double radius = std::sqrt(-2.0 * std::log(uniform_pos()));
  const double angle = 2.0 * M_PI * uniform();
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

// ---------------------------------------------------------------------------

int default_threads() {
  if (const char* env = std::getenv("LQG_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------

ExactSum::ExactSum() = default;

void ExactSum::add(double x) {
  if (x == 0.0) return;
  if (!std::isfinite(x)) throw DomainError("ExactSum: non-finite term");
  int exponent = 0;
  const double frac = std::frexp(std::fabs(x), &exponent);  // |x| = frac * 2^exponent
  const auto mantissa = static_cast<std::uint64_t>(std::ldexp(frac, 53));
  const int bit = exponent - 53 + kBias;  // weight of the mantissa's lowest bit
  const int limb = bit / 32;
  const int shift = bit % 32;
  const unsigned __int128 wide = static_cast<unsigned __int128>(mantissa) << shift;
  const std::int64_t sign = x < 0 ? -1 : 1;
  limbs_[limb] += sign * static_cast<std::int64_t>(static_cast<std::uint64_t>(wide) & 0xffffffffu);
  limbs_[limb + 1] += sign * static_cast<std::int64_t>(static_cast<std::uint64_t>(wide >> 32) & 0xffffffffu);
  limbs_[limb + 2] += sign * static_cast<std::int64_t>(static_cast<std::uint64_t>(wide >> 64));
  if (++pending_ >= (1 << 29)) normalize();
}

ExactSum& ExactSum::operator+=(const ExactSum& other) {
  ExactSum rhs = other;
  rhs.normalize();
  normalize();
  for (int k = 0; k < kLimbs; ++k) limbs_[k] += rhs.limbs_[k];
  normalize();
  return *this;
}

void ExactSum::normalize() {
  std::int64_t carry = 0;
  for (int k = 0; k < kLimbs; ++k) {
    const std::int64_t v = limbs_[k] + carry;
    const std::int64_t low = v & 0xffffffffLL;  // two's complement: v - low is a multiple of 2^32
    carry = (v - low) / (1LL << 32);
    limbs_[k] = low;
  }
  limbs_[kLimbs - 1] += carry * (1LL << 32);
  pending_ = 0;
}

double ExactSum::value() const {
  ExactSum s = *this;
  s.normalize();
  double sign = 1.0;
  if (s.limbs_[kLimbs - 1] < 0) {
    sign = -1.0;
    for (auto& l : s.limbs_) l = -l;
    s.normalize();
  }
  int top = kLimbs - 1;
  while (top >= 0 && s.limbs_[top] == 0) --top;
  if (top < 0) return 0.0;
  unsigned __int128 window = 0;
  for (int i = 0; i < 3; ++i) {
    window <<= 32;
    const int k = top - i;
    if (k >= 0) window |= static_cast<std::uint64_t>(s.limbs_[k]);
  }
  bool sticky = false;
  for (int k = top - 3; k >= 0; --k) sticky = sticky || s.limbs_[k] != 0;
  int exponent = 32 * (top - 2) - kBias;
  int msb = 127;
  while (((window >> msb) & 1) == 0) --msb;
  if (msb >= 53) {
    const int drop = msb - 52;
    const unsigned __int128 mask = (static_cast<unsigned __int128>(1) << drop) - 1;
    const unsigned __int128 rest = window & mask;
    const unsigned __int128 half = static_cast<unsigned __int128>(1) << (drop - 1);
    window >>= drop;
    exponent += drop;
    const bool round_up = rest > half || (rest == half && (sticky || (window & 1)));
    if (round_up) window += 1;
  }
  return sign * std::ldexp(static_cast<double>(static_cast<std::uint64_t>(window)), exponent);
}

}  // namespace lqg
