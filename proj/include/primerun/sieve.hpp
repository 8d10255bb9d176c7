// Bit-packed segmented sieve of Eratosthenes and the optional on-disk
// prime cache. Everything here operates on plain uint64_t ranges; the
// segment is the unit of work for all scanning in the library.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace primerun {

// Numbers per segment. Default sized so the bit array (256 KiB) stays in L2.
inline constexpr uint64_t kDefaultSegmentSize = uint64_t{1} << 21;
// Hard cap on a single segment span.
inline constexpr uint64_t kMaxSegmentSpan = uint64_t{1} << 28;

inline uint64_t isqrt_u64(uint64_t n) {
  if (n == 0) return 0;
  uint64_t r = static_cast<uint64_t>(std::sqrt(static_cast<double>(n)));
  while (r > 0 && r > n / r) --r;
  while ((r + 1) <= n / (r + 1)) ++r;
  return r;
}

/// Primes <= limit by a plain byte sieve. Used for base primes.
inline std::vector<uint32_t> simple_primes(uint32_t limit) {
  std::vector<uint32_t> out;
  if (limit < 2) return out;
  std::vector<uint8_t> composite(static_cast<size_t>(limit) + 1, 0);
  for (uint64_t i = 2; i <= limit; ++i) {
    if (composite[i]) continue;
    out.push_back(static_cast<uint32_t>(i));
    for (uint64_t j = i * i; j <= limit; j += i) composite[j] = 1;
  }
  return out;
}

// Primality bits over [lo, hi): bit i set <=> (lo+i) is prime.
struct SieveSegment {
  uint64_t lo = 0;
  uint64_t hi = 0;
  std::vector<uint64_t> bits;

  bool test(uint64_t n) const {
    if (n < lo || n >= hi) throw std::out_of_range("SieveSegment::test: value outside [lo, hi)");
    uint64_t i = n - lo;
    return (bits[i >> 6] >> (i & 63)) & 1u;
  }

  uint64_t count() const {
    uint64_t c = 0;
    for (uint64_t w : bits) c += static_cast<uint64_t>(std::popcount(w));
    return c;
  }

  template <typename F>
  void for_each_prime(F&& f) const {
    for (size_t wi = 0; wi < bits.size(); ++wi) {
      uint64_t w = bits[wi];
      while (w) {
        unsigned b = static_cast<unsigned>(std::countr_zero(w));
        f(lo + (static_cast<uint64_t>(wi) << 6) + b);
        w &= w - 1;
      }
    }
  }
};

// Bit-packed primality table up to a bound, persistable to disk.
// File format: 8-byte little-endian bound B, then ceil(B/8) payload bytes;
// bit i of payload (LSB-first within each byte) <=> i is prime, for i < B.
// The cache is an optimization only: sieving results are identical with or
// without it.
class PrimeCache {
 public:
  PrimeCache() = default;

  static PrimeCache build(uint64_t bound);

  static PrimeCache load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("prime cache: cannot open " + path);
    uint8_t hdr[8];
    if (!in.read(reinterpret_cast<char*>(hdr), 8))
      throw std::runtime_error("prime cache: truncated header in " + path);
    uint64_t bound = 0;
    for (int i = 7; i >= 0; --i) bound = (bound << 8) | hdr[i];
    PrimeCache c;
    c.bound_ = bound;
    c.bytes_.resize((bound + 7) / 8);
    if (!in.read(reinterpret_cast<char*>(c.bytes_.data()),
                 static_cast<std::streamsize>(c.bytes_.size())))
      throw std::runtime_error("prime cache: truncated payload in " + path);
    in.peek();
    if (!in.eof()) throw std::runtime_error("prime cache: trailing bytes in " + path);
    return c;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("prime cache: cannot write " + path);
    uint8_t hdr[8];
    uint64_t b = bound_;
    for (int i = 0; i < 8; ++i) {
      hdr[i] = static_cast<uint8_t>(b & 0xff);
      b >>= 8;
    }
    out.write(reinterpret_cast<const char*>(hdr), 8);
    out.write(reinterpret_cast<const char*>(bytes_.data()),
              static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw std::runtime_error("prime cache: write failed for " + path);
  }

  uint64_t bound() const { return bound_; }

  bool test(uint64_t n) const {
    if (n >= bound_) throw std::out_of_range("prime cache: query beyond bound");
    return (bytes_[n >> 3] >> (n & 7)) & 1u;
  }

  void set_bit(uint64_t n) { bytes_[n >> 3] |= static_cast<uint8_t>(1u << (n & 7)); }

 private:
  uint64_t bound_ = 0;
  std::vector<uint8_t> bytes_;
};

namespace detail {

inline void sieve_into(uint64_t lo, uint64_t hi, const std::vector<uint32_t>& base,
                       std::vector<uint64_t>& words) {
  const uint64_t span = hi - lo;
  words.assign((span + 63) / 64, ~uint64_t{0});
  auto clear_bit = [&](uint64_t i) { words[i >> 6] &= ~(uint64_t{1} << (i & 63)); };
  if (lo == 0) clear_bit(0);
  if (lo <= 1 && 1 < hi) clear_bit(1 - lo);
  const uint64_t root = isqrt_u64(hi - 1);
  for (uint32_t p32 : base) {
    const uint64_t p = p32;
    if (p > root) break;
    uint64_t start = p * p;
    if (start < lo) start = ((lo + p - 1) / p) * p;
    for (uint64_t m = start; m < hi; m += p) clear_bit(m - lo);
  }
  // mask tail bits beyond span
  if (span & 63) words.back() &= (uint64_t{1} << (span & 63)) - 1;
}

inline void fill_from_cache(uint64_t lo, uint64_t hi, const PrimeCache& cache,
                            std::vector<uint64_t>& words) {
  const uint64_t span = hi - lo;
  words.assign((span + 63) / 64, 0);
  for (uint64_t i = 0; i < span; ++i)
    if (cache.test(lo + i)) words[i >> 6] |= uint64_t{1} << (i & 63);
}

}  // namespace detail

/// Sieve [lo, hi) with caller-provided base primes (must reach sqrt(hi-1)).
/// When a cache covering the whole segment is supplied, bits are copied from
/// it instead of resieving.
inline SieveSegment sieve_segment(uint64_t lo, uint64_t hi, const std::vector<uint32_t>& base,
                                  const PrimeCache* cache = nullptr) {
  if (hi <= lo) throw std::invalid_argument("sieve_segment: requires lo < hi");
  if (hi - lo > kMaxSegmentSpan) throw std::invalid_argument("sieve_segment: span too large");
  SieveSegment seg;
  seg.lo = lo;
  seg.hi = hi;
  if (cache != nullptr && hi <= cache->bound())
    detail::fill_from_cache(lo, hi, *cache, seg.bits);
  else
    detail::sieve_into(lo, hi, base, seg.bits);
  return seg;
}

/// Self-contained variant: computes its own base primes.
inline SieveSegment sieve_segment(uint64_t lo, uint64_t hi) {
  if (hi <= lo) throw std::invalid_argument("sieve_segment: requires lo < hi");
  uint64_t root = isqrt_u64(hi - 1);
  if (root > 0xffffffffull) throw std::invalid_argument("sieve_segment: hi too large");
  return sieve_segment(lo, hi, simple_primes(static_cast<uint32_t>(root)));
}

struct SieveConfig {
  uint64_t segment_size = kDefaultSegmentSize;
  const PrimeCache* cache = nullptr;
};

// Ascending prime iterator over [lo, hi), sieving one segment at a time.
// Segments over disjoint ranges are independent, so streams may run in
// parallel workers without coordination.
class PrimeStream {
 public:
  PrimeStream(uint64_t lo, uint64_t hi, SieveConfig cfg = {})
      : PrimeStream(lo, hi, std::make_shared<const std::vector<uint32_t>>(base_primes_for(hi)),
                    cfg) {}

  PrimeStream(uint64_t lo, uint64_t hi, std::shared_ptr<const std::vector<uint32_t>> base,
              SieveConfig cfg = {})
      : cur_(lo), hi_(hi), cfg_(cfg), base_(std::move(base)) {
    if (cfg_.segment_size == 0) throw std::invalid_argument("PrimeStream: zero segment size");
    if (cfg_.segment_size > kMaxSegmentSpan) cfg_.segment_size = kMaxSegmentSpan;
  }

  static std::vector<uint32_t> base_primes_for(uint64_t hi) {
    uint64_t root = hi > 1 ? isqrt_u64(hi - 1) : 0;
    if (root > 0xffffffffull) throw std::invalid_argument("PrimeStream: hi too large");
    return simple_primes(static_cast<uint32_t>(root));
  }

  std::optional<uint64_t> next() {
    for (;;) {
      while (word_ == 0) {
        if (++word_i_ >= seg_.bits.size()) {
          if (!load_next_segment()) return std::nullopt;
          continue;
        }
        word_ = seg_.bits[word_i_];
      }
      unsigned b = static_cast<unsigned>(std::countr_zero(word_));
      word_ &= word_ - 1;
      return seg_.lo + (static_cast<uint64_t>(word_i_) << 6) + b;
    }
  }

 private:
  bool load_next_segment() {
    if (cur_ >= hi_) return false;
    uint64_t end = std::min(hi_, cur_ + cfg_.segment_size);
    seg_ = sieve_segment(cur_, end, *base_, cfg_.cache);
    cur_ = end;
    word_i_ = 0;
    word_ = seg_.bits.empty() ? 0 : seg_.bits[0];
    return true;
  }

  uint64_t cur_;
  uint64_t hi_;
  SieveConfig cfg_;
  std::shared_ptr<const std::vector<uint32_t>> base_;
  SieveSegment seg_;
  size_t word_i_ = 0;
  uint64_t word_ = 0;
};

/// pi[lo, hi): number of primes in the half-open interval.
inline uint64_t count_primes(uint64_t lo, uint64_t hi, SieveConfig cfg = {}) {
  if (hi <= lo) return 0;
  auto base = std::make_shared<const std::vector<uint32_t>>(PrimeStream::base_primes_for(hi));
  uint64_t total = 0;
  uint64_t cur = lo;
  while (cur < hi) {
    uint64_t end = std::min(hi, cur + cfg.segment_size);
    total += sieve_segment(cur, end, *base, cfg.cache).count();
    cur = end;
  }
  return total;
}

inline PrimeCache PrimeCache::build(uint64_t bound) {
  PrimeCache c;
  c.bound_ = bound;
  c.bytes_.assign((bound + 7) / 8, 0);
  if (bound <= 2) return c;
  auto base = std::make_shared<const std::vector<uint32_t>>(PrimeStream::base_primes_for(bound));
  uint64_t cur = 2;
  while (cur < bound) {
    uint64_t end = std::min(bound, cur + kDefaultSegmentSize);
    sieve_segment(cur, end, *base).for_each_prime([&](uint64_t p) { c.set_bit(p); });
    cur = end;
  }
  return c;
}

}  // namespace primerun
