#pragma once

#include <array>
#include <cstdint>

namespace sicm {

// Philox4x64-10 (Salmon et al. 2011). Key = (seed, replication), counter =
// (block, substream, 0, 0). Output is identical on every platform.
class Philox4x64 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  Philox4x64(std::uint64_t seed, std::uint64_t replication = 0, std::uint64_t substream = 0)
      : key_{seed, replication}, ctr_{0, substream, 0, 0} {}

  static Block bijection(Block ctr, Key key) {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += 0x9E3779B97F4A7C15ULL;
        key[1] += 0xBB67AE8584CAA73BULL;
      }
      ctr = round(ctr, key);
    }
    return ctr;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    if (idx_ == 4) {
      out_ = bijection(ctr_, key_);
      ++ctr_[0];
      idx_ = 0;
    }
    return out_[idx_++];
  }

  // 53-bit uniform on [0,1)
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  static void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
  }

  static Block round(const Block& c, const Key& k) {
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(0xD2E7470EE14C6C93ULL, c[0], hi0, lo0);
    mulhilo(0xCA5A826395121157ULL, c[2], hi1, lo1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  Key key_;
  Block ctr_;
  Block out_{};
  int idx_ = 4;
};

// index of the first y with u < cumulative weight; falls back to the last positive entry
template <typename Row>
int sample_row(const Row& p, double u) {
  double c = 0;
  int last = -1;
  const int d = static_cast<int>(p.size());
  for (int y = 0; y < d; ++y) {
    if (p(y) <= 0) continue;
    c += p(y);
    last = y;
    if (u < c) return y;
  }
  return last;
}

}  // namespace sicm
