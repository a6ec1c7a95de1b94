#pragma once

#include <cstdint>
#include <compare>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace phylat {

/// Simulated time. One tick is one picosecond; the clock starts at zero and
/// never moves backward. Durations derived from rates are computed in exact
/// integer arithmetic and rounded half-up once, so repeated batches do not
/// accumulate drift.
class SimTime {
 public:
  constexpr SimTime() = default;

  static constexpr SimTime ps(std::uint64_t ticks) { return SimTime{ticks}; }
  static constexpr SimTime ns(std::uint64_t n) { return SimTime{n * 1000}; }
  static constexpr SimTime us(std::uint64_t n) { return SimTime{n * 1'000'000}; }

  constexpr std::uint64_t ticks() const { return ticks_; }

  constexpr auto operator<=>(const SimTime&) const = default;

  constexpr SimTime operator+(SimTime o) const { return SimTime{ticks_ + o.ticks_}; }
  constexpr SimTime& operator+=(SimTime o) {
    ticks_ += o.ticks_;
    return *this;
  }
  /// Saturating: an earlier minus a later time is zero, not a wrapped value.
  constexpr SimTime operator-(SimTime o) const {
    return SimTime{ticks_ >= o.ticks_ ? ticks_ - o.ticks_ : 0};
  }

 private:
  constexpr explicit SimTime(std::uint64_t t) : ticks_(t) {}
  std::uint64_t ticks_ = 0;
};

inline std::ostream& operator<<(std::ostream& os, SimTime t) { return os << t.ticks() << "ps"; }

/// Exact non-negative rational, used for code rates, efficiencies and
/// throughput figures that must not pick up floating-point error.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  constexpr Ratio() = default;
  constexpr Ratio(std::uint64_t n, std::uint64_t d) : num(n), den(d) {
    if (d == 0) throw std::invalid_argument("Ratio: zero denominator");
    std::uint64_t g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  constexpr bool operator==(const Ratio&) const = default;
  constexpr bool positive() const { return num > 0; }

  constexpr Ratio times(Ratio o) const {
    // cross-reduce before multiplying to stay inside 64 bits
    std::uint64_t g1 = std::gcd(num, o.den);
    std::uint64_t g2 = std::gcd(o.num, den);
    return Ratio{(num / g1) * (o.num / g2), (den / g2) * (o.den / g1)};
  }

  double as_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

/// (a*b)/c rounded half-up, exact in 128-bit intermediates:
/// round_half_up(n/c) == floor((2n + c) / (2c)). c must be nonzero.
inline std::uint64_t muldiv_round_half_up(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  if (c == 0) throw std::invalid_argument("muldiv: zero divisor");
  unsigned __int128 n = static_cast<unsigned __int128>(a) * b;
  unsigned __int128 q = (2 * n + c) / (2 * static_cast<unsigned __int128>(c));
  return static_cast<std::uint64_t>(q);
}

inline constexpr std::uint64_t kPicosPerSecond = 1'000'000'000'000ULL;

/// Time to move `units` items through a stage running at `units_per_second`,
/// rounded half-up to whole picoseconds.
inline SimTime ticks_for(std::uint64_t units, Ratio units_per_second) {
  if (!units_per_second.positive()) throw std::invalid_argument("ticks_for: rate must be positive");
  unsigned __int128 n =
      static_cast<unsigned __int128>(units) * units_per_second.den * kPicosPerSecond;
  unsigned __int128 d = units_per_second.num;
  unsigned __int128 q = (2 * n + d) / (2 * d);
  return SimTime::ps(static_cast<std::uint64_t>(q));
}

}  // namespace phylat
