// Angular-momentum bookkeeping: half-integer quantum numbers and
// Clebsch-Gordan coefficients in the Condon-Shortley phase convention.
#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace opmag {

/// A quantum number that is an integer or half-integer, stored as twice its value.
class HalfInt {
 public:
  constexpr HalfInt() = default;

  static constexpr HalfInt from_twice(int twice) { return HalfInt(twice); }

  /// Rejects values that are not multiples of 1/2.
  static HalfInt from_double(double v) {
    const double twice = 2.0 * v;
    const double rounded = std::round(twice);
    if (std::abs(twice - rounded) > 1e-9) {
      throw std::invalid_argument("value " + std::to_string(v) + " is not a multiple of 1/2");
    }
    return HalfInt(static_cast<int>(rounded));
  }

  constexpr int twice() const { return twice_; }
  constexpr double value() const { return 0.5 * twice_; }
  constexpr bool is_integer() const { return twice_ % 2 == 0; }

  constexpr HalfInt operator+(HalfInt o) const { return HalfInt(twice_ + o.twice_); }
  constexpr HalfInt operator-(HalfInt o) const { return HalfInt(twice_ - o.twice_); }
  constexpr HalfInt operator-() const { return HalfInt(-twice_); }
  constexpr HalfInt operator+(int n) const { return HalfInt(twice_ + 2 * n); }
  constexpr HalfInt operator-(int n) const { return HalfInt(twice_ - 2 * n); }

  constexpr auto operator<=>(const HalfInt&) const = default;

  std::string str() const {
    if (is_integer()) return std::to_string(twice_ / 2);
    return std::to_string(twice_) + "/2";
  }

 private:
  constexpr explicit HalfInt(int twice) : twice_(twice) {}
  int twice_ = 0;
};

constexpr HalfInt kHalf = HalfInt::from_twice(1);

namespace detail {

inline double factorial(int n) {
  static const auto table = [] {
    std::array<double, 171> t{};
    t[0] = 1.0;
    for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] * static_cast<double>(i);
    return t;
  }();
  if (n < 0 || n >= static_cast<int>(table.size())) {
    throw std::out_of_range("factorial argument out of range");
  }
  return table[static_cast<std::size_t>(n)];
}

// (a + b) / 2 for twice-valued integers known to sum to an even number.
constexpr int half_sum(int twice_a, int twice_b) { return (twice_a + twice_b) / 2; }

}  // namespace detail

/// True when |m| <= j, j >= 0 and j - m is an integer.
constexpr bool valid_projection(HalfInt j, HalfInt m) {
  return j.twice() >= 0 && std::abs(m.twice()) <= j.twice() && (j.twice() - m.twice()) % 2 == 0;
}

/// <j1 m1; j2 m2 | J M> via the Racah closed form.
/// Returns 0 for any combination violating projection or triangle rules.
inline double clebsch_gordan(HalfInt j1, HalfInt m1, HalfInt j2, HalfInt m2, HalfInt J, HalfInt M) {
  if (m1 + m2 != M) return 0.0;
  if (!valid_projection(j1, m1) || !valid_projection(j2, m2) || !valid_projection(J, M)) return 0.0;
  const int tj1 = j1.twice(), tj2 = j2.twice(), tJ = J.twice();
  if (tJ < std::abs(tj1 - tj2) || tJ > tj1 + tj2) return 0.0;
  if ((tj1 + tj2 + tJ) % 2 != 0) return 0.0;

  using detail::factorial;
  using detail::half_sum;
  const int tm1 = m1.twice(), tm2 = m2.twice(), tM = M.twice();

  const int j1_plus_j2_minus_J = half_sum(tj1 + tj2, -tJ);
  const int J_plus_j1_minus_j2 = half_sum(tJ + tj1, -tj2);
  const int J_minus_j1_plus_j2 = half_sum(tJ - tj1, tj2);
  const int j1_plus_j2_plus_J_plus_1 = half_sum(tj1 + tj2, tJ) + 1;

  const double triangle = (tJ + 1.0) * factorial(J_plus_j1_minus_j2) *
                          factorial(J_minus_j1_plus_j2) * factorial(j1_plus_j2_minus_J) /
                          factorial(j1_plus_j2_plus_J_plus_1);
  const double projections = factorial(half_sum(tJ, tM)) * factorial(half_sum(tJ, -tM)) *
                             factorial(half_sum(tj1, -tm1)) * factorial(half_sum(tj1, tm1)) *
                             factorial(half_sum(tj2, -tm2)) * factorial(half_sum(tj2, tm2));

  const int a = j1_plus_j2_minus_J;
  const int b = half_sum(tj1, -tm1);
  const int c = half_sum(tj2, tm2);
  const int d = half_sum(tJ - tj2, tm1);
  const int e = half_sum(tJ - tj1, -tm2);
  const int k_min = std::max({0, -d, -e});
  const int k_max = std::min({a, b, c});

  double sum = 0.0;
  for (int k = k_min; k <= k_max; ++k) {
    const double denom = factorial(k) * factorial(a - k) * factorial(b - k) * factorial(c - k) *
                         factorial(d + k) * factorial(e + k);
    sum += ((k % 2 == 0) ? 1.0 : -1.0) / denom;
  }
  return std::sqrt(triangle * projections) * sum;
}

}  // namespace opmag
