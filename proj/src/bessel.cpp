#include "nonstat/errors.hpp"
#include "nonstat/matern.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace nonstat {

namespace {

constexpr double kEuler = 0.57721566490153286061;
constexpr double kEps = 1e-17;

// K0 and K1 by the ascending series, valid for 0 < x <= 2.
std::pair<double, double> k01_series(double x) {
  const double q = 0.25 * x * x;
  const double lnh = std::log(0.5 * x);

  // I0, I1 and the harmonic-number sums, term by term.
  double t0 = 1.0; // (x^2/4)^k / (k!)^2
  double t1 = 1.0; // (x^2/4)^k / (k! (k+1)!)
  double i0 = 0.0, i1 = 0.0;
  double s0 = 0.0; // sum t0 * H_k
  double s1 = 0.0; // sum t1 * (psi(k+1) + psi(k+2))
  double hk = 0.0; // H_k
  for (int k = 0; k < 200; ++k) {
    if (k > 0) {
      t0 *= q / (double(k) * double(k));
      t1 *= q / (double(k) * double(k + 1));
      hk += 1.0 / double(k);
    }
    i0 += t0;
    i1 += t1;
    s0 += t0 * hk;
    const double psi1 = -kEuler + hk;
    const double psi2 = psi1 + 1.0 / double(k + 1);
    s1 += t1 * (psi1 + psi2);
    if (t0 < kEps * i0 && t1 < kEps * i1)
      break;
  }
  i1 *= 0.5 * x;
  const double k0 = -(lnh + kEuler) * i0 + s0;
  const double k1 = 1.0 / x + lnh * i1 - 0.25 * x * s1;
  return {k0, k1};
}

// K0 and K1 by Steed's method on Temme's continued fraction, x > 2.
std::pair<double, double> k01_fraction(double x) {
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0, q2 = 1.0;
  const double a1 = 0.25;
  double q = a1, c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 1; i < 100000; ++i) {
    a -= 2.0 * i;
    c = -a * c / (i + 1.0);
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::fabs(dels / s) < kEps)
      break;
  }
  h = a1 * h;
  const double k0 = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
  const double k1 = k0 * (x + 0.5 - h) / x;
  return {k0, k1};
}

} // namespace

double bessel_k(int order, double x) {
  if (!(x > 0.0) || std::isnan(x))
    throw DomainError("bessel_k requires x > 0");
  if (order < 0 || order > 2)
    throw DomainError("bessel_k supports orders 0, 1, 2 (got " + std::to_string(order) + ")");
  if (x > 705.0)
    return 0.0;
  const auto [k0, k1] = x <= 2.0 ? k01_series(x) : k01_fraction(x);
  switch (order) {
  case 0:
    return k0;
  case 1:
    return k1;
  default:
    return k0 + 2.0 / x * k1;
  }
}

} // namespace nonstat
