// Special functions, quadrature, bracketed root finding and 1-D minimization.
//
// Everything here is a pure function of its arguments. lgamma from <cmath>
// writes the global signgam on glibc, so ln_gamma carries its own Lanczos
// implementation instead.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ditherlab {

/// Argument outside the domain of a function (x <= 0 for ln_gamma, q outside
/// (0,1) for a quantile, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative routine hit its iteration or subdivision limit.
class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// find_root was handed a bracket whose endpoints have the same sign.
class NoSignChange : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ToleranceConfig {
  double abs_tol = 1e-10;
  double rel_tol = 1e-9;
  int max_iter = 200;

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_iter < 1) {
      throw DomainError("ToleranceConfig: abs_tol, rel_tol must be > 0 and max_iter >= 1");
    }
  }
};

inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kSqrt2Pi = 2.5066282746310002;  // sqrt(2*pi)
inline constexpr double kInvSqrt2Pi = 0.3989422804014327;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274;

inline double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double std_normal_log_pdf(double x) { return -kLogSqrt2Pi - 0.5 * x * x; }

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

/// Upper tail Q(x) = 1 - Phi(x), accurate for large positive x.
inline double std_normal_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

namespace detail {

// Mills ratio Q(x)/phi(x) for x > 0 by the Laplace continued fraction,
// evaluated with the modified Lentz method. Only used in the far tail where
// erfc underflows, so convergence is quick.
inline double mills_ratio_cf(double x) {
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int n = 1; n < 500; ++n) {
    const double an = static_cast<double>(n);
    d = x + an * d;
    if (d == 0.0) d = tiny;
    c = x + an / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / f;
}

inline constexpr double kTailSwitch = 30.0;

// log Q(x), finite for any x.
inline double log_std_normal_sf(double x) {
  if (x < kTailSwitch) return std::log(std_normal_sf(x));
  return std_normal_log_pdf(x) + std::log(mills_ratio_cf(x));
}

}  // namespace detail

/// log(Phi(b) - Phi(a)) for a < b without cancellation or underflow in
/// either tail.
inline double log_normal_interval(double a, double b) {
  if (!(a < b)) return -std::numeric_limits<double>::infinity();
  if (b <= 0.0) return log_normal_interval(-b, -a);
  if (a < 0.0) {
    // Straddles zero: erf difference is well conditioned.
    return std::log(0.5 * (std::erf(b / kSqrt2) - std::erf(a / kSqrt2)));
  }
  // 0 <= a < b: difference of upper tails.
  const double log_qa = detail::log_std_normal_sf(a);
  if (std::isinf(b)) return log_qa;
  const double log_qb = detail::log_std_normal_sf(b);
  return log_qa + std::log1p(-std::exp(log_qb - log_qa));
}

/// E[Z | a < Z < b] for standard normal Z, i.e.
/// (phi(a) - phi(b)) / (Phi(b) - Phi(a)).
inline double normal_interval_mean(double a, double b) {
  const double log_p = log_normal_interval(a, b);
  const double ta = std::isinf(a) ? 0.0 : std::exp(std_normal_log_pdf(a) - log_p);
  const double tb = std::isinf(b) ? 0.0 : std::exp(std_normal_log_pdf(b) - log_p);
  return ta - tb;
}

/// Inverse of the standard normal CDF (Wichura, AS 241, PPND16).
inline double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("std_normal_quantile: p must lie in (0,1)");
  }
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

/// log Gamma(x) for x > 0. Lanczos (g = 7, 9 terms) for x >= 0.5,
/// reflection below.
inline double ln_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("ln_gamma: argument must be positive and finite, got " + std::to_string(x));
  }
  static constexpr std::array<double, 9> c = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    // Gamma(x) Gamma(1-x) = pi / sin(pi x)
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - ln_gamma(1.0 - x);
  }
  const double z = x - 1.0;
  double a = c[0];
  const double t = z + 7.5;
  for (int i = 1; i < 9; ++i) a += c[i] / (z + static_cast<double>(i));
  return kLogSqrt2Pi + (z + 0.5) * std::log(t) - t + std::log(a);
}

namespace detail {

// Series branch of P(a, x), given log x so that huge/tiny x^a stay finite.
inline double inc_gamma_series(double a, double x, double log_x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < 100000; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return std::exp(a * log_x - x - ln_gamma(a)) * sum;
}

// Continued fraction for Q(a, x) = 1 - P(a, x), valid for x >= a + 1.
inline double inc_gamma_cf_upper(double a, double x, double log_x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(a * log_x - x - ln_gamma(a)) * h;
}

// P(a, x) with x supplied in log form; x = exp(log_x) may underflow.
inline double reg_lower_inc_gamma_log(double a, double log_x) {
  if (log_x == -std::numeric_limits<double>::infinity()) return 0.0;
  if (log_x > 709.0) return 1.0;
  const double x = std::exp(log_x);
  if (x < a + 1.0) return std::min(1.0, inc_gamma_series(a, x, log_x));
  return std::max(0.0, 1.0 - inc_gamma_cf_upper(a, x, log_x));
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x).
inline double reg_lower_inc_gamma(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0) || std::isnan(x)) {
    throw DomainError("reg_lower_inc_gamma: need a > 0 and x >= 0");
  }
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return detail::reg_lower_inc_gamma_log(a, std::log(x));
}

// ---------------------------------------------------------------------------
// Quadrature

namespace detail {

struct GkSegment {
  double lo;
  double hi;
  double value;
  double error;
  bool operator<(const GkSegment& other) const { return error < other.error; }
};

// 7-point Gauss / 15-point Kronrod pair on [lo, hi].
template <class F>
GkSegment gauss_kronrod_15(F& f, double lo, double hi) {
  static constexpr std::array<double, 8> xk = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr std::array<double, 8> wk = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> wg = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double fc = f(center);
  double kronrod = fc * wk[7];
  double gauss = fc * wg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * xk[j];
    const double s = f(center - dx) + f(center + dx);
    kronrod += wk[j] * s;
    if (j % 2 == 1) gauss += wg[j / 2] * s;
  }
  kronrod *= half;
  gauss *= half;
  return {lo, hi, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of f over [lo, hi].
///
/// Optional interior breakpoints seed the initial partition; use them where
/// the integrand has features narrower than the interval (edges of a nearly
/// uniform density, for instance). The routine stops once the summed error
/// estimate drops below max(abs_tol * (1 + |I|), rel_tol * |I|); tol.max_iter
/// bounds the number of bisections.
template <class F>
double integrate(F&& f, double lo, double hi, const ToleranceConfig& tol = {},
                 const std::vector<double>& breakpoints = {}) {
  tol.validate();
  if (!(lo < hi)) throw DomainError("integrate: need lo < hi");

  std::vector<double> cuts{lo};
  for (double b : breakpoints) {
    if (b > lo && b < hi) cuts.push_back(b);
  }
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  // Each segment starts as kInitialPieces equal pieces so that a feature
  // falling between the nodes of a single rule is still sampled.
  constexpr int kInitialPieces = 8;
  std::priority_queue<detail::GkSegment> heap;
  double total = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double width = (cuts[i + 1] - cuts[i]) / kInitialPieces;
    for (int j = 0; j < kInitialPieces; ++j) {
      const double a = cuts[i] + j * width;
      const double b = j + 1 == kInitialPieces ? cuts[i + 1] : a + width;
      auto seg = detail::gauss_kronrod_15(f, a, b);
      total += seg.value;
      error += seg.error;
      heap.push(seg);
    }
  }

  auto good_enough = [&] {
    return error <= std::max(tol.abs_tol * (1.0 + std::abs(total)), tol.rel_tol * std::abs(total));
  };
  for (int iter = 0; !good_enough(); ++iter) {
    if (iter >= tol.max_iter) {
      throw NonConvergence("integrate: subdivision limit reached on [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "], error estimate " + std::to_string(error));
    }
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      throw NonConvergence("integrate: interval collapsed below machine resolution");
    }
    auto left = detail::gauss_kronrod_15(f, worst.lo, mid);
    auto right = detail::gauss_kronrod_15(f, mid, worst.hi);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Root finding and minimization

/// Brent's method: inverse quadratic / secant steps, falling back to
/// bisection whenever the interpolated step leaves the bracket or shrinks too
/// slowly. Returns once |f(x)| is exactly zero or the bracket is narrower than
/// abs_tol + rel_tol * |x|.
template <class F>
double find_root(F&& f, double lo, double hi, const ToleranceConfig& tol = {}) {
  tol.validate();
  double a = lo;
  double b = hi;
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (std::isnan(fa) || std::isnan(fb)) throw DomainError("find_root: function is NaN at bracket end");
  if ((fa > 0.0) == (fb > 0.0)) {
    throw NoSignChange("find_root: f has the same sign at " + std::to_string(lo) + " and " + std::to_string(hi));
  }

  double c = a;
  double fc = fa;
  double d = b - a;
  double e = d;
  for (int iter = 0; iter < tol.max_iter; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 0.5 * (tol.abs_tol + tol.rel_tol * std::abs(b)) +
                        2.0 * std::numeric_limits<double>::epsilon() * std::abs(b);
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return b;

    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      double p;
      double q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      const double min1 = 3.0 * xm * q - std::abs(tol1 * q);
      const double min2 = std::abs(e * q);
      if (2.0 * p < std::min(min1, min2)) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol1 ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = f(b);
    if (std::isnan(fb)) throw DomainError("find_root: function returned NaN");
  }
  throw NonConvergence("find_root: no convergence after " + std::to_string(tol.max_iter) + " iterations");
}

/// Golden-section search for the minimizer of a unimodal f on [lo, hi].
/// Stops when the bracket is narrower than abs_tol.
template <class F>
double minimize_1d(F&& f, double lo, double hi, const ToleranceConfig& tol = {}) {
  tol.validate();
  if (!(lo < hi)) throw DomainError("minimize_1d: need lo < hi");
  constexpr double inv_phi = 0.61803398874989484820;
  double a = lo;
  double b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int iter = 0; iter < tol.max_iter; ++iter) {
    if (b - a <= tol.abs_tol) {
      return f1 < f2 ? x1 : x2;
    }
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  throw NonConvergence("minimize_1d: bracket still wider than abs_tol after " + std::to_string(tol.max_iter) +
                       " iterations");
}

}  // namespace ditherlab
