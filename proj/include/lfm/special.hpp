#pragma once

namespace lfm::special {

// Error function, complementary error function, and the scaled complement
// erfcx(x) = exp(x^2) * erfc(x).
//
// Rational Chebyshev approximations after W. J. Cody (Math. Comp. 23, 1969;
// netlib SPECFUN), three ranges split at |x| = 0.46875 and |x| = 4. Absolute
// error of erf is below 1e-16; erfcx is accurate to a few ulp over its whole
// domain, which is what makes the overflow-free kernel evaluation in
// lfm_kernel.hpp possible.
double erf(double x);
double erfc(double x);
double erfcx(double x);

// exp(s) * erfcx(x) without overflow for x < 0, provided s + x^2 stays within
// the representable exponent range (all call sites in this project satisfy
// s + x^2 <= 0).
double exp_erfcx(double s, double x);

}  // namespace lfm::special
