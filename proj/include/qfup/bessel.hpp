#pragma once

namespace qfup {

// Bessel function of the first kind, order zero, for real x.
// Power series up to |x| <= 12, asymptotic expansion beyond; absolute
// error below 1e-12 on the switch point (checked against the standard
// library implementation in the unit tests).
double bessel_j0(double x);

}  // namespace qfup
