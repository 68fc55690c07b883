#include <cmath>

#include "doctest.h"
#include "qfup/bessel.hpp"

using qfup::bessel_j0;

TEST_CASE("bessel_j0 matches the standard library across both branches") {
  // series branch, switch point, and asymptotic branch
  for (double x = 0.0; x <= 40.0; x += 0.0625) {
    const double ref = std::cyl_bessel_j(0.0, x);
    CHECK(std::fabs(bessel_j0(x) - ref) < 1e-12);
  }
  for (double x : {11.9, 12.0, 12.1})
    CHECK(std::fabs(bessel_j0(x) - std::cyl_bessel_j(0.0, x)) < 1e-12);
}

TEST_CASE("bessel_j0 special values and symmetry") {
  CHECK(bessel_j0(0.0) == 1.0);
  for (double x : {0.3, 1.7, 5.0, 23.25}) CHECK(bessel_j0(-x) == bessel_j0(x));
  // first zero near 2.404826
  CHECK(bessel_j0(2.404825557695773) < 1e-12);
  CHECK(bessel_j0(2.404825557695773) > -1e-12);
}
