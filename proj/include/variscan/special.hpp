#pragma once

namespace variscan {

// psi(x) = d/dx log Gamma(x), for x > 0.
double digamma(double x);

// psi_1(x) = d^2/dx^2 log Gamma(x), for x > 0.
double trigamma(double x);

}  // namespace variscan
