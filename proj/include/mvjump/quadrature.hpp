#pragma once

#include <functional>

namespace mvjump {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  unsigned max_depth = 20;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss-Kronrod (31 point) on [a, b]; b may be +infinity, in which
/// case the part beyond max(a, 1) is integrated in the variable ln r.
/// Throws QuadratureError when the error estimate exceeds
/// max(abs_tol, rel_tol * |value|).
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& options = {});

}  // namespace mvjump
