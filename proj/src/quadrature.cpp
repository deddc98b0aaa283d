#include "mvjump/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "mvjump/errors.hpp"

namespace mvjump {

namespace {

QuadratureResult integrate_finite(const std::function<double(double)>& f, double a, double b,
                                  const QuadratureOptions& options) {
  using boost::math::quadrature::gauss_kronrod;
  double error = 0.0;
  double l1 = 0.0;
  // Boost's criterion is relative to the L1 norm; ask for more than we check.
  const double value = gauss_kronrod<double, 31>::integrate(
      f, a, b, options.max_depth, options.rel_tol * 1e-2, &error, &l1);
  const double allowed = std::max(options.abs_tol, options.rel_tol * std::fabs(value));
  if (!std::isfinite(value) || !(error <= allowed)) {
    std::ostringstream msg;
    msg << "quadrature on [" << a << ", " << b << "] did not reach tolerance: value=" << value
        << " error=" << error << " allowed=" << allowed;
    throw QuadratureError(msg.str(), error);
  }
  return {value, error};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& options) {
  if (a == b) return {};
  if (std::isnan(a) || std::isnan(b) || b < a || std::isinf(a)) {
    throw ConfigError("integrate: invalid interval");
  }
  if (!std::isinf(b)) return integrate_finite(f, a, b, options);

  // [a, inf): integrate [a, 1] directly, then substitute r = e^s so that
  // algebraic tails become exponential ones before Boost's own mapping.
  QuadratureResult head;
  const double c = std::max(a, 1.0);
  if (a < c) head = integrate_finite(f, a, c, options);
  auto g = [&](double s) {
    const double r = std::exp(s);
    if (!std::isfinite(r)) return 0.0;
    const double v = f(r) * r;
    return std::isfinite(v) ? v : 0.0;
  };
  QuadratureOptions tail_opts = options;
  tail_opts.abs_tol = std::max(options.abs_tol - head.error, 0.5 * options.abs_tol);
  const QuadratureResult tail =
      integrate_finite(g, std::log(c), std::numeric_limits<double>::infinity(), tail_opts);
  return {head.value + tail.value, head.error + tail.error};
}

}  // namespace mvjump
