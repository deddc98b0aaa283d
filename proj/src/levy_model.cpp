#include "mvjump/levy_model.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mvjump/errors.hpp"

namespace mvjump {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ipow(double r, std::size_t n) {
  double out = 1.0;
  for (std::size_t i = 0; i < n; ++i) out *= r;
  return out;
}

}  // namespace

double unit_sphere_area(std::size_t d) {
  const double half = 0.5 * static_cast<double>(d);
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

double unit_ball_volume(std::size_t d) {
  const double half = 0.5 * static_cast<double>(d);
  return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
}

LevyMeasureModel::LevyMeasureModel(LevyMeasureSpec spec, LevyModelOptions options)
    : spec_(std::move(spec)), options_(options) {
  if (spec_.dimension == 0) throw ConfigError("levy model: dimension must be positive");
  if (spec_.max_ring == 0) throw ConfigError("levy model: max_ring must be positive");
  if (!spec_.radial_profile && !spec_.density) {
    throw ConfigError("levy model '" + spec_.name + "': no density supplied");
  }
  if (!radial() && spec_.dimension > 2) {
    throw ConfigError("levy model '" + spec_.name +
                      "': non-radial densities are supported for d <= 2 only");
  }
  if (spec_.support_lower_radius < 0.0) {
    throw ConfigError("levy model: support_lower_radius must be nonnegative");
  }

  masses_.resize(spec_.max_ring);
  cumulative_.resize(spec_.max_ring);
  double running = 0.0;
  for (std::size_t k = 1; k <= spec_.max_ring; ++k) {
    const double m = shell_mass(k == 1 ? 0.0 : static_cast<double>(k - 1), static_cast<double>(k));
    if (!(m >= 0.0)) {
      throw NumericError("levy model '" + spec_.name + "': negative or NaN ring mass");
    }
    masses_[k - 1] = m;
    running += m;
    cumulative_[k - 1] = running;
  }
  if (radial()) {
    build_radial_tables();
  } else {
    build_rejection_bounds();
  }
}

double LevyMeasureModel::profile(double r) const {
  if (r < spec_.support_lower_radius) return 0.0;
  return spec_.radial_profile(r);
}

double LevyMeasureModel::density(Point z) const {
  if (spec_.density) {
    if (norm(z) < spec_.support_lower_radius) return 0.0;
    return spec_.density(z);
  }
  return profile(norm(z));
}

double LevyMeasureModel::annulus_mass(std::size_t k) const {
  if (k < 1 || k > spec_.max_ring) {
    std::ostringstream msg;
    msg << "annulus_mass: ring " << k << " outside 1.." << spec_.max_ring;
    throw ConfigError(msg.str());
  }
  return masses_[k - 1];
}

double LevyMeasureModel::truncated_mass(std::size_t m) const {
  if (m == 0) return 0.0;
  if (m > spec_.max_ring) throw ConfigError("truncated_mass: cutoff exceeds max_ring");
  return cumulative_[m - 1];
}

double LevyMeasureModel::radial_integral(const std::function<double(double)>& g, double a,
                                         double b) const {
  const double lo = std::max(a, spec_.support_lower_radius);
  if (!(b > lo)) return 0.0;
  const double area = unit_sphere_area(spec_.dimension);
  const std::size_t dm1 = spec_.dimension - 1;
  auto integrand = [&](double r) {
    return area * ipow(r, dm1) * spec_.radial_profile(r) * g(r);
  };
  return integrate(integrand, lo, b, options_.quadrature).value;
}

double LevyMeasureModel::shell_mass(double inner, double outer) const {
  if (outer <= inner) return 0.0;
  if (spec_.radial_mass) return spec_.radial_mass(inner, outer);
  static const ScalarField one = [](Point) { return 1.0; };
  return shell_integral(one, true, inner, outer);
}

double LevyMeasureModel::ball_mass(double radius) const {
  static const ScalarField one = [](Point) { return 1.0; };
  return shell_integral(one, true, 0.0, radius);
}

double LevyMeasureModel::shell_integral(const ScalarField& f, bool f_radial, double inner,
                                        double outer) const {
  if (!(outer > inner)) return 0.0;
  const std::size_t d = spec_.dimension;
  if (radial() && f_radial) {
    std::vector<double> z(d, 0.0);
    return radial_integral(
        [&](double r) {
          z[0] = r;
          return f(z);
        },
        inner, outer);
  }
  const double lo = std::max(inner, spec_.support_lower_radius);
  if (!(outer > lo)) return 0.0;
  if (d == 1) {
    auto integrand = [&](double r) {
      double p = r;
      double m = -r;
      return density(Point(&p, 1)) * f(Point(&p, 1)) + density(Point(&m, 1)) * f(Point(&m, 1));
    };
    return integrate(integrand, lo, outer, options_.quadrature).value;
  }
  if (d == 2) {
    QuadratureOptions inner_opts = options_.quadrature;
    inner_opts.abs_tol *= 1e-2;
    auto integrand = [&](double r) {
      auto angular = [&](double theta) {
        const double z[2] = {r * std::cos(theta), r * std::sin(theta)};
        return density(Point(z, 2)) * f(Point(z, 2));
      };
      return r * integrate(angular, 0.0, 2.0 * std::numbers::pi, inner_opts).value;
    };
    return integrate(integrand, lo, outer, options_.quadrature).value;
  }
  throw ConfigError("shell_integral: non-radial integrand in d > 2 is not supported");
}

void LevyMeasureModel::build_radial_tables() {
  using boost::math::quadrature::gauss;
  const std::size_t n = std::max<std::size_t>(options_.cdf_table_points, 2);
  const std::size_t dm1 = spec_.dimension - 1;
  tables_.resize(spec_.max_ring);
  for (std::size_t k = 1; k <= spec_.max_ring; ++k) {
    RingTable& t = tables_[k - 1];
    t.r_lo = std::max(static_cast<double>(k - 1), spec_.support_lower_radius);
    t.r_hi = static_cast<double>(k);
    if (!(t.r_hi > t.r_lo) || masses_[k - 1] <= 0.0) continue;
    t.radii.resize(n);
    t.cdf.resize(n);
    const double h = (t.r_hi - t.r_lo) / static_cast<double>(n - 1);
    auto w = [&](double r) { return ipow(r, dm1) * spec_.radial_profile(r); };
    t.radii[0] = t.r_lo;
    t.cdf[0] = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
      const double a = t.r_lo + h * static_cast<double>(j - 1);
      const double b = (j == n - 1) ? t.r_hi : t.r_lo + h * static_cast<double>(j);
      t.radii[j] = b;
      t.cdf[j] = t.cdf[j - 1] + gauss<double, 15>::integrate(w, a, b);
    }
    const double total = t.cdf.back();
    if (!(total > 0.0)) {
      throw NumericError("levy model '" + spec_.name + "': degenerate radial CDF table");
    }
    for (double& c : t.cdf) c /= total;
  }
}

void LevyMeasureModel::build_rejection_bounds() {
  const std::size_t d = spec_.dimension;
  rejection_.resize(spec_.max_ring);
  for (std::size_t k = 1; k <= spec_.max_ring; ++k) {
    const double r_lo = static_cast<double>(k - 1);
    const double r_hi = static_cast<double>(k);
    double sup = 0.0;
    if (d == 1) {
      const int n = 1024;
      for (int j = 0; j <= n; ++j) {
        const double r = r_lo + (r_hi - r_lo) * j / n;
        const double p = r, m = -r;
        sup = std::max({sup, density(Point(&p, 1)), density(Point(&m, 1))});
      }
    } else {
      const int nr = 128, na = 256;
      for (int i = 0; i <= nr; ++i) {
        const double r = r_lo + (r_hi - r_lo) * i / nr;
        for (int j = 0; j < na; ++j) {
          const double th = 2.0 * std::numbers::pi * j / na;
          const double z[2] = {r * std::cos(th), r * std::sin(th)};
          sup = std::max(sup, density(Point(z, 2)));
        }
      }
    }
    RingRejection& rr = rejection_[k - 1];
    rr.bound = 1.1 * sup;
    const double volume =
        unit_ball_volume(d) * (ipow(r_hi, d) - ipow(r_lo, d));
    rr.acceptance = rr.bound > 0.0 ? masses_[k - 1] / (volume * rr.bound) : 0.0;
  }
}

double LevyMeasureModel::acceptance_rate(std::size_t k) const {
  if (k < 1 || k > spec_.max_ring) throw ConfigError("acceptance_rate: ring out of range");
  return radial() ? 1.0 : rejection_[k - 1].acceptance;
}

void LevyMeasureModel::uniform_direction(Stream& stream, MutPoint out) const {
  if (out.size() == 1) {
    out[0] = stream.uniform() < 0.5 ? -1.0 : 1.0;
    return;
  }
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& x : out) {
      x = stream.normal();
      n2 += x * x;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : out) x *= inv;
}

double LevyMeasureModel::sample_radius(std::size_t k, Stream& stream) const {
  const RingTable& t = tables_[k - 1];
  const double u = stream.uniform();
  auto it = std::upper_bound(t.cdf.begin(), t.cdf.end(), u);
  std::size_t j = static_cast<std::size_t>(it - t.cdf.begin());
  if (j == 0) j = 1;
  if (j >= t.cdf.size()) j = t.cdf.size() - 1;
  const double c0 = t.cdf[j - 1];
  const double c1 = t.cdf[j];
  const double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
  double r = t.radii[j - 1] + frac * (t.radii[j] - t.radii[j - 1]);
  const double lower = static_cast<double>(k - 1);
  if (k > 1 && r <= lower) r = std::nextafter(lower, kInf);
  return std::min(r, t.r_hi);
}

void LevyMeasureModel::sample_in_annulus(std::size_t k, Stream& stream, MutPoint out) const {
  const double mass = annulus_mass(k);
  if (!(mass > 0.0)) {
    std::ostringstream msg;
    msg << "sample_in_annulus: ring " << k << " of '" << spec_.name << "' has zero mass";
    throw NumericError(msg.str());
  }
  if (out.size() != spec_.dimension) throw ConfigError("sample_in_annulus: output size != d");

  if (radial()) {
    const double r = sample_radius(k, stream);
    uniform_direction(stream, out);
    for (double& x : out) x *= r;
    return;
  }

  const RingRejection& rr = rejection_[k - 1];
  if (rr.acceptance < options_.rejection_floor) {
    std::ostringstream msg;
    msg << "sample_in_annulus: rejection acceptance " << rr.acceptance << " on ring " << k
        << " is below the floor " << options_.rejection_floor
        << "; supply a radial profile or a tighter proposal";
    throw NumericError(msg.str());
  }
  const std::size_t d = spec_.dimension;
  const double lo_d = ipow(static_cast<double>(k - 1), d);
  const double hi_d = ipow(static_cast<double>(k), d);
  const std::size_t max_attempts =
      static_cast<std::size_t>(std::ceil(50.0 / std::max(rr.acceptance, 1e-12)));
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    double r = std::pow(lo_d + stream.uniform() * (hi_d - lo_d), 1.0 / static_cast<double>(d));
    if (k > 1 && r <= static_cast<double>(k - 1)) r = std::nextafter(static_cast<double>(k - 1), kInf);
    uniform_direction(stream, out);
    for (double& x : out) x *= r;
    if (stream.uniform() * rr.bound <= density(out)) return;
  }
  throw NumericError("sample_in_annulus: rejection sampler exhausted its attempt budget");
}

Vec LevyMeasureModel::sample_in_annulus(std::size_t k, Stream& stream) const {
  Vec z(spec_.dimension);
  sample_in_annulus(k, stream, z);
  return z;
}

}  // namespace mvjump
