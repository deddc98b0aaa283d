#include "mvjump/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "mvjump/errors.hpp"
#include "mvjump/io.hpp"
#include "mvjump/parallel.hpp"
#include "mvjump/random.hpp"

namespace mvjump {

namespace {

constexpr double kCutoff = 8.0;
constexpr double kInversionSlack = 1e-12;

}  // namespace

double v_n(std::size_t N, std::size_t d) {
  if (N < 1) throw ConfigError("v_n: N must be >= 1");
  if (d < 1) throw ConfigError("v_n: d must be >= 1");
  const double n = static_cast<double>(N);
  if (d == 1) return 1.0 / std::sqrt(n);
  if (d == 2) return std::log1p(n) / std::sqrt(n);
  return std::pow(n, -1.0 / static_cast<double>(d));
}

std::size_t min_particles(double bound, std::size_t d) {
  if (!(bound > 0.0) || !std::isfinite(bound)) throw ConfigError("min_particles: bound must be > 0");
  constexpr double kLimit = 1e18;
  auto ok = [&](std::size_t n) { return v_n(n, d) <= bound * (1.0 + kInversionSlack); };
  if (d != 2) {
    const double guess = std::pow(bound, -(d == 1 ? 2.0 : static_cast<double>(d)));
    if (guess > kLimit) throw NumericError("min_particles: required N exceeds 1e18");
    auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(guess * (1.0 - kInversionSlack))));
    while (n > 1 && ok(n - 1)) --n;
    while (!ok(n)) ++n;
    return n;
  }
  // ln(1 + N) / sqrt(N) rises up to N = 4 and decreases afterwards.
  constexpr std::size_t kScan = 64;
  for (std::size_t n = 1; n <= kScan; ++n) {
    if (ok(n)) return n;
  }
  std::size_t lo = kScan, hi = 2 * kScan;
  while (!ok(hi)) {
    lo = hi;
    hi *= 2;
    if (static_cast<double>(hi) > kLimit) throw NumericError("min_particles: required N exceeds 1e18");
  }
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

const char* rule_name(Rule r) noexcept {
  switch (r) {
    case Rule::DensityPlain: return "density-plain";
    case Rule::DensityRomberg: return "density-romberg";
    case Rule::TvPlain: return "tv-plain";
    case Rule::TvRomberg: return "tv-romberg";
  }
  return "?";
}

Rule parse_rule(const std::string& name) {
  for (Rule r : {Rule::DensityPlain, Rule::DensityRomberg, Rule::TvPlain, Rule::TvRomberg}) {
    if (name == rule_name(r)) return r;
  }
  throw ConfigError("unknown estimator rule '" + name +
                    "' (expected density-plain, density-romberg, tv-plain or tv-romberg)");
}

namespace {

void check_inputs(double abs_P, double eps_M, std::size_t d) {
  if (!(abs_P >= 0.0) || !(eps_M >= 0.0)) throw ConfigError("estimator rule: |P| and eps_M must be >= 0");
  if (d < 1) throw ConfigError("estimator rule: d must be >= 1");
}

}  // namespace

EstimatorParams select_density_params(double abs_P, double eps_M, std::size_t d, bool romberg) {
  check_inputs(abs_P, eps_M, d);
  EstimatorParams p;
  p.rule = romberg ? Rule::DensityRomberg : Rule::DensityPlain;
  p.d = d;
  p.base = abs_P + std::sqrt(eps_M);
  if (p.base == 0.0) throw ConfigError("estimator rule: |P| + sqrt(eps_M) = 0 is degenerate");
  p.base_above_one = p.base > 1.0;
  const double dd = static_cast<double>(d);
  p.delta = std::pow(p.base, 1.0 / (dd + (romberg ? 5.0 : 3.0)));
  p.vn_bound = p.base;
  p.n_required = min_particles(p.vn_bound, d);
  return p;
}

EstimatorParams select_tv_params(double abs_P, double eps_M, std::size_t d, double epsilon,
                                 bool romberg) {
  check_inputs(abs_P, eps_M, d);
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("estimator rule: epsilon must be in (0, 1)");
  EstimatorParams p;
  p.rule = romberg ? Rule::TvRomberg : Rule::TvPlain;
  p.d = d;
  p.epsilon = epsilon;
  p.base = abs_P + eps_M;
  if (p.base == 0.0) throw ConfigError("estimator rule: |P| + eps_M = 0 is degenerate");
  p.base_above_one = p.base > 1.0;
  const double e = epsilon;
  const double dd = static_cast<double>(d);
  if (!romberg) {
    const double e1 = e / (2.0 - e);
    const double e2 = ((dd + 5.0) * e - 2.0 * e * e) / ((dd + 3.0) * (2.0 - e));
    p.delta = std::pow(p.base, 0.5 * (1.0 - e1));
    p.vn_bound = std::pow(p.base, 0.5 * (dd + 3.0) * (1.0 - e2));
  } else {
    const double e1 = e * e / (2.0 - e);
    const double e2 = (8.0 * e + (dd - 3.0) * e * e) / ((dd + 5.0) * (2.0 - e));
    p.delta = std::pow(p.base, 0.25 * (1.0 - e1));
    p.vn_bound = std::pow(p.base, 0.25 * (dd + 5.0) * (1.0 - e2));
  }
  p.n_required = min_particles(p.vn_bound, d);
  return p;
}

double gaussian_kernel(Point x, double delta) {
  const double d = static_cast<double>(x.size());
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return std::exp(-0.5 * r2 / (delta * delta)) /
         std::pow(delta * std::sqrt(2.0 * std::numbers::pi), d);
}

namespace {

// Plain kernel sums at every grid point for one bandwidth.
std::vector<double> kernel_sums(const Positions& particles, const Positions& grid, double h,
                                unsigned threads) {
  const std::size_t d = particles.dim();
  const std::size_t G = grid.size();
  const double reach = kCutoff * h;
  const double norm_const = 1.0 / std::pow(h * std::sqrt(2.0 * std::numbers::pi), static_cast<double>(d));
  const double inv2h2 = 0.5 / (h * h);
  const double invN = 1.0 / static_cast<double>(particles.size());
  std::vector<double> out(G, 0.0);

  if (d == 1) {
    std::vector<double> sorted = particles.column(0);
    std::sort(sorted.begin(), sorted.end());
    parallel_chunks(G, 64, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
      for (std::size_t g = lo; g < hi; ++g) {
        const double x = grid.row(g)[0];
        auto first = std::lower_bound(sorted.begin(), sorted.end(), x - reach);
        auto last = std::upper_bound(first, sorted.end(), x + reach);
        double sum = 0.0;
        for (auto it = first; it != last; ++it) {
          const double u = *it - x;
          sum += std::exp(-u * u * inv2h2);
        }
        out[g] = sum * norm_const * invN;
      }
    });
    return out;
  }

  using Cell = std::vector<std::int64_t>;
  auto cell_of = [&](Point x) {
    Cell c(d);
    for (std::size_t j = 0; j < d; ++j) c[j] = static_cast<std::int64_t>(std::floor(x[j] / reach));
    return c;
  };
  std::map<Cell, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < particles.size(); ++i) cells[cell_of(particles.row(i))].push_back(i);

  std::size_t neighbours = 1;
  for (std::size_t j = 0; j < d; ++j) neighbours *= 3;
  const double reach2 = reach * reach;

  parallel_chunks(G, 64, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    Cell probe(d);
    for (std::size_t g = lo; g < hi; ++g) {
      Point x = grid.row(g);
      const Cell home = cell_of(x);
      double sum = 0.0;
      for (std::size_t n = 0; n < neighbours; ++n) {
        std::size_t code = n;
        for (std::size_t j = 0; j < d; ++j) {
          probe[j] = home[j] + static_cast<std::int64_t>(code % 3) - 1;
          code /= 3;
        }
        auto it = cells.find(probe);
        if (it == cells.end()) continue;
        for (std::size_t i : it->second) {
          Point y = particles.row(i);
          double r2 = 0.0;
          for (std::size_t j = 0; j < d; ++j) r2 += (y[j] - x[j]) * (y[j] - x[j]);
          if (r2 <= reach2) sum += std::exp(-r2 * inv2h2);
        }
      }
      out[g] = sum * norm_const * invN;
    }
  });
  return out;
}

}  // namespace

DensityEstimate kde_estimate(const Positions& particles, const Positions& grid, double delta,
                             bool romberg, unsigned threads) {
  if (!(delta > 0.0)) throw ConfigError("kde_estimate: delta must be > 0");
  if (particles.empty()) throw ConfigError("kde_estimate: no particles");
  if (grid.dim() != particles.dim()) throw ConfigError("kde_estimate: grid dimension differs");
  DensityEstimate est;
  est.grid = grid;
  est.delta = delta;
  est.romberg = romberg;
  est.N = particles.size();
  est.values = kernel_sums(particles, grid, delta, threads);
  if (romberg) {
    const auto half = kernel_sums(particles, grid, delta / std::sqrt(2.0), threads);
    for (std::size_t g = 0; g < est.values.size(); ++g) {
      est.values[g] = 2.0 * half[g] - est.values[g];
      est.negative_values += est.values[g] < 0.0;
    }
  }
  return est;
}

void DensityEstimate::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (std::size_t j = 0; j < grid.dim(); ++j) out << 'x' << j + 1 << ',';
  out << "value,method,delta,N\n";
  const char* method = romberg ? "romberg" : "plain";
  for (std::size_t g = 0; g < values.size(); ++g) {
    for (double x : grid.row(g)) out << format_double(x) << ',';
    out << format_double(values[g]) << ',' << method << ',' << format_double(delta) << ',' << N
        << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

TestFunction TestFunction::constant(double value) {
  TestFunction f;
  f.kind_ = Kind::Constant;
  f.value_ = value;
  f.bound_ = std::fabs(value);
  f.name_ = "constant";
  return f;
}

TestFunction TestFunction::box(Vec lower, Vec upper) {
  if (lower.empty() || lower.size() != upper.size()) {
    throw ConfigError("box test function: bounds must be nonempty and of equal length");
  }
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (!(lower[j] <= upper[j])) throw ConfigError("box test function: lower bound above upper");
  }
  TestFunction f;
  f.kind_ = Kind::Box;
  f.lower_ = std::move(lower);
  f.upper_ = std::move(upper);
  f.bound_ = 1.0;
  f.name_ = "box";
  return f;
}

TestFunction TestFunction::general(std::function<double(Point)> fn, double bound, std::string name) {
  if (!fn) throw ConfigError("test function: empty callable");
  if (!(bound >= 0.0)) throw ConfigError("test function: bound must be >= 0");
  TestFunction f;
  f.kind_ = Kind::General;
  f.f_ = std::move(fn);
  f.bound_ = bound;
  f.name_ = std::move(name);
  return f;
}

double TestFunction::operator()(Point x) const {
  switch (kind_) {
    case Kind::Constant: return value_;
    case Kind::Box:
      for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] < lower_[j] || x[j] > upper_[j]) return 0.0;
      }
      return 1.0;
    case Kind::General: return f_(x);
  }
  return 0.0;
}

namespace {

// P(a <= Z <= b) for standard normal Z, computed on the side with less cancellation.
double normal_mass(double a, double b) {
  constexpr double r = std::numbers::sqrt2;
  if (a >= 0.0) return 0.5 * (std::erfc(a / r) - std::erfc(b / r));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / r) - std::erfc(-a / r));
  return 1.0 - 0.5 * (std::erfc(-a / r) + std::erfc(b / r));
}

double box_average(const Positions& particles, const TestFunction& f, double h) {
  double sum = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    Point x = particles.row(i);
    double p = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      p *= normal_mass((f.lower()[j] - x[j]) / h, (f.upper()[j] - x[j]) / h);
    }
    sum += p;
  }
  return sum / static_cast<double>(particles.size());
}

double mc_average(const Positions& particles, const TestFunction& f, double h,
                  const std::vector<double>& draws, std::size_t pairs) {
  const std::size_t d = particles.dim();
  Vec y(d);
  double sum = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    Point x = particles.row(i);
    double acc = 0.0;
    for (std::size_t q = 0; q < pairs; ++q) {
      const double* g = draws.data() + q * d;
      for (std::size_t j = 0; j < d; ++j) y[j] = x[j] + h * g[j];
      acc += f(y);
      for (std::size_t j = 0; j < d; ++j) y[j] = x[j] - h * g[j];
      acc += f(y);
    }
    sum += acc / static_cast<double>(2 * pairs);
  }
  return sum / static_cast<double>(particles.size());
}

}  // namespace

double smoothed_expectation(const Positions& particles, const TestFunction& f, double delta,
                            bool romberg, const SmoothingOptions& options) {
  if (!(delta > 0.0)) throw ConfigError("smoothed_expectation: delta must be > 0");
  if (particles.empty()) throw ConfigError("smoothed_expectation: no particles");
  if (f.kind() == TestFunction::Kind::Box && f.lower().size() != particles.dim()) {
    throw ConfigError("smoothed_expectation: box dimension differs from particles");
  }
  const bool monte_carlo = options.mode == SmoothingOptions::Mode::MonteCarlo ||
                           f.kind() == TestFunction::Kind::General;
  if (!monte_carlo) {
    if (f.kind() == TestFunction::Kind::Constant) return f(Point{});
    const double plain = box_average(particles, f, delta);
    if (!romberg) return plain;
    return 2.0 * box_average(particles, f, delta / std::sqrt(2.0)) - plain;
  }
  if (options.gauss_budget < 2) {
    throw ConfigError("smoothed_expectation: gauss_budget must be >= 2 in Monte Carlo mode");
  }
  const std::size_t d = particles.dim();
  const std::size_t pairs = options.gauss_budget / 2;
  std::vector<double> draws(pairs * d);
  Stream s = StreamFamily(options.seed).stream({Purpose::Smoothing, 0, 0, 0});
  for (double& g : draws) g = s.normal();
  const double plain = mc_average(particles, f, delta, draws, pairs);
  if (!romberg) return plain;
  return 2.0 * mc_average(particles, f, delta / std::sqrt(2.0), draws, pairs) - plain;
}

}  // namespace mvjump
