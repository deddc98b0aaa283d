#include "mvjump/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "mvjump/errors.hpp"
#include "mvjump/parallel.hpp"
#include "mvjump/random.hpp"

namespace mvjump {

double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("wasserstein1: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t n = a.size(), m = b.size();
  if (n == m) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::fabs(a[i] - b[i]);
    return sum / static_cast<double>(n);
  }
  // Walk the merged breakpoints i/n and j/m of the two quantile functions.
  double sum = 0.0, u = 0.0;
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    const std::uint64_t ni = (i + 1) * m, nj = (j + 1) * n;
    const double next = static_cast<double>(std::min(ni, nj)) / static_cast<double>(n * m);
    sum += (next - u) * std::fabs(a[i] - b[j]);
    u = next;
    if (ni <= nj) ++i;
    if (nj <= ni) ++j;
  }
  return sum;
}

W1Result wasserstein1(const Positions& a, const Positions& b, const W1Options& options) {
  if (a.empty() || b.empty()) throw ConfigError("wasserstein1: empty sample");
  if (a.dim() != b.dim()) throw ConfigError("wasserstein1: samples differ in dimension");
  W1Result out;
  const std::size_t d = a.dim();
  if (d == 1) {
    out.value = wasserstein1_1d(a.column(0), b.column(0));
    return out;
  }
  if (options.directions == 0) throw ConfigError("wasserstein1: directions must be >= 1");
  out.sliced = true;
  out.directions = options.directions;
  std::vector<double> per(options.directions);
  const StreamFamily streams(options.seed);
  parallel_chunks(options.directions, 1, options.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      Stream s = streams.stream({Purpose::Direction, k, 0, 0});
      Vec dir(d);
      double len = 0.0;
      while (len == 0.0) {
        for (double& v : dir) v = s.normal();
        len = norm(dir);
      }
      for (double& v : dir) v /= len;
      auto project = [&](const Positions& p) {
        std::vector<double> out(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
          Point x = p.row(i);
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += x[j] * dir[j];
          out[i] = dot;
        }
        return out;
      };
      per[k] = wasserstein1_1d(project(a), project(b));
    }
  });
  for (double v : per) out.value += v;
  out.value /= static_cast<double>(options.directions);
  return out;
}

SmoothTestFunction SmoothTestFunction::cosine() {
  SmoothTestFunction f;
  f.name = "cos";
  f.value = [](Point x) {
    double s = 0.0;
    for (double v : x) s += std::cos(v);
    return s;
  };
  f.gradient = [](Point x, MutPoint g) {
    for (std::size_t j = 0; j < x.size(); ++j) g[j] = -std::sin(x[j]);
  };
  return f;
}

SmoothTestFunction SmoothTestFunction::coordinate(std::size_t j) {
  SmoothTestFunction f;
  f.name = "x" + std::to_string(j + 1);
  f.value = [j](Point x) { return x[j]; };
  f.gradient = [j](Point x, MutPoint g) {
    for (std::size_t k = 0; k < x.size(); ++k) g[k] = k == j ? 1.0 : 0.0;
  };
  return f;
}

nlohmann::json WeakResidual::to_json() const {
  return {{"t", t},
          {"h", h},
          {"residual", residual},
          {"signed_residual", signed_residual},
          {"change", change},
          {"drift_term", drift_term},
          {"jump_term", jump_term},
          {"std_error", std_error},
          {"change_std_error", change_std_error},
          {"jump_std_error", jump_std_error},
          {"M", M},
          {"truncated_mass", truncated_mass},
          {"draws", draws}};
}

namespace {

std::vector<double> ring_cdf(const LevyMeasureModel& levy, std::size_t M, double& mass) {
  if (M < 1 || M > levy.max_ring()) {
    throw ConfigError("weak residual: M must be in [1, " + std::to_string(levy.max_ring()) + "]");
  }
  std::vector<double> cdf(M);
  mass = 0.0;
  for (std::size_t k = 1; k <= M; ++k) cdf[k - 1] = mass += levy.annulus_mass(k);
  return cdf;
}

std::size_t pick_ring(const std::vector<double>& cdf, double mass, Stream& s) {
  const double u = s.uniform() * mass;
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), cdf.size() - 1)) + 1;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_error_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

double drift_pairing(const CoefficientModel& coeffs, const SmoothTestFunction& phi, double t,
                     Point x, const MeasureSummary& rho, MutPoint b, MutPoint g) {
  if (!coeffs.drift) return 0.0;
  eval_drift(coeffs, t, x, rho, b);
  phi.gradient(x, g);
  double dot = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) dot += b[j] * g[j];
  return dot;
}

}  // namespace

WeakResidual weak_residual(const Positions& at_t, const Positions& at_t_plus_h, double t, double h,
                           const LevyMeasureModel& levy, const CoefficientModel& coeffs,
                           std::size_t M, const SmoothTestFunction& phi,
                           const WeakResidualOptions& options) {
  if (!(h > 0.0)) throw ConfigError("weak residual: h must be > 0");
  if (at_t.empty() || at_t.size() != at_t_plus_h.size() || at_t.dim() != at_t_plus_h.dim()) {
    throw ConfigError("weak residual: snapshots must be nonempty and of equal shape");
  }
  if (options.mc_budget < 100) throw ConfigError("weak residual: mc_budget must be >= 100");
  if (!phi.value || !phi.gradient) throw ConfigError("weak residual: phi needs value and gradient");
  const std::size_t N = at_t.size(), d = at_t.dim();

  WeakResidual out;
  out.t = t;
  out.h = h;
  out.M = M;
  const auto cdf = ring_cdf(levy, M, out.truncated_mass);

  std::vector<double> diff(N);
  for (std::size_t i = 0; i < N; ++i) diff[i] = (phi.value(at_t_plus_h.row(i)) - phi.value(at_t.row(i))) / h;
  out.change = mean_of(diff);
  out.change_std_error = std_error_of(diff, out.change);

  const MeasureSummary rho(at_t);
  Vec b(d), g(d);
  for (std::size_t i = 0; i < N; ++i) out.drift_term += drift_pairing(coeffs, phi, t, at_t.row(i), rho, b, g);
  out.drift_term /= static_cast<double>(N);

  if (coeffs.jump) {
    std::vector<double> terms(options.mc_budget);
    Stream s = StreamFamily(options.seed).stream({Purpose::Residual, 0, 0, 0});
    Vec z(d), c(d), y(d);
    for (double& term : terms) {
      const std::size_t i = s.index(N), u = s.index(N);
      levy.sample_in_annulus(pick_ring(cdf, out.truncated_mass, s), s, z);
      Point x = at_t.row(i);
      eval_jump(coeffs, t, at_t.row(u), z, x, rho, c);
      for (std::size_t j = 0; j < d; ++j) y[j] = x[j] + c[j];
      term = out.truncated_mass * (phi.value(y) - phi.value(x));
    }
    out.jump_term = mean_of(terms);
    out.jump_std_error = std_error_of(terms, out.jump_term);
    out.draws = terms.size();
  }
  out.signed_residual = out.change - out.drift_term - out.jump_term;
  out.residual = std::fabs(out.signed_residual);
  out.std_error = std::hypot(out.change_std_error, out.jump_std_error);
  return out;
}

WeakResidualPath::WeakResidualPath(std::shared_ptr<const LevyMeasureModel> levy, CoefficientModel coeffs,
                                   std::size_t M, SmoothTestFunction phi, std::size_t draws_per_step,
                                   std::uint64_t seed, unsigned threads)
    : levy_(std::move(levy)), coeffs_(std::move(coeffs)), M_(M), phi_(std::move(phi)),
      draws_(draws_per_step), seed_(seed), threads_(threads) {
  if (!levy_) throw ConfigError("weak residual: no Levy measure");
  if (draws_ < 1) throw ConfigError("weak residual: draws_per_step must be >= 1");
  if (!phi_.value || !phi_.gradient) throw ConfigError("weak residual: phi needs value and gradient");
  ring_cdf_ = ring_cdf(*levy_, M_, mass_);
}

void WeakResidualPath::generator_terms(const ParticleSystemState& state) {
  const Positions& X = state.positions;
  const std::size_t N = X.size(), d = X.dim();
  const MeasureSummary rho(X);
  const StreamFamily streams(seed_);
  drift_now_.assign(N, 0.0);
  jump_now_.assign(N, 0.0);
  parallel_chunks(N, 512, threads_, [&](std::size_t, std::size_t lo, std::size_t hi) {
    Vec b(d), g(d), z(d), c(d), y(d);
    for (std::size_t i = lo; i < hi; ++i) {
      Point x = X.row(i);
      drift_now_[i] = drift_pairing(coeffs_, phi_, state.time, x, rho, b, g);
      if (!coeffs_.jump) continue;
      Stream s = streams.stream({Purpose::Residual, i, 0, state.step});
      const double fx = phi_.value(x);
      double acc = 0.0;
      for (std::size_t q = 0; q < draws_; ++q) {
        const std::size_t u = s.index(N);
        levy_->sample_in_annulus(pick_ring(ring_cdf_, mass_, s), s, z);
        eval_jump(coeffs_, state.time, X.row(u), z, x, rho, c);
        for (std::size_t j = 0; j < d; ++j) y[j] = x[j] + c[j];
        acc += phi_.value(y) - fx;
      }
      jump_now_[i] = mass_ * acc / static_cast<double>(draws_);
    }
  });
}

void WeakResidualPath::observe(const ParticleSystemState& state) {
  const Positions& X = state.positions;
  const std::size_t N = X.size();
  if (!started_) {
    started_ = true;
    t0_ = t_ = state.time;
    phi0_.resize(N);
    for (std::size_t i = 0; i < N; ++i) phi0_[i] = phi_.value(X.row(i));
    phi_now_ = phi0_;
    drift_acc_.assign(N, 0.0);
    jump_acc_.assign(N, 0.0);
    generator_terms(state);
    return;
  }
  if (N != phi0_.size()) throw ConfigError("weak residual: particle count changed along the path");
  if (!(state.time > t_)) throw ConfigError("weak residual: states must be observed in time order");
  const double h = state.time - t_;
  for (std::size_t i = 0; i < N; ++i) {
    drift_acc_[i] += h * drift_now_[i];
    jump_acc_[i] += h * jump_now_[i];
    phi_now_[i] = phi_.value(X.row(i));
  }
  t_ = state.time;
  generator_terms(state);
}

WeakResidual WeakResidualPath::result() const {
  if (!started_) throw ConfigError("weak residual: no states observed");
  const std::size_t N = phi0_.size();
  WeakResidual out;
  out.t = t_;
  out.h = t_ - t0_;
  out.M = M_;
  out.truncated_mass = mass_;
  out.draws = draws_;
  std::vector<double> per(N), change(N);
  for (std::size_t i = 0; i < N; ++i) {
    change[i] = phi_now_[i] - phi0_[i];
    per[i] = change[i] - drift_acc_[i] - jump_acc_[i];
  }
  out.change = mean_of(change);
  out.change_std_error = std_error_of(change, out.change);
  out.drift_term = mean_of(drift_acc_);
  out.jump_term = mean_of(jump_acc_);
  out.signed_residual = mean_of(per);
  out.residual = std::fabs(out.signed_residual);
  out.std_error = std_error_of(per, out.signed_residual);
  return out;
}

nlohmann::json ConvergenceReport::to_json() const {
  nlohmann::json j{{"label", label},       {"ladder", ladder},       {"errors", errors},
                   {"slope", slope},       {"intercept", intercept}, {"residual", residual},
                   {"tolerance", tolerance}, {"pass", pass}};
  j["target"] = target ? nlohmann::json(*target) : nlohmann::json(nullptr);
  j["minimum"] = minimum ? nlohmann::json(*minimum) : nlohmann::json(nullptr);
  return j;
}

ConvergenceReport convergence_slope(const std::vector<std::pair<double, double>>& ladder,
                                    const SlopeCriterion& criterion, std::string label) {
  if (ladder.size() < 3) throw ConfigError("convergence slope: need at least 3 rungs");
  const bool increasing = ladder[1].first > ladder[0].first;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    if (!(ladder[k].first > 0.0)) throw ConfigError("convergence slope: parameters must be > 0");
    if (!(ladder[k].second > 0.0)) {
      throw NumericError("convergence slope: error at rung " + std::to_string(k) +
                         " is not positive; average over more Monte Carlo repetitions");
    }
    if (k > 0 && ((ladder[k].first > ladder[k - 1].first) != increasing ||
                  ladder[k].first == ladder[k - 1].first)) {
      throw ConfigError("convergence slope: ladder must be strictly monotone");
    }
  }
  ConvergenceReport r;
  r.label = std::move(label);
  const double n = static_cast<double>(ladder.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [p, e] : ladder) {
    r.ladder.push_back(p);
    r.errors.push_back(e);
    const double x = std::log(p), y = std::log(e);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  r.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  r.intercept = (sy - r.slope * sx) / n;
  double ss = 0.0;
  for (const auto& [p, e] : ladder) {
    const double res = std::log(e) - r.intercept - r.slope * std::log(p);
    ss += res * res;
  }
  r.residual = std::sqrt(ss);
  r.target = criterion.target;
  r.tolerance = criterion.tolerance;
  r.minimum = criterion.minimum;
  if (r.target) r.pass = std::fabs(r.slope - *r.target) <= r.tolerance;
  if (r.minimum) r.pass = r.pass && r.slope >= *r.minimum;
  return r;
}

const std::vector<std::string>& validity_tags() {
  static const std::vector<std::string> tags{"density-l",     "tv-euler",        "tv-truncated",
                                             "density-plain", "density-romberg", "tv-smoothed"};
  return tags;
}

double validity_threshold(const std::string& tag, std::size_t d, double theta,
                          std::optional<double> epsilon, std::optional<int> l) {
  const auto& tags = validity_tags();
  if (std::find(tags.begin(), tags.end(), tag) == tags.end()) {
    throw ConfigError("unknown validity tag '" + tag + "'");
  }
  if (d < 1) throw ConfigError("validity threshold: d must be >= 1");
  const bool needs_eps = tag == "tv-euler" || tag == "tv-truncated" || tag == "tv-smoothed";
  if (needs_eps && !(epsilon && *epsilon > 0.0 && *epsilon < 1.0)) {
    throw ConfigError("validity threshold: tag '" + tag + "' needs epsilon in (0, 1)");
  }
  if (tag == "density-l" && !(l && *l >= 0)) {
    throw ConfigError("validity threshold: tag 'density-l' needs l >= 0");
  }
  if (std::isnan(theta) || theta < 0.0) throw ConfigError("validity threshold: theta must be >= 0");
  if (theta == 0.0) throw NumericError("validity threshold: theta = 0, no validity window");
  if (std::isinf(theta)) return 0.0;

  const double dd = static_cast<double>(d);
  const double scale = 8.0 * dd / theta;
  if (tag == "density-l") return scale * (static_cast<double>(*l) + dd);
  if (tag == "density-plain") return scale * (2.0 + dd);
  if (tag == "density-romberg") return scale * (4.0 + dd);
  if (tag == "tv-smoothed") return scale * (16.0 / *epsilon + 1.0);
  return scale * (8.0 / *epsilon + 1.0);
}

}  // namespace mvjump
