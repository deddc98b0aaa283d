#include "mvjump/coefficients.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvjump/errors.hpp"
#include "mvjump/levy_model.hpp"
#include "mvjump/random.hpp"

namespace mvjump {

MeasureSummary::MeasureSummary(const Positions& positions)
    : positions_(&positions),
      mean_(positions.dim(), 0.0),
      second_(positions.dim() * positions.dim(), 0.0) {
  const std::size_t n = positions.size();
  const std::size_t d = positions.dim();
  if (n == 0) throw ConfigError("MeasureSummary: empty ensemble");
  for (std::size_t i = 0; i < n; ++i) {
    Point x = positions.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      mean_[a] += x[a];
      for (std::size_t b = 0; b < d; ++b) second_[a * d + b] += x[a] * x[b];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (double& m : mean_) m *= inv;
  for (double& s : second_) s *= inv;
}

double cbar_at(const CoefficientModel& m, Point z) { return m.cbar ? m.cbar(z) : 0.0; }
double clower_at(const CoefficientModel& m, Point z) { return m.clower ? m.clower(z) : 0.0; }
double cbreve_at(const CoefficientModel& m, Point z) {
  if (m.cbreve) return m.cbreve(z);
  return cbar_at(m, z);
}

namespace {

std::string describe(double r, std::initializer_list<std::pair<const char*, Point>> args) {
  std::ostringstream os;
  os << "r=" << r;
  for (const auto& [name, p] : args) {
    os << ' ' << name << "=(";
    for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << p[i];
    os << ')';
  }
  return os.str();
}

bool all_finite(Point p) {
  return std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

void eval_drift(const CoefficientModel& m, double r, Point x, const MeasureSummary& rho,
                MutPoint out) {
  if (!m.drift) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  m.drift(r, x, rho, out);
  if (!all_finite(out)) {
    throw NumericError("drift of '" + m.name + "' is not finite at " + describe(r, {{"x", x}}));
  }
}

Vec eval_drift(const CoefficientModel& m, double r, Point x, const MeasureSummary& rho) {
  Vec out(m.dimension);
  eval_drift(m, r, x, rho, out);
  return out;
}

void eval_jump(const CoefficientModel& m, double r, Point v, Point z, Point x,
               const MeasureSummary& rho, MutPoint out) {
  if (!m.jump) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  m.jump(r, v, z, x, rho, out);
  if (!all_finite(out)) {
    throw NumericError("jump coefficient of '" + m.name + "' is not finite at " +
                       describe(r, {{"v", v}, {"z", z}, {"x", x}}));
  }
#ifndef NDEBUG
  if (m.enforce_envelope) {
    const double bound = cbar_at(m, z);
    if (norm(out) > bound * (1.0 + 1e-12)) {
      throw NumericError("jump coefficient of '" + m.name + "' exceeds its envelope at " +
                         describe(r, {{"v", v}, {"z", z}, {"x", x}}));
    }
  }
#endif
}

Vec eval_jump(const CoefficientModel& m, double r, Point v, Point z, Point x,
              const MeasureSummary& rho) {
  Vec out(m.dimension);
  eval_jump(m, r, v, z, x, rho, out);
  return out;
}

std::vector<double> central_jacobian(const std::function<void(Point, MutPoint)>& f, Point p,
                                     std::size_t out_dim, double step) {
  const std::size_t n = p.size();
  std::vector<double> jac(out_dim * n, 0.0);
  Vec q(p.begin(), p.end());
  Vec fp(out_dim), fm(out_dim);
  for (std::size_t j = 0; j < n; ++j) {
    const double saved = q[j];
    q[j] = saved + step;
    f(q, fp);
    q[j] = saved - step;
    f(q, fm);
    q[j] = saved;
    for (std::size_t i = 0; i < out_dim; ++i) jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * step);
  }
  return jac;
}

bool ValidationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const HypothesisCheck& ValidationReport::check(const std::string& id) const {
  for (const auto& c : checks) {
    if (c.id == id) return c;
  }
  throw ConfigError("validation report has no check '" + id + "'");
}

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json j;
  j["model"] = model;
  j["all_passed"] = all_passed();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json jc{{"id", c.id},
                      {"description", c.description},
                      {"passed", c.passed},
                      {"evaluations", c.evaluations},
                      {"violations", c.violations},
                      {"worst_ratio", c.worst_ratio}};
    if (c.witness) {
      const Witness& w = *c.witness;
      jc["witness"] = {{"r", w.r}, {"v", w.v},           {"z", w.z},
                       {"x", w.x}, {"observed", w.observed}, {"bound", w.bound},
                       {"note", w.note}};
    }
    j["checks"].push_back(std::move(jc));
  }
  j["unvalidated"] = unvalidated;
  return j;
}

namespace {

struct CheckAccumulator {
  CheckAccumulator(std::string id, std::string description) {
    check.id = std::move(id);
    check.description = std::move(description);
  }

  HypothesisCheck check;

  // Upper bound: observed <= bound * (1 + slack).
  void upper(double observed, double bound, double slack, const Witness& at) {
    ++check.evaluations;
    const double ratio = bound > 0.0 ? observed / bound : (observed > 0.0 ? INFINITY : 0.0);
    if (observed > bound * (1.0 + slack) + 1e-14) {
      ++check.violations;
      check.passed = false;
    }
    if (ratio > check.worst_ratio || (!check.witness && ratio > 1.0 + slack)) {
      check.worst_ratio = ratio;
      Witness w = at;
      w.observed = observed;
      w.bound = bound;
      check.witness = std::move(w);
    }
  }

  // Lower bound: observed >= bound * (1 - slack).
  void lower(double observed, double bound, double slack, const Witness& at) {
    ++check.evaluations;
    const double ratio = observed > 0.0 ? bound / observed : (bound > 0.0 ? INFINITY : 0.0);
    if (observed < bound * (1.0 - slack) - 1e-14) {
      ++check.violations;
      check.passed = false;
    }
    if (ratio > check.worst_ratio) {
      check.worst_ratio = ratio;
      Witness w = at;
      w.observed = observed;
      w.bound = bound;
      check.witness = std::move(w);
    }
  }

  void failure(const Witness& at) {
    ++check.evaluations;
    ++check.violations;
    check.passed = false;
    check.worst_ratio = INFINITY;
    check.witness = at;
  }
};

}  // namespace

ValidationReport validate_hypotheses(const CoefficientModel& model, const LevyMeasureModel& levy,
                                     const ValidationOptions& opt) {
  if (opt.sample_budget < 1000) throw ConfigError("validate_hypotheses: sample_budget must be >= 1000");
  if (!(opt.fd_step > 0.0)) throw ConfigError("validate_hypotheses: fd_step must be positive");
  if (levy.dimension() != model.dimension) {
    throw ConfigError("validate_hypotheses: measure and coefficient dimensions differ");
  }
  const std::size_t d = model.dimension;

  std::vector<std::size_t> rings;
  for (std::size_t k = 1; k <= std::min(opt.rings, levy.max_ring()); ++k) {
    if (levy.annulus_mass(k) > 0.0) rings.push_back(k);
  }
  if (rings.empty()) throw NumericError("validate_hypotheses: no ring with positive mass");

  CheckAccumulator envelope("envelope", "|c|, |d_z c|, |d_x c| <= cbar(z)");
  CheckAccumulator inverse_flow("inverse_flow", "|| grad_x c (I + grad_x c)^-1 || <= cbreve(z)");
  CheckAccumulator ellipticity("ellipticity", "sum_j <d_zj c, zeta>^2 >= clower(z) |zeta|^2");
  CheckAccumulator lower_vs_upper("lower_below_upper_squared", "clower(z) <= cbar(z)^2");

  const StreamFamily streams(opt.seed);
  Positions ensemble(opt.ensemble_size, d);
  Vec v(d), z(d), x(d), c(d), zeta(d);

  for (std::size_t s = 0; s < opt.sample_budget; ++s) {
    Stream st = streams.stream({Purpose::Validation, s, 0, 0});
    const double r = st.uniform() * opt.horizon;
    for (double& e : ensemble.data()) e = st.normal();
    for (std::size_t a = 0; a < d; ++a) x[a] = 1.5 * st.normal();
    if (s % 8 == 7) {
      v = x;  // degenerate partner
    } else {
      for (std::size_t a = 0; a < d; ++a) v[a] = 1.5 * st.normal();
    }
    const std::size_t k = rings[st.index(rings.size())];
    levy.sample_in_annulus(k, st, z);
    const MeasureSummary rho(ensemble);

    Witness at{r, v, z, x, 0.0, 0.0, {}};
    eval_jump(model, r, v, z, x, rho, c);

    const double cbar = cbar_at(model, z);
    const double clow = clower_at(model, z);
    const double cbrv = cbreve_at(model, z);

    envelope.upper(norm(c), cbar, opt.slack, at);
    lower_vs_upper.upper(clow, cbar * cbar, 0.0, at);

    const double hz = opt.fd_step * (1.0 + norm(z));
    const double hx = opt.fd_step * (1.0 + norm(x));
    const auto jz = central_jacobian(
        [&](Point zz, MutPoint out) { eval_jump(model, r, v, zz, x, rho, out); }, z, d, hz);
    const auto jx = central_jacobian(
        [&](Point xx, MutPoint out) { eval_jump(model, r, v, z, xx, rho, out); }, x, d, hx);

    for (std::size_t j = 0; j < d; ++j) {
      double nz = 0.0, nx = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        nz += jz[i * d + j] * jz[i * d + j];
        nx += jx[i * d + j] * jx[i * d + j];
      }
      envelope.upper(std::sqrt(nz), cbar, opt.slack, at);
      envelope.upper(std::sqrt(nx), cbar, opt.slack, at);
    }

    for (std::size_t q = 0; q < opt.directions_per_sample; ++q) {
      double n2 = 0.0;
      for (double& e : zeta) {
        e = st.normal();
        n2 += e * e;
      }
      const double inv = 1.0 / std::sqrt(n2);
      for (double& e : zeta) e *= inv;
      double lhs = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += jz[i * d + j] * zeta[i];
        lhs += dot * dot;
      }
      ellipticity.lower(lhs, clow, opt.slack, at);
    }

    Eigen::MatrixXd grad(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) grad(i, j) = jx[i * d + j];
    const Eigen::MatrixXd shifted = Eigen::MatrixXd::Identity(d, d) + grad;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(shifted);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
      Witness w = at;
      w.note = "I + grad_x c is singular";
      inverse_flow.failure(w);
    } else {
      const Eigen::MatrixXd prod = grad * lu.inverse();
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(prod);
      inverse_flow.upper(svd.singularValues()(0), cbrv, opt.slack, at);
    }
  }

  ValidationReport report;
  report.model = model.name;
  report.checks = {envelope.check, inverse_flow.check, ellipticity.check, lower_vs_upper.check};
  report.unvalidated = {
      "Lipschitz continuity of b and c in (r, v, rho) with the W1 term",
      "infinite differentiability (only first derivatives are spot-checked)",
      "bounded derivatives of ln h (declared bound is reported, not verified)"};
  return report;
}

}  // namespace mvjump
