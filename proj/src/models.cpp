#include "mvjump/models.hpp"

#include <cmath>
#include <limits>

#include "mvjump/errors.hpp"

namespace mvjump {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t dimension_param(const ParamMap& p, const std::string& what) {
  const double d = p.at("d");
  if (!(d >= 1.0) || d != std::floor(d) || d > 64.0) {
    throw ConfigError(what + ": parameter d must be an integer in [1, 64]");
  }
  return static_cast<std::size_t>(d);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

double radial_of(Point z) { return norm(z); }

}  // namespace

std::vector<std::string> measure_names() {
  return {"lebesgue", "example1-exp", "example1-poly", "example2-alpha-stable"};
}

std::vector<std::string> drift_names() { return {"zero", "mean-reverting", "linear", "constant"}; }

std::vector<std::string> jump_names() {
  return {"zero", "constant", "kac", "state-independent", "own-position", "sigma-over-z"};
}

ParamMap measure_defaults(const std::string& name) {
  if (name == "lebesgue") return {{"d", 1.0}};
  if (name == "example1-exp") return {{"a1", 1.0}, {"a2", 2.0}, {"p_decay", 1.0}, {"d", 1.0}};
  if (name == "example1-poly") return {{"a1", 1.0}, {"a2", 1.0}, {"p_decay", 4.0}, {"d", 1.0}};
  if (name == "example2-alpha-stable") {
    return {{"alpha", 0.5}, {"sigma_lower", 1.0}, {"sigma_upper", 2.0}};
  }
  throw ConfigError("unknown measure model '" + name + "'");
}

ParamMap drift_defaults(const std::string& name) {
  if (name == "zero") return {};
  if (name == "mean-reverting") return {{"rate", 1.0}};
  if (name == "linear") return {{"A", 0.0}, {"B", 0.0}};
  if (name == "constant") return {{"value", 0.0}};
  throw ConfigError("unknown drift model '" + name + "'");
}

ParamMap jump_defaults(const std::string& name) {
  if (name == "zero" || name == "own-position") return {};
  if (name == "constant") return {{"value", 1.0}};
  if (name == "kac") return {{"lambda", 1.0}};
  if (name == "state-independent") return {{"amp", 1.0}, {"lambda", 1.0}};
  if (name == "sigma-over-z") return {{"sigma_lower", 1.0}, {"sigma_upper", 2.0}};
  throw ConfigError("unknown jump model '" + name + "'");
}

ParamMap merge_params(const std::string& what, const ParamMap& defaults, const ParamMap& given) {
  ParamMap out = defaults;
  for (const auto& [key, value] : given) {
    if (!defaults.contains(key)) throw ConfigError(what + ": unknown parameter '" + key + "'");
    if (!std::isfinite(value)) throw ConfigError(what + ": parameter '" + key + "' is not finite");
    out[key] = value;
  }
  return out;
}

std::size_t measure_dimension(const std::string& name, const ParamMap& params) {
  const ParamMap p = merge_params("measure " + name, measure_defaults(name), params);
  if (name == "example2-alpha-stable") return 1;
  return dimension_param(p, "measure " + name);
}

std::shared_ptr<const LevyMeasureModel> make_measure(const std::string& name,
                                                     const ParamMap& params,
                                                     std::size_t max_ring,
                                                     LevyModelOptions options) {
  const ParamMap p = merge_params("measure " + name, measure_defaults(name), params);
  LevyMeasureSpec spec;
  spec.name = name;
  spec.max_ring = max_ring;

  if (name == "example2-alpha-stable") {
    const double alpha = p.at("alpha");
    require(alpha >= 0.0 && alpha < 2.0, "measure example2-alpha-stable: alpha must be in [0, 2)");
    spec.dimension = 1;
    spec.support_lower_radius = 1.0;
    spec.radial_profile = [alpha](double r) { return r >= 1.0 ? std::pow(r, alpha - 1.0) : 0.0; };
    spec.radial_mass = [alpha](double a, double b) {
      a = std::max(a, 1.0);
      b = std::max(b, 1.0);
      if (b <= a) return 0.0;
      if (alpha == 0.0) return std::isinf(b) ? kInf : 2.0 * std::log(b / a);
      if (std::isinf(b)) return kInf;
      return 2.0 / alpha * (std::pow(b, alpha) - std::pow(a, alpha));
    };
    spec.log_density_gradient_bound = std::fabs(alpha - 1.0);
  } else {
    const std::size_t d = dimension_param(p, "measure " + name);
    spec.dimension = d;
    spec.radial_profile = [](double) { return 1.0; };
    const double vd = unit_ball_volume(d);
    spec.radial_mass = [vd, d](double a, double b) {
      if (std::isinf(b)) return kInf;
      return vd * (std::pow(b, static_cast<double>(d)) - std::pow(a, static_cast<double>(d)));
    };
    spec.log_density_gradient_bound = 0.0;
  }
  return std::make_shared<const LevyMeasureModel>(std::move(spec), options);
}

void apply_measure_envelopes(const std::string& name, const ParamMap& params,
                             CoefficientModel& coeffs) {
  const ParamMap p = merge_params("measure " + name, measure_defaults(name), params);
  coeffs.radial_envelopes = true;
  coeffs.clower_radially_nonincreasing = true;
  if (name == "lebesgue") {
    coeffs.cbar = {};
    coeffs.clower = {};
  } else if (name == "example1-exp") {
    const double a1 = p.at("a1"), a2 = p.at("a2"), q = p.at("p_decay");
    require(a1 > 0.0 && a2 > 0.0 && q > 0.0, "measure example1-exp: a1, a2, p_decay must be > 0");
    require(a1 <= a2, "measure example1-exp: requires a1 <= a2");
    coeffs.cbar = [a1, q](Point z) { return std::exp(-0.5 * a1 * std::pow(radial_of(z), q)); };
    coeffs.clower = [a2, q](Point z) { return std::exp(-a2 * std::pow(radial_of(z), q)); };
  } else if (name == "example1-poly") {
    const double a1 = p.at("a1"), a2 = p.at("a2"), q = p.at("p_decay");
    const double d = p.at("d");
    require(a1 > 0.0 && a2 > 0.0, "measure example1-poly: a1, a2 must be > 0");
    require(a2 <= a1, "measure example1-poly: requires a2 <= a1");
    require(q > d, "measure example1-poly: requires p_decay > d");
    coeffs.cbar = [a1, q](Point z) { return std::sqrt(a1 / (1.0 + std::pow(radial_of(z), q))); };
    coeffs.clower = [a2, q](Point z) { return a2 / (1.0 + std::pow(radial_of(z), q)); };
  } else if (name == "example2-alpha-stable") {
    const double lo = p.at("sigma_lower"), hi = p.at("sigma_upper");
    require(lo > 0.0 && lo <= hi,
            "measure example2-alpha-stable: requires 0 < sigma_lower <= sigma_upper");
    coeffs.cbar = [hi](Point z) { return hi / radial_of(z); };
    coeffs.clower = [lo](Point z) {
      const double r2 = radial_of(z) * radial_of(z);
      return lo / (r2 * r2);
    };
  } else {
    throw ConfigError("unknown measure model '" + name + "'");
  }
}

DriftFn make_drift(const std::string& name, const ParamMap& params, std::size_t dimension) {
  const ParamMap p = merge_params("drift " + name, drift_defaults(name), params);
  if (name == "zero") return {};
  if (name == "mean-reverting") {
    const double rate = p.at("rate");
    return [rate](double, Point x, const MeasureSummary& rho, MutPoint out) {
      Point m = rho.mean();
      for (std::size_t a = 0; a < x.size(); ++a) out[a] = rate * (m[a] - x[a]);
    };
  }
  if (name == "linear") {
    const double A = p.at("A"), B = p.at("B");
    return [A, B](double, Point x, const MeasureSummary& rho, MutPoint out) {
      Point m = rho.mean();
      for (std::size_t a = 0; a < x.size(); ++a) out[a] = A * m[a] + B * x[a];
    };
  }
  const double value = p.at("value");
  (void)dimension;
  return [value](double, Point x, const MeasureSummary&, MutPoint out) {
    for (std::size_t a = 0; a < x.size(); ++a) out[a] = value;
  };
}

JumpFn make_jump(const std::string& name, const ParamMap& params, std::size_t dimension) {
  const ParamMap p = merge_params("jump " + name, jump_defaults(name), params);
  if (name == "zero") return {};
  if (name == "constant") {
    const double value = p.at("value");
    return [value](double, Point, Point, Point x, const MeasureSummary&, MutPoint out) {
      for (std::size_t a = 0; a < x.size(); ++a) out[a] = value;
    };
  }
  if (name == "kac") {
    const double lambda = p.at("lambda");
    return [lambda](double, Point v, Point z, Point x, const MeasureSummary&, MutPoint out) {
      const double alpha = std::exp(-lambda * norm(z));
      for (std::size_t a = 0; a < x.size(); ++a) out[a] = alpha * (v[a] - x[a]);
    };
  }
  if (name == "state-independent") {
    const double amp = p.at("amp"), lambda = p.at("lambda");
    return [amp, lambda](double, Point, Point z, Point x, const MeasureSummary&, MutPoint out) {
      const double g = amp * std::exp(-lambda * norm(z));
      for (std::size_t a = 0; a < x.size(); ++a) out[a] = g;
    };
  }
  if (name == "own-position") {
    return [](double, Point, Point, Point x, const MeasureSummary&, MutPoint out) {
      for (std::size_t a = 0; a < x.size(); ++a) out[a] = x[a];
    };
  }
  require(dimension == 1, "jump sigma-over-z: requires d = 1");
  const double lo = p.at("sigma_lower"), hi = p.at("sigma_upper");
  require(lo > 0.0 && lo <= hi, "jump sigma-over-z: requires 0 < sigma_lower <= sigma_upper");
  return [lo, hi](double, Point, Point z, Point x, const MeasureSummary&, MutPoint out) {
    const double sigma = lo + (hi - lo) * 0.5 * (1.0 + std::tanh(x[0]));
    out[0] = sigma / z[0];
  };
}

ModelBundle make_model(const ModelChoice& choice, LevyModelOptions options) {
  ModelBundle bundle;
  bundle.levy = make_measure(choice.measure, choice.measure_params, choice.max_ring, options);
  const std::size_t d = bundle.levy->dimension();
  CoefficientModel& c = bundle.coeffs;
  c.name = choice.measure + "/" + choice.drift + "/" + choice.jump;
  c.dimension = d;
  c.drift = make_drift(choice.drift, choice.drift_params, d);
  c.jump = make_jump(choice.jump, choice.jump_params, d);
  if (choice.envelopes == "measure") {
    apply_measure_envelopes(choice.measure, choice.measure_params, c);
  } else if (choice.envelopes == "zero") {
    c.radial_envelopes = true;
    c.clower_radially_nonincreasing = true;
  } else {
    throw ConfigError("envelopes must be \"measure\" or \"zero\", got '" + choice.envelopes + "'");
  }
  const ParamMap dp = merge_params("drift " + choice.drift, drift_defaults(choice.drift),
                                   choice.drift_params);
  if (choice.drift == "mean-reverting") c.drift_lipschitz = std::fabs(dp.at("rate"));
  if (choice.drift == "linear") c.drift_lipschitz = std::fabs(dp.at("A")) + std::fabs(dp.at("B"));
  return bundle;
}

}  // namespace mvjump
