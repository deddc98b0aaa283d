#include "mvjump/particle_engine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mvjump/errors.hpp"
#include "mvjump/parallel.hpp"
#include "mvjump/tail.hpp"

namespace mvjump {

namespace {

constexpr std::size_t kChunk = 512;

}  // namespace

Partition Partition::uniform(double T, double max_step) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw ConfigError("partition: T must be finite and >= 0");
  if (!(max_step > 0.0)) throw ConfigError("partition: step must be > 0");
  if (max_step > T && T > 0.0) throw ConfigError("partition: step must not exceed T");
  if (T == 0.0) return uniform_steps(0.0, 0);
  // The small allowance keeps T / max_step = 100.00000000000001 at 100 steps.
  const auto n = static_cast<std::size_t>(std::ceil(T / max_step * (1.0 - 1e-12)));
  return uniform_steps(T, std::max<std::size_t>(n, 1));
}

Partition Partition::uniform_steps(double T, std::size_t n, std::uint32_t refinement) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw ConfigError("partition: T must be finite and >= 0");
  if (refinement > 30) throw ConfigError("partition: refinement level must be <= 30");
  Partition p;
  if (T == 0.0 || n == 0) {
    if (T != 0.0) throw ConfigError("partition: at least one step is required for T > 0");
    return p;
  }
  const std::size_t steps = n << refinement;
  p.times_.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    p.times_[k] = T * static_cast<double>(k) / static_cast<double>(steps);
  }
  p.times_.back() = T;
  p.step_ = std::ldexp(T / static_cast<double>(n), -static_cast<int>(refinement));
  p.refinement_ = refinement;
  return p;
}

Partition Partition::explicit_grid(std::vector<double> times) {
  if (times.empty() || times.front() != 0.0) {
    throw ConfigError("partition: explicit grid must start at 0");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1]) || !std::isfinite(times[k])) {
      throw ConfigError("partition: explicit grid must be strictly increasing and finite");
    }
  }
  Partition p;
  p.times_ = std::move(times);
  p.uniform_ = false;
  return p;
}

double Partition::max_step() const noexcept {
  double m = 0.0;
  for (std::size_t k = 1; k < times_.size(); ++k) m = std::max(m, times_[k] - times_[k - 1]);
  return m;
}

std::optional<std::size_t> Partition::index_of(double t) const {
  const double tol = 1e-12 * std::max(1.0, horizon());
  auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
  if (it != times_.end() && std::fabs(*it - t) <= tol) {
    return static_cast<std::size_t>(it - times_.begin());
  }
  return std::nullopt;
}

InitialLaw InitialLaw::point(Vec x0) {
  if (x0.empty()) throw ConfigError("initial law: point must have dimension >= 1");
  InitialLaw law;
  law.kind_ = Kind::Point;
  law.mean_ = std::move(x0);
  return law;
}

InitialLaw InitialLaw::gaussian(Vec mean, std::vector<double> cov) {
  const std::size_t d = mean.size();
  if (d == 0) throw ConfigError("initial law: mean must have dimension >= 1");
  if (cov.size() != d * d) throw ConfigError("initial law: covariance must be d x d");
  Eigen::MatrixXd c(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) c(i, j) = cov[i * d + j];
  if (!c.isApprox(c.transpose(), 1e-12)) throw ConfigError("initial law: covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw ConfigError("initial law: covariance is not positive semidefinite");
  }
  const Eigen::MatrixXd root = eig.eigenvectors() *
                               eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                               eig.eigenvectors().transpose();
  InitialLaw law;
  law.kind_ = Kind::Gaussian;
  law.mean_ = std::move(mean);
  law.cov_ = std::move(cov);
  law.root_.resize(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) law.root_[i * d + j] = root(i, j);
  return law;
}

InitialLaw InitialLaw::samples(Positions rows) {
  if (rows.empty() || rows.dim() == 0) throw ConfigError("initial law: sample set is empty");
  InitialLaw law;
  law.kind_ = Kind::Samples;
  law.rows_ = std::move(rows);
  law.mean_.clear();
  return law;
}

std::size_t InitialLaw::dim() const noexcept {
  return kind_ == Kind::Samples ? rows_.dim() : mean_.size();
}

void InitialLaw::draw(std::size_t slot, std::uint64_t label, const StreamFamily& streams,
                      MutPoint out) const {
  switch (kind_) {
    case Kind::Point:
      std::copy(mean_.begin(), mean_.end(), out.begin());
      return;
    case Kind::Samples: {
      Point row = rows_.row(slot);
      std::copy(row.begin(), row.end(), out.begin());
      return;
    }
    case Kind::Gaussian: {
      const std::size_t d = mean_.size();
      Stream s = streams.stream({Purpose::Init, label, 0, 0});
      Vec xi(d);
      for (double& v : xi) v = s.normal();
      for (std::size_t i = 0; i < d; ++i) {
        double acc = mean_[i];
        for (std::size_t j = 0; j < d; ++j) acc += root_[i * d + j] * xi[j];
        out[i] = acc;
      }
      return;
    }
  }
}

void SimConfig::validate() const {
  if (!levy) throw ConfigError("simulation: no Levy measure");
  const std::size_t d = levy->dimension();
  if (coeffs.dimension != d) throw ConfigError("simulation: coefficient dimension differs from measure");
  if (initial.dim() != d) throw ConfigError("simulation: initial law dimension differs from measure");
  if (N < 1) throw ConfigError("simulation: N must be >= 1");
  if (M < 1) throw ConfigError("simulation: M must be >= 1");
  if (M > levy->max_ring()) throw ConfigError("simulation: M exceeds the measure's max_ring");
  if (initial.kind() == InitialLaw::Kind::Samples && initial.rows().size() != N) {
    std::ostringstream msg;
    msg << "simulation: initial sample has " << initial.rows().size() << " rows, N = " << N;
    throw ConfigError(msg.str());
  }
  if (!labels.empty()) {
    if (labels.size() != N) throw ConfigError("simulation: labels must have N entries");
    std::vector<char> seen(N, 0);
    for (auto l : labels) {
      if (l >= N || seen[l]) throw ConfigError("simulation: labels must permute 0..N-1");
      seen[l] = 1;
    }
  }
}

namespace {

std::uint64_t label_of(const SimConfig& c, std::size_t slot) {
  return c.labels.empty() ? slot : c.labels[slot];
}

std::vector<std::size_t> slot_of_label(const SimConfig& c) {
  std::vector<std::size_t> inv(c.N);
  for (std::size_t p = 0; p < c.N; ++p) inv[label_of(c, p)] = p;
  return inv;
}

}  // namespace

ParticleSystemState init_system(const SimConfig& config) {
  config.validate();
  const std::size_t d = config.levy->dimension();
  const StreamFamily streams = config.stream_family();
  ParticleSystemState state;
  state.tail_sigma = tail_sigma(*config.levy, config.coeffs, config.M, config.horizon());
  state.positions = Positions(config.N, d);
  const double a = state.tail_sigma;
  parallel_chunks(config.N, kChunk, config.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const std::uint64_t label = label_of(config, p);
      MutPoint x = state.positions.row(p);
      config.initial.draw(p, label, streams, x);
      if (a > 0.0) {
        Stream g = streams.stream({Purpose::Gauss, label, 0, 0});
        for (double& v : x) v += a * g.normal();
      }
    }
  });
  return state;
}

EventList next_step_events(const ParticleSystemState& state, const SimConfig& config) {
  const Partition& P = config.partition;
  if (state.step >= P.steps()) throw ConfigError("simulation: no step left on the grid");
  const double r0 = P.times()[state.step];
  EventOptions opts;
  opts.threads = config.threads;
  opts.sample_jump_times = config.sample_jump_times;
  if (P.is_uniform()) {
    return generate_step_events(*config.levy, config.N, config.M, P.uniform_step(),
                                config.stream_family(), r0,
                                StepWindow::of_step(state.step, P.refinement()), opts);
  }
  const double dt = P.times()[state.step + 1] - r0;
  return generate_step_events(*config.levy, config.N, config.M, dt, config.stream_family(), r0,
                              StepWindow{state.step, 0, 0}, opts);
}

void step_system(ParticleSystemState& state, const EventList& events, const SimConfig& config) {
  const Partition& P = config.partition;
  if (state.step >= P.steps()) throw ConfigError("step_system: no step left on the grid");
  if (events.particles() != config.N) throw ConfigError("step_system: event list has wrong N");
  const double r = P.times()[state.step];
  const double r_next = P.times()[state.step + 1];
  const double dt = r_next - r;
  const std::size_t d = state.positions.dim();
  const Positions& frozen = state.positions;
  const MeasureSummary rho(frozen);
  const std::vector<std::size_t> slot = slot_of_label(config);
  Positions next(config.N, d);

  parallel_chunks(config.N, kChunk, config.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    Vec b(d), c(d);
    for (std::size_t p = lo; p < hi; ++p) {
      Point x = frozen.row(p);
      MutPoint out = next.row(p);
      std::copy(x.begin(), x.end(), out.begin());
      if (config.coeffs.drift) {
        eval_drift(config.coeffs, r, x, rho, b);
        for (std::size_t a = 0; a < d; ++a) out[a] += b[a] * dt;
      }
      const std::uint64_t label = label_of(config, p);
      for (std::size_t e = events.begin(label); e < events.end(label); ++e) {
        Point v = frozen.row(slot[events.partner(e)]);
        eval_jump(config.coeffs, r, v, events.amplitude(e), x, rho, c);
        for (std::size_t a = 0; a < d; ++a) out[a] += c[a];
      }
      for (std::size_t a = 0; a < d; ++a) {
        if (std::isfinite(out[a])) continue;
        std::ostringstream msg;
        msg << "particle " << p << " left the reals at t=" << r_next << " (" << events.count(label)
            << " events:";
        for (std::size_t e = events.begin(label); e < events.end(label); ++e) {
          msg << " [ring " << events.ring(e) << ", partner " << events.partner(e) << ", |z|="
              << norm(events.amplitude(e)) << "]";
        }
        msg << ")";
        throw NumericError(msg.str());
      }
    }
  });

  state.positions = std::move(next);
  state.step += 1;
  state.time = r_next;
  state.events_applied += events.total();
}

SimulationResult run_simulation(const SimConfig& config, const std::vector<double>& record_times,
                                const StepObserver& observer) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> record_steps;
  for (double t : record_times) {
    const auto k = config.partition.index_of(t);
    if (!k) {
      std::ostringstream msg;
      msg << "simulation: record time " << t << " is not a grid point";
      throw ConfigError(msg.str());
    }
    record_steps.push_back(*k);
  }

  SimulationResult result;
  ParticleSystemState state = init_system(config);
  result.tail_sigma = state.tail_sigma;
  auto record = [&] {
    for (std::size_t j = 0; j < record_steps.size(); ++j) {
      if (record_steps[j] == state.step) result.snapshots[record_times[j]] = state.positions;
    }
    if (observer) observer(state);
  };
  record();
  while (state.step < config.partition.steps()) {
    step_system(state, next_step_events(state, config), config);
    record();
  }
  result.total_events = state.events_applied;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace mvjump
