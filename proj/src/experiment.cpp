#include "etsim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "etsim/errors.hpp"
#include "etsim/observer_controller.hpp"

namespace etsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Event times sit on the grid, so window edges get half a step of slack.
bool in_window(double t, double lo, double hi, double h) {
  return t >= lo - 0.5 * h && t <= hi + 0.5 * h;
}

}  // namespace

std::vector<RunRecord> run_replicas(const ExperimentSetup& setup, std::size_t count,
                                    std::size_t workers) {
  if (count == 0) throw InvalidInputError("at least one replica is required");
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);

  std::vector<RunRecord> records(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= count) return;
      try {
        SimConfig cfg = setup.sim;
        cfg.replica = r;
        records[r] = simulate(setup.scenario, setup.gains, setup.trigger, cfg);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return records;
}

EnsembleResult aggregate(const ExperimentSetup& setup, const std::vector<RunRecord>& records,
                         bool require_survivor) {
  if (records.empty()) throw InvalidInputError("no replica records to aggregate");
  const std::size_t N = setup.scenario.size();
  const bool triggered = setup.sim.mode == ControlMode::Triggered;

  EnsembleResult res;
  res.replicas = records.size();
  res.step = setup.sim.step;
  res.horizon = setup.sim.horizon;
  res.mode = setup.sim.mode;
  res.clock = setup.sim.clock;

  std::vector<const RunRecord*> alive;
  for (const auto& r : records) {
    res.sensitivity_violations += r.sensitivity_violations;
    if (r.diverged) {
      ++res.diverged;
      res.diverged_replicas.push_back(r.replica);
    } else {
      alive.push_back(&r);
    }
  }
  if (alive.empty() && require_survivor)
    throw ExperimentFailure("all " + std::to_string(records.size()) + " replicas diverged");

  const std::size_t samples = alive.empty() ? 0 : alive.front()->snapshots.size();
  for (const auto* r : alive)
    if (r->snapshots.size() != samples) throw ExperimentFailure("replica grids do not match");

  const double inv = alive.empty() ? 0.0 : 1.0 / static_cast<double>(alive.size());
  res.times.resize(samples);
  res.mean_x_sq.assign(samples, std::vector<double>(N, 0.0));
  res.mean_e_sq = res.mean_z_sq = res.mean_x_sq;
  res.mean_v.assign(samples, 0.0);
  res.mean_v_quadratic.assign(samples, 0.0);
  res.var_x_sq.assign(samples, 0.0);

  for (std::size_t s = 0; s < samples; ++s) {
    res.times[s] = alive.front()->snapshots[s].t;
    std::vector<double> totals;
    totals.reserve(alive.size());
    for (const auto* r : alive) {
      const auto& snap = r->snapshots[s];
      double v_quad = 0.0, v_xi = 0.0, x_tot = 0.0;
      std::size_t off = 0;
      for (std::size_t i = 0; i < N; ++i) {
        const auto& g = setup.gains[i];
        const std::size_t n = g.design.order();
        std::span<const double> x(snap.x.data() + off, n), xh(snap.xhat.data() + off, n);
        off += n;
        const auto tr = transform(g.design, x, xh);
        double xs = 0.0, es = 0.0, zs = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          xs += x[k] * x[k];
          es += tr.e[k] * tr.e[k];
          zs += tr.z[k] * tr.z[k];
        }
        res.mean_x_sq[s][i] += xs * inv;
        res.mean_e_sq[s][i] += es * inv;
        res.mean_z_sq[s][i] += zs * inv;
        x_tot += xs;

        double weight = 1.0;
        if (triggered) {
          weight = snap.pi_y[i] + snap.pi_u[i];
          if (!(weight > 0.0)) ++res.flagged_samples;
          v_xi += snap.xi_y[i] + snap.xi_u[i];
        }
        v_quad += weight * (quadratic_form(g.p, tr.e) + quadratic_form(g.q, tr.z));
      }
      res.mean_v_quadratic[s] += v_quad * inv;
      res.mean_v[s] += (v_quad + v_xi) * inv;
      totals.push_back(x_tot);
    }
    // shifted by the first replica so identical replicas give exactly zero
    double shift_sum = 0.0, shift_sq = 0.0;
    for (double v : totals) {
      const double d = v - totals.front();
      shift_sum += d;
      shift_sq += d * d;
    }
    const double shift_mean = shift_sum * inv;
    res.var_x_sq[s] = std::max(0.0, shift_sq * inv - shift_mean * shift_mean);
  }

  for (const auto* r : alive) {
    const auto& last = r->snapshots.back();
    double worst = 0.0;
    std::size_t off = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t n = r->orders[i];
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += last.x[off + k] * last.x[off + k];
      off += n;
      worst = std::max(worst, std::sqrt(s));
    }
    res.terminal_max_norm.push_back(worst);
  }

  if (triggered) {
    const double T = setup.sim.horizon, h = setup.sim.step;
    const std::size_t bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(T - 1e-9)));
    for (std::size_t i = 0; i < N; ++i)
      for (Channel c : {Channel::Output, Channel::Input}) {
        ChannelStats cs;
        cs.subsystem = i;
        cs.channel = c;
        cs.rate_per_second.assign(bins, 0.0);
        double dwell_sum = 0.0;
        double min_dwell = std::numeric_limits<double>::infinity();
        for (const auto& r : records) {
          const auto& ev = r.event_times(i, c);
          for (std::size_t k = 1; k < ev.size(); ++k) {
            ++cs.events;
            const double d = ev[k] - ev[k - 1];
            dwell_sum += d;
            min_dwell = std::min(min_dwell, d);
            ++cs.intervals;
            if (in_window(ev[k], 0.0, 1.0, h)) ++cs.early_count;
            if (in_window(ev[k], T - 1.0, T, h)) ++cs.late_count;
            const auto bin = std::min(bins - 1, static_cast<std::size_t>(ev[k]));
            cs.rate_per_second[bin] += 1.0;
          }
        }
        for (auto& v : cs.rate_per_second) v /= static_cast<double>(records.size());
        cs.min_dwell = cs.intervals ? min_dwell : kNaN;
        cs.mean_dwell = cs.intervals ? dwell_sum / static_cast<double>(cs.intervals) : kNaN;
        res.channels.push_back(std::move(cs));
      }
  }
  return res;
}

EnsembleResult run_ensemble(const ExperimentSetup& setup, std::size_t replicas, std::size_t workers) {
  return aggregate(setup, run_replicas(setup, replicas, workers));
}

DwellMetrics dwell_metrics(const EnsembleResult& result) {
  DwellMetrics m;
  m.min_dwell = kNaN;
  for (const auto& c : result.channels) {
    DwellMetrics::Entry e;
    e.subsystem = c.subsystem;
    e.channel = c.channel;
    e.has_events = c.intervals > 0;
    e.min_dwell = c.min_dwell;
    e.mean_dwell = c.mean_dwell;
    e.early_count = c.early_count;
    e.late_count = c.late_count;
    if (e.has_events && !(m.min_dwell <= e.min_dwell)) m.min_dwell = e.min_dwell;
    m.entries.push_back(e);
  }
  return m;
}

DecayFit decay_check(std::span<const double> times, std::span<const double> v, double fit_start,
                     std::size_t window) {
  if (times.size() != v.size()) throw InvalidInputError("time and value series differ in length");
  DecayFit fit;

  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!(v[k] > 1e-14)) break;
    if (times[k] < fit_start) continue;
    const double y = std::log(v[k]);
    st += times[k];
    sy += y;
    stt += times[k] * times[k];
    sty += times[k] * y;
    ++fit.fit_points;
  }
  if (fit.fit_points >= 2) {
    const double n = static_cast<double>(fit.fit_points);
    const double denom = n * stt - st * st;
    fit.rate = denom > 0.0 ? -(n * sty - st * sy) / denom : kNaN;
  } else {
    fit.rate = kNaN;
  }

  if (window == 0) window = 1;
  const std::size_t half = window / 2;
  if (v.size() < 2 * half + 2) {
    fit.monotonicity = kNaN;
    return fit;
  }
  std::vector<double> ma;
  for (std::size_t k = half; k + half < v.size(); ++k) {
    double s = 0.0;
    for (std::size_t j = k - half; j <= k + half; ++j) s += v[j];
    ma.push_back(s / static_cast<double>(2 * half + 1));
  }
  double score = 0.0;
  for (std::size_t k = 1; k < ma.size(); ++k) {
    if (ma[k] < ma[k - 1])
      score += 1.0;
    else if (ma[k] == ma[k - 1])
      score += 0.5;
  }
  fit.monotonicity = score / static_cast<double>(ma.size() - 1);
  return fit;
}

DecayFit decay_check(const EnsembleResult& result, double fit_start, std::size_t window) {
  return decay_check(result.times, result.mean_v, fit_start, window);
}

ConvergenceCheck convergence_check(const EnsembleResult& result, double eta, double q) {
  ConvergenceCheck c;
  c.eta = eta;
  c.q = q;
  c.total = result.replicas;
  for (double v : result.terminal_max_norm)
    if (v <= eta) ++c.converged;
  c.fraction = c.total ? static_cast<double>(c.converged) / static_cast<double>(c.total) : 0.0;
  c.pass = c.fraction >= 1.0 - q;
  return c;
}

namespace {

void require_comparable(const ExperimentSetup& a, const ExperimentSetup& b) {
  auto fail = [](const std::string& what) {
    throw ConfigError("compared configurations differ in " + what);
  };
  if (a.scenario.name != b.scenario.name) fail("scenario");
  const auto& sa = a.sim;
  const auto& sb = b.sim;
  if (sa.step != sb.step || sa.horizon != sb.horizon) fail("time grid");
  if (sa.mode != sb.mode) fail("control mode");
  if (sa.seed != sb.seed) fail("seed");
  if (sa.x0 != sb.x0 || sa.xhat0 != sb.xhat0) fail("initial conditions");
  if (sa.record_every != sb.record_every) fail("record decimation");
  if (a.trigger.has_value() != b.trigger.has_value() || (a.trigger && !(*a.trigger == *b.trigger)))
    fail("trigger parameters");
  if (a.gains.size() != b.gains.size()) fail("gains");
  for (std::size_t i = 0; i < a.gains.size(); ++i) {
    const auto& da = a.gains[i].design;
    const auto& db = b.gains[i].design;
    if (!(da.observer == db.observer) || !(da.controller == db.controller) || da.l1 != db.l1 ||
        da.l2 != db.l2)
      fail("gains");
  }
}

}  // namespace

ModeComparison compare_modes(const ExperimentSetup& a, const ExperimentSetup& b,
                             std::size_t replicas, std::size_t workers) {
  require_comparable(a, b);
  ModeComparison cmp;
  cmp.a = aggregate(a, run_replicas(a, replicas, workers), false);
  cmp.b = aggregate(b, run_replicas(b, replicas, workers), false);
  return cmp;
}

namespace {

void put(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

nlohmann::ordered_json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

void write_ensemble_csv(std::ostream& out, const EnsembleResult& r) {
  const std::size_t N = r.mean_x_sq.empty() ? 0 : r.mean_x_sq.front().size();
  out << "t";
  for (std::size_t i = 0; i < N; ++i) {
    const auto tag = std::to_string(i + 1);
    out << ",mean_x_sq" << tag << ",mean_e_sq" << tag << ",mean_z_sq" << tag;
  }
  out << ",mean_V,mean_V_quadratic,var_x_sq\n";
  for (std::size_t s = 0; s < r.times.size(); ++s) {
    put(out, r.times[s]);
    for (std::size_t i = 0; i < N; ++i) {
      out << ',', put(out, r.mean_x_sq[s][i]);
      out << ',', put(out, r.mean_e_sq[s][i]);
      out << ',', put(out, r.mean_z_sq[s][i]);
    }
    out << ',', put(out, r.mean_v[s]);
    out << ',', put(out, r.mean_v_quadratic[s]);
    out << ',', put(out, r.var_x_sq[s]);
    out << "\n";
  }
}

void write_channel_csv(std::ostream& out, const EnsembleResult& r, const std::string& label,
                       bool header) {
  if (header)
    out << "label,subsystem,channel,events,min_dwell,mean_dwell,early_count,late_count,step\n";
  for (const auto& c : r.channels) {
    out << label << ',' << c.subsystem + 1 << ',' << to_string(c.channel) << ',' << c.events << ',';
    put(out, c.min_dwell);
    out << ',';
    put(out, c.mean_dwell);
    out << ',' << c.early_count << ',' << c.late_count << ',';
    put(out, r.step);
    out << "\n";
  }
}

namespace {

nlohmann::ordered_json summary_object(const EnsembleResult& r, const AnalysisOptions& opt) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(r.mode));
  if (r.mode == ControlMode::Triggered) j["clock"] = std::string(to_string(r.clock));
  j["replicas"] = r.replicas;
  j["diverged"] = r.diverged;
  j["diverged_replicas"] = r.diverged_replicas;
  j["step"] = r.step;
  j["horizon"] = r.horizon;
  j["flagged_samples"] = r.flagged_samples;
  j["sensitivity_violations"] = r.sensitivity_violations;

  const auto conv = convergence_check(r, opt.eta, opt.q);
  j["convergence"] = {{"eta", conv.eta},           {"q", conv.q},
                      {"converged", conv.converged}, {"total", conv.total},
                      {"fraction", conv.fraction}, {"pass", conv.pass}};
  const auto fit = decay_check(r, opt.fit_start, opt.window);
  j["decay"] = {{"rate", num(fit.rate)},         {"monotonicity", num(fit.monotonicity)},
                {"fit_points", fit.fit_points}, {"fit_start", opt.fit_start},
                {"window", opt.window}};

  double tmax = 0.0, tmean = 0.0;
  for (double v : r.terminal_max_norm) {
    tmax = std::max(tmax, v);
    tmean += v / static_cast<double>(r.terminal_max_norm.size());
  }
  if (r.terminal_max_norm.empty())
    j["terminal_max_norm"] = nullptr;
  else
    j["terminal_max_norm"] = {{"mean", tmean}, {"max", tmax}};

  auto& ch = j["channels"] = nlohmann::ordered_json::array();
  for (const auto& c : r.channels) {
    ch.push_back({{"subsystem", c.subsystem + 1},
                  {"channel", std::string(to_string(c.channel))},
                  {"events", c.events},
                  {"min_dwell", num(c.min_dwell)},
                  {"mean_dwell", num(c.mean_dwell)},
                  {"early_count", c.early_count},
                  {"late_count", c.late_count},
                  {"rate_per_second", c.rate_per_second}});
  }
  return j;
}

}  // namespace

std::string summary_json(const EnsembleResult& r, const AnalysisOptions& options, int indent) {
  return summary_object(r, options).dump(indent);
}

std::string comparison_json(const ModeComparison& cmp, const AnalysisOptions& options, int indent) {
  nlohmann::ordered_json j;
  j[std::string(to_string(cmp.a.clock))] = summary_object(cmp.a, options);
  auto key = std::string(to_string(cmp.b.clock));
  if (j.contains(key)) key += "_b";
  j[key] = summary_object(cmp.b, options);
  return j.dump(indent);
}

}  // namespace etsim
