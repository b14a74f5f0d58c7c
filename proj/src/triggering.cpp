#include "etsim/triggering.hpp"

#include <cmath>
#include <string>

#include "etsim/errors.hpp"

namespace etsim {

std::string_view to_string(Channel c) { return c == Channel::Output ? "output" : "input"; }

std::string_view to_string(ClockMode m) {
  return m == ClockMode::Proposed ? "proposed" : "time-regulation";
}

ClockMode parse_clock_mode(std::string_view s) {
  if (s == "proposed") return ClockMode::Proposed;
  if (s == "time-regulation" || s == "baseline") return ClockMode::TimeRegulation;
  throw ConfigError("unknown clock mode '" + std::string(s) + "'");
}

namespace {

void validate(const ChannelParams& p, const char* tag) {
  const std::string t(tag);
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(std::string(name) + "_" + t + " must be positive");
  };
  positive(p.rho, "rho");
  positive(p.alpha, "alpha");
  positive(p.beta, "beta");
  positive(p.gamma, "gamma");
  positive(p.delta, "delta");
  positive(p.pi_bar, "pi_bar");
  positive(p.pi_low, "pi_low");
  if (!(p.rho > (1.0 - p.gamma) / p.beta))
    throw ConfigError("rho_" + t + " must exceed (1-gamma_" + t + ")/beta_" + t + " (got " +
                      std::to_string(p.rho) + " <= " + std::to_string((1.0 - p.gamma) / p.beta) + ")");
  if (!(p.pi_bar > p.pi_low)) throw ConfigError("pi_bar_" + t + " must exceed pi_low_" + t);
  if (!std::isfinite(p.xi0)) throw ConfigError("xi0_" + t + " must be finite");
}

}  // namespace

TriggerParams::TriggerParams(ChannelParams output, ChannelParams input)
    : channels_{output, input} {
  validate(channels_[0], "y");
  validate(channels_[1], "u");
}

double xi_rate(const ChannelParams& p, double xi, double gap_sq, double z_star_sq) {
  return -p.beta * xi + p.gamma * (p.alpha * z_star_sq - gap_sq);
}

double pi_rate(const ChannelParams& p, double pi, double gap_sq, ClockMode mode) {
  return mode == ClockMode::Proposed ? -p.delta * (gap_sq + pi * pi) : -p.delta * pi * pi;
}

bool check_trigger(const ChannelParams& p, double xi, double pi, double gap_sq, double z_star_sq) {
  return xi <= p.rho * (gap_sq - p.alpha * z_star_sq) && pi <= p.pi_low;
}

TriggerState TriggerState::initial(const TriggerParams& params) {
  TriggerState s;
  for (Channel c : {Channel::Output, Channel::Input}) {
    s[c].xi = params[c].xi0;
    s[c].pi = params[c].pi_bar;
  }
  return s;
}

void apply_event(TriggerState& state, const TriggerParams& params, Channel channel, double t,
                 double signal) {
  auto& ch = state[channel];
  if (!ch.events.empty() && !(t > ch.events.back()))
    throw SequencingError("event on " + std::string(to_string(channel)) + " channel at t=" +
                          std::to_string(t) + " does not follow t=" + std::to_string(ch.events.back()));
  ch.held = signal;
  ch.pi = params[channel].pi_bar;
  ch.events.push_back(t);
}

double time_regulation_dwell(const ChannelParams& p) {
  return (1.0 / p.pi_low - 1.0 / p.pi_bar) / p.delta;
}

}  // namespace etsim
