#pragma once

// Clock-based dynamic triggering on two channels per subsystem: the sensor
// output (y -> controller) and the actuator input (controller -> plant).
//
//   fire   iff  Xi <= rho (w^2 - alpha ||z*||^2)  and  Pi <= pi_low
//   Xi'  = -beta Xi + gamma (alpha ||z*||^2 - w^2)
//   Pi'  = -delta (w^2 + Pi^2)     proposed clock
//   Pi'  = -delta Pi^2             time-regulation clock
//
// where w is the gap between the live and the last transmitted signal.

#include <array>
#include <string_view>
#include <vector>

namespace etsim {

enum class Channel { Output = 0, Input = 1 };
enum class ClockMode { Proposed, TimeRegulation };

std::string_view to_string(Channel c);
std::string_view to_string(ClockMode m);
ClockMode parse_clock_mode(std::string_view s);

struct ChannelParams {
  double rho = 1.0;
  double alpha = 0.05;
  double beta = 1.0;
  double gamma = 0.05;
  double delta = 15.0;
  double pi_bar = 0.5;
  double pi_low = 0.3;
  double xi0 = 0.0;

  friend bool operator==(const ChannelParams&, const ChannelParams&) = default;
};

class TriggerParams {
 public:
  // Throws ConfigError unless rho > (1 - gamma)/beta, pi_bar > pi_low and
  // every rate constant is positive.
  TriggerParams(ChannelParams output, ChannelParams input);
  static TriggerParams uniform(const ChannelParams& p) { return {p, p}; }

  const ChannelParams& operator[](Channel c) const { return channels_[static_cast<int>(c)]; }
  const ChannelParams& output() const { return channels_[0]; }
  const ChannelParams& input() const { return channels_[1]; }

  friend bool operator==(const TriggerParams&, const TriggerParams&) = default;

 private:
  std::array<ChannelParams, 2> channels_;
};

double xi_rate(const ChannelParams& p, double xi, double gap_sq, double z_star_sq);
double pi_rate(const ChannelParams& p, double pi, double gap_sq, ClockMode mode);
bool check_trigger(const ChannelParams& p, double xi, double pi, double gap_sq, double z_star_sq);

struct ChannelState {
  double xi = 0.0;
  double pi = 0.0;
  double held = 0.0;
  std::vector<double> events;  // strictly increasing
};

struct TriggerState {
  std::array<ChannelState, 2> channels;

  ChannelState& operator[](Channel c) { return channels[static_cast<int>(c)]; }
  const ChannelState& operator[](Channel c) const { return channels[static_cast<int>(c)]; }

  // Xi at xi0, Pi at pi_bar, no held values, empty logs.
  static TriggerState initial(const TriggerParams& params);
};

// Latches the new signal, resets the clock to pi_bar and logs t. Xi is left
// alone. Throws SequencingError if t does not exceed the previous event.
void apply_event(TriggerState& state, const TriggerParams& params, Channel channel, double t,
                 double signal);

// Closed-form time for the time-regulation clock to fall from pi_bar to
// pi_low.
double time_regulation_dwell(const ChannelParams& p);

}  // namespace etsim
