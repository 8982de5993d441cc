#include <algorithm>
#include <cmath>
#include <string>

#include "gfm/error.hpp"
#include "gfm/simulator.hpp"

namespace gfm {

StepMetrics measure_metrics(const TimeSeries& ts, std::string_view channel,
                            double t_event) {
  return measure_metrics(ts.t, ts.channel(channel), t_event);
}

StepMetrics measure_metrics(const std::vector<double>& t,
                            const std::vector<double>& y, double t_event) {
  const std::size_t n = y.size();
  if (n < 10 || t.size() != n) {
    throw Error(ErrorCode::InvalidArgument,
                "metrics need at least 10 equally long samples");
  }
  // First sample at or after the event; the one before it is the pre-event
  // value.
  const auto first = static_cast<std::size_t>(
      std::lower_bound(t.begin(), t.end(), t_event - 1e-12) - t.begin());
  if (first >= n) {
    throw Error(ErrorCode::InvalidArgument, "event lies after the last sample");
  }

  const std::size_t window = std::max<std::size_t>(1, n / 10);
  const std::size_t window_start = n - window;
  if (window_start <= first) {
    throw Error(ErrorCode::Unsettled,
                "final averaging window overlaps the event");
  }
  double sum = 0.0;
  for (std::size_t i = window_start; i < n; ++i) sum += y[i];

  StepMetrics m;
  m.steady_value = sum / static_cast<double>(window);
  m.initial_value = first > 0 ? y[first - 1] : y[first];
  m.step_size = m.steady_value - m.initial_value;

  const double magnitude = std::abs(m.step_size);
  const double scale = std::max({1.0, std::abs(m.steady_value),
                                 std::abs(m.initial_value)});
  if (magnitude <= 1e-12 * scale) {
    // Nothing moved; the channel is settled by definition.
    return m;
  }

  const double band = 0.02 * magnitude;
  const double direction = m.step_size > 0.0 ? 1.0 : -1.0;
  double peak_excess = 0.0;
  std::size_t last_outside = n;  // sentinel: never outside
  for (std::size_t i = first; i < n; ++i) {
    peak_excess = std::max(peak_excess, direction * (y[i] - m.steady_value));
    if (std::abs(y[i] - m.steady_value) > band) last_outside = i;
  }
  m.percent_overshoot = 100.0 * peak_excess / magnitude;

  if (last_outside != n && last_outside >= window_start) {
    throw Error(ErrorCode::Unsettled,
                "channel leaves the 2% band inside the final window at t=" +
                    std::to_string(t[last_outside]));
  }
  if (last_outside == n) {
    m.settling_time = 0.0;
  } else {
    m.settling_time = t[last_outside + 1] - t_event;
  }
  return m;
}

}  // namespace gfm
