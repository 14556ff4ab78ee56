#include "datawa/types.hpp"

#include <cmath>

namespace datawa {

TravelMetrics travel_metrics(const Location& a, const Location& b, const TravelModel& model) {
  if (!a.finite() || !b.finite()) {
    throw GeometryError("travel_metrics: non-finite coordinates");
  }
  if (!(model.speed_km_s > 0.0)) {
    throw GeometryError("travel_metrics: speed must be positive");
  }
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dist = std::hypot(dx, dy);
  return {dist, dist / model.speed_km_s};
}

std::vector<double> arrival_times(const Worker& w, std::span<const Task> seq, double t_now,
                                  const TravelModel& model) {
  std::vector<double> out;
  out.reserve(seq.size());
  double t = t_now;
  Location from = w.loc;
  for (const Task& s : seq) {
    t += travel_metrics(from, s.loc, model).time_s;
    out.push_back(t);
    from = s.loc;
  }
  return out;
}

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::Expired: return "expired";
    case ViolationKind::OffTime: return "off-time";
    case ViolationKind::Unreachable: return "unreachable";
  }
  return "unknown";
}

std::optional<Violation> validate_sequence(const Worker& w, std::span<const Task> seq,
                                           double t_now, const TravelModel& model) {
  const std::vector<double> arr = arrival_times(w, seq, t_now, model);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Task& s = seq[i];
    if (!(arr[i] < s.exp_time)) return Violation{ViolationKind::Expired, s.id};
    if (!(arr[i] < w.off_time)) return Violation{ViolationKind::OffTime, s.id};
    if (!(travel_metrics(w.loc, s.loc, model).distance_km < w.reach_km)) {
      return Violation{ViolationKind::Unreachable, s.id};
    }
  }
  return std::nullopt;
}

}  // namespace datawa
