#include <algorithm>
#include <cmath>
#include <vector>

#include "datawa/rng.hpp"
#include "datawa/types.hpp"
#include "doctest.h"

using namespace datawa;

namespace {

/// Re-applies the arrival recurrence term by term, independent of arrival_times.
std::vector<double> arrival_oracle(const Worker& w, const std::vector<Task>& seq, double t_now,
                                   const TravelModel& m) {
  std::vector<double> out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Location& from = i == 0 ? w.loc : seq[i - 1].loc;
    const double hop = std::hypot(from.x - seq[i].loc.x, from.y - seq[i].loc.y) / m.speed_km_s;
    out.push_back((i == 0 ? t_now : out.back()) + hop);
  }
  return out;
}

/// Definition-4 checker applied constraint by constraint.
bool valid_oracle(const Worker& w, const std::vector<Task>& seq, double t_now,
                  const TravelModel& m) {
  const auto arr = arrival_oracle(w, seq, t_now, m);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (!(arr[i] < seq[i].exp_time)) return false;
    if (!(arr[i] < w.off_time)) return false;
    const double d = std::hypot(w.loc.x - seq[i].loc.x, w.loc.y - seq[i].loc.y);
    if (!(d < w.reach_km)) return false;
  }
  return true;
}

Task make_task(TaskId id, double x, double y, double pub, double exp) {
  return Task{id, {x, y}, pub, exp, TaskOrigin::Real};
}

}  // namespace

TEST_CASE("travel_metrics basic cases") {
  const TravelModel unit{1.0};
  const auto m = travel_metrics({0, 0}, {3, 4}, unit);
  CHECK(m.distance_km == doctest::Approx(5.0));
  CHECK(m.time_s == doctest::Approx(5.0));

  const auto zero = travel_metrics({1, 1}, {1, 1}, TravelModel{0.25});
  CHECK(zero.distance_km == 0.0);
  CHECK(zero.time_s == 0.0);

  const auto half = travel_metrics({0, 0}, {1, 1}, TravelModel{0.5});
  CHECK(half.distance_km == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(half.time_s == doctest::Approx(std::sqrt(2.0) / 0.5).epsilon(1e-9));
}

TEST_CASE("travel_metrics symmetry and errors") {
  Rng rng(7);
  const TravelModel m{0.7};
  for (int i = 0; i < 200; ++i) {
    const Location a{rng.uniform(-10, 10), rng.uniform(-10, 10)};
    const Location b{rng.uniform(-10, 10), rng.uniform(-10, 10)};
    const auto ab = travel_metrics(a, b, m);
    const auto ba = travel_metrics(b, a, m);
    CHECK(ab.distance_km == ba.distance_km);
    CHECK(ab.time_s == ba.time_s);
    CHECK(ab.distance_km >= 0.0);
  }
  CHECK_THROWS_AS(travel_metrics({std::nan(""), 0}, {0, 0}, m), GeometryError);
  CHECK_THROWS_AS(travel_metrics({0, 0}, {std::numeric_limits<double>::infinity(), 0}, m),
                  GeometryError);
}

TEST_CASE("arrival_times on known legs and empty input") {
  const TravelModel unit{1.0};
  Worker w{1, {0, 0}, 10.0, 0.0, 1000.0};
  std::vector<Task> seq{make_task(1, 3, 4, 0, 100), make_task(2, 3, 0, 0, 100)};
  const auto arr = arrival_times(w, seq, 0.0, unit);
  REQUIRE(arr.size() == 2);
  CHECK(arr[0] == doctest::Approx(5.0));
  CHECK(arr[1] == doctest::Approx(9.0));

  CHECK(arrival_times(w, {}, 42.0, unit).empty());
}

TEST_CASE("arrival_times matches step-by-step oracle on random chains") {
  Rng rng(11);
  const TravelModel m{0.35};
  for (int it = 0; it < 100; ++it) {
    Worker w{1, {rng.uniform(0, 5), rng.uniform(0, 5)}, 100.0, 0.0, 1e9};
    std::vector<Task> seq;
    for (int i = 0; i < 4; ++i) {
      seq.push_back(make_task(i + 1, rng.uniform(0, 5), rng.uniform(0, 5), 0, 1e9));
    }
    const double t_now = rng.uniform(0, 100);
    const auto got = arrival_times(w, seq, t_now, m);
    const auto want = arrival_oracle(w, seq, t_now, m);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]));
  }
}

TEST_CASE("validate_sequence basic verdicts") {
  const TravelModel unit{1.0};
  Worker w{1, {0, 0}, 10.0, 0.0, 100.0};

  std::vector<Task> ok{make_task(1, 3, 4, 0, 10)};
  CHECK(!validate_sequence(w, ok, 0.0, unit).has_value());

  std::vector<Task> expired{make_task(2, 1, 0, 0, 5)};
  const auto v = validate_sequence(w, expired, 6.0, unit);
  REQUIRE(v.has_value());
  CHECK(v->kind == ViolationKind::Expired);
  CHECK(v->task == 2);

  std::vector<Task> off{make_task(3, 3, 4, 0, 1000)};
  Worker leaving{1, {0, 0}, 10.0, 0.0, 4.0};
  const auto v2 = validate_sequence(leaving, off, 0.0, unit);
  REQUIRE(v2.has_value());
  CHECK(v2->kind == ViolationKind::OffTime);
}

TEST_CASE("one unreachable task poisons every permutation") {
  const TravelModel unit{1.0};
  Worker w{1, {0, 0}, 1.0, 0.0, 1e6};
  std::vector<Task> tasks{
      make_task(1, 0.1, 0.0, 0, 1e6),
      make_task(2, 0.0, 0.2, 0, 1e6),
      make_task(3, 2.0, 0.0, 0, 1e6),  // beyond reach 1.0
  };
  std::sort(tasks.begin(), tasks.end(), [](const Task& a, const Task& b) { return a.id < b.id; });
  std::vector<int> idx{0, 1, 2};
  int checked = 0;
  do {
    std::vector<Task> perm;
    for (int i : idx) perm.push_back(tasks[i]);
    const auto v = validate_sequence(w, perm, 0.0, unit);
    REQUIRE(v.has_value());
    CHECK(v->kind == ViolationKind::Unreachable);
    CHECK(v->task == 3);
    CHECK(!valid_oracle(w, perm, 0.0, unit));
    ++checked;
  } while (std::next_permutation(idx.begin(), idx.end()));
  CHECK(checked == 6);
}

TEST_CASE("validate_sequence agrees with the constraint-by-constraint oracle") {
  Rng rng(23);
  const TravelModel m{0.5};
  for (int it = 0; it < 300; ++it) {
    Worker w{1, {rng.uniform(0, 2), rng.uniform(0, 2)}, rng.uniform(0.5, 2.5), 0.0,
             rng.uniform(5, 30)};
    std::vector<Task> tasks;
    const int n = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) {
      const double pub = 0.0;
      tasks.push_back(make_task(i + 1, rng.uniform(0, 2), rng.uniform(0, 2), pub,
                                rng.uniform(1, 25)));
    }
    std::vector<int> idx(tasks.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    do {
      std::vector<Task> perm;
      for (int i : idx) perm.push_back(tasks[i]);
      const bool got = !validate_sequence(w, perm, 0.0, m).has_value();
      CHECK(got == valid_oracle(w, perm, 0.0, m));
    } while (std::next_permutation(idx.begin(), idx.end()));
  }
}

TEST_CASE("arrival times strictly increase along valid sequences with distinct locations") {
  Rng rng(31);
  const TravelModel m{1.0};
  for (int it = 0; it < 100; ++it) {
    Worker w{1, {rng.uniform(0, 1), rng.uniform(0, 1)}, 10.0, 0.0, 1e9};
    std::vector<Task> seq;
    for (int i = 0; i < 3; ++i) {
      seq.push_back(make_task(i + 1, rng.uniform(0, 1), rng.uniform(0, 1), 0, 1e9));
    }
    if (validate_sequence(w, seq, 0.0, m).has_value()) continue;
    const auto arr = arrival_times(w, seq, 0.0, m);
    for (std::size_t i = 1; i < arr.size(); ++i) CHECK(arr[i] > arr[i - 1]);
  }
}
