#pragma once

#include <atomic>
#include <chrono>
#include <string>
#include <string_view>

namespace specloop {

using Millis = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<Millis>;

/// "2025-03-01T09:00:00.000Z"
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view text);

/// Calendar date "YYYY-MM-DD"; throws Error{parse} on malformed or impossible dates.
std::chrono::year_month_day parse_date(std::string_view text);
std::string format_date(std::chrono::year_month_day d);

double to_seconds(Millis d);
Millis from_seconds(double seconds);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override;
};

/// Manually driven clock for scripted sessions and tests.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(Timestamp start) : now_ms_(start.time_since_epoch().count()) {}

  Timestamp now() const override { return Timestamp{Millis{now_ms_.load()}}; }
  void set(Timestamp t) { now_ms_.store(t.time_since_epoch().count()); }
  void advance(Millis d) { now_ms_.fetch_add(d.count()); }

 private:
  std::atomic<long long> now_ms_;
};

}  // namespace specloop
