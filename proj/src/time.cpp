#include "specloop/time.hpp"

#include <cmath>
#include <cstdio>

#include "specloop/error.hpp"

namespace specloop {

namespace {

int parse_fixed(std::string_view text, size_t pos, size_t width, std::string_view what) {
  if (pos + width > text.size()) {
    throw Error(ErrorKind::parse, "malformed " + std::string(what) + ": '" + std::string(text) + "'");
  }
  int value = 0;
  for (size_t i = pos; i < pos + width; ++i) {
    char c = text[i];
    if (c < '0' || c > '9') {
      throw Error(ErrorKind::parse,
                  "malformed " + std::string(what) + ": '" + std::string(text) + "'");
    }
    value = value * 10 + (c - '0');
  }
  return value;
}

void expect_char(std::string_view text, size_t pos, char c, std::string_view what) {
  if (pos >= text.size() || text[pos] != c) {
    throw Error(ErrorKind::parse, "malformed " + std::string(what) + ": '" + std::string(text) + "'");
  }
}

}  // namespace

std::chrono::year_month_day parse_date(std::string_view text) {
  if (text.size() != 10) {
    throw Error(ErrorKind::parse, "malformed date (want YYYY-MM-DD): '" + std::string(text) + "'");
  }
  int y = parse_fixed(text, 0, 4, "date");
  expect_char(text, 4, '-', "date");
  int m = parse_fixed(text, 5, 2, "date");
  expect_char(text, 7, '-', "date");
  int d = parse_fixed(text, 8, 2, "date");
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error(ErrorKind::parse, "invalid calendar date: '" + std::string(text) + "'");
  return ymd;
}

std::string format_date(std::chrono::year_month_day d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::string format_timestamp(Timestamp t) {
  auto days = std::chrono::floor<std::chrono::days>(t);
  std::chrono::year_month_day ymd{days};
  std::chrono::hh_mm_ss<Millis> tod{t - days};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d.%03dZ", format_date(ymd).c_str(),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()),
                static_cast<int>(tod.subseconds().count()));
  return buf;
}

Timestamp parse_timestamp(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS[.fff]Z
  if (text.size() < 20) throw Error(ErrorKind::parse, "malformed timestamp: '" + std::string(text) + "'");
  auto ymd = parse_date(text.substr(0, 10));
  if (text[10] != 'T' && text[10] != ' ') {
    throw Error(ErrorKind::parse, "malformed timestamp: '" + std::string(text) + "'");
  }
  int hh = parse_fixed(text, 11, 2, "timestamp");
  expect_char(text, 13, ':', "timestamp");
  int mm = parse_fixed(text, 14, 2, "timestamp");
  expect_char(text, 16, ':', "timestamp");
  int ss = parse_fixed(text, 17, 2, "timestamp");
  size_t pos = 19;
  int ms = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 3) ms = ms * 10 + (text[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) throw Error(ErrorKind::parse, "malformed timestamp: '" + std::string(text) + "'");
    for (; digits < 3; ++digits) ms *= 10;
  }
  if (pos + 1 != text.size() || text[pos] != 'Z' || hh > 23 || mm > 59 || ss > 60) {
    throw Error(ErrorKind::parse, "malformed timestamp (UTC 'Z' required): '" + std::string(text) + "'");
  }
  return std::chrono::sys_days{ymd} + std::chrono::hours{hh} + std::chrono::minutes{mm} +
         std::chrono::seconds{ss} + Millis{ms};
}

double to_seconds(Millis d) { return static_cast<double>(d.count()) / 1000.0; }

Millis from_seconds(double seconds) { return Millis{static_cast<long long>(std::llround(seconds * 1000.0))}; }

Timestamp SystemClock::now() const {
  return std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now());
}

}  // namespace specloop
