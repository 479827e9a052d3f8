#pragma once

#include <string>
#include <string_view>

namespace clvsa {

// Calendar dates are carried as serial day counts (days since 1970-01-01),
// which makes gap and span arithmetic trivial.
struct CivilDate {
  int year = 1970;
  int month = 1;
  int day = 1;
};

int to_serial(const CivilDate& d);
CivilDate from_serial(int serial);
int weekday(int serial);  // 0 = Monday .. 6 = Sunday

// strict "YYYY-MM-DD"; returns false on malformed input
bool parse_date(std::string_view s, int& serial);
// strict "HH:MM"; minute of day
bool parse_time(std::string_view s, int& minute);

std::string format_date(int serial);
std::string format_time(int minute);
std::string format_month(int serial);  // "YYYY-MM"

struct Timestamp {
  int date = 0;    // serial day
  int minute = 0;  // minute of day

  friend bool operator==(const Timestamp&, const Timestamp&) = default;
  friend auto operator<=>(const Timestamp& a, const Timestamp& b) {
    if (a.date != b.date) return a.date <=> b.date;
    return a.minute <=> b.minute;
  }
};

std::string format_timestamp(const Timestamp& ts);

}  // namespace clvsa
