#include "clvsa/dates.hpp"

#include <cstdio>

namespace clvsa {

// civil <-> serial conversion after Howard Hinnant's chrono algorithms
int to_serial(const CivilDate& d) {
  int y = d.year;
  const int m = d.month;
  const int day = d.day;
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
      static_cast<unsigned>(day) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<int>(doe) - 719468;
}

CivilDate from_serial(int serial) {
  int z = serial + 719468;
  const int era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe =
      (doe - doe / 1460u + doe / 36524u - doe / 146096u) / 365u;
  const int y = static_cast<int>(yoe) + era * 400;
  const unsigned doy = doe - (365u * yoe + yoe / 4u - yoe / 100u);
  const unsigned mp = (5u * doy + 2u) / 153u;
  const unsigned d = doy - (153u * mp + 2u) / 5u + 1u;
  const unsigned m = mp + (mp < 10 ? 3u : static_cast<unsigned>(-9));
  return CivilDate{y + (m <= 2), static_cast<int>(m), static_cast<int>(d)};
}

int weekday(int serial) {
  // 1970-01-01 was a Thursday
  int w = (serial + 3) % 7;
  return w < 0 ? w + 7 : w;
}

namespace {

bool parse_int(std::string_view s, std::size_t pos, std::size_t len,
               int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char c = s[i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

}  // namespace

bool parse_date(std::string_view s, int& serial) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  int y, m, d;
  if (!parse_int(s, 0, 4, y) || !parse_int(s, 5, 2, m) ||
      !parse_int(s, 8, 2, d))
    return false;
  if (m < 1 || m > 12 || d < 1 || d > 31) return false;
  const CivilDate cd{y, m, d};
  serial = to_serial(cd);
  const CivilDate back = from_serial(serial);
  return back.year == y && back.month == m && back.day == d;
}

bool parse_time(std::string_view s, int& minute) {
  if (s.size() != 5 || s[2] != ':') return false;
  int h, m;
  if (!parse_int(s, 0, 2, h) || !parse_int(s, 3, 2, m)) return false;
  if (h > 23 || m > 59) return false;
  minute = h * 60 + m;
  return true;
}

std::string format_date(int serial) {
  const CivilDate d = from_serial(serial);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

std::string format_time(int minute) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d", minute / 60, minute % 60);
  return buf;
}

std::string format_month(int serial) {
  const CivilDate d = from_serial(serial);
  char buf[12];
  std::snprintf(buf, sizeof buf, "%04d-%02d", d.year, d.month);
  return buf;
}

std::string format_timestamp(const Timestamp& ts) {
  return format_date(ts.date) + " " + format_time(ts.minute);
}

}  // namespace clvsa
