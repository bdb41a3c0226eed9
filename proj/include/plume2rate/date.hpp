/*
 * Copyright 2026 The plume2rate Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef PLUME2RATE_DATE_HPP_
#define PLUME2RATE_DATE_HPP_

#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "plume2rate/error.hpp"

namespace plume2rate {

// Calendar date with ISO "YYYY-MM-DD" text form.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::year_month_day ymd) : ymd_(ymd) {}
  Date(int year, unsigned month, unsigned day)
      : ymd_(std::chrono::year{year}, std::chrono::month{month},
             std::chrono::day{day}) {}

  static Date Parse(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    std::string buf(text);
    char tail = 0;
    if (std::sscanf(buf.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
      throw Error(ErrorKind::kSchemaError, "bad date '" + buf + "'");
    }
    Date out(y, m, d);
    if (!out.ymd_.ok()) {
      throw Error(ErrorKind::kSchemaError, "invalid date '" + buf + "'");
    }
    return out;
  }

  std::string ToString() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd_.year()),
                  unsigned(ymd_.month()), unsigned(ymd_.day()));
    return buf;
  }

  Date AddDays(int days) const {
    return Date(std::chrono::year_month_day(std::chrono::sys_days(ymd_) +
                                            std::chrono::days(days)));
  }

  // 0-based day of the year.
  int DayOfYear() const {
    const auto jan1 = std::chrono::year_month_day(ymd_.year(),
                                                  std::chrono::January,
                                                  std::chrono::day{1});
    return static_cast<int>(
        (std::chrono::sys_days(ymd_) - std::chrono::sys_days(jan1)).count());
  }

  int year() const { return int(ymd_.year()); }

  auto operator<=>(const Date&) const = default;

 private:
  std::chrono::year_month_day ymd_{std::chrono::year{2020},
                                   std::chrono::January, std::chrono::day{1}};
};

}  // namespace plume2rate

#endif  // PLUME2RATE_DATE_HPP_
