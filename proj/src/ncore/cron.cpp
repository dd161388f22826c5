#include "ncore/cron.hpp"

#include <ctime>

#include "ncore/util.hpp"

namespace ncore {

namespace {

// Fills bits [lo..hi] of one field from "a", "a-b", "*", with optional "/n",
// comma-separated. Returns false on any malformed piece.
template <size_t N>
bool parse_field(std::string_view text, int lo, int hi, std::bitset<N>* out,
                 bool* restricted) {
  *restricted = !(text == "*");
  for (const std::string& part : split(text, ',')) {
    if (part.empty()) return false;
    std::string_view p = part;
    int step = 1;
    if (auto slash = p.find('/'); slash != std::string_view::npos) {
      std::string_view step_text = p.substr(slash + 1);
      p = p.substr(0, slash);
      if (step_text.empty()) return false;
      step = 0;
      for (char c : step_text) {
        if (c < '0' || c > '9') return false;
        step = step * 10 + (c - '0');
      }
      if (step <= 0) return false;
    }
    int from = lo, to = hi;
    if (p != "*") {
      auto read_num = [&](std::string_view s, int* v) {
        if (s.empty()) return false;
        *v = 0;
        for (char c : s) {
          if (c < '0' || c > '9') return false;
          *v = *v * 10 + (c - '0');
        }
        return true;
      };
      if (auto dash = p.find('-'); dash != std::string_view::npos) {
        if (!read_num(p.substr(0, dash), &from) ||
            !read_num(p.substr(dash + 1), &to))
          return false;
      } else {
        if (!read_num(p, &from)) return false;
        to = from;
      }
    }
    // Day-of-week allows 7 as an alias for Sunday.
    if (hi == 6) {
      if (from == 7 && to == 7) {
        from = to = 0;
      } else if (to == 7) {
        out->set(0);  // range ending at Sunday wraps
        to = 6;
      }
      if (from == 7) return false;
    }
    if (from < lo || to > hi || from > to) return false;
    for (int v = from; v <= to; v += step) out->set(static_cast<size_t>(v));
  }
  return out->any();
}

}  // namespace

std::optional<CronExpr> CronExpr::parse(std::string_view text) {
  std::vector<std::string> fields = split(trim(text), ' ');
  std::vector<std::string> nonempty;
  for (auto& f : fields)
    if (!f.empty()) nonempty.push_back(f);
  if (nonempty.size() != 5) return std::nullopt;

  CronExpr e;
  bool ignored;
  if (!parse_field(nonempty[0], 0, 59, &e.minute, &ignored)) return std::nullopt;
  if (!parse_field(nonempty[1], 0, 23, &e.hour, &ignored)) return std::nullopt;
  if (!parse_field(nonempty[2], 1, 31, &e.dom, &e.dom_restricted))
    return std::nullopt;
  if (!parse_field(nonempty[3], 1, 12, &e.month, &ignored)) return std::nullopt;
  if (!parse_field(nonempty[4], 0, 6, &e.dow, &e.dow_restricted))
    return std::nullopt;
  return e;
}

bool CronExpr::matches(Timestamp t) const {
  time_t tt = static_cast<time_t>(t - t % 60);
  std::tm tm{};
  if (!gmtime_r(&tt, &tm)) return false;
  if (!minute.test(static_cast<size_t>(tm.tm_min))) return false;
  if (!hour.test(static_cast<size_t>(tm.tm_hour))) return false;
  if (!month.test(static_cast<size_t>(tm.tm_mon + 1))) return false;
  bool dom_ok = dom.test(static_cast<size_t>(tm.tm_mday));
  bool dow_ok = dow.test(static_cast<size_t>(tm.tm_wday));
  if (dom_restricted && dow_restricted) return dom_ok || dow_ok;
  if (dom_restricted) return dom_ok;
  if (dow_restricted) return dow_ok;
  return true;
}

std::optional<Timestamp> CronExpr::next_after(Timestamp t) const {
  Timestamp cur = (t / 60 + 1) * 60;
  // Minute scan; bounded rather than clever. Five years covers any
  // satisfiable expression including Feb 29 schedules.
  const Timestamp limit = cur + 5LL * 366 * 24 * 60 * 60;
  for (; cur < limit; cur += 60)
    if (matches(cur)) return cur;
  return std::nullopt;
}

}  // namespace ncore
