#include "serpaudit/reach.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "serpaudit/util.hpp"

namespace serpaudit {

std::vector<ReachPoint> fittable_points(std::span<const ReachPoint> points) {
  std::vector<ReachPoint> usable;
  for (const auto& p : points) {
    if (p.active_reach > 0.0 && p.delivered_count > 0) usable.push_back(p);
  }
  return usable;
}

ReachFit fit_loglog(std::span<const ReachPoint> points) {
  auto usable = fittable_points(points);
  if (usable.size() < 3) {
    throw FitError("need at least 3 points with positive reach and count, got " +
                   std::to_string(usable.size()));
  }
  const std::size_t n = usable.size();
  std::vector<double> xs(n);
  std::vector<double> ys(n);
  double x_mean = 0.0;
  double y_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = std::log10(usable[i].active_reach);
    ys[i] = std::log10(static_cast<double>(usable[i].delivered_count));
    x_mean += xs[i];
    y_mean += ys[i];
  }
  x_mean /= static_cast<double>(n);
  y_mean /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - x_mean) * (xs[i] - x_mean);
    sxy += (xs[i] - x_mean) * (ys[i] - y_mean);
  }
  if (sxx == 0.0) throw FitError("all reach values coincide; slope undefined");
  ReachFit fit;
  fit.b = sxy / sxx;
  const double intercept = y_mean - fit.b * x_mean;
  fit.a = std::pow(10.0, intercept);
  fit.n_points = n;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double resid = ys[i] - (intercept + fit.b * xs[i]);
    rss += resid * resid;
  }
  fit.log_residual_variance = n > 2 ? rss / static_cast<double>(n - 2) : 0.0;
  return fit;
}

double expected_count(const ReachFit& fit, double reach) {
  if (reach <= 0.0) throw std::domain_error("expected_count requires positive reach");
  return fit.a * std::pow(reach, fit.b);
}

std::vector<OverrepFlag> overrepresentation(std::span<const ReachPoint> points,
                                            const ReachFit& fit, double factor) {
  std::vector<OverrepFlag> flags;
  for (const auto& p : points) {
    const double expected = p.active_reach > 0.0 ? expected_count(fit, p.active_reach) : 0.0;
    const double observed = static_cast<double>(p.delivered_count);
    bool flagged = false;
    OverrepFlag flag;
    flag.tld = p.tld;
    flag.active_reach = p.active_reach;
    flag.observed = p.delivered_count;
    flag.expected = expected;
    if (expected == 0.0) {
      if (p.delivered_count > 0) {
        flag.ratio = std::numeric_limits<double>::infinity();
        flag.direction = Direction::over;
        flagged = true;
      }
    } else if (p.delivered_count == 0) {
      flag.ratio = 0.0;
      flag.direction = Direction::under;
      flagged = expected >= factor;
    } else {
      flag.ratio = observed / expected;
      if (flag.ratio >= factor) {
        flag.direction = Direction::over;
        flagged = true;
      } else if (flag.ratio <= 1.0 / factor) {
        flag.direction = Direction::under;
        flagged = true;
      }
    }
    if (flagged) flags.push_back(std::move(flag));
  }
  std::sort(flags.begin(), flags.end(), [](const OverrepFlag& x, const OverrepFlag& y) {
    if (x.ratio != y.ratio) return x.ratio > y.ratio;
    return x.tld.value < y.tld.value;
  });
  return flags;
}

std::vector<ReachPoint> count_topstory_deliveries(std::span<const ResultList> lists,
                                                  const std::map<std::string, double>& panel,
                                                  const DateWindow& window) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& list : lists) {
    if (list.timestamp.date < window.begin || window.end < list.timestamp.date) continue;
    for (const auto& url : list.top_stories) {
      if (auto tld = try_extract_tld(url)) ++counts[tld->value];
    }
  }
  std::map<std::string, ReachPoint> joined;
  for (const auto& [tld, count] : counts) {
    ReachPoint p;
    p.tld = Tld{tld};
    p.delivered_count = count;
    auto it = panel.find(tld);
    p.active_reach = it == panel.end() ? 0.0 : it->second;
    joined[tld] = std::move(p);
  }
  for (const auto& [tld, reach] : panel) {
    if (joined.count(tld)) continue;
    ReachPoint p;
    p.tld = Tld{tld};
    p.active_reach = reach;
    p.delivered_count = 0;
    joined[tld] = std::move(p);
  }
  std::vector<ReachPoint> points;
  points.reserve(joined.size());
  for (auto& [tld, p] : joined) points.push_back(std::move(p));
  return points;
}

ReachPanel load_reach_panel(const std::string& path) {
  return parse_reach_panel(util::read_text_file(path));
}

ReachPanel parse_reach_panel(std::string_view text) {
  ReachPanel panel;
  bool first = true;
  for (const auto& raw : util::split(text, '\n')) {
    std::string_view line = util::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto fields = util::split(line, '\t');
    if (first && fields.size() >= 2 && fields[0] == "tld") {
      first = false;
      continue;  // header row
    }
    first = false;
    if (fields.size() < 2) {
      throw std::runtime_error("bad reach panel line (want tld<TAB>reach[<TAB>period]): " +
                               std::string(raw));
    }
    double reach = 0.0;
    try {
      reach = std::stod(fields[1]);
    } catch (const std::exception&) {
      throw std::runtime_error("bad reach value: " + fields[1]);
    }
    if (reach < 0.0) throw std::runtime_error("negative reach: " + fields[1]);
    panel.reach[util::to_lower(fields[0])] = reach;
    if (fields.size() >= 3 && panel.period.empty()) panel.period = fields[2];
  }
  return panel;
}

}  // namespace serpaudit
