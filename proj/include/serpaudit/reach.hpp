#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "serpaudit/model.hpp"

namespace serpaudit {

struct ReachPoint {
  Tld tld;
  double active_reach = 0.0;  // percent of panel users visiting the domain
  std::uint64_t delivered_count = 0;
};

struct ReachFit {
  double a = 0.0;  // expected = a * reach^b
  double b = 0.0;
  std::size_t n_points = 0;
  double log_residual_variance = 0.0;  // log10 space, n-2 degrees of freedom
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Points usable for fitting: reach > 0 and count > 0.
std::vector<ReachPoint> fittable_points(std::span<const ReachPoint> points);

// Ordinary least squares on (log10 reach, log10 count). Throws FitError on
// fewer than 3 usable points or when all reach values coincide.
ReachFit fit_loglog(std::span<const ReachPoint> points);

// a * reach^b; reach must be positive.
double expected_count(const ReachFit& fit, double reach);

enum class Direction { over, under };

struct OverrepFlag {
  Tld tld;
  double active_reach = 0.0;
  std::uint64_t observed = 0;
  double expected = 0.0;
  double ratio = 0.0;  // observed / expected; +inf when expected is 0
  Direction direction = Direction::over;
};

// Flags points delivered at least `factor` times more or less than expected.
// Zero-reach points have expected 0: any delivery there flags "over". Zero
// deliveries flag "under" only when at least `factor` were expected. Sorted
// by descending ratio, ties by tld.
std::vector<OverrepFlag> overrepresentation(std::span<const ReachPoint> points,
                                            const ReachFit& fit, double factor = 5.0);

struct DateWindow {
  Date begin{2017, 8, 1};
  Date end{2017, 8, 31};  // inclusive
};

// Top-story URL deliveries per TLD within the window, joined with the reach
// panel; panel domains without deliveries appear with count 0, delivered
// domains missing from the panel with reach 0.
std::vector<ReachPoint> count_topstory_deliveries(std::span<const ResultList> lists,
                                                  const std::map<std::string, double>& panel,
                                                  const DateWindow& window = {});

struct ReachPanel {
  std::map<std::string, double> reach;  // tld -> active reach percent
  std::string period;
};

// Tab-separated columns: tld, active_reach_percent, period.
ReachPanel load_reach_panel(const std::string& path);
ReachPanel parse_reach_panel(std::string_view text);

}  // namespace serpaudit
