#include "serpaudit/bubble.hpp"

#include <algorithm>
#include <numeric>
#include <regex>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "serpaudit/util.hpp"

namespace serpaudit {
namespace {

std::vector<std::vector<std::uint32_t>> interned_sets(
    const std::vector<std::vector<std::string_view>>& url_lists) {
  std::unordered_map<std::string_view, std::uint32_t> ids;
  std::vector<std::vector<std::uint32_t>> sets(url_lists.size());
  for (std::size_t i = 0; i < url_lists.size(); ++i) {
    for (const auto& url : url_lists[i]) {
      auto [it, inserted] = ids.emplace(url, static_cast<std::uint32_t>(ids.size()));
      sets[i].push_back(it->second);
    }
    std::sort(sets[i].begin(), sets[i].end());
    sets[i].erase(std::unique(sets[i].begin(), sets[i].end()), sets[i].end());
  }
  return sets;
}

std::uint64_t intersection_size(const std::vector<std::uint32_t>& a,
                                const std::vector<std::uint32_t>& b) {
  std::uint64_t count = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

struct UnionFind {
  std::vector<std::size_t> parent;

  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a > b) std::swap(a, b);
    parent[b] = a;  // smaller index becomes the root
  }
};

}  // namespace

std::vector<ResidualList> popularity_filter(const PairGroup& group, double threshold) {
  const std::size_t n = group.members.size();
  std::vector<std::vector<std::string_view>> url_sets(n);
  std::map<std::string_view, std::size_t> presence;
  for (std::size_t i = 0; i < n; ++i) {
    auto urls = member_urls(group, i);
    std::set<std::string_view> seen;
    for (const auto& url : urls) {
      if (seen.insert(url).second) url_sets[i].push_back(url);
    }
    for (const auto& url : url_sets[i]) ++presence[url];
  }
  std::vector<ResidualList> residuals(n);
  for (std::size_t i = 0; i < n; ++i) {
    residuals[i].original = group.members[i];
    for (const auto& url : url_sets[i]) {
      double share = static_cast<double>(presence[url]) / static_cast<double>(n);
      if (share < threshold) residuals[i].residual.push_back(url);
    }
  }
  return residuals;
}

std::vector<std::vector<std::size_t>> cluster_residuals(
    const std::vector<ResidualList>& residuals, int min_shared, bool clique_mode) {
  const std::size_t n = residuals.size();
  std::vector<std::vector<std::string_view>> url_lists(n);
  for (std::size_t i = 0; i < n; ++i) url_lists[i] = residuals[i].residual;
  auto sets = interned_sets(url_lists);

  std::vector<std::vector<bool>> adjacent(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    if (sets[i].size() < static_cast<std::size_t>(min_shared)) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (sets[j].size() < static_cast<std::size_t>(min_shared)) continue;
      if (intersection_size(sets[i], sets[j]) >= static_cast<std::uint64_t>(min_shared)) {
        adjacent[i][j] = adjacent[j][i] = true;
      }
    }
  }

  std::vector<std::vector<std::size_t>> clusters;
  if (!clique_mode) {
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (adjacent[i][j]) uf.unite(i, j);
      }
    }
    std::map<std::size_t, std::vector<std::size_t>> components;
    for (std::size_t i = 0; i < n; ++i) components[uf.find(i)].push_back(i);
    for (auto& [root, members] : components) {
      if (members.size() >= 2) clusters.push_back(std::move(members));
    }
  } else {
    std::vector<bool> assigned(n, false);
    for (std::size_t seed = 0; seed < n; ++seed) {
      if (assigned[seed]) continue;
      std::vector<std::size_t> clique{seed};
      for (std::size_t candidate = 0; candidate < n; ++candidate) {
        if (assigned[candidate] || candidate == seed) continue;
        bool joins = true;
        for (std::size_t member : clique) {
          if (!adjacent[member][candidate]) {
            joins = false;
            break;
          }
        }
        if (joins) clique.push_back(candidate);
      }
      if (clique.size() >= 2) {
        std::sort(clique.begin(), clique.end());
        for (std::size_t member : clique) assigned[member] = true;
        clusters.push_back(std::move(clique));
      }
    }
    std::sort(clusters.begin(), clusters.end());
  }
  return clusters;
}

std::optional<double> distinctness(const std::vector<std::size_t>& cluster,
                                   const PairGroup& group) {
  const std::size_t n = group.members.size();
  if (cluster.size() >= n) return std::nullopt;
  std::vector<std::vector<std::string_view>> url_lists(n);
  for (std::size_t i = 0; i < n; ++i) url_lists[i] = member_urls(group, i);
  auto sets = interned_sets(url_lists);

  std::vector<bool> in_cluster(n, false);
  for (std::size_t member : cluster) in_cluster[member] = true;
  std::uint64_t sum = 0;
  std::uint64_t pairs = 0;
  for (std::size_t member : cluster) {
    for (std::size_t outsider = 0; outsider < n; ++outsider) {
      if (in_cluster[outsider]) continue;
      sum += intersection_size(sets[member], sets[outsider]);
      ++pairs;
    }
  }
  if (pairs == 0) return std::nullopt;
  return static_cast<double>(sum) / static_cast<double>(pairs);
}

ClusterReport detect_group(const PairGroup& group, const DetectParams& params) {
  ClusterReport report;
  report.term = group.term;
  report.time_key = group.time_key;
  report.params = params;
  if (group.members.size() < 2) return report;

  auto residuals = popularity_filter(group, params.popularity_threshold);
  auto clusters = cluster_residuals(residuals, params.min_shared, params.clique_mode);

  std::vector<std::vector<std::string_view>> residual_lists(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i) residual_lists[i] = residuals[i].residual;
  auto residual_sets = interned_sets(residual_lists);

  for (const auto& members : clusters) {
    Cluster cluster;
    for (std::size_t member : members) {
      cluster.member_donor_ids.push_back(group.members[member]->donor_id);
    }
    std::sort(cluster.member_donor_ids.begin(), cluster.member_donor_ids.end());
    std::uint64_t sum = 0;
    std::uint64_t pairs = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        sum += intersection_size(residual_sets[members[i]], residual_sets[members[j]]);
        ++pairs;
      }
    }
    cluster.mean_internal_shared =
        pairs == 0 ? 0.0 : static_cast<double>(sum) / static_cast<double>(pairs);
    cluster.distinctness = distinctness(members, group);
    cluster.flagged =
        cluster.distinctness.has_value() && *cluster.distinctness < params.distinctness_threshold;
    report.clusters.push_back(std::move(cluster));
  }
  return report;
}

struct LocalePatternTable::Impl {
  std::vector<std::string> tags;
  std::vector<std::pair<std::string, std::regex>> patterns;  // (tag, compiled)
};

LocalePatternTable::LocalePatternTable() : impl_(std::make_unique<Impl>()) {}
LocalePatternTable::~LocalePatternTable() = default;
LocalePatternTable::LocalePatternTable(LocalePatternTable&&) noexcept = default;
LocalePatternTable& LocalePatternTable::operator=(LocalePatternTable&&) noexcept = default;

LocalePatternTable LocalePatternTable::defaults() {
  LocalePatternTable table;
  table.add("de", R"(vor\s+\d+\s+\S+)");
  table.add("en", R"(\d+\s+\S+\s+ago)");
  table.add("fr", R"(il\s+y\s+a\s+\d+)");
  table.add("no", R"(for\s+\d+\s+\S+\s+siden)");
  return table;
}

LocalePatternTable LocalePatternTable::from_file(const std::string& path) {
  return from_text(util::read_text_file(path));
}

LocalePatternTable LocalePatternTable::from_text(std::string_view text) {
  LocalePatternTable table;
  for (const auto& raw : util::split(text, '\n')) {
    std::string_view line = util::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw std::runtime_error("bad locale pattern line (want tag<TAB>pattern): " +
                               std::string(raw));
    }
    std::string tag(util::trim(line.substr(0, tab)));
    std::string pattern(util::trim(line.substr(tab + 1)));
    if (tag.empty() || pattern.empty()) {
      throw std::runtime_error("bad locale pattern line: " + std::string(raw));
    }
    table.add(std::move(tag), pattern);
  }
  return table;
}

void LocalePatternTable::add(std::string tag, const std::string& pattern) {
  std::regex compiled(pattern, std::regex::ECMAScript | std::regex::icase);
  if (std::find(impl_->tags.begin(), impl_->tags.end(), tag) == impl_->tags.end()) {
    impl_->tags.push_back(tag);
  }
  impl_->patterns.emplace_back(std::move(tag), std::move(compiled));
}

std::string LocalePatternTable::match(std::string_view age_string) const {
  for (const auto& [tag, pattern] : impl_->patterns) {
    if (std::regex_search(age_string.begin(), age_string.end(), pattern)) return tag;
  }
  return std::string(kUnknownLocale);
}

const std::vector<std::string>& LocalePatternTable::tags() const { return impl_->tags; }

std::string detect_locale(const ResultList& list, const LocalePatternTable& table) {
  for (const auto& age : list.top_story_age_strings) {
    if (age.empty()) continue;
    auto tag = table.match(age);
    if (tag != kUnknownLocale) return tag;
  }
  return std::string(kUnknownLocale);
}

std::map<std::string, std::string> donor_locales(std::span<const ResultList> lists,
                                                 const LocalePatternTable& table) {
  std::map<std::string, std::map<std::string, std::size_t>> votes;
  for (const auto& list : lists) {
    auto tag = detect_locale(list, table);
    auto& donor_votes = votes[list.donor_id];
    if (tag != kUnknownLocale) ++donor_votes[tag];
  }
  std::map<std::string, std::string> locales;
  for (const auto& [donor, donor_votes] : votes) {
    std::string best(kUnknownLocale);
    std::size_t best_count = 0;
    for (const auto& [tag, count] : donor_votes) {
      if (count > best_count) {  // map order makes ties lexicographic-smallest
        best = tag;
        best_count = count;
      }
    }
    locales[donor] = best;
  }
  return locales;
}

LocaleMatrix locale_overlap_matrix(const PairGroup& group,
                                   const std::map<std::string, std::string>& donor_locale) {
  const std::size_t n = group.members.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto locale_of = [&](std::size_t i) -> std::string {
    auto it = donor_locale.find(group.members[i]->donor_id);
    return it == donor_locale.end() ? std::string(kUnknownLocale) : it->second;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto la = locale_of(a);
    auto lb = locale_of(b);
    if (la != lb) return la < lb;
    return group.members[a]->donor_id < group.members[b]->donor_id;
  });

  std::vector<std::vector<std::string_view>> url_lists(n);
  for (std::size_t i = 0; i < n; ++i) url_lists[i] = member_urls(group, i);
  auto sets = interned_sets(url_lists);

  LocaleMatrix matrix;
  matrix.donor_ids.reserve(n);
  matrix.locales.reserve(n);
  for (std::size_t i : order) {
    matrix.donor_ids.push_back(group.members[i]->donor_id);
    matrix.locales.push_back(locale_of(i));
  }
  matrix.counts.assign(n, std::vector<std::uint32_t>(n, 0));
  for (std::size_t a = 0; a < n; ++a) {
    matrix.counts[a][a] = static_cast<std::uint32_t>(sets[order[a]].size());
    for (std::size_t b = a + 1; b < n; ++b) {
      auto c = static_cast<std::uint32_t>(intersection_size(sets[order[a]], sets[order[b]]));
      matrix.counts[a][b] = c;
      matrix.counts[b][a] = c;
    }
  }
  return matrix;
}

}  // namespace serpaudit
