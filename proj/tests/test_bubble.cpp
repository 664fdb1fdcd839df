#include <doctest.h>

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "serpaudit/bubble.hpp"
#include "serpaudit/util.hpp"

using namespace serpaudit;

namespace {

ResultList make_list(std::string donor, std::vector<std::string> organic,
                     std::vector<std::string> ages = {}) {
  ResultList list;
  list.donor_id = std::move(donor);
  list.term = SearchTerm::from_index(0);
  list.time_key = SearchTimeKey::from_index(0);
  list.organic = std::move(organic);
  for (auto& age : ages) {
    list.top_stories.push_back("story" + std::to_string(list.top_stories.size()) + ".de/a");
    list.top_story_age_strings.push_back(std::move(age));
  }
  return list;
}

PairGroup group_of(const std::vector<ResultList>& storage) {
  PairGroup group;
  for (const auto& list : storage) group.members.push_back(&list);
  return group;
}

std::vector<std::string> urls(std::initializer_list<int> ids) {
  std::vector<std::string> v;
  for (int id : ids) v.push_back("u" + std::to_string(id) + ".de/x");
  return v;
}

}  // namespace

TEST_CASE("popularity filter: >= 70% of lists removes the URL everywhere") {
  // 10 lists; "u0" in 8 (removed), "u1" in 6 (kept), each list one own URL.
  std::vector<ResultList> storage;
  for (int d = 0; d < 10; ++d) {
    std::vector<std::string> list_urls;
    if (d < 8) list_urls.push_back("u0.de/x");
    if (d < 6) list_urls.push_back("u1.de/x");
    list_urls.push_back("own" + std::to_string(d) + ".de/x");
    storage.push_back(make_list("d" + std::to_string(d), list_urls));
  }
  auto residuals = popularity_filter(group_of(storage), 0.70);
  REQUIRE(residuals.size() == 10);
  for (int d = 0; d < 10; ++d) {
    const auto& r = residuals[d].residual;
    CHECK(std::find(r.begin(), r.end(), "u0.de/x") == r.end());
    if (d < 6) CHECK(std::find(r.begin(), r.end(), "u1.de/x") != r.end());
    CHECK(std::find(r.begin(), r.end(), "own" + std::to_string(d) + ".de/x") != r.end());
  }
  // Exactly at the threshold: 7 of 10 is 0.70, removed ("at least 70%").
  std::vector<ResultList> exact;
  for (int d = 0; d < 10; ++d) {
    exact.push_back(make_list("d" + std::to_string(d),
                              d < 7 ? urls({5, d + 10}) : urls({d + 10})));
  }
  auto exact_residuals = popularity_filter(group_of(exact), 0.70);
  for (const auto& r : exact_residuals) {
    CHECK(std::find(r.residual.begin(), r.residual.end(), "u5.de/x") == r.residual.end());
  }

  // Raising the threshold never removes more URLs (monotonicity).
  for (double low : {0.3, 0.5, 0.7}) {
    auto strict = popularity_filter(group_of(storage), low + 0.2);
    auto loose = popularity_filter(group_of(storage), low);
    for (std::size_t i = 0; i < strict.size(); ++i) {
      CHECK(loose[i].residual.size() <= strict[i].residual.size());
    }
  }
}

TEST_CASE("popularity filter: 7 universal + 2 idiosyncratic leaves exactly 2") {
  std::vector<ResultList> storage;
  for (int d = 0; d < 12; ++d) {
    auto list_urls = urls({0, 1, 2, 3, 4, 5, 6});
    list_urls.push_back("own" + std::to_string(d) + "a.de/x");
    list_urls.push_back("own" + std::to_string(d) + "b.de/x");
    storage.push_back(make_list("d" + std::to_string(d), list_urls));
  }
  for (const auto& r : popularity_filter(group_of(storage))) {
    CHECK(r.residual.size() == 2);
  }
}

TEST_CASE("clustering: shared residuals form components of size >= 2") {
  // 5 donors share 4 residual links; everyone else has an empty residual.
  std::vector<ResidualList> residuals(9);
  std::vector<std::string> shared{"a.de/1", "b.de/2", "c.de/3", "d.de/4"};
  for (int d = 0; d < 5; ++d) {
    for (const auto& url : shared) residuals[d].residual.push_back(url);
  }
  auto clusters = cluster_residuals(residuals, 3);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0] == std::vector<std::size_t>{0, 1, 2, 3, 4});

  // All disjoint: no clusters.
  std::vector<ResidualList> disjoint(6);
  std::vector<std::vector<std::string>> own(6);
  for (int d = 0; d < 6; ++d) {
    for (int j = 0; j < 4; ++j) own[d].push_back("own" + std::to_string(d * 4 + j) + ".de/x");
    for (const auto& url : own[d]) disjoint[d].residual.push_back(url);
  }
  CHECK(cluster_residuals(disjoint, 3).empty());

  // Two sub-cliques bridged by one donor: one component, but two disjoint
  // cliques in clique mode.
  std::vector<std::string> left{"l.de/1", "l.de/2", "l.de/3"};
  std::vector<std::string> right{"r.de/1", "r.de/2", "r.de/3"};
  std::vector<ResidualList> bridged(5);
  for (int d = 0; d < 2; ++d) {
    for (const auto& url : left) bridged[d].residual.push_back(url);
  }
  for (int d = 3; d < 5; ++d) {
    for (const auto& url : right) bridged[d].residual.push_back(url);
  }
  for (const auto& url : left) bridged[2].residual.push_back(url);
  for (const auto& url : right) bridged[2].residual.push_back(url);
  auto components = cluster_residuals(bridged, 3);
  REQUIRE(components.size() == 1);
  CHECK(components[0].size() == 5);
  auto cliques = cluster_residuals(bridged, 3, true);
  REQUIRE(cliques.size() == 2);
  CHECK(cliques[0] == std::vector<std::size_t>{0, 1, 2});
  CHECK(cliques[1] == std::vector<std::size_t>{3, 4});

  // min_shared is a sharp edge: 2 shared links do not connect at 3.
  std::vector<ResidualList> weak(2);
  for (const auto& url : {"x.de/1", "y.de/2"}) {
    weak[0].residual.push_back(url);
    weak[1].residual.push_back(url);
  }
  CHECK(cluster_residuals(weak, 3).empty());
  CHECK(cluster_residuals(weak, 2).size() == 1);
}

TEST_CASE("distinctness: mean original-list intersection with outsiders") {
  // Members share 9 URLs with each other but only 2 with the 3 outsiders.
  std::vector<ResultList> storage;
  auto foreign = urls({100, 101, 102, 103, 104, 105, 106, 107, 108});
  auto german = urls({0, 1, 2, 3, 4, 5, 6, 108, 100});
  storage.push_back(make_list("in1", foreign));
  storage.push_back(make_list("in2", foreign));
  for (int d = 0; d < 3; ++d) storage.push_back(make_list("out" + std::to_string(d), german));
  auto group = group_of(storage);
  auto value = distinctness({0, 1}, group);
  REQUIRE(value.has_value());
  CHECK(*value == doctest::Approx(2.0));  // every (member, outsider) pair shares u100, u108

  // Cluster covering the whole group has no outsiders.
  CHECK_FALSE(distinctness({0, 1, 2, 3, 4}, group).has_value());

  // Identical-to-everyone cluster: mean equals the full list length.
  std::vector<ResultList> same;
  for (int d = 0; d < 4; ++d) same.push_back(make_list("d" + std::to_string(d), german));
  CHECK(*distinctness({0, 1}, group_of(same)) == doctest::Approx(9.0));
}

TEST_CASE("detect_group flags exactly the low-distinctness clusters") {
  // 5 donors with a foreign template sharing 4 residual links and nothing
  // popular; 20 mainstream donors identical to each other.
  std::vector<ResultList> storage;
  auto mainstream = urls({0, 1, 2, 3, 4, 5, 6, 7, 8});
  auto outlier = urls({50, 51, 52, 53});
  for (int d = 0; d < 20; ++d) storage.push_back(make_list("m" + std::to_string(d), mainstream));
  for (int d = 0; d < 5; ++d) storage.push_back(make_list("x" + std::to_string(d), outlier));
  auto report = detect_group(group_of(storage));
  // The mainstream bulk is popularity-filtered away; the outlier block
  // remains as one flagged cluster sharing 4 residual links.
  REQUIRE(report.clusters.size() == 1);
  const auto& cluster = report.clusters[0];
  CHECK(cluster.member_donor_ids ==
        std::vector<std::string>{"x0", "x1", "x2", "x3", "x4"});
  CHECK(cluster.mean_internal_shared == doctest::Approx(4.0));
  REQUIRE(cluster.distinctness.has_value());
  CHECK(*cluster.distinctness == 0.0);
  CHECK(cluster.flagged);

  // A regional-style cluster still sharing >= 5 links outward is not flagged.
  std::vector<ResultList> regional;
  auto base = urls({0, 1, 2, 3, 4, 5});  // popular across all 10 -> filtered
  for (int d = 0; d < 7; ++d) {
    auto list_urls = base;
    list_urls.push_back("own" + std::to_string(d) + ".de/x");
    regional.push_back(make_list("m" + std::to_string(d), list_urls));
  }
  for (int d = 0; d < 3; ++d) {
    auto list_urls = base;
    list_urls.push_back("branch.de/a");
    list_urls.push_back("branch.de/b");
    list_urls.push_back("branch.de/c");
    regional.push_back(make_list("r" + std::to_string(d), list_urls));
  }
  auto regional_report = detect_group(group_of(regional));
  REQUIRE(regional_report.clusters.size() == 1);
  CHECK(regional_report.clusters[0].member_donor_ids ==
        std::vector<std::string>{"r0", "r1", "r2"});
  REQUIRE(regional_report.clusters[0].distinctness.has_value());
  CHECK(*regional_report.clusters[0].distinctness == doctest::Approx(6.0));
  CHECK_FALSE(regional_report.clusters[0].flagged);
}

TEST_CASE("locale patterns: the four default tags and the paper strings") {
  auto table = LocalePatternTable::defaults();
  CHECK(table.match("Vor 1 Stunde") == "de");
  CHECK(table.match("vor 4 Stunden") == "de");
  CHECK(table.match("54 minutes ago") == "en");
  CHECK(table.match("1 hour ago") == "en");
  CHECK(table.match("Il y a 2 heurs") == "fr");
  CHECK(table.match("Il y a 35 minutes") == "fr");
  CHECK(table.match("for 2 timer siden") == "no");
  CHECK(table.match("gerade eben") == std::string(kUnknownLocale));
  CHECK(table.match("") == std::string(kUnknownLocale));

  auto custom = LocalePatternTable::from_text("xx\tspecial\\s+phrase\n");
  CHECK(custom.match("a SPECIAL   phrase here") == "xx");
  CHECK(custom.match("1 hour ago") == std::string(kUnknownLocale));
}

TEST_CASE("detect_locale uses the first matching age string") {
  auto table = LocalePatternTable::defaults();
  auto list = make_list("d", urls({1}), {"", "1 hour ago", "Vor 2 Stunden"});
  CHECK(detect_locale(list, table) == "en");
  auto no_ages = make_list("d", urls({1}));
  CHECK(detect_locale(no_ages, table) == std::string(kUnknownLocale));
  auto unmatched = make_list("d", urls({1}), {"gestern"});
  CHECK(detect_locale(unmatched, table) == std::string(kUnknownLocale));
}

TEST_CASE("donor_locales takes the majority, ties lexicographic") {
  auto table = LocalePatternTable::defaults();
  std::vector<ResultList> lists;
  lists.push_back(make_list("a", urls({1}), {"Vor 1 Stunde"}));
  lists.push_back(make_list("a", urls({1}), {"Vor 2 Stunden"}));
  lists.push_back(make_list("a", urls({1}), {"1 hour ago"}));
  lists.push_back(make_list("b", urls({1}), {"1 hour ago"}));
  lists.push_back(make_list("b", urls({1}), {"Vor 1 Stunde"}));  // tie -> "de"
  lists.push_back(make_list("c", urls({1})));
  auto locales = donor_locales(lists, table);
  CHECK(locales.at("a") == "de");
  CHECK(locales.at("b") == "de");
  CHECK(locales.at("c") == std::string(kUnknownLocale));
}

TEST_CASE("locale overlap matrix orders by (locale, donor) and is symmetric") {
  std::vector<ResultList> storage;
  auto german = urls({0, 1, 2, 3, 4, 5, 6, 7, 8});
  auto english = urls({20, 21, 22, 23, 24, 25, 26, 27, 0});
  storage.push_back(make_list("zz-de", german));
  storage.push_back(make_list("aa-en", english));
  storage.push_back(make_list("bb-de", german));
  std::map<std::string, std::string> locale{
      {"zz-de", "de"}, {"aa-en", "en"}, {"bb-de", "de"}};
  auto matrix = locale_overlap_matrix(group_of(storage), locale);
  REQUIRE(matrix.donor_ids.size() == 3);
  CHECK(matrix.donor_ids == std::vector<std::string>{"bb-de", "zz-de", "aa-en"});
  CHECK(matrix.locales == std::vector<std::string>{"de", "de", "en"});
  // Diagonal is the own list length; within-locale pair shares all 9;
  // cross-locale pairs share only u0.
  for (int i = 0; i < 3; ++i) CHECK(matrix.counts[i][i] == 9);
  CHECK(matrix.counts[0][1] == 9);
  CHECK(matrix.counts[1][0] == 9);
  CHECK(matrix.counts[0][2] == 1);
  CHECK(matrix.counts[2][1] == 1);

  // Single-list group: 1x1 matrix of its length.
  std::vector<ResultList> single;
  single.push_back(make_list("only", urls({1, 2})));
  auto tiny = locale_overlap_matrix(group_of(single), {{"only", "de"}});
  REQUIRE(tiny.donor_ids.size() == 1);
  CHECK(tiny.counts[0][0] == 2);
}
