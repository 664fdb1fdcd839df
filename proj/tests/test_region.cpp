#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "serpaudit/region.hpp"
#include "serpaudit/util.hpp"

using namespace serpaudit;

namespace {

CategoryTable categories() {
  return CategoryTable::from_text(
      "afd.berlin owned_content - afd\n"
      "afd.nrw owned_content - afd\n"
      "www.spd.de owned_content - spd\n"
      "spd-kaiserslautern.de owned_content - spd\n"
      "gruene-muenchen.de owned_content - gruene\n"
      "berliner-zeitung.de media print -\n");
}

Gazetteer gazetteer() {
  return Gazetteer::from_text(
      "# cities and states\n"
      "Berlin\n"
      "Kaiserslautern\n"
      "München\n"
      "muenchen\n"
      "nrw\n");  // below 4 characters: never matches
}

ResultList make_list(std::string donor, std::vector<std::string> organic) {
  ResultList list;
  list.donor_id = std::move(donor);
  list.term = SearchTerm::from_index(0);
  list.time_key = SearchTimeKey::from_index(0);
  list.organic = std::move(organic);
  return list;
}

PairGroup group_of(const std::vector<ResultList>& storage) {
  PairGroup group;
  for (const auto& list : storage) group.members.push_back(&list);
  return group;
}

RegionalTagTable tags_for(const std::vector<std::string>& hosts) {
  std::vector<Tld> tlds;
  for (const auto& host : hosts) tlds.push_back(Tld{host});
  return tag_regional(tlds, gazetteer(), categories());
}

}  // namespace

TEST_CASE("gazetteer normalizes, deduplicates and orders longest-first") {
  auto g = gazetteer();
  // "nrw" fell below the 4-character floor; "Berlin" folded to lowercase.
  REQUIRE(g.places().size() == 4);
  CHECK(g.places()[0] == "kaiserslautern");
  CHECK(std::find(g.places().begin(), g.places().end(), "berlin") != g.places().end());
  CHECK(std::find(g.places().begin(), g.places().end(), "nrw") == g.places().end());

  Gazetteer dedup;
  dedup.add("Berlin");
  dedup.add("ber-lin");  // separator-stripped duplicate
  CHECK(dedup.places().size() == 1);
  dedup.add("ulm");  // too short even though a real city
  CHECK(dedup.places().size() == 1);
}

TEST_CASE("regional tagging: owned-content hosts with a clear place reference") {
  auto table = tags_for({"afd.berlin", "www.spd.de", "spd-kaiserslautern.de", "afd.nrw",
                         "berliner-zeitung.de", "unlisted.de"});
  CHECK(table.is_regional(Tld{"afd.berlin"}));
  CHECK(table.find(Tld{"afd.berlin"})->place == "berlin");
  CHECK_FALSE(table.is_regional(Tld{"www.spd.de"}));
  CHECK(table.is_regional(Tld{"spd-kaiserslautern.de"}));
  CHECK(table.find(Tld{"spd-kaiserslautern.de"})->place == "kaiserslautern");
  // "nrw" is below the gazetteer length floor.
  CHECK_FALSE(table.is_regional(Tld{"afd.nrw"}));
  // A media host referencing a city is never tagged: owned content only.
  CHECK_FALSE(table.is_regional(Tld{"berliner-zeitung.de"}));
  // Unclassified (other) hosts are never tagged.
  CHECK_FALSE(table.is_regional(Tld{"unlisted.de"}));
  CHECK(table.regional_count() == 2);

  auto text = table.to_text();
  CHECK(util::starts_with(text, "tld\tregional\tplace\n"));
  CHECK(text.find("afd.berlin\t1\tberlin\n") != std::string::npos);
  CHECK(text.find("www.spd.de\t0\t-\n") != std::string::npos);
}

TEST_CASE("identical lists refine to (0, 0)") {
  std::vector<ResultList> storage;
  std::vector<std::string> nine;
  for (int i = 0; i < 9; ++i) nine.push_back("u" + std::to_string(i) + ".de/a");
  storage.push_back(make_list("d1", nine));
  storage.push_back(make_list("d2", nine));
  auto result = refined_nonshared(group_of(storage), RegionalTagTable{});
  REQUIRE(result.has_value());
  CHECK(result->raw == 0.0);
  CHECK(result->refined == 0.0);
  CHECK(result->refined_mean_list_length == 9.0);
}

TEST_CASE("single-list groups have no pairwise statistic") {
  std::vector<ResultList> storage;
  storage.push_back(make_list("d1", {"u 1"}));
  CHECK_FALSE(refined_nonshared(group_of(storage), RegionalTagTable{}).has_value());
}

TEST_CASE("regional branch links: raw 3, refined 1 on the worked fixture") {
  // Three donors from three regions: 6 shared URLs, 2 regional branch URLs
  // each, 1 personalized swap each.
  std::vector<std::string> base;
  for (int i = 0; i < 6; ++i) base.push_back("shared" + std::to_string(i) + ".de/x");
  std::vector<ResultList> storage;
  const std::vector<std::string> regions{"berlin", "kaiserslautern", "muenchen"};
  for (int d = 0; d < 3; ++d) {
    auto urls = base;
    urls.push_back("branch-" + regions[d] + "-a");
    urls.push_back("branch-" + regions[d] + "-b");
    urls.push_back("swap" + std::to_string(d) + ".de/y");
    storage.push_back(make_list("d" + std::to_string(d), urls));
  }
  // Tag the branch hosts regional by hand (the tagging path is tested above).
  RegionalTagTable table;
  for (const auto& region : regions) {
    table.set("branch-" + region + "-a", {true, region});
    table.set("branch-" + region + "-b", {true, region});
  }
  auto result = refined_nonshared(group_of(storage), table);
  REQUIRE(result.has_value());
  // Per pair: lists of 9 sharing 6 -> (9+9)/2 - 6 = 3 non-shared.
  CHECK(result->raw == 3.0);
  // Regional deleted from both sides: lists of 7 sharing 6 -> 1.
  CHECK(result->refined == 1.0);
  CHECK(result->refined_mean_list_length == 7.0);
}

TEST_CASE("refined equals raw when nothing is flagged, and never exceeds it") {
  util::Rng rng(31);
  for (int round = 0; round < 20; ++round) {
    std::vector<ResultList> storage;
    const std::size_t n = 2 + rng.below(6);
    for (std::size_t d = 0; d < n; ++d) {
      std::vector<std::string> urls;
      const std::size_t length = 1 + rng.below(9);
      for (std::size_t j = 0; j < length; ++j) {
        urls.push_back("host" + std::to_string(rng.below(12)) + ".de/p");
      }
      storage.push_back(make_list("d" + std::to_string(d), urls));
    }
    auto group = group_of(storage);
    auto unflagged = refined_nonshared(group, RegionalTagTable{});
    REQUIRE(unflagged.has_value());
    CHECK(unflagged->refined == unflagged->raw);
    // raw agrees with the overlap module's scope on the same group.
    CHECK(unflagged->raw == doctest::Approx(*scope_for_personalization(group)).epsilon(1e-12));

    RegionalTagTable some;
    for (int h = 0; h < 12; ++h) {
      if (rng.below(3) == 0) some.set("host" + std::to_string(h) + ".de", {true, "place"});
    }
    auto flagged = refined_nonshared(group, some);
    REQUIRE(flagged.has_value());
    CHECK(flagged->refined <= flagged->raw + 1e-12);
  }
}
