// Generator tests: spec parsing and validation, seed determinism, closed-form
// ground truth recovered by the analysis pipeline, fault-label bookkeeping,
// planted structures, and sidecar files.
#include <doctest.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "serpaudit/bubble.hpp"
#include "serpaudit/catalog.hpp"
#include "serpaudit/cleanse.hpp"
#include "serpaudit/ingest.hpp"
#include "serpaudit/model.hpp"
#include "serpaudit/overlap.hpp"
#include "serpaudit/reach.hpp"
#include "serpaudit/region.hpp"
#include "serpaudit/synth.hpp"
#include "serpaudit/util.hpp"

using namespace serpaudit;

namespace {

CohortSpec base_spec(int n_donors, int n_keys) {
  CohortSpec spec;
  spec.n_donors = n_donors;
  spec.terms = {SearchTerm::from_index(0)};
  for (int i = 0; i < n_keys; ++i) spec.keys.push_back(SearchTimeKey::from_index(i));
  spec.locale_mix = {LocaleSpec{}};
  spec.top_story_prob = 0.0;
  spec.seed = 97;
  return spec;
}

Dataset collect(const CohortSpec& spec, GenerateResult* out = nullptr) {
  Dataset ds;
  GenerateResult res =
      generate(spec, [&](const DonationRecord& rec) { ds.records.push_back(rec); });
  if (out) *out = std::move(res);
  return ds;
}

std::string record_key(const std::string& donor, int term_index, SearchType type,
                       const std::string& ts) {
  return donor + "|" + std::to_string(term_index) + "|" + std::string(to_string(type)) + "|" + ts;
}

OverlapStats pooled_search(std::span<const ResultList> lists) {
  const auto groups = build_groups(lists, SearchType::google_search);
  OverlapStats pooled;
  for (const auto& t : per_term_stats(groups, 1)) pooled.merge(t.pooled);
  return pooled;
}

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("synth_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("cohort spec json round trip preserves every field") {
  CohortSpec spec;
  spec.n_donors = 12;
  spec.terms = {SearchTerm::from_index(3), SearchTerm::from_index(7)};
  spec.keys = {SearchTimeKey::from_index(0), SearchTimeKey::from_index(80)};
  spec.base_list_length = 9;
  spec.personalization_swaps = 1;
  spec.personalization_pool = 4000;
  spec.base_composition = {3, 1, 1, 4};
  spec.regional = {2, 1, 6};
  spec.locale_mix = {LocaleSpec{"de", 0.75, 0, 0}, LocaleSpec{"en", 0.25, 2, 1}};
  spec.top_story_prob = 0.4;
  spec.fault_rates = {0.05, 0.02, 0.03, 0.04};
  spec.seed = 424242;
  spec.include_news = true;
  spec.news_list_length = 18;
  spec.logged_in_fraction = 0.6;
  spec.reach_panel = {true, 2.5, 0.8, 0.05};
  spec.reach_window = {Date{2017, 8, 5}, Date{2017, 9, 10}};

  const CohortSpec back = cohort_spec_from_json(cohort_spec_to_json(spec));
  CHECK(back.n_donors == spec.n_donors);
  REQUIRE(back.terms.size() == 2);
  CHECK(back.terms[0].index() == 3);
  CHECK(back.terms[1].index() == 7);
  REQUIRE(back.keys.size() == 2);
  CHECK(back.keys[0].index() == 0);
  CHECK(back.keys[1].index() == 80);
  CHECK(back.base_list_length == 9);
  CHECK(back.personalization_swaps == 1);
  CHECK(back.personalization_pool == 4000);
  CHECK(back.base_composition.owned == 3);
  CHECK(back.base_composition.media == 4);
  CHECK(back.regional.n_regions == 2);
  CHECK(back.regional.branch_urls_per_region == 1);
  CHECK(back.regional.donors_per_region == 6);
  REQUIRE(back.locale_mix.size() == 2);
  CHECK(back.locale_mix[1].tag == "en");
  CHECK(back.locale_mix[1].fraction == doctest::Approx(0.25));
  CHECK(back.locale_mix[1].shared_urls_per_list == 2);
  CHECK(back.locale_mix[1].personal_urls_per_list == 1);
  CHECK(back.top_story_prob == doctest::Approx(0.4));
  CHECK(back.fault_rates.duplicate_id == doctest::Approx(0.05));
  CHECK(back.fault_rates.redirect_stub == doctest::Approx(0.04));
  CHECK(back.seed == 424242);
  CHECK(back.include_news);
  CHECK(back.news_list_length == 18);
  CHECK(back.logged_in_fraction == doctest::Approx(0.6));
  CHECK(back.reach_panel.enabled);
  CHECK(back.reach_panel.a == doctest::Approx(2.5));
  CHECK(back.reach_panel.b == doctest::Approx(0.8));
  CHECK(back.reach_panel.relative_noise == doctest::Approx(0.05));
  CHECK(back.reach_window.begin == Date{2017, 8, 5});
  CHECK(back.reach_window.end == Date{2017, 9, 10});
}

TEST_CASE("cohort spec json accepts the documented shorthand forms") {
  const CohortSpec all = cohort_spec_from_json(R"({"n_donors": 3, "terms": "all", "keys": "all"})");
  CHECK(all.terms.size() == 16);
  CHECK(all.keys.size() == 81);

  const CohortSpec counted = cohort_spec_from_json(R"({"n_donors": 3, "keys": 5})");
  REQUIRE(counted.keys.size() == 5);
  CHECK(counted.keys[0].index() == 0);
  CHECK(counted.keys[4].index() == 4);
  CHECK(counted.terms.size() == 16);  // omitted => all

  const std::string term_text(SearchTerm::from_index(2).text());
  const std::string term_slug(SearchTerm::from_index(5).slug());
  const CohortSpec named = cohort_spec_from_json(R"({"n_donors": 3, "keys": 1, "terms": [")" +
                                                 term_text + R"(", ")" + term_slug + R"("]})");
  REQUIRE(named.terms.size() == 2);
  CHECK(named.terms[0].index() == 2);
  CHECK(named.terms[1].index() == 5);

  const CohortSpec labeled =
      cohort_spec_from_json(R"({"n_donors": 3, "keys": ["2017-09-24T16"], "terms": "all"})");
  REQUIRE(labeled.keys.size() == 1);
  CHECK(labeled.keys[0].label() == "2017-09-24T16");
}

TEST_CASE("cohort spec json rejects malformed input") {
  CHECK_THROWS_AS((void)cohort_spec_from_json("not json"), SpecError);
  CHECK_THROWS_AS((void)cohort_spec_from_json("[1, 2]"), SpecError);
  CHECK_THROWS_AS((void)cohort_spec_from_json(R"({"n_donors": 3, "bogus": 1})"), SpecError);
  CHECK_THROWS_AS((void)cohort_spec_from_json(R"({"n_donors": "three"})"), SpecError);
  CHECK_THROWS_AS((void)cohort_spec_from_json(R"({"n_donors": 3, "keys": 0})"), SpecError);
  CHECK_THROWS_AS((void)cohort_spec_from_json(R"({"n_donors": 3, "keys": 82})"), SpecError);
  CHECK_THROWS_AS((void)cohort_spec_from_json(R"({"n_donors": 3, "terms": ["piraten"]})"),
                  SpecError);
  CHECK_THROWS_AS((void)cohort_spec_from_json(R"({"n_donors": 3, "keys": ["2017-08-26T12"]})"),
                  SpecError);
  CHECK_THROWS_AS(
      (void)cohort_spec_from_json(R"({"n_donors": 3, "fault_rates": {"oversize": 0.1}})"),
      SpecError);
}

TEST_CASE("validate rejects inconsistent specs") {
  const CohortSpec ok = base_spec(12, 2);
  CHECK_NOTHROW(validate(ok));

  auto broken = [&](auto mutate) {
    CohortSpec s = ok;
    mutate(s);
    CHECK_THROWS_AS(validate(s), SpecError);
  };

  broken([](CohortSpec& s) { s.n_donors = 0; });
  broken([](CohortSpec& s) { s.terms.clear(); });
  broken([](CohortSpec& s) { s.keys.clear(); });
  broken([](CohortSpec& s) { s.base_list_length = 1; });
  broken([](CohortSpec& s) { s.base_composition.media = 5; });  // sums to 10, L = 9
  broken([](CohortSpec& s) {
    s.base_composition.owned = 0;
    s.base_composition.media = 7;
  });
  broken([](CohortSpec& s) { s.personalization_swaps = -1; });
  broken([](CohortSpec& s) { s.personalization_swaps = 9; });  // no base slot left
  broken([](CohortSpec& s) { s.personalization_pool = 0; });
  broken([](CohortSpec& s) {
    s.personalization_swaps = 2;
    s.personalization_pool = 1;
  });
  broken([](CohortSpec& s) { s.fault_rates.duplicate_id = 1.5; });
  broken([](CohortSpec& s) { s.fault_rates.redirect_stub = -0.1; });
  broken([](CohortSpec& s) {
    s.fault_rates.repeated_url_list = 0.5;
    s.fault_rates.oversize_list = 0.4;
    s.fault_rates.redirect_stub = 0.2;  // record-level rates sum to 1.1
  });
  broken([](CohortSpec& s) { s.locale_mix = {LocaleSpec{"it", 1.0, 0, 0}}; });
  broken([](CohortSpec& s) { s.locale_mix = {LocaleSpec{"de", 0.5, 0, 0}, LocaleSpec{"en", 0.4, 0, 0}}; });
  broken([](CohortSpec& s) { s.locale_mix = {LocaleSpec{"de", 0.5, 0, 0}, LocaleSpec{"de", 0.5, 0, 0}}; });
  broken([](CohortSpec& s) { s.locale_mix = {LocaleSpec{"de", 1.0, 9, 0}}; });  // no base slot left
  broken([](CohortSpec& s) { s.regional = {3, 1, 5}; });  // 15 != 12 donors
  broken([](CohortSpec& s) { s.regional = {2, 0, 6}; });
  broken([](CohortSpec& s) {
    s.include_news = true;
    s.news_list_length = 1;
  });
  broken([](CohortSpec& s) {
    s.include_news = true;
    s.news_list_length = 4;
    s.personalization_swaps = 4;  // exceeds news list minus one
  });
  broken([](CohortSpec& s) { s.top_story_prob = 1.5; });
  broken([](CohortSpec& s) { s.logged_in_fraction = -0.2; });
  broken([](CohortSpec& s) {
    s.reach_panel.enabled = true;
    s.reach_panel.a = 0.0;
  });
  broken([](CohortSpec& s) {
    s.reach_panel.enabled = true;
    s.reach_panel.relative_noise = 1.0;
  });
  broken([](CohortSpec& s) { s.reach_window = {Date{2017, 9, 1}, Date{2017, 8, 1}}; });
}

TEST_CASE("generation is byte-identical for a fixed seed") {
  CohortSpec spec = base_spec(10, 2);
  spec.personalization_swaps = 1;
  spec.include_news = true;
  spec.top_story_prob = 0.5;
  spec.fault_rates = {0.1, 0.05, 0.05, 0.1};
  spec.reach_panel.enabled = true;

  auto run = [&](std::uint64_t seed) {
    CohortSpec s = spec;
    s.seed = seed;
    std::string blob;
    GenerateResult res = generate(s, [&](const DonationRecord& rec) {
      blob += serialize_record(rec);
      blob += '\n';
    });
    return std::pair{blob, std::move(res)};
  };

  auto [blob_a, res_a] = run(7);
  auto [blob_b, res_b] = run(7);
  CHECK(blob_a == blob_b);
  CHECK(res_a.records_emitted == res_b.records_emitted);
  CHECK(ground_truth_to_json(res_a.truth) == ground_truth_to_json(res_b.truth));
  CHECK(res_a.reach_panel_rows == res_b.reach_panel_rows);

  auto [blob_c, res_c] = run(8);
  CHECK(blob_a != blob_c);
}

TEST_CASE("k=0 cohort with no anomalies yields identical lists and silent detectors") {
  CohortSpec spec = base_spec(20, 2);
  spec.top_story_prob = 0.9;  // stories never touch the organic overlap

  GenerateResult res;
  Dataset ds = collect(spec, &res);
  CHECK(res.search_records == 20 * 2);
  CHECK(res.truth.scope_formula_valid);
  CHECK(res.truth.expected_scope == 0.0);
  CHECK(res.truth.expected_mean_list_length == 9.0);
  CHECK(res.truth.fault_labels.empty());

  const CleanseResult cleaned = run_pipeline(ds, CleanseConfig{}, res.language_table);
  for (const auto& stage : cleaned.report.stages) CHECK(stage.records_removed == 0);
  CHECK(cleaned.lists.size() == res.records_emitted);

  const OverlapStats pooled = pooled_search(cleaned.lists);
  CHECK(pooled.n_lists == 40);
  CHECK(pooled.identical_fraction() == 100.0);
  CHECK(pooled.scope() == 0.0);
  CHECK(pooled.mean_list_length() == 9.0);

  std::size_t flagged = 0;
  for (const auto& g : build_groups(cleaned.lists, SearchType::google_search))
    for (const auto& cluster : detect_group(g).clusters)
      if (cluster.flagged) ++flagged;
  CHECK(flagged == 0);

  const OracleReport report =
      oracle_report(spec, res.truth, res.search_records, cleaned.lists, nullptr, nullptr);
  CHECK(report.all_pass());
  CHECK(report.to_text().find("no_false_positive_clusters") != std::string::npos);
}

TEST_CASE("personalized cohort matches the closed-form scope") {
  CohortSpec spec = base_spec(80, 3);
  spec.personalization_swaps = 2;
  spec.include_news = true;

  GenerateResult res;
  Dataset ds = collect(spec, &res);
  const double pers = 4.0 / 5000.0;
  CHECK(res.truth.expected_scope == doctest::Approx(2.0 - pers));
  CHECK(res.truth.expected_refined_nonshared == doctest::Approx(2.0 - pers));
  REQUIRE(res.truth.expected_news_scope.has_value());
  CHECK(*res.truth.expected_news_scope == doctest::Approx(2.0 - pers));

  const CleanseResult cleaned = run_pipeline(ds, CleanseConfig{}, res.language_table);
  const OverlapStats pooled = pooled_search(cleaned.lists);
  CHECK(pooled.mean_list_length() == doctest::Approx(9.0));
  CHECK(std::abs(pooled.scope() - res.truth.expected_scope) < 0.1);

  OverlapStats news;
  for (const auto& t : news_overlap(cleaned.lists, 1)) news.merge(t.pooled);
  CHECK(std::abs(news.scope() - *res.truth.expected_news_scope) < 0.1);

  const OracleReport report =
      oracle_report(spec, res.truth, res.search_records, cleaned.lists, nullptr, nullptr);
  CHECK(report.all_pass());
}

TEST_CASE("fault labels account for every cleaning decision") {
  CohortSpec spec = base_spec(60, 2);
  spec.personalization_swaps = 1;
  spec.include_news = true;
  spec.top_story_prob = 0.4;
  spec.fault_rates = {0.08, 0.06, 0.06, 0.10};
  spec.seed = 1301;

  GenerateResult res;
  const Dataset ds = collect(spec, &res);
  std::size_t n_removed = 0, n_truncated = 0, n_dropped = 0;
  for (const auto& l : res.truth.fault_labels) {
    if (l.disposition == "removed") ++n_removed;
    if (l.disposition == "truncated") ++n_truncated;
    if (l.disposition == "entries_dropped") ++n_dropped;
  }
  CHECK(n_removed > 0);
  CHECK(n_truncated > 0);
  CHECK(n_dropped > 0);
  CHECK(!res.truth.duplicate_donor_ids.empty());

  const CleanseRecordsResult out = run_pipeline_records(ds, CleanseConfig{}, res.language_table);
  std::map<std::string, const DonationRecord*> survivors;
  for (const auto& rec : out.dataset.records)
    survivors[record_key(rec.donor_id, rec.term.index(), rec.search_type,
                         format_timestamp(rec.timestamp))] = &rec;
  CHECK(survivors.size() == ds.records.size() - n_removed);

  std::set<std::string> removed_keys;
  for (const auto& l : res.truth.fault_labels) {
    const std::string key = record_key(l.donor_id, l.term_index, l.search_type, l.timestamp);
    const auto it = survivors.find(key);
    if (l.disposition == "removed") {
      CHECK(it == survivors.end());
      removed_keys.insert(key);
    } else if (l.disposition == "truncated") {
      REQUIRE(it != survivors.end());
      std::size_t organic = 0;
      for (const auto& e : it->second->entries)
        if (e.kind == EntryKind::organic) ++organic;
      CHECK(organic == 10);
    } else if (l.disposition == "entries_dropped") {
      REQUIRE(it != survivors.end());
      std::size_t organic = 0;
      for (const auto& e : it->second->entries) {
        CHECK(!is_stub_url(e.url));
        if (e.kind == EntryKind::organic) ++organic;
      }
      CHECK(organic >= 6);
      CHECK(organic <= 8);
    }
  }

  // Exact partition: every emitted record either survives or carries a
  // "removed" label; nothing clean disappears.
  for (const auto& rec : ds.records) {
    const std::string key = record_key(rec.donor_id, rec.term.index(), rec.search_type,
                                       format_timestamp(rec.timestamp));
    CHECK((survivors.count(key) == 1) != (removed_keys.count(key) == 1));
  }
  for (const auto& donor : res.truth.duplicate_donor_ids)
    for (const auto& rec : out.dataset.records) CHECK(rec.donor_id != donor);

  const CleanseRecordsResult again =
      run_pipeline_records(out.dataset, CleanseConfig{}, res.language_table);
  for (const auto& stage : again.report.stages) CHECK(stage.records_removed == 0);
  CHECK(again.dataset.records.size() == out.dataset.records.size());

  const CleanseResult cleaned = run_pipeline(ds, CleanseConfig{}, res.language_table);
  const OracleReport report =
      oracle_report(spec, res.truth, res.search_records, cleaned.lists, nullptr, nullptr);
  CHECK(report.all_pass());
  const std::string text = report.to_text();
  CHECK(text.find("faulty_removed") != std::string::npos);
  CHECK(text.find("oversize_truncated") != std::string::npos);
  CHECK(text.find("stub_records_kept") != std::string::npos);
  CHECK(text.find("clean_retained") != std::string::npos);
}

TEST_CASE("planted foreign-locale cluster is recovered exactly") {
  CohortSpec spec = base_spec(20, 2);
  spec.locale_mix = {LocaleSpec{"de", 0.75, 0, 0}, LocaleSpec{"en", 0.25, 4, 3}};

  GenerateResult res;
  Dataset ds = collect(spec, &res);
  CHECK(!res.truth.scope_formula_valid);
  REQUIRE(res.truth.foreign_clusters.size() == 1);
  const ForeignClusterTruth& fc = res.truth.foreign_clusters[0];
  CHECK(fc.locale == "en");
  CHECK(fc.members.size() == 5);
  CHECK(fc.residual_shared == 4);
  CHECK(fc.expected_outward == 2.0);

  const CleanseResult cleaned = run_pipeline(ds, CleanseConfig{}, res.language_table);
  const std::set<std::string> want(fc.members.begin(), fc.members.end());
  for (const auto& g : build_groups(cleaned.lists, SearchType::google_search)) {
    const ClusterReport report = detect_group(g);
    REQUIRE(report.clusters.size() == 1);
    const Cluster& cluster = report.clusters[0];
    CHECK(cluster.flagged);
    CHECK(std::set<std::string>(cluster.member_donor_ids.begin(),
                                cluster.member_donor_ids.end()) == want);
    CHECK(cluster.mean_internal_shared == doctest::Approx(4.0));
    REQUIRE(cluster.distinctness.has_value());
    CHECK(*cluster.distinctness == doctest::Approx(2.0));
  }

  const OracleReport report =
      oracle_report(spec, res.truth, res.search_records, cleaned.lists, nullptr, nullptr);
  CHECK(report.all_pass());
  CHECK(report.to_text().find("cluster_recovery_en") != std::string::npos);
}

TEST_CASE("locale mix drives detectable age strings") {
  CohortSpec spec = base_spec(16, 2);
  spec.locale_mix = {LocaleSpec{"de", 0.5, 0, 0}, LocaleSpec{"en", 0.5, 0, 0}};
  spec.top_story_prob = 1.0;

  GenerateResult res;
  Dataset ds = collect(spec, &res);
  CHECK(res.truth.scope_formula_valid);  // locale pools empty => organic untouched
  std::size_t n_en = 0;
  for (const auto& [donor, tag] : res.truth.donor_locale)
    if (tag == "en") ++n_en;
  CHECK(res.truth.donor_locale.size() == 16);
  CHECK(n_en == 8);

  const CleanseResult cleaned = run_pipeline(ds, CleanseConfig{}, res.language_table);
  const auto detected = donor_locales(cleaned.lists, LocalePatternTable::defaults());
  CHECK(detected.size() == 16);
  for (const auto& [donor, tag] : detected) {
    CHECK(tag != kUnknownLocale);
    CHECK(tag == res.truth.donor_locale.at(donor));
  }

  const OracleReport report =
      oracle_report(spec, res.truth, res.search_records, cleaned.lists, nullptr, nullptr);
  CHECK(report.all_pass());
  CHECK(report.to_text().find("locale_tags") != std::string::npos);
}

TEST_CASE("regional truth matches raw and refined non-shared closed forms") {
  CohortSpec spec = base_spec(40, 2);
  spec.regional = {4, 1, 10};
  spec.personalization_swaps = 1;

  GenerateResult res;
  Dataset ds = collect(spec, &res);
  const double pers = 1.0 / 5000.0;
  const double p_same = 9.0 / 39.0;
  CHECK(res.truth.expected_raw_nonshared == doctest::Approx(1.0 + (1.0 - p_same) - pers));
  CHECK(res.truth.expected_refined_nonshared == doctest::Approx(1.0 - pers));
  CHECK(res.truth.regional_places.size() == 4);
  CHECK(res.truth.donor_region.size() == 40);
  CHECK(res.truth.donor_region.at("d00000") == 0);
  CHECK(res.truth.donor_region.at("d00039") == 3);

  const CleanseResult cleaned = run_pipeline(ds, CleanseConfig{}, res.language_table);
  Gazetteer gaz;
  for (const auto& place : res.gazetteer_places) gaz.add(place);
  std::set<std::string> tld_set;
  for (const auto& list : cleaned.lists)
    for (const auto& url : list.organic) tld_set.insert(extract_tld(url).value);
  std::vector<Tld> tlds;
  for (const auto& host : tld_set) tlds.push_back(Tld{host});
  const RegionalTagTable tags = tag_regional(tlds, gaz, res.category_table);
  CHECK(tags.regional_count() == 4);  // one branch host per region

  double sum_raw = 0.0, sum_refined = 0.0;
  std::size_t n_groups = 0;
  for (const auto& g : build_groups(cleaned.lists, SearchType::google_search)) {
    const auto rn = refined_nonshared(g, tags);
    REQUIRE(rn.has_value());
    sum_raw += rn->raw;
    sum_refined += rn->refined;
    ++n_groups;
  }
  REQUIRE(n_groups == 2);
  CHECK(std::abs(sum_raw / 2.0 - res.truth.expected_raw_nonshared) < 0.15);
  CHECK(std::abs(sum_refined / 2.0 - res.truth.expected_refined_nonshared) < 0.15);

  const OracleReport report =
      oracle_report(spec, res.truth, res.search_records, cleaned.lists, &tags, nullptr);
  CHECK(report.all_pass());
  const std::string text = report.to_text();
  CHECK(text.find("raw_nonshared") != std::string::npos);
  CHECK(text.find("refined_nonshared") != std::string::npos);
}

TEST_CASE("delivered top stories recover the planted reach power law") {
  CohortSpec spec = base_spec(40, 4);
  spec.terms = {SearchTerm::from_index(0), SearchTerm::from_index(1)};
  spec.top_story_prob = 1.0;
  spec.reach_panel = {true, 1.373, 0.9, 0.05};

  GenerateResult res;
  Dataset ds = collect(spec, &res);
  REQUIRE(res.truth.reach_model.has_value());
  REQUIRE(res.reach_panel_rows.size() >= 3);

  const CleanseResult cleaned = run_pipeline(ds, CleanseConfig{}, res.language_table);
  std::map<std::string, double> panel(res.reach_panel_rows.begin(), res.reach_panel_rows.end());
  const auto points = count_topstory_deliveries(cleaned.lists, panel);

  std::vector<ReachPoint> fittable;
  for (const auto& p : points)
    if (p.active_reach > 0.0 && p.delivered_count > 0) fittable.push_back(p);
  REQUIRE(fittable.size() >= 3);
  // No faults and distinct story hosts per record: the recount equals the
  // generator's tally, so every panel row joins with its exact count.
  CHECK(fittable.size() == res.reach_panel_rows.size());

  const ReachFit fit = fit_loglog(fittable);
  CHECK(std::abs(fit.b - 0.9) < 0.05);
  CHECK(std::abs(fit.a - 1.373) / 1.373 < 0.15);

  const OracleReport report =
      oracle_report(spec, res.truth, res.search_records, cleaned.lists, nullptr, &fit);
  CHECK(report.all_pass());
  CHECK(report.to_text().find("reach_exponent") != std::string::npos);
}

TEST_CASE("generate_files writes the corpus and every sidecar") {
  CohortSpec spec = base_spec(12, 2);
  spec.personalization_swaps = 1;
  spec.regional = {2, 1, 6};
  spec.locale_mix = {LocaleSpec{"de", 0.75, 0, 0}, LocaleSpec{"en", 0.25, 2, 1}};
  spec.include_news = true;
  spec.top_story_prob = 0.5;
  spec.fault_rates.duplicate_id = 0.1;
  spec.reach_panel = {true, 1.373, 0.9, 0.1};

  TempDir dir;
  const GenerateResult res = generate_files(spec, dir.path.string());

  for (const char* name : {"records.jsonl.gz", "ground_truth.json", "language_table.tsv",
                           "category_table.tsv", "gazetteer.txt", "reach_panel.tsv",
                           "cohort_config.json"})
    CHECK(std::filesystem::exists(dir.path / name));

  const ParseResult parsed = load_records_file((dir.path / "records.jsonl.gz").string());
  CHECK(parsed.rejects.empty());
  CHECK(parsed.dataset.records.size() == res.records_emitted);

  const GroundTruth truth =
      ground_truth_from_json(util::read_text_file((dir.path / "ground_truth.json").string()));
  CHECK(truth.expected_scope == res.truth.expected_scope);
  CHECK(truth.scope_formula_valid == res.truth.scope_formula_valid);
  CHECK(truth.donor_region == res.truth.donor_region);
  CHECK(truth.donor_locale == res.truth.donor_locale);
  CHECK(truth.duplicate_donor_ids == res.truth.duplicate_donor_ids);
  CHECK(truth.fault_labels.size() == res.truth.fault_labels.size());
  if (!truth.fault_labels.empty()) {
    CHECK(truth.fault_labels[0].donor_id == res.truth.fault_labels[0].donor_id);
    CHECK(truth.fault_labels[0].fault_class == res.truth.fault_labels[0].fault_class);
    CHECK(truth.fault_labels[0].disposition == res.truth.fault_labels[0].disposition);
    CHECK(truth.fault_labels[0].timestamp == res.truth.fault_labels[0].timestamp);
  }
  CHECK(truth.regional_places == res.truth.regional_places);
  REQUIRE(truth.reach_model.has_value());
  CHECK(truth.reach_model->b == doctest::Approx(0.9));

  const CohortSpec back =
      cohort_spec_from_json(util::read_text_file((dir.path / "cohort_config.json").string()));
  CHECK(back.n_donors == 12);
  CHECK(back.seed == spec.seed);
  CHECK(back.personalization_swaps == 1);
  CHECK(back.regional.n_regions == 2);
  CHECK(back.locale_mix.size() == 2);
  CHECK(back.include_news);
  CHECK(back.reach_panel.enabled);

  std::vector<std::string> gaz_lines;
  {
    LineSource src((dir.path / "gazetteer.txt").string());
    for (std::string line; src.next(line);)
      if (!line.empty()) gaz_lines.push_back(line);
  }
  CHECK(gaz_lines == res.gazetteer_places);

  const ReachPanel panel =
      load_reach_panel((dir.path / "reach_panel.tsv").string());
  CHECK(panel.period == "2017-08");
  CHECK(panel.reach.size() == res.reach_panel_rows.size());

  const LanguageTable lt =
      LanguageTable::from_text(util::read_text_file((dir.path / "language_table.tsv").string()));
  CHECK(lt.size() == res.language_table.size());
  const CategoryTable ct =
      CategoryTable::from_text(util::read_text_file((dir.path / "category_table.tsv").string()));
  CHECK(ct.size() == res.category_table.size());
}
