#include "serpaudit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "serpaudit/bubble.hpp"
#include "serpaudit/ingest.hpp"
#include "serpaudit/overlap.hpp"
#include "serpaudit/util.hpp"

namespace serpaudit {

namespace {

using json = nlohmann::json;

constexpr std::uint64_t kDonorRole = 1;
constexpr std::uint64_t kLayoutRole = 2;
constexpr std::uint64_t kRecordRole = 3;
constexpr std::uint64_t kDupRole = 5;
constexpr std::uint64_t kLocaleSharedRole = 6;
constexpr std::uint64_t kNewsLayoutRole = 7;
constexpr std::uint64_t kNewsRecordRole = 9;
constexpr std::uint64_t kReachNoiseRole = 10;

constexpr std::uint64_t kOwnedPool = 200;
constexpr std::uint64_t kSocialPool = 30;
constexpr std::uint64_t kWikiPool = 500;
constexpr std::uint64_t kMediaPool = 60;
constexpr std::uint64_t kStoryPool = 40;
constexpr std::uint64_t kNewsBasePool = 1000;
constexpr std::uint64_t kSidePool = 100000;

const std::vector<std::string>& cities() {
  static const std::vector<std::string> kCities = {
      "berlin",       "hamburg",        "muenchen",       "koeln",        "frankfurt",
      "stuttgart",    "duesseldorf",    "dortmund",       "essen",        "leipzig",
      "bremen",       "dresden",        "hannover",       "nuernberg",    "duisburg",
      "bochum",       "wuppertal",      "bielefeld",      "bonn",         "muenster",
      "karlsruhe",    "mannheim",       "augsburg",       "wiesbaden",    "gelsenkirchen",
      "braunschweig", "chemnitz",       "kiel",           "aachen",       "halle",
      "magdeburg",    "freiburg",       "krefeld",        "luebeck",      "oberhausen",
      "erfurt",       "mainz",          "rostock",        "kassel",       "hagen",
      "saarbruecken", "potsdam",        "ludwigshafen",   "oldenburg",    "leverkusen",
      "osnabrueck",   "solingen",       "heidelberg",     "herne",        "neuss",
      "darmstadt",    "paderborn",      "regensburg",     "ingolstadt",   "wuerzburg",
      "fuerth",       "wolfsburg",      "offenbach",      "heilbronn",    "pforzheim",
      "goettingen",   "bottrop",        "trier",          "reutlingen",   "bremerhaven",
      "koblenz",      "jena",           "remscheid",      "erlangen",     "moers",
      "siegen",       "hildesheim",     "salzgitter",     "kaiserslautern", "brandenburg",
      "cottbus",      "schwerin",       "recklinghausen",
  };
  return kCities;
}

std::string city_name(std::size_t index) {
  const auto& c = cities();
  std::string name = c[index % c.size()];
  if (index >= c.size()) name += std::to_string(index / c.size());
  return name;
}

std::string branch_url(std::size_t index) {
  return "https://www." + city_name(index) + "-direkt.de/";
}

std::string branch_host(std::size_t index) { return "www." + city_name(index) + "-direkt.de"; }

std::string host_slug(std::string_view slug) {
  std::string out(slug);
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

struct LocaleProfile {
  std::string language;
  std::string country;
};

LocaleProfile locale_profile(std::string_view tag) {
  if (tag == "en") return {"en-GB", "GB"};
  if (tag == "fr") return {"fr-FR", "FR"};
  if (tag == "no") return {"nb-NO", "NO"};
  return {"de-DE", "DE"};
}

std::string age_string(std::string_view tag, int hours) {
  char buf[48];
  if (tag == "en") {
    if (hours == 1) return "1 hour ago";
    std::snprintf(buf, sizeof(buf), "%d hours ago", hours);
  } else if (tag == "fr") {
    if (hours == 1) return "Il y a 1 heure";
    std::snprintf(buf, sizeof(buf), "Il y a %d heures", hours);
  } else if (tag == "no") {
    if (hours == 1) return "for 1 time siden";
    std::snprintf(buf, sizeof(buf), "for %d timer siden", hours);
  } else {
    if (hours == 1) return "Vor 1 Stunde";
    std::snprintf(buf, sizeof(buf), "Vor %d Stunden", hours);
  }
  return buf;
}

std::uint64_t distinct_below(util::Rng& rng, std::uint64_t n, std::set<std::uint64_t>& used) {
  for (;;) {
    std::uint64_t v = rng.below(n);
    if (used.insert(v).second) return v;
  }
}

std::string stub_url(util::Rng& rng, std::size_t position) {
  if (rng.below(2) == 0) return "google";
  return "https://www.google.de/url?q=r" + std::to_string(position);
}

// Story hosts follow a fixed geometric popularity ladder spanning two decades
// so delivered counts spread far beyond the reach panel's relative noise.
std::vector<std::uint64_t> sample_story_hosts(util::Rng& rng, std::uint64_t count) {
  static const std::vector<double> kCumulative = [] {
    std::vector<double> cum(kStoryPool);
    const double ratio = std::pow(100.0, 1.0 / static_cast<double>(kStoryPool - 1));
    double total = 0.0;
    for (std::uint64_t i = 0; i < kStoryPool; ++i) {
      total += std::pow(ratio, static_cast<double>(kStoryPool - 1 - i));
      cum[i] = total;
    }
    return cum;
  }();
  std::vector<std::uint64_t> picked;
  while (picked.size() < count) {
    const double u = rng.unit() * kCumulative.back();
    const auto it = std::upper_bound(kCumulative.begin(), kCumulative.end(), u);
    const auto idx = static_cast<std::uint64_t>(it - kCumulative.begin());
    if (std::find(picked.begin(), picked.end(), idx) == picked.end()) picked.push_back(idx);
  }
  return picked;
}

void normalize(CohortSpec& spec) {
  if (spec.terms.empty()) spec.terms = SearchTerm::all();
  if (spec.keys.empty()) spec.keys = SearchTimeKey::all();
  if (spec.locale_mix.empty()) spec.locale_mix.push_back(LocaleSpec{});
}

int max_locale_span(const CohortSpec& spec) {
  int m = 0;
  for (const auto& l : spec.locale_mix)
    m = std::max(m, l.shared_urls_per_list + l.personal_urls_per_list);
  return m;
}

struct DonorProfile {
  std::string id;
  int region = -1;
  int locale_index = 0;
  bool duplicate = false;
  bool logged_in = false;
  GeoPoint geo;
  std::string language;
};

std::vector<int> locale_boundaries(const CohortSpec& spec) {
  std::vector<int> bounds;
  double cum = 0.0;
  for (const auto& l : spec.locale_mix) {
    cum += l.fraction;
    bounds.push_back(static_cast<int>(std::llround(cum * spec.n_donors)));
  }
  bounds.back() = spec.n_donors;
  return bounds;
}

struct GroupLayout {
  std::vector<std::string> base_urls;
  std::vector<int> branch_slots;
  std::vector<int> pers_slots;
  std::vector<int> locale_slots;
  std::vector<std::vector<std::string>> locale_shared;  // per locale index
  std::vector<std::string> news_base;
  std::vector<std::uint64_t> news_swap_slots;
};

GroupLayout build_layout(const CohortSpec& spec, const SearchTerm& term, const SearchTimeKey& key,
                         int max_sp) {
  GroupLayout lay;
  const int L = spec.base_list_length;
  const auto ti = static_cast<std::uint64_t>(term.index());
  const auto ki = static_cast<std::uint64_t>(key.index());
  auto rl = util::Rng::stream(spec.seed, {kLayoutRole, ti, ki});

  const std::string hs = host_slug(term.slug());
  lay.base_urls.reserve(static_cast<std::size_t>(L));
  lay.base_urls.push_back("https://www." + hs + ".de/");
  std::set<std::uint64_t> owned, social, wiki, media;
  for (int i = 1; i < spec.base_composition.owned; ++i)
    lay.base_urls.push_back("https://www." + hs + "-themen" +
                            std::to_string(distinct_below(rl, kOwnedPool, owned)) + ".de/");
  for (int i = 0; i < spec.base_composition.social; ++i)
    lay.base_urls.push_back("https://www.sozialnetz" +
                            std::to_string(distinct_below(rl, kSocialPool, social)) + ".de/");
  for (int i = 0; i < spec.base_composition.wikipedia; ++i)
    lay.base_urls.push_back("https://de.wikipedia.org/wiki/" + std::string(term.slug()) + "_" +
                            std::to_string(distinct_below(rl, kWikiPool, wiki)));
  for (int i = 0; i < spec.base_composition.media; ++i)
    lay.base_urls.push_back("https://www.medienhaus" +
                            std::to_string(distinct_below(rl, kMediaPool, media)) + ".de/");

  std::vector<int> pos(static_cast<std::size_t>(L - 1));
  for (int i = 1; i < L; ++i) pos[static_cast<std::size_t>(i - 1)] = i;
  for (std::size_t i = pos.size(); i > 1; --i)
    std::swap(pos[i - 1], pos[static_cast<std::size_t>(rl.below(i))]);

  const int b = spec.regional.enabled() ? spec.regional.branch_urls_per_region : 0;
  const int k = spec.personalization_swaps;
  auto it = pos.begin();
  lay.branch_slots.assign(it, it + b);
  it += b;
  lay.pers_slots.assign(it, it + k);
  it += k;
  lay.locale_slots.assign(it, it + max_sp);

  lay.locale_shared.resize(spec.locale_mix.size());
  for (std::size_t li = 0; li < spec.locale_mix.size(); ++li) {
    const auto& loc = spec.locale_mix[li];
    if (loc.shared_urls_per_list <= 0) continue;
    auto rs = util::Rng::stream(spec.seed, {kLocaleSharedRole, li, ti, ki});
    for (std::uint64_t id :
         rs.sample_distinct(kSidePool, static_cast<std::uint64_t>(loc.shared_urls_per_list)))
      lay.locale_shared[li].push_back("https://" + loc.tag + ".portal" + std::to_string(id) +
                                      ".example/");
  }

  if (spec.include_news) {
    auto rn = util::Rng::stream(spec.seed, {kNewsLayoutRole, ti, ki});
    for (std::uint64_t id :
         rn.sample_distinct(kNewsBasePool, static_cast<std::uint64_t>(spec.news_list_length)))
      lay.news_base.push_back("https://www.presse" + std::to_string(id) + ".de/");
    if (k > 0)
      lay.news_swap_slots = rn.sample_distinct(static_cast<std::uint64_t>(spec.news_list_length),
                                               static_cast<std::uint64_t>(k));
  }
  return lay;
}

LanguageTable build_language_table(const CohortSpec& spec) {
  LanguageTable lt;
  for (const auto& term : spec.terms) {
    const std::string hs = host_slug(term.slug());
    lt.set("www." + hs + ".de", "de");
    for (std::uint64_t i = 0; i < kOwnedPool; ++i)
      lt.set("www." + hs + "-themen" + std::to_string(i) + ".de", "de");
  }
  for (std::uint64_t i = 0; i < kSocialPool; ++i)
    lt.set("www.sozialnetz" + std::to_string(i) + ".de", "de");
  for (std::uint64_t i = 0; i < kMediaPool; ++i)
    lt.set("www.medienhaus" + std::to_string(i) + ".de", "de");
  for (std::uint64_t i = 0; i < kStoryPool; ++i)
    lt.set("www.eilmeldung" + std::to_string(i) + ".de", "de");
  lt.set("de.wikipedia.org", "de");
  if (spec.include_news)
    for (std::uint64_t i = 0; i < kNewsBasePool; ++i)
      lt.set("www.presse" + std::to_string(i) + ".de", "de");
  if (spec.regional.enabled()) {
    const std::size_t total = static_cast<std::size_t>(spec.regional.n_regions) *
                              static_cast<std::size_t>(spec.regional.branch_urls_per_region);
    for (std::size_t i = 0; i < total; ++i) lt.set(branch_host(i), "de");
  }
  return lt;
}

CategoryTable build_category_table(const CohortSpec& spec) {
  CategoryTable ct;
  const MediaSub kSubs[4] = {MediaSub::print, MediaSub::tv, MediaSub::public_service,
                             MediaSub::online_only};
  for (const auto& term : spec.terms) {
    const std::string hs = host_slug(term.slug());
    DomainCategory ownedCat{MainCategory::owned_content, std::nullopt, std::string(term.slug())};
    ct.set("www." + hs + ".de", ownedCat);
    for (std::uint64_t i = 0; i < kOwnedPool; ++i)
      ct.set("www." + hs + "-themen" + std::to_string(i) + ".de", ownedCat);
  }
  for (std::uint64_t i = 0; i < kSocialPool; ++i)
    ct.set("www.sozialnetz" + std::to_string(i) + ".de",
           DomainCategory{MainCategory::social_media, std::nullopt, std::nullopt});
  for (std::uint64_t i = 0; i < kMediaPool; ++i)
    ct.set("www.medienhaus" + std::to_string(i) + ".de",
           DomainCategory{MainCategory::media, kSubs[i % 4], std::nullopt});
  for (std::uint64_t i = 0; i < kStoryPool; ++i)
    ct.set("www.eilmeldung" + std::to_string(i) + ".de",
           DomainCategory{MainCategory::media, MediaSub::online_only, std::nullopt});
  if (spec.include_news)
    for (std::uint64_t i = 0; i < kNewsBasePool; ++i)
      ct.set("www.presse" + std::to_string(i) + ".de",
             DomainCategory{MainCategory::media, MediaSub::print, std::nullopt});
  if (spec.regional.enabled()) {
    const std::size_t total = static_cast<std::size_t>(spec.regional.n_regions) *
                              static_cast<std::size_t>(spec.regional.branch_urls_per_region);
    for (std::size_t i = 0; i < total; ++i)
      ct.set(branch_host(i), DomainCategory{MainCategory::owned_content, std::nullopt, std::nullopt});
  }
  return ct;
}

void fill_truth(const CohortSpec& spec, const std::vector<DonorProfile>& profiles,
                GroundTruth& truth) {
  const int L = spec.base_list_length;
  const int k = spec.personalization_swaps;
  const double P = static_cast<double>(spec.personalization_pool);
  const double pers = k > 0 ? static_cast<double>(k) * k / P : 0.0;
  const int b = spec.regional.enabled() ? spec.regional.branch_urls_per_region : 0;
  double p_same = 1.0;
  if (spec.regional.enabled() && spec.n_donors > 1) {
    const double m = spec.regional.donors_per_region;
    p_same = (m - 1.0) / (static_cast<double>(spec.n_donors) - 1.0);
  }

  truth.expected_mean_list_length = L;
  truth.expected_scope = k + b * (1.0 - p_same) - pers;
  truth.expected_raw_nonshared = truth.expected_scope;
  truth.expected_refined_nonshared = k - pers;
  if (spec.include_news) truth.expected_news_scope = k - pers;
  truth.scope_formula_valid = max_locale_span(spec) == 0;

  for (const auto& pr : profiles) {
    truth.donor_locale[pr.id] = spec.locale_mix[static_cast<std::size_t>(pr.locale_index)].tag;
    if (pr.region >= 0) truth.donor_region[pr.id] = pr.region;
    if (pr.duplicate) truth.duplicate_donor_ids.push_back(pr.id);
  }

  // Planted clusters are predictable only when the shared residual clears the
  // edge threshold, foreign locales stay clearly below the popularity cut,
  // and no swaps or branches blur the outward overlap.
  double foreign_fraction = 0.0;
  std::vector<std::size_t> locale_counts(spec.locale_mix.size(), 0);
  for (const auto& pr : profiles) ++locale_counts[static_cast<std::size_t>(pr.locale_index)];
  for (std::size_t li = 0; li < spec.locale_mix.size(); ++li) {
    const auto& loc = spec.locale_mix[li];
    if (loc.shared_urls_per_list + loc.personal_urls_per_list > 0)
      foreign_fraction += static_cast<double>(locale_counts[li]) / spec.n_donors;
  }
  for (std::size_t li = 0; li < spec.locale_mix.size(); ++li) {
    const auto& loc = spec.locale_mix[li];
    const double frac = static_cast<double>(locale_counts[li]) / spec.n_donors;
    if (loc.shared_urls_per_list < 3 || locale_counts[li] < 2) continue;
    if (frac > 0.5 || foreign_fraction > 0.3) continue;
    if (k != 0 || spec.regional.enabled()) continue;
    ForeignClusterTruth fc;
    fc.locale = loc.tag;
    for (const auto& pr : profiles)
      if (pr.locale_index == static_cast<int>(li) && !pr.duplicate) fc.members.push_back(pr.id);
    fc.residual_shared = loc.shared_urls_per_list;
    fc.expected_outward = L - loc.shared_urls_per_list - loc.personal_urls_per_list;
    if (fc.members.size() >= 2) truth.foreign_clusters.push_back(std::move(fc));
  }

  if (spec.regional.enabled()) {
    std::set<std::string> places;
    const std::size_t total = static_cast<std::size_t>(spec.regional.n_regions) *
                              static_cast<std::size_t>(spec.regional.branch_urls_per_region);
    for (std::size_t i = 0; i < total; ++i) places.insert(cities()[i % cities().size()]);
    truth.regional_places.assign(places.begin(), places.end());
  }
  if (spec.reach_panel.enabled) truth.reach_model = spec.reach_panel;
}

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void validate(const CohortSpec& spec) {
  auto fail = [](const std::string& msg) { throw SpecError("cohort spec: " + msg); };
  if (spec.n_donors < 1) fail("n_donors must be >= 1");
  if (spec.terms.empty()) fail("terms must not be empty");
  if (spec.keys.empty()) fail("keys must not be empty");
  const int L = spec.base_list_length;
  if (L < 2) fail("base_list_length must be >= 2");
  const auto& bc = spec.base_composition;
  if (bc.owned < 1 || bc.social < 0 || bc.wikipedia < 0 || bc.media < 0)
    fail("base_composition counts out of range");
  if (bc.total() != L) fail("base_composition must sum to base_list_length");
  const int k = spec.personalization_swaps;
  if (k < 0) fail("personalization_swaps must be >= 0");
  if (spec.personalization_pool < 1) fail("personalization_pool must be >= 1");
  if (k > spec.personalization_pool) fail("personalization_swaps exceeds pool");

  auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  const auto& fr = spec.fault_rates;
  if (!rate_ok(fr.duplicate_id) || !rate_ok(fr.repeated_url_list) || !rate_ok(fr.oversize_list) ||
      !rate_ok(fr.redirect_stub))
    fail("fault rates must lie in [0, 1]");
  if (fr.repeated_url_list + fr.oversize_list + fr.redirect_stub > 1.0)
    fail("record-level fault rates must sum to <= 1");

  if (spec.locale_mix.empty()) fail("locale_mix must not be empty");
  double sum = 0.0;
  std::set<std::string> tags;
  for (const auto& loc : spec.locale_mix) {
    if (loc.fraction <= 0.0) fail("locale fraction must be > 0");
    if (loc.shared_urls_per_list < 0 || loc.personal_urls_per_list < 0)
      fail("locale URL counts must be >= 0");
    if (loc.tag != "de" && loc.tag != "en" && loc.tag != "fr" && loc.tag != "no")
      fail("locale tag must be one of de, en, fr, no");
    if (!tags.insert(loc.tag).second) fail("locale tags must be distinct");
    sum += loc.fraction;
  }
  if (std::abs(sum - 1.0) > 1e-6) fail("locale fractions must sum to 1");

  const int b = spec.regional.enabled() ? spec.regional.branch_urls_per_region : 0;
  if (spec.regional.enabled()) {
    if (spec.regional.branch_urls_per_region < 1) fail("branch_urls_per_region must be >= 1");
    if (spec.regional.donors_per_region < 1) fail("donors_per_region must be >= 1");
    if (spec.n_donors != spec.regional.n_regions * spec.regional.donors_per_region)
      fail("n_donors must equal n_regions * donors_per_region");
  }
  int max_sp = 0;
  for (const auto& loc : spec.locale_mix)
    max_sp = std::max(max_sp, loc.shared_urls_per_list + loc.personal_urls_per_list);
  if (k + b + max_sp > L - 1) fail("swaps + branch URLs + locale URLs must leave one base slot");

  if (spec.include_news) {
    if (spec.news_list_length < 2) fail("news_list_length must be >= 2");
    if (k > spec.news_list_length - 1) fail("personalization_swaps exceeds news list");
  }
  if (spec.top_story_prob < 0.0 || spec.top_story_prob > 1.0)
    fail("top_story_prob must lie in [0, 1]");
  if (spec.logged_in_fraction < 0.0 || spec.logged_in_fraction > 1.0)
    fail("logged_in_fraction must lie in [0, 1]");
  if (spec.reach_panel.enabled) {
    if (spec.reach_panel.a <= 0.0 || spec.reach_panel.b <= 0.0)
      fail("reach panel model requires a > 0 and b > 0");
    if (spec.reach_panel.relative_noise < 0.0 || spec.reach_panel.relative_noise >= 1.0)
      fail("reach panel noise must lie in [0, 1)");
  }
  if (spec.reach_window.end < spec.reach_window.begin) fail("reach window end precedes begin");
}

GenerateResult generate(const CohortSpec& spec_in,
                        const std::function<void(const DonationRecord&)>& emit) {
  CohortSpec spec = spec_in;
  normalize(spec);
  validate(spec);

  GenerateResult out;
  const int n = spec.n_donors;
  const int L = spec.base_list_length;
  const int k = spec.personalization_swaps;
  const auto pool = static_cast<std::uint64_t>(spec.personalization_pool);
  const int max_sp = max_locale_span(spec);
  const auto& fr = spec.fault_rates;
  const double rec_fault_sum = fr.repeated_url_list + fr.oversize_list + fr.redirect_stub;

  std::vector<DonorProfile> profiles;
  profiles.reserve(static_cast<std::size_t>(n));
  const std::vector<int> bounds = locale_boundaries(spec);
  for (int d = 0; d < n; ++d) {
    DonorProfile pr;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "d%05d", d);
    pr.id = buf;
    pr.locale_index = 0;
    while (d >= bounds[static_cast<std::size_t>(pr.locale_index)]) ++pr.locale_index;
    if (spec.regional.enabled()) pr.region = d / spec.regional.donors_per_region;
    auto rd = util::Rng::stream(spec.seed, {kDonorRole, static_cast<std::uint64_t>(d)});
    pr.geo.lat = std::round((47.3 + rd.unit() * 7.7) * 1000.0) / 1000.0;
    pr.geo.lon = std::round((6.1 + rd.unit() * 8.9) * 1000.0) / 1000.0;
    pr.logged_in = rd.unit() < spec.logged_in_fraction;
    const auto lp = locale_profile(spec.locale_mix[static_cast<std::size_t>(pr.locale_index)].tag);
    pr.geo.country = lp.country;
    pr.language = lp.language;
    pr.duplicate = fr.duplicate_id > 0.0 &&
                   util::Rng::stream(spec.seed, {kDupRole, static_cast<std::uint64_t>(d)}).unit() <
                       fr.duplicate_id;
    profiles.push_back(std::move(pr));
  }

  std::vector<std::vector<std::string>> region_branches;
  if (spec.regional.enabled()) {
    region_branches.resize(static_cast<std::size_t>(spec.regional.n_regions));
    for (int r = 0; r < spec.regional.n_regions; ++r)
      for (int j = 0; j < spec.regional.branch_urls_per_region; ++j)
        region_branches[static_cast<std::size_t>(r)].push_back(branch_url(
            static_cast<std::size_t>(r) * spec.regional.branch_urls_per_region +
            static_cast<std::size_t>(j)));
  }

  std::map<std::string, std::uint64_t> story_tally;  // host -> in-window deliveries

  for (const auto& term : spec.terms) {
    const auto ti = static_cast<std::uint64_t>(term.index());
    for (const auto& key : spec.keys) {
      const auto ki = static_cast<std::uint64_t>(key.index());
      const GroupLayout lay = build_layout(spec, term, key, max_sp);
      const bool in_window =
          !(key.date() < spec.reach_window.begin) && !(spec.reach_window.end < key.date());

      for (int d = 0; d < n; ++d) {
        const auto& pr = profiles[static_cast<std::size_t>(d)];
        const auto& loc = spec.locale_mix[static_cast<std::size_t>(pr.locale_index)];
        auto rs =
            util::Rng::stream(spec.seed, {kRecordRole, static_cast<std::uint64_t>(d), ti, ki});
        const int minute = static_cast<int>(rs.below(60));
        const int second = static_cast<int>(rs.below(60));
        Timestamp ts{key.date(), slot_hour(key.slot()), minute, second, 0};

        std::vector<std::string> urls = lay.base_urls;
        if (pr.region >= 0)
          for (std::size_t j = 0; j < lay.branch_slots.size(); ++j)
            urls[static_cast<std::size_t>(lay.branch_slots[j])] =
                region_branches[static_cast<std::size_t>(pr.region)][j];
        if (k > 0) {
          const auto ids = rs.sample_distinct(pool, static_cast<std::uint64_t>(k));
          for (std::size_t j = 0; j < ids.size(); ++j)
            urls[static_cast<std::size_t>(lay.pers_slots[j])] =
                "https://www.privatblog" + std::to_string(ids[j]) + ".de/";
        }
        for (int j = 0; j < loc.shared_urls_per_list; ++j)
          urls[static_cast<std::size_t>(lay.locale_slots[static_cast<std::size_t>(j)])] =
              lay.locale_shared[static_cast<std::size_t>(pr.locale_index)]
                               [static_cast<std::size_t>(j)];
        if (loc.personal_urls_per_list > 0) {
          const auto ids =
              rs.sample_distinct(kSidePool, static_cast<std::uint64_t>(loc.personal_urls_per_list));
          for (std::size_t j = 0; j < ids.size(); ++j)
            urls[static_cast<std::size_t>(
                lay.locale_slots[static_cast<std::size_t>(loc.shared_urls_per_list) + j])] =
                "https://" + loc.tag + ".privat" + std::to_string(ids[j]) + ".example/";
        }

        std::string fault_class, disposition;
        if (pr.duplicate) {
          fault_class = "duplicate_id";
          disposition = "removed";
        } else if (rec_fault_sum > 0.0) {
          const double u = rs.unit();
          if (u < fr.repeated_url_list) {
            fault_class = "repeated_url_list";
          } else if (u < fr.repeated_url_list + fr.oversize_list) {
            fault_class = "oversize_list";
          } else if (u < rec_fault_sum) {
            fault_class = "redirect_stub";
          }
        }

        std::vector<std::string> stories, ages;
        if (spec.top_story_prob > 0.0 && rs.unit() < spec.top_story_prob) {
          const auto c = 1 + rs.below(3);
          for (std::uint64_t sid : sample_story_hosts(rs, c)) {
            const std::string host = "www.eilmeldung" + std::to_string(sid) + ".de";
            stories.push_back("https://" + host + "/s" + std::to_string(key.index()));
            ages.push_back(age_string(loc.tag, 1 + static_cast<int>(rs.below(23))));
            if (in_window) ++story_tally[host];
          }
        }

        if (fault_class == "repeated_url_list") {
          const std::string u0 =
              "https://www.wiederholung" + std::to_string(rs.below(1000)) + ".de/";
          urls.assign(static_cast<std::size_t>(L), u0);
          disposition = "removed";
        } else if (fault_class == "oversize_list") {
          const auto target = 50 + rs.below(151);
          while (urls.size() < target)
            urls.push_back("https://www.fuellseite" + std::to_string(rs.below(kSidePool)) +
                           ".de/");
          disposition = "truncated";
        } else if (fault_class == "redirect_stub") {
          if (rs.unit() < 0.1) {
            for (std::size_t i = 0; i < urls.size(); ++i) urls[i] = stub_url(rs, i);
            disposition = "removed";
          } else {
            const auto j = 1 + rs.below(3);
            for (std::uint64_t p : rs.sample_distinct(static_cast<std::uint64_t>(L), j))
              urls[p] = stub_url(rs, p);
            disposition = "entries_dropped";
          }
        }

        auto emit_search = [&](const GeoPoint& geo, const std::string& language,
                               const Timestamp& when) {
          DonationRecord rec;
          rec.donor_id = pr.id;
          rec.search_type = SearchType::google_search;
          rec.term = term;
          rec.timestamp = when;
          rec.logged_in = pr.logged_in;
          rec.browser_language = language;
          rec.geo = geo;
          int rank = 1;
          for (std::size_t si = 0; si < stories.size(); ++si) {
            ResultEntry e;
            e.rank = rank++;
            e.kind = EntryKind::top_story;
            e.url = stories[si];
            e.age_string = ages[si];
            rec.entries.push_back(std::move(e));
          }
          for (const auto& u : urls) {
            ResultEntry e;
            e.rank = rank++;
            e.kind = EntryKind::organic;
            e.url = u;
            rec.entries.push_back(std::move(e));
          }
          emit(rec);
          ++out.records_emitted;
          ++out.search_records;
          if (!fault_class.empty())
            out.truth.fault_labels.push_back({pr.id, term.index(), SearchType::google_search,
                                              format_timestamp(when), fault_class, disposition});
        };

        emit_search(pr.geo, pr.language, ts);
        if (pr.duplicate) {
          Timestamp ts2 = ts;
          ts2.second = static_cast<int>((second + 1 + rs.below(59)) % 60);
          GeoPoint geo2 = pr.geo;
          geo2.country = "FR";
          emit_search(geo2, "fr-FR", ts2);
        }

        if (spec.include_news) {
          auto rn = util::Rng::stream(spec.seed,
                                      {kNewsRecordRole, static_cast<std::uint64_t>(d), ti, ki});
          Timestamp nts{key.date(), slot_hour(key.slot()), static_cast<int>(rn.below(60)),
                        static_cast<int>(rn.below(60)), 0};
          std::vector<std::string> nurls = lay.news_base;
          if (k > 0) {
            const auto ids = rn.sample_distinct(pool, static_cast<std::uint64_t>(k));
            for (std::size_t j = 0; j < ids.size(); ++j)
              nurls[static_cast<std::size_t>(lay.news_swap_slots[j])] =
                  "https://www.nachblog" + std::to_string(ids[j]) + ".de/";
          }
          DonationRecord rec;
          rec.donor_id = pr.id;
          rec.search_type = SearchType::google_news;
          rec.term = term;
          rec.timestamp = nts;
          rec.logged_in = pr.logged_in;
          rec.browser_language = pr.language;
          rec.geo = pr.geo;
          int rank = 1;
          for (const auto& u : nurls) {
            ResultEntry e;
            e.rank = rank++;
            e.kind = EntryKind::news;
            e.url = u;
            rec.entries.push_back(std::move(e));
          }
          emit(rec);
          ++out.records_emitted;
          ++out.news_records;
          if (pr.duplicate)
            out.truth.fault_labels.push_back({pr.id, term.index(), SearchType::google_news,
                                              format_timestamp(nts), "duplicate_id", "removed"});
        }
      }
    }
  }

  fill_truth(spec, profiles, out.truth);
  out.language_table = build_language_table(spec);
  out.category_table = build_category_table(spec);
  out.gazetteer_places = cities();

  if (spec.reach_panel.enabled) {
    std::size_t i = 0;
    for (const auto& [host, count] : story_tally) {
      double reach = std::pow(static_cast<double>(count) / spec.reach_panel.a,
                              1.0 / spec.reach_panel.b);
      auto rn = util::Rng::stream(spec.seed, {kReachNoiseRole, static_cast<std::uint64_t>(i++)});
      reach *= 1.0 + spec.reach_panel.relative_noise * (rn.unit() * 2.0 - 1.0);
      out.reach_panel_rows.emplace_back(host, reach);
    }
  }
  return out;
}

GenerateResult generate_files(const CohortSpec& spec_in, const std::string& out_dir) {
  CohortSpec spec = spec_in;
  normalize(spec);
  validate(spec);
  std::filesystem::create_directories(out_dir);

  LineSink sink(out_dir + "/records.jsonl.gz");
  GenerateResult res =
      generate(spec, [&](const DonationRecord& rec) { sink.write(serialize_record(rec)); });
  sink.close();

  util::write_text_file(out_dir + "/ground_truth.json", ground_truth_to_json(res.truth));
  util::write_text_file(out_dir + "/language_table.tsv", res.language_table.to_text());
  util::write_text_file(out_dir + "/category_table.tsv", res.category_table.to_text());
  std::string gaz;
  for (const auto& p : res.gazetteer_places) {
    gaz += p;
    gaz += '\n';
  }
  util::write_text_file(out_dir + "/gazetteer.txt", gaz);
  if (spec.reach_panel.enabled) {
    std::string panel = "tld\treach\tperiod\n";
    for (const auto& [tld, reach] : res.reach_panel_rows)
      panel += tld + "\t" + util::format_fixed(reach, 4) + "\t2017-08\n";
    util::write_text_file(out_dir + "/reach_panel.tsv", panel);
  }
  util::write_text_file(out_dir + "/cohort_config.json", cohort_spec_to_json(spec));
  return res;
}

namespace {

SearchTerm term_from_json_string(const std::string& s) {
  if (auto t = SearchTerm::from_text(s)) return *t;
  if (auto t = SearchTerm::from_slug(s)) return *t;
  throw SpecError("cohort spec: unknown term \"" + s + "\"");
}

SearchTimeKey key_from_label(const std::string& label) {
  for (const auto& key : SearchTimeKey::all())
    if (key.label() == label) return key;
  throw SpecError("cohort spec: unknown time key \"" + label + "\"");
}

double req_double(const json& j, const char* field) {
  if (!j.is_number()) throw SpecError(std::string("cohort spec: ") + field + " must be a number");
  return j.get<double>();
}

int req_int(const json& j, const char* field) {
  if (!j.is_number_integer())
    throw SpecError(std::string("cohort spec: ") + field + " must be an integer");
  return j.get<int>();
}

bool req_bool(const json& j, const char* field) {
  if (!j.is_boolean()) throw SpecError(std::string("cohort spec: ") + field + " must be a bool");
  return j.get<bool>();
}

std::string req_string(const json& j, const char* field) {
  if (!j.is_string()) throw SpecError(std::string("cohort spec: ") + field + " must be a string");
  return j.get<std::string>();
}

Date req_date(const json& j, const char* field) {
  auto d = parse_date(req_string(j, field));
  if (!d) throw SpecError(std::string("cohort spec: ") + field + " must be YYYY-MM-DD");
  return *d;
}

}  // namespace

CohortSpec cohort_spec_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw SpecError("cohort spec: invalid JSON object");
  CohortSpec spec;
  for (const auto& [field, value] : j.items()) {
    if (field == "n_donors") {
      spec.n_donors = req_int(value, "n_donors");
    } else if (field == "terms") {
      if (value.is_string() && value.get<std::string>() == "all") {
        spec.terms = SearchTerm::all();
      } else if (value.is_array()) {
        for (const auto& t : value) spec.terms.push_back(term_from_json_string(req_string(t, "terms[]")));
      } else {
        throw SpecError("cohort spec: terms must be \"all\" or an array");
      }
    } else if (field == "keys") {
      if (value.is_string() && value.get<std::string>() == "all") {
        spec.keys = SearchTimeKey::all();
      } else if (value.is_number_integer()) {
        const int count = value.get<int>();
        if (count < 1 || count > SearchTimeKey::count)
          throw SpecError("cohort spec: keys count out of range");
        for (int i = 0; i < count; ++i) spec.keys.push_back(SearchTimeKey::from_index(i));
      } else if (value.is_array()) {
        for (const auto& t : value) spec.keys.push_back(key_from_label(req_string(t, "keys[]")));
      } else {
        throw SpecError("cohort spec: keys must be \"all\", a count, or an array");
      }
    } else if (field == "base_list_length") {
      spec.base_list_length = req_int(value, field.c_str());
    } else if (field == "personalization_swaps") {
      spec.personalization_swaps = req_int(value, field.c_str());
    } else if (field == "personalization_pool") {
      spec.personalization_pool = req_int(value, field.c_str());
    } else if (field == "base_composition") {
      if (!value.is_object()) throw SpecError("cohort spec: base_composition must be an object");
      for (const auto& [f2, v2] : value.items()) {
        if (f2 == "owned") spec.base_composition.owned = req_int(v2, "owned");
        else if (f2 == "social") spec.base_composition.social = req_int(v2, "social");
        else if (f2 == "wikipedia") spec.base_composition.wikipedia = req_int(v2, "wikipedia");
        else if (f2 == "media") spec.base_composition.media = req_int(v2, "media");
        else throw SpecError("cohort spec: unknown base_composition field \"" + f2 + "\"");
      }
    } else if (field == "regional") {
      if (!value.is_object()) throw SpecError("cohort spec: regional must be an object");
      for (const auto& [f2, v2] : value.items()) {
        if (f2 == "n_regions") spec.regional.n_regions = req_int(v2, "n_regions");
        else if (f2 == "branch_urls_per_region")
          spec.regional.branch_urls_per_region = req_int(v2, "branch_urls_per_region");
        else if (f2 == "donors_per_region")
          spec.regional.donors_per_region = req_int(v2, "donors_per_region");
        else throw SpecError("cohort spec: unknown regional field \"" + f2 + "\"");
      }
    } else if (field == "locale_mix") {
      if (!value.is_array()) throw SpecError("cohort spec: locale_mix must be an array");
      for (const auto& lj : value) {
        if (!lj.is_object()) throw SpecError("cohort spec: locale_mix entries must be objects");
        LocaleSpec loc;
        for (const auto& [f2, v2] : lj.items()) {
          if (f2 == "tag") loc.tag = req_string(v2, "tag");
          else if (f2 == "fraction") loc.fraction = req_double(v2, "fraction");
          else if (f2 == "shared_urls_per_list")
            loc.shared_urls_per_list = req_int(v2, "shared_urls_per_list");
          else if (f2 == "personal_urls_per_list")
            loc.personal_urls_per_list = req_int(v2, "personal_urls_per_list");
          else throw SpecError("cohort spec: unknown locale field \"" + f2 + "\"");
        }
        spec.locale_mix.push_back(std::move(loc));
      }
    } else if (field == "top_story_prob") {
      spec.top_story_prob = req_double(value, field.c_str());
    } else if (field == "fault_rates") {
      if (!value.is_object()) throw SpecError("cohort spec: fault_rates must be an object");
      for (const auto& [f2, v2] : value.items()) {
        if (f2 == "duplicate_id") spec.fault_rates.duplicate_id = req_double(v2, f2.c_str());
        else if (f2 == "repeated_url_list")
          spec.fault_rates.repeated_url_list = req_double(v2, f2.c_str());
        else if (f2 == "oversize_list") spec.fault_rates.oversize_list = req_double(v2, f2.c_str());
        else if (f2 == "redirect_stub") spec.fault_rates.redirect_stub = req_double(v2, f2.c_str());
        else throw SpecError("cohort spec: unknown fault_rates field \"" + f2 + "\"");
      }
    } else if (field == "seed") {
      if (!value.is_number_integer()) throw SpecError("cohort spec: seed must be an integer");
      spec.seed = value.get<std::uint64_t>();
    } else if (field == "include_news") {
      spec.include_news = req_bool(value, field.c_str());
    } else if (field == "news_list_length") {
      spec.news_list_length = req_int(value, field.c_str());
    } else if (field == "logged_in_fraction") {
      spec.logged_in_fraction = req_double(value, field.c_str());
    } else if (field == "reach_panel") {
      if (!value.is_object()) throw SpecError("cohort spec: reach_panel must be an object");
      for (const auto& [f2, v2] : value.items()) {
        if (f2 == "enabled") spec.reach_panel.enabled = req_bool(v2, f2.c_str());
        else if (f2 == "a") spec.reach_panel.a = req_double(v2, f2.c_str());
        else if (f2 == "b") spec.reach_panel.b = req_double(v2, f2.c_str());
        else if (f2 == "relative_noise")
          spec.reach_panel.relative_noise = req_double(v2, f2.c_str());
        else throw SpecError("cohort spec: unknown reach_panel field \"" + f2 + "\"");
      }
    } else if (field == "reach_window") {
      if (!value.is_object()) throw SpecError("cohort spec: reach_window must be an object");
      for (const auto& [f2, v2] : value.items()) {
        if (f2 == "begin") spec.reach_window.begin = req_date(v2, f2.c_str());
        else if (f2 == "end") spec.reach_window.end = req_date(v2, f2.c_str());
        else throw SpecError("cohort spec: unknown reach_window field \"" + f2 + "\"");
      }
    } else {
      throw SpecError("cohort spec: unknown field \"" + field + "\"");
    }
  }
  normalize(spec);
  validate(spec);
  return spec;
}

std::string cohort_spec_to_json(const CohortSpec& spec_in) {
  CohortSpec spec = spec_in;
  normalize(spec);
  json j;
  j["n_donors"] = spec.n_donors;
  json terms = json::array();
  for (const auto& t : spec.terms) terms.push_back(std::string(t.slug()));
  j["terms"] = std::move(terms);
  json keys = json::array();
  for (const auto& key : spec.keys) keys.push_back(key.label());
  j["keys"] = std::move(keys);
  j["base_list_length"] = spec.base_list_length;
  j["personalization_swaps"] = spec.personalization_swaps;
  j["personalization_pool"] = spec.personalization_pool;
  j["base_composition"] = {{"owned", spec.base_composition.owned},
                           {"social", spec.base_composition.social},
                           {"wikipedia", spec.base_composition.wikipedia},
                           {"media", spec.base_composition.media}};
  if (spec.regional.enabled())
    j["regional"] = {{"n_regions", spec.regional.n_regions},
                     {"branch_urls_per_region", spec.regional.branch_urls_per_region},
                     {"donors_per_region", spec.regional.donors_per_region}};
  json mix = json::array();
  for (const auto& loc : spec.locale_mix)
    mix.push_back({{"tag", loc.tag},
                   {"fraction", loc.fraction},
                   {"shared_urls_per_list", loc.shared_urls_per_list},
                   {"personal_urls_per_list", loc.personal_urls_per_list}});
  j["locale_mix"] = std::move(mix);
  j["top_story_prob"] = spec.top_story_prob;
  j["fault_rates"] = {{"duplicate_id", spec.fault_rates.duplicate_id},
                      {"repeated_url_list", spec.fault_rates.repeated_url_list},
                      {"oversize_list", spec.fault_rates.oversize_list},
                      {"redirect_stub", spec.fault_rates.redirect_stub}};
  j["seed"] = spec.seed;
  j["include_news"] = spec.include_news;
  j["news_list_length"] = spec.news_list_length;
  j["logged_in_fraction"] = spec.logged_in_fraction;
  j["reach_panel"] = {{"enabled", spec.reach_panel.enabled},
                      {"a", spec.reach_panel.a},
                      {"b", spec.reach_panel.b},
                      {"relative_noise", spec.reach_panel.relative_noise}};
  j["reach_window"] = {{"begin", format_date(spec.reach_window.begin)},
                       {"end", format_date(spec.reach_window.end)}};
  return j.dump(2) + "\n";
}

std::string ground_truth_to_json(const GroundTruth& truth) {
  json j;
  j["donor_region"] = json::object();
  for (const auto& [id, region] : truth.donor_region) j["donor_region"][id] = region;
  j["donor_locale"] = json::object();
  for (const auto& [id, tag] : truth.donor_locale) j["donor_locale"][id] = tag;
  j["duplicate_donor_ids"] = truth.duplicate_donor_ids;
  json labels = json::array();
  for (const auto& l : truth.fault_labels)
    labels.push_back({{"donor_id", l.donor_id},
                      {"term", std::string(SearchTerm::from_index(l.term_index).slug())},
                      {"search_type", std::string(to_string(l.search_type))},
                      {"timestamp", l.timestamp},
                      {"class", l.fault_class},
                      {"disposition", l.disposition}});
  j["fault_labels"] = std::move(labels);
  j["expectations"] = {
      {"mean_list_length", truth.expected_mean_list_length},
      {"scope", truth.expected_scope},
      {"raw_nonshared", truth.expected_raw_nonshared},
      {"refined_nonshared", truth.expected_refined_nonshared},
      {"news_scope", truth.expected_news_scope ? json(*truth.expected_news_scope) : json()},
      {"formula_valid", truth.scope_formula_valid}};
  json clusters = json::array();
  for (const auto& fc : truth.foreign_clusters)
    clusters.push_back({{"locale", fc.locale},
                        {"members", fc.members},
                        {"residual_shared", fc.residual_shared},
                        {"expected_outward", fc.expected_outward}});
  j["foreign_clusters"] = std::move(clusters);
  j["regional_places"] = truth.regional_places;
  if (truth.reach_model) {
    j["reach_model"] = {{"a", truth.reach_model->a},
                        {"b", truth.reach_model->b},
                        {"relative_noise", truth.reach_model->relative_noise}};
  } else {
    j["reach_model"] = json();
  }
  return j.dump(2) + "\n";
}

GroundTruth ground_truth_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw SpecError("ground truth: invalid JSON object");
  GroundTruth truth;
  for (const auto& [id, region] : j.at("donor_region").items())
    truth.donor_region[id] = region.get<int>();
  for (const auto& [id, tag] : j.at("donor_locale").items())
    truth.donor_locale[id] = tag.get<std::string>();
  truth.duplicate_donor_ids = j.at("duplicate_donor_ids").get<std::vector<std::string>>();
  for (const auto& lj : j.at("fault_labels")) {
    FaultLabel l;
    l.donor_id = lj.at("donor_id").get<std::string>();
    auto term = SearchTerm::from_slug(lj.at("term").get<std::string>());
    if (!term) throw SpecError("ground truth: unknown term slug");
    l.term_index = term->index();
    auto st = search_type_from_string(lj.at("search_type").get<std::string>());
    if (!st) throw SpecError("ground truth: unknown search type");
    l.search_type = *st;
    l.timestamp = lj.at("timestamp").get<std::string>();
    l.fault_class = lj.at("class").get<std::string>();
    l.disposition = lj.at("disposition").get<std::string>();
    truth.fault_labels.push_back(std::move(l));
  }
  const auto& ex = j.at("expectations");
  truth.expected_mean_list_length = ex.at("mean_list_length").get<double>();
  truth.expected_scope = ex.at("scope").get<double>();
  truth.expected_raw_nonshared = ex.at("raw_nonshared").get<double>();
  truth.expected_refined_nonshared = ex.at("refined_nonshared").get<double>();
  if (!ex.at("news_scope").is_null()) truth.expected_news_scope = ex.at("news_scope").get<double>();
  truth.scope_formula_valid = ex.at("formula_valid").get<bool>();
  for (const auto& cj : j.at("foreign_clusters")) {
    ForeignClusterTruth fc;
    fc.locale = cj.at("locale").get<std::string>();
    fc.members = cj.at("members").get<std::vector<std::string>>();
    fc.residual_shared = cj.at("residual_shared").get<int>();
    fc.expected_outward = cj.at("expected_outward").get<double>();
    truth.foreign_clusters.push_back(std::move(fc));
  }
  truth.regional_places = j.at("regional_places").get<std::vector<std::string>>();
  if (!j.at("reach_model").is_null()) {
    ReachPanelSpec rm;
    rm.enabled = true;
    rm.a = j["reach_model"].at("a").get<double>();
    rm.b = j["reach_model"].at("b").get<double>();
    rm.relative_noise = j["reach_model"].at("relative_noise").get<double>();
    truth.reach_model = rm;
  }
  return truth;
}

bool OracleReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const OracleCheck& c) { return c.pass; });
}

std::string OracleReport::to_text() const {
  std::string out;
  for (const auto& c : checks) {
    out += c.pass ? "PASS " : "FAIL ";
    out += c.name;
    out += " expected=" + fmt_num(c.expected);
    out += " measured=" + fmt_num(c.measured);
    out += " tolerance=" + fmt_num(c.tolerance);
    if (!c.note.empty()) out += " (" + c.note + ")";
    out += '\n';
  }
  return out;
}

OracleReport oracle_report(const CohortSpec& spec_in, const GroundTruth& truth,
                           std::size_t emitted_search_records,
                           std::span<const ResultList> cleaned_lists,
                           const RegionalTagTable* regional_table, const ReachFit* reach_fit,
                           int threads) {
  CohortSpec spec = spec_in;
  normalize(spec);
  OracleReport rep;
  auto add = [&rep](std::string name, double expected, double measured, double tolerance,
                    std::string note = "") {
    OracleCheck c{std::move(name), expected, measured, tolerance, false, std::move(note)};
    c.pass = std::isfinite(c.measured) && std::abs(c.expected - c.measured) <= c.tolerance + 1e-12;
    rep.checks.push_back(std::move(c));
  };
  const int k = spec.personalization_swaps;

  const auto record_key = [](const std::string& donor, int term_index, SearchType type,
                             const std::string& ts) {
    return donor + "|" + std::to_string(term_index) + "|" + std::string(to_string(type)) + "|" +
           ts;
  };

  const auto groups = build_groups(cleaned_lists, SearchType::google_search);

  // Repaired records (truncated, stub-stripped) survive with altered list
  // lengths by design, so the closed forms compare fault-free survivors only.
  std::set<std::string> repaired;
  for (const auto& label : truth.fault_labels)
    if (label.disposition != "removed")
      repaired.insert(
          record_key(label.donor_id, label.term_index, label.search_type, label.timestamp));
  std::vector<ResultList> formula_lists;
  std::span<const ResultList> formula_span = cleaned_lists;
  if (!repaired.empty()) {
    formula_lists.reserve(cleaned_lists.size());
    for (const auto& list : cleaned_lists)
      if (!repaired.contains(record_key(list.donor_id, list.term.index(), list.search_type,
                                        format_timestamp(list.timestamp))))
        formula_lists.push_back(list);
    formula_span = formula_lists;
  }

  if (truth.scope_formula_valid) {
    const auto formula_groups = build_groups(formula_span, SearchType::google_search);
    const auto per_term = per_term_stats(formula_groups, threads);
    OverlapStats pooled;
    for (const auto& t : per_term) pooled.merge(t.pooled);
    if (pooled.n_pairs > 0) {
      const bool exact = k == 0 && !spec.regional.enabled();
      add("scope", truth.expected_scope, pooled.scope(), exact ? 0.0 : 0.1);
      add("mean_list_length", truth.expected_mean_list_length, pooled.mean_list_length(), 1e-9);
    }
    if (spec.include_news && truth.expected_news_scope) {
      const auto news = news_overlap(formula_span, threads);
      OverlapStats pooled_news;
      for (const auto& t : news) pooled_news.merge(t.pooled);
      if (pooled_news.n_pairs > 0)
        add("news_scope", *truth.expected_news_scope, pooled_news.scope(), k == 0 ? 0.0 : 0.1);
    }
    if (spec.regional.enabled() && regional_table) {
      double sum_raw = 0.0, sum_refined = 0.0;
      std::uint64_t pairs = 0;
      for (const auto& g : formula_groups) {
        const auto rn = refined_nonshared(g, *regional_table);
        if (!rn) continue;
        const auto m = static_cast<std::uint64_t>(g.members.size());
        const std::uint64_t p = m * (m - 1) / 2;
        sum_raw += rn->raw * static_cast<double>(p);
        sum_refined += rn->refined * static_cast<double>(p);
        pairs += p;
      }
      if (pairs > 0) {
        add("raw_nonshared", truth.expected_raw_nonshared, sum_raw / static_cast<double>(pairs),
            0.15);
        add("refined_nonshared", truth.expected_refined_nonshared,
            sum_refined / static_cast<double>(pairs), 0.15);
      }
    }
  }

  if (!truth.foreign_clusters.empty()) {
    for (const auto& fc : truth.foreign_clusters) {
      const std::set<std::string> want(fc.members.begin(), fc.members.end());
      std::size_t total = 0, hits = 0, dist_n = 0;
      double dist_sum = 0.0;
      for (const auto& g : groups) {
        if (g.members.size() < 2) continue;
        ++total;
        const auto report = detect_group(g);
        for (const auto& cluster : report.clusters) {
          if (!cluster.flagged) continue;
          const std::set<std::string> got(cluster.member_donor_ids.begin(),
                                          cluster.member_donor_ids.end());
          if (got == want) {
            ++hits;
            if (cluster.distinctness) {
              dist_sum += *cluster.distinctness;
              ++dist_n;
            }
            break;
          }
        }
      }
      add("cluster_recovery_" + fc.locale, 1.0,
          total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0, 0.0);
      if (dist_n > 0)
        add("cluster_outward_" + fc.locale, fc.expected_outward,
            dist_sum / static_cast<double>(dist_n), 0.25);
    }
  } else if (k == 0 && !spec.regional.enabled() && spec.locale_mix.size() == 1) {
    std::size_t flagged = 0;
    for (const auto& g : groups) {
      const auto report = detect_group(g);
      for (const auto& cluster : report.clusters)
        if (cluster.flagged) ++flagged;
    }
    add("no_false_positive_clusters", 0.0, static_cast<double>(flagged), 0.0);
  }

  std::unordered_map<std::string, const ResultList*> by_record;
  by_record.reserve(cleaned_lists.size());
  std::size_t cleaned_search = 0;
  for (const auto& list : cleaned_lists) {
    if (list.search_type == SearchType::google_search) ++cleaned_search;
    by_record[record_key(list.donor_id, list.term.index(), list.search_type,
                         format_timestamp(list.timestamp))] = &list;
  }
  std::size_t removed_total = 0, removed_absent = 0, trunc_total = 0, trunc_ok = 0,
              dropped_total = 0, dropped_ok = 0, removed_search = 0;
  const int L = spec.base_list_length;
  for (const auto& label : truth.fault_labels) {
    const std::string key =
        record_key(label.donor_id, label.term_index, label.search_type, label.timestamp);
    const auto it = by_record.find(key);
    if (label.disposition == "removed") {
      ++removed_total;
      if (label.search_type == SearchType::google_search) ++removed_search;
      if (it == by_record.end()) ++removed_absent;
    } else if (label.disposition == "truncated") {
      ++trunc_total;
      if (it != by_record.end() && it->second->organic.size() <= 10 &&
          it->second->organic.size() >= static_cast<std::size_t>(std::min(L, 10)))
        ++trunc_ok;
    } else if (label.disposition == "entries_dropped") {
      ++dropped_total;
      if (it != by_record.end()) ++dropped_ok;
    }
  }
  if (removed_total > 0)
    add("faulty_removed", 1.0,
        static_cast<double>(removed_absent) / static_cast<double>(removed_total), 0.0);
  if (trunc_total > 0)
    add("oversize_truncated", 1.0,
        static_cast<double>(trunc_ok) / static_cast<double>(trunc_total), 0.0);
  if (dropped_total > 0)
    add("stub_records_kept", 1.0,
        static_cast<double>(dropped_ok) / static_cast<double>(dropped_total), 0.0);
  std::size_t stubby = 0;
  for (const auto& list : cleaned_lists) {
    bool has = false;
    for (const auto& u : list.organic) has = has || is_stub_url(u);
    for (const auto& u : list.top_stories) has = has || is_stub_url(u);
    if (has) ++stubby;
  }
  add("stub_free", 0.0, static_cast<double>(stubby), 0.0);
  add("clean_retained", static_cast<double>(emitted_search_records - removed_search),
      static_cast<double>(cleaned_search), 0.0);

  const auto patterns = LocalePatternTable::defaults();
  const auto detected = donor_locales(cleaned_lists, patterns);
  std::size_t known = 0, correct = 0;
  for (const auto& [donor, tag] : detected) {
    if (tag == kUnknownLocale) continue;
    const auto it = truth.donor_locale.find(donor);
    if (it == truth.donor_locale.end()) continue;
    ++known;
    if (it->second == tag) ++correct;
  }
  if (known > 0)
    add("locale_tags", 1.0, static_cast<double>(correct) / static_cast<double>(known), 0.0);

  if (reach_fit && truth.reach_model) {
    add("reach_exponent", truth.reach_model->b, reach_fit->b, 0.05);
    add("reach_prefactor_rel_err", 0.0,
        std::abs(reach_fit->a - truth.reach_model->a) / truth.reach_model->a, 0.15);
  }
  return rep;
}

}  // namespace serpaudit
