#include "serpaudit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "serpaudit/bubble.hpp"
#include "serpaudit/catalog.hpp"
#include "serpaudit/cleanse.hpp"
#include "serpaudit/dynamics.hpp"
#include "serpaudit/ingest.hpp"
#include "serpaudit/overlap.hpp"
#include "serpaudit/reach.hpp"
#include "serpaudit/region.hpp"
#include "serpaudit/synth.hpp"
#include "serpaudit/util.hpp"

namespace serpaudit::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string f2(double v) { return util::format_fixed(v, 2); }
std::string f4(double v) { return util::format_fixed(v, 4); }
std::string f6(double v) { return util::format_fixed(v, 6); }

std::string fratio(double v) {
  if (std::isinf(v)) return "inf";
  return f4(v);
}

void check_thresholds(const Thresholds& t) {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (t.popularity <= 0.0 || t.popularity > 1.0) fail("popularity must lie in (0, 1]");
  if (t.min_shared < 1) fail("min_shared must be >= 1");
  if (t.distinctness < 0.0) fail("distinctness must be >= 0");
  if (t.overrep_factor < 1.0) fail("overrep_factor must be >= 1");
  if (t.language_share < 0.0 || t.language_share > 1.0) fail("language_share must lie in [0, 1]");
}

Date config_date(const json& value, const char* field) {
  if (!value.is_string()) throw ConfigError(std::string("config: ") + field + " must be a string");
  auto d = parse_date(value.get<std::string>());
  if (!d) throw ConfigError(std::string("config: ") + field + " must be YYYY-MM-DD");
  return *d;
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config: invalid JSON object");
  RunConfig cfg;
  for (const auto& [field, value] : j.items()) {
    auto as_string = [&](const char* name) {
      if (!value.is_string()) throw ConfigError(std::string("config: ") + name + " must be a string");
      return value.get<std::string>();
    };
    if (field == "language_table") cfg.language_table = as_string(field.c_str());
    else if (field == "category_table") cfg.category_table = as_string(field.c_str());
    else if (field == "gazetteer") cfg.gazetteer = as_string(field.c_str());
    else if (field == "reach_panel") cfg.reach_panel = as_string(field.c_str());
    else if (field == "locale_patterns") cfg.locale_patterns = as_string(field.c_str());
    else if (field == "donor_blocklist") cfg.donor_blocklist = as_string(field.c_str());
    else if (field == "duplicate_id_heuristic") {
      if (!value.is_boolean()) throw ConfigError("config: duplicate_id_heuristic must be a bool");
      cfg.duplicate_id_heuristic = value.get<bool>();
    } else if (field == "seed") {
      if (!value.is_number_integer()) throw ConfigError("config: seed must be an integer");
      cfg.seed = value.get<std::uint64_t>();
    } else if (field == "thresholds") {
      if (!value.is_object()) throw ConfigError("config: thresholds must be an object");
      for (const auto& [f2name, v2] : value.items()) {
        auto num = [&](const char* name) {
          if (!v2.is_number()) throw ConfigError(std::string("config: ") + name + " must be a number");
          return v2.get<double>();
        };
        if (f2name == "popularity") cfg.thresholds.popularity = num(f2name.c_str());
        else if (f2name == "min_shared") {
          if (!v2.is_number_integer()) throw ConfigError("config: min_shared must be an integer");
          cfg.thresholds.min_shared = v2.get<int>();
        } else if (f2name == "distinctness") cfg.thresholds.distinctness = num(f2name.c_str());
        else if (f2name == "overrep_factor") cfg.thresholds.overrep_factor = num(f2name.c_str());
        else if (f2name == "language_share") cfg.thresholds.language_share = num(f2name.c_str());
        else if (f2name == "clique_mode") {
          if (!v2.is_boolean()) throw ConfigError("config: clique_mode must be a bool");
          cfg.thresholds.clique_mode = v2.get<bool>();
        } else {
          throw ConfigError("config: unknown threshold \"" + f2name + "\"");
        }
      }
    } else if (field == "reach_window") {
      if (!value.is_object()) throw ConfigError("config: reach_window must be an object");
      for (const auto& [f2name, v2] : value.items()) {
        if (f2name == "begin") cfg.reach_window.begin = config_date(v2, "reach_window.begin");
        else if (f2name == "end") cfg.reach_window.end = config_date(v2, "reach_window.end");
        else throw ConfigError("config: unknown reach_window field \"" + f2name + "\"");
      }
    } else {
      throw ConfigError("config: unknown field \"" + field + "\"");
    }
  }
  check_thresholds(cfg.thresholds);
  if (cfg.reach_window.end < cfg.reach_window.begin)
    throw ConfigError("config: reach window end precedes begin");
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  if (!cfg.language_table.empty()) j["language_table"] = cfg.language_table;
  if (!cfg.category_table.empty()) j["category_table"] = cfg.category_table;
  if (!cfg.gazetteer.empty()) j["gazetteer"] = cfg.gazetteer;
  if (!cfg.reach_panel.empty()) j["reach_panel"] = cfg.reach_panel;
  if (!cfg.locale_patterns.empty()) j["locale_patterns"] = cfg.locale_patterns;
  if (!cfg.donor_blocklist.empty()) j["donor_blocklist"] = cfg.donor_blocklist;
  j["duplicate_id_heuristic"] = cfg.duplicate_id_heuristic;
  j["seed"] = cfg.seed;
  j["thresholds"] = {{"popularity", cfg.thresholds.popularity},
                     {"min_shared", cfg.thresholds.min_shared},
                     {"distinctness", cfg.thresholds.distinctness},
                     {"overrep_factor", cfg.thresholds.overrep_factor},
                     {"language_share", cfg.thresholds.language_share},
                     {"clique_mode", cfg.thresholds.clique_mode}};
  j["reach_window"] = {{"begin", format_date(cfg.reach_window.begin)},
                       {"end", format_date(cfg.reach_window.end)}};
  return j.dump(2) + "\n";
}

namespace {

struct Invocation {
  std::string subcommand;
  std::string input;
  std::string out;
  std::string config_path;
  RunConfig cfg;
  int threads = 1;
  std::vector<std::pair<std::string, std::string>> manifest_inputs;  // (path, sha256)
};

void note_input(Invocation& inv, const std::string& path) {
  std::string digest;
  try {
    digest = util::sha256_file_hex(path);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  inv.manifest_inputs.emplace_back(path, digest);
}

void ensure_out_dir(const Invocation& inv) {
  if (inv.out.empty()) throw ConfigError("an output directory is required (--out)");
  std::error_code ec;
  fs::create_directories(inv.out, ec);
  if (ec) throw InputError("cannot create output directory: " + inv.out);
}

std::string out_path(const Invocation& inv, const std::string& name) {
  return (fs::path(inv.out) / name).string();
}

void write_manifest(const Invocation& inv) {
  json j;
  j["subcommand"] = inv.subcommand;
  if (inv.config_path.empty()) {
    j["config"] = json();
  } else {
    std::string digest;
    try {
      digest = util::sha256_file_hex(inv.config_path);
    } catch (const std::exception& e) {
      throw InputError(e.what());
    }
    j["config"] = {{"path", inv.config_path}, {"sha256", digest}};
  }
  json inputs = json::array();
  for (const auto& [path, digest] : inv.manifest_inputs)
    inputs.push_back({{"path", path}, {"sha256", digest}});
  j["inputs"] = std::move(inputs);
  j["thresholds"] = {{"popularity", inv.cfg.thresholds.popularity},
                     {"min_shared", inv.cfg.thresholds.min_shared},
                     {"distinctness", inv.cfg.thresholds.distinctness},
                     {"overrep_factor", inv.cfg.thresholds.overrep_factor},
                     {"language_share", inv.cfg.thresholds.language_share},
                     {"clique_mode", inv.cfg.thresholds.clique_mode}};
  j["seed"] = inv.cfg.seed;
  j["reach_window"] = {{"begin", format_date(inv.cfg.reach_window.begin)},
                       {"end", format_date(inv.cfg.reach_window.end)}};
  util::write_text_file(out_path(inv, "manifest.json"), j.dump(2) + "\n");
}

ParseResult load_dataset(Invocation& inv) {
  if (inv.input.empty()) throw ConfigError("an input record file is required (--input)");
  note_input(inv, inv.input);
  try {
    return load_records_file(inv.input);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

std::vector<ResultList> load_lists(Invocation& inv, std::vector<ParseReject>* rejects = nullptr) {
  if (inv.input.empty()) throw ConfigError("an input record file is required (--input)");
  note_input(inv, inv.input);
  try {
    return load_result_lists(inv.input, rejects);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

LanguageTable need_language_table(Invocation& inv) {
  if (inv.cfg.language_table.empty())
    throw ConfigError("a language table is required (config: language_table)");
  note_input(inv, inv.cfg.language_table);
  try {
    return LanguageTable::from_file(inv.cfg.language_table);
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("language table: ") + e.what());
  }
}

CategoryTable need_category_table(Invocation& inv) {
  if (inv.cfg.category_table.empty())
    throw ConfigError("a category table is required (config: category_table)");
  note_input(inv, inv.cfg.category_table);
  try {
    return CategoryTable::from_file(inv.cfg.category_table);
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("category table: ") + e.what());
  }
}

Gazetteer need_gazetteer(Invocation& inv) {
  if (inv.cfg.gazetteer.empty()) throw ConfigError("a gazetteer is required (config: gazetteer)");
  note_input(inv, inv.cfg.gazetteer);
  try {
    return Gazetteer::from_file(inv.cfg.gazetteer);
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("gazetteer: ") + e.what());
  }
}

ReachPanel need_reach_panel(Invocation& inv) {
  if (inv.cfg.reach_panel.empty())
    throw ConfigError("a reach panel is required (config: reach_panel)");
  note_input(inv, inv.cfg.reach_panel);
  try {
    return load_reach_panel(inv.cfg.reach_panel);
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("reach panel: ") + e.what());
  }
}

LocalePatternTable locale_patterns(Invocation& inv) {
  if (inv.cfg.locale_patterns.empty()) return LocalePatternTable::defaults();
  note_input(inv, inv.cfg.locale_patterns);
  try {
    return LocalePatternTable::from_file(inv.cfg.locale_patterns);
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("locale patterns: ") + e.what());
  }
}

CleanseConfig cleanse_config(Invocation& inv) {
  CleanseConfig cc;
  cc.duplicate_id_heuristic = inv.cfg.duplicate_id_heuristic;
  cc.language_share_threshold = inv.cfg.thresholds.language_share;
  if (!inv.cfg.donor_blocklist.empty()) {
    note_input(inv, inv.cfg.donor_blocklist);
    std::string text;
    try {
      text = util::read_text_file(inv.cfg.donor_blocklist);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("donor blocklist: ") + e.what());
    }
    for (std::string_view line : util::split(text, '\n')) {
      auto trimmed = util::trim(line);
      if (!trimmed.empty()) cc.donor_blocklist.insert(std::string(trimmed));
    }
  }
  return cc;
}

void write_rejects(const Invocation& inv, const std::vector<ParseReject>& rejects) {
  util::TsvWriter w({"line_number", "reason"});
  for (const auto& r : rejects) w.add_row({std::to_string(r.line_number), r.reason});
  w.write_file(out_path(inv, "rejects.tsv"));
}

std::vector<SearchTerm> terms_in(std::span<const ResultList> lists) {
  std::set<int> indexes;
  for (const auto& l : lists) indexes.insert(l.term.index());
  std::vector<SearchTerm> terms;
  for (int i : indexes) terms.push_back(SearchTerm::from_index(i));
  return terms;
}

// ---------------------------------------------------------------------------
// ingest

void run_ingest(Invocation& inv) {
  ensure_out_dir(inv);
  ParseResult parsed = load_dataset(inv);
  const DatasetSummary summary = summarize(parsed.dataset);

  util::TsvWriter counts({"metric", "value"});
  counts.add_row({"total_records", std::to_string(summary.total_records)});
  counts.add_row({"records_google_search", std::to_string(summary.records_google_search)});
  counts.add_row({"records_google_news", std::to_string(summary.records_google_news)});
  counts.add_row({"rejected_lines", std::to_string(parsed.rejects.size())});
  counts.write_file(out_path(inv, "summary.tsv"));

  util::TsvWriter daily({"date", "logged_in", "logged_out"});
  for (const auto& day : summary.per_day)
    daily.add_row({format_date(day.date), std::to_string(day.logged_in),
                   std::to_string(day.logged_out)});
  daily.write_file(out_path(inv, "daily_donors.tsv"));

  util::TsvWriter countries({"country", "donors"});
  for (const auto& [country, donors] : summary.donors_per_country)
    countries.add_row({country, std::to_string(donors)});
  countries.write_file(out_path(inv, "donors_per_country.tsv"));

  util::TsvWriter per_term({"term", "records"});
  for (const auto& [term, records] : summary.records_per_term)
    per_term.add_row({term, std::to_string(records)});
  per_term.write_file(out_path(inv, "records_per_term.tsv"));

  util::TsvWriter locations({"lat", "lon", "country", "donor_count", "retained"});
  for (const auto& row : export_locations(parsed.dataset, nullptr))
    locations.add_row({f2(row.lat), f2(row.lon), row.country, std::to_string(row.donor_count),
                       row.retained ? "1" : "0"});
  locations.write_file(out_path(inv, "locations.tsv"));

  write_rejects(inv, parsed.rejects);
  write_manifest(inv);
}

// ---------------------------------------------------------------------------
// clean

void write_cleaning_report(const Invocation& inv, const CleaningReport& report) {
  util::TsvWriter stages({"stage", "records_in", "records_removed"});
  for (const auto& s : report.stages)
    stages.add_row({s.stage, std::to_string(s.records_in), std::to_string(s.records_removed)});
  stages.write_file(out_path(inv, "cleaning_report.tsv"));

  util::TsvWriter summary({"metric", "value"});
  summary.add_row({"search_records_in", std::to_string(report.search_records_in)});
  summary.add_row({"search_records_out", std::to_string(report.search_records_out)});
  summary.add_row({"reduction_google_search", f6(report.reduction_google_search)});
  summary.add_row({"news_records_in", std::to_string(report.news_records_in)});
  summary.add_row({"news_records_out", std::to_string(report.news_records_out)});
  summary.add_row({"reduction_google_news", f6(report.reduction_google_news)});
  summary.write_file(out_path(inv, "cleaning_summary.tsv"));

  util::TsvWriter dropped({"donor_id"});
  for (const auto& donor : report.dropped_donor_ids) dropped.add_row({donor});
  dropped.write_file(out_path(inv, "dropped_donors.tsv"));
}

void run_clean(Invocation& inv) {
  ensure_out_dir(inv);
  const LanguageTable language = need_language_table(inv);
  const CleanseConfig cc = cleanse_config(inv);
  ParseResult parsed = load_dataset(inv);
  write_rejects(inv, parsed.rejects);

  CleanseRecordsResult cleaned =
      run_pipeline_records(std::move(parsed.dataset), cc, language);
  LineSink sink(out_path(inv, "cleaned.jsonl.gz"));
  for (const auto& record : cleaned.dataset.records) sink.write(serialize_record(record));
  sink.close();
  write_cleaning_report(inv, cleaned.report);
  write_manifest(inv);
}

// ---------------------------------------------------------------------------
// classify

void write_classify(const Invocation& inv, std::span<const ResultList> lists,
                    const CategoryTable& table) {
  const auto terms = terms_in(lists);
  const Segment segments[3] = {Segment::organic, Segment::top_stories, Segment::news};

  util::TsvWriter top({"term", "segment", "rank", "tld", "count"});
  for (const auto& term : terms) {
    for (Segment segment : segments) {
      const auto ranked = top_tlds(lists, term, 10, segment);
      for (std::size_t i = 0; i < ranked.size(); ++i)
        top.add_row({std::string(term.slug()), std::string(to_string(segment)),
                     std::to_string(i + 1), ranked[i].tld.value,
                     std::to_string(ranked[i].count)});
    }
  }
  top.write_file(out_path(inv, "top_tlds.tsv"));

  std::vector<std::string> header = {"term", "segment", "n_lists"};
  for (int c = 0; c < kMainCategoryCount; ++c)
    header.push_back(std::string(to_string(static_cast<MainCategory>(c))));
  util::TsvWriter shares(header);
  for (const auto& term : terms) {
    for (Segment segment : segments) {
      const auto dist = category_distribution(lists, term, segment, table);
      if (dist.n_lists == 0) continue;
      std::vector<std::string> row = {std::string(term.slug()), std::string(to_string(segment)),
                                      std::to_string(dist.n_lists)};
      for (double v : dist.main) row.push_back(f6(v));
      shares.add_row(row);
    }
  }
  shares.write_file(out_path(inv, "category_shares.tsv"));

  util::TsvWriter editable({"term", "editable_share"});
  for (const auto& term : terms) {
    std::vector<std::string> urls;
    for (const auto& list : lists) {
      if (list.term != term) continue;
      urls.insert(urls.end(), list.organic.begin(), list.organic.end());
      urls.insert(urls.end(), list.top_stories.begin(), list.top_stories.end());
    }
    if (urls.empty()) continue;
    editable.add_row({std::string(term.slug()), f6(editable_share(urls, table))});
  }
  editable.write_file(out_path(inv, "editable_share.tsv"));

  const TldCensus census = distinct_tld_census(lists, table);
  util::TsvWriter census_w({"scope", "distinct_tlds"});
  census_w.add_row({"all", std::to_string(census.total)});
  for (const auto& [party, count] : census.per_party)
    census_w.add_row({party, std::to_string(count)});
  census_w.write_file(out_path(inv, "tld_census.tsv"));
}

void run_classify(Invocation& inv) {
  ensure_out_dir(inv);
  const CategoryTable table = need_category_table(inv);
  const auto lists = load_lists(inv);
  if (lists.empty()) throw PreconditionError("no result lists in the admissible period");
  write_classify(inv, lists, table);
  write_manifest(inv);
}

// ---------------------------------------------------------------------------
// overlap

void write_overlap_rows(const Invocation& inv, const std::vector<TermOverlap>& stats,
                        const std::string& pooled_name, const std::string& per_key_name,
                        const std::string& histogram_name) {
  const std::vector<std::string> columns = {
      "n_lists",         "n_pairs",          "identical_pct", "identical_ordered_pct",
      "mean_common_links", "mean_list_length", "scope"};

  auto stat_row = [](const OverlapStats& s) {
    return std::vector<std::string>{std::to_string(s.n_lists),
                                    std::to_string(s.n_pairs),
                                    f4(s.identical_fraction()),
                                    f4(s.identical_ordered_fraction()),
                                    f4(s.mean_common_links()),
                                    f4(s.mean_list_length()),
                                    f4(s.scope())};
  };

  std::vector<std::string> pooled_header = {"term"};
  pooled_header.insert(pooled_header.end(), columns.begin(), columns.end());
  util::TsvWriter pooled(pooled_header);
  for (const auto& t : stats) {
    std::vector<std::string> row = {std::string(t.term.slug())};
    const auto values = stat_row(t.pooled);
    row.insert(row.end(), values.begin(), values.end());
    pooled.add_row(row);
  }
  pooled.write_file(out_path(inv, pooled_name));

  std::vector<std::string> per_key_header = {"term", "key"};
  per_key_header.insert(per_key_header.end(), columns.begin(), columns.end());
  util::TsvWriter per_key(per_key_header);
  for (const auto& t : stats) {
    for (const auto& [key, s] : t.per_key) {
      std::vector<std::string> row = {std::string(t.term.slug()), key.label()};
      const auto values = stat_row(s);
      row.insert(row.end(), values.begin(), values.end());
      per_key.add_row(row);
    }
  }
  per_key.write_file(out_path(inv, per_key_name));

  util::TsvWriter histogram({"term", "common_links", "pairs"});
  for (const auto& t : stats) {
    for (std::size_t c = 0; c < t.pooled.histogram.size(); ++c)
      histogram.add_row({std::string(t.term.slug()), std::to_string(c),
                         std::to_string(t.pooled.histogram[c])});
  }
  histogram.write_file(out_path(inv, histogram_name));
}

void run_overlap(Invocation& inv) {
  ensure_out_dir(inv);
  const auto lists = load_lists(inv);
  if (lists.empty()) throw PreconditionError("no result lists in the admissible period");
  const auto groups = build_groups(lists, SearchType::google_search);
  const auto search = per_term_stats(groups, inv.threads);
  write_overlap_rows(inv, search, "overlap_search.tsv", "overlap_search_per_key.tsv",
                     "histogram_search.tsv");
  const auto news = news_overlap(lists, inv.threads);
  if (!news.empty())
    write_overlap_rows(inv, news, "overlap_news.tsv", "overlap_news_per_key.tsv",
                       "histogram_news.tsv");
  write_manifest(inv);
}

// ---------------------------------------------------------------------------
// region

RegionalTagTable build_regional_table(std::span<const ResultList> lists, const Gazetteer& gaz,
                                      const CategoryTable& categories) {
  std::set<std::string> hosts;
  for (const auto& list : lists) {
    for (const auto& url : list.organic)
      if (auto tld = try_extract_tld(url)) hosts.insert(tld->value);
    for (const auto& url : list.top_stories)
      if (auto tld = try_extract_tld(url)) hosts.insert(tld->value);
  }
  std::vector<Tld> tlds;
  tlds.reserve(hosts.size());
  for (const auto& host : hosts) tlds.push_back(Tld{host});
  return tag_regional(tlds, gaz, categories);
}

void write_region(const Invocation& inv, std::span<const ResultList> lists,
                  const RegionalTagTable& table) {
  util::TsvWriter tags({"tld", "place"});
  {
    // to_text rows are tld, regional flag, place; keep the flagged ones.
    const std::string text = table.to_text();
    bool header = true;
    for (std::string_view line : util::split(text, '\n')) {
      if (line.empty()) continue;
      if (header) {
        header = false;
        continue;
      }
      const auto fields = util::split(line, '\t');
      if (fields.size() == 3 && fields[1] == "1") tags.add_row({fields[0], fields[2]});
    }
  }
  tags.write_file(out_path(inv, "regional_tags.tsv"));

  const auto groups = build_groups(lists, SearchType::google_search);
  struct Acc {
    double raw = 0.0, refined = 0.0;
    std::uint64_t pairs = 0;
  };
  std::map<int, Acc> per_term;
  util::TsvWriter per_key({"term", "key", "n_pairs", "raw", "refined"});
  for (const auto& g : groups) {
    const auto rn = refined_nonshared(g, table);
    if (!rn) continue;
    const auto m = static_cast<std::uint64_t>(g.members.size());
    const std::uint64_t pairs = m * (m - 1) / 2;
    auto& acc = per_term[g.term.index()];
    acc.raw += rn->raw * static_cast<double>(pairs);
    acc.refined += rn->refined * static_cast<double>(pairs);
    acc.pairs += pairs;
    per_key.add_row({std::string(g.term.slug()), g.time_key.label(), std::to_string(pairs),
                     f4(rn->raw), f4(rn->refined)});
  }
  per_key.write_file(out_path(inv, "nonshared_per_key.tsv"));

  util::TsvWriter pooled({"term", "n_pairs", "raw", "refined"});
  Acc all;
  for (const auto& [term_index, acc] : per_term) {
    pooled.add_row({std::string(SearchTerm::from_index(term_index).slug()),
                    std::to_string(acc.pairs), f4(acc.raw / static_cast<double>(acc.pairs)),
                    f4(acc.refined / static_cast<double>(acc.pairs))});
    all.raw += acc.raw;
    all.refined += acc.refined;
    all.pairs += acc.pairs;
  }
  if (all.pairs > 0)
    pooled.add_row({"all", std::to_string(all.pairs), f4(all.raw / static_cast<double>(all.pairs)),
                    f4(all.refined / static_cast<double>(all.pairs))});
  pooled.write_file(out_path(inv, "nonshared.tsv"));
}

void run_region(Invocation& inv) {
  ensure_out_dir(inv);
  const Gazetteer gaz = need_gazetteer(inv);
  const CategoryTable categories = need_category_table(inv);
  const auto lists = load_lists(inv);
  if (lists.empty()) throw PreconditionError("no result lists in the admissible period");
  const RegionalTagTable table = build_regional_table(lists, gaz, categories);
  write_region(inv, lists, table);
  write_manifest(inv);
}

// ---------------------------------------------------------------------------
// dynamics

void write_dynamics(const Invocation& inv, std::span<const ResultList> lists,
                    const CategoryTable* categories) {
  const auto terms = terms_in(lists);

  util::TsvWriter share({"series", "key", "value"});
  const TimeSeries all = topstory_share(lists);
  for (const auto& p : all.points) share.add_row({all.label, p.key.label(), f6(p.value)});
  for (const auto& term : terms) {
    const TimeSeries s = topstory_share(lists, term);
    for (const auto& p : s.points) share.add_row({s.label, p.key.label(), f6(p.value)});
  }
  share.write_file(out_path(inv, "topstory_share.tsv"));

  util::TsvWriter tlds({"term", "key", "distinct_tlds"});
  for (const auto& term : terms) {
    const TimeSeries s = distinct_tld_count(lists, term);
    for (const auto& p : s.points)
      tlds.add_row({std::string(term.slug()), p.key.label(),
                    std::to_string(static_cast<std::size_t>(p.value))});
  }
  tlds.write_file(out_path(inv, "distinct_tlds.tsv"));

  if (categories) {
    util::TsvWriter series({"term", "key", "editable_share"});
    util::TsvWriter means({"term", "grand_mean"});
    for (const auto& term : terms) {
      const EditableSeries es = editable_share_series(lists, term, *categories);
      if (es.series.points.empty()) continue;
      for (const auto& p : es.series.points)
        series.add_row({std::string(term.slug()), p.key.label(), f6(p.value)});
      means.add_row({std::string(term.slug()), f6(es.grand_mean)});
    }
    series.write_file(out_path(inv, "editable_series.tsv"));
    means.write_file(out_path(inv, "editable_means.tsv"));
  }
}

void run_dynamics(Invocation& inv) {
  ensure_out_dir(inv);
  std::optional<CategoryTable> categories;
  if (!inv.cfg.category_table.empty()) categories = need_category_table(inv);
  const auto lists = load_lists(inv);
  if (lists.empty()) throw PreconditionError("no result lists in the admissible period");
  write_dynamics(inv, lists, categories ? &*categories : nullptr);
  write_manifest(inv);
}

// ---------------------------------------------------------------------------
// detect

std::vector<ClusterReport> detect_all(std::span<const PairGroup> groups,
                                      const DetectParams& params) {
  std::vector<ClusterReport> reports;
  for (const auto& g : groups) {
    ClusterReport report = detect_group(g, params);
    if (!report.clusters.empty()) reports.push_back(std::move(report));
  }
  return reports;
}

void write_detect(const Invocation& inv, std::span<const ResultList> lists,
                  const std::vector<ClusterReport>& reports,
                  const LocalePatternTable& patterns) {
  util::TsvWriter clusters({"term", "key", "cluster", "size", "donors", "mean_internal_shared",
                            "distinctness", "flagged"});
  for (const auto& report : reports) {
    for (std::size_t i = 0; i < report.clusters.size(); ++i) {
      const Cluster& c = report.clusters[i];
      std::string donors;
      for (const auto& d : c.member_donor_ids) {
        if (!donors.empty()) donors += ';';
        donors += d;
      }
      clusters.add_row({std::string(report.term.slug()), report.time_key.label(),
                        std::to_string(i), std::to_string(c.member_donor_ids.size()), donors,
                        f4(c.mean_internal_shared),
                        c.distinctness ? f4(*c.distinctness) : "NA", c.flagged ? "1" : "0"});
    }
  }
  clusters.write_file(out_path(inv, "clusters.tsv"));

  util::TsvWriter locales({"donor_id", "locale"});
  for (const auto& [donor, tag] : donor_locales(lists, patterns)) locales.add_row({donor, tag});
  locales.write_file(out_path(inv, "donor_locales.tsv"));
}

DetectParams detect_params(const RunConfig& cfg) {
  DetectParams params;
  params.popularity_threshold = cfg.thresholds.popularity;
  params.min_shared = cfg.thresholds.min_shared;
  params.distinctness_threshold = cfg.thresholds.distinctness;
  params.clique_mode = cfg.thresholds.clique_mode;
  return params;
}

void run_detect(Invocation& inv) {
  ensure_out_dir(inv);
  const LocalePatternTable patterns = locale_patterns(inv);
  const auto lists = load_lists(inv);
  if (lists.empty()) throw PreconditionError("no result lists in the admissible period");
  const auto groups = build_groups(lists, SearchType::google_search);
  const auto reports = detect_all(groups, detect_params(inv.cfg));
  write_detect(inv, lists, reports, patterns);
  write_manifest(inv);
}

// ---------------------------------------------------------------------------
// reach

struct ReachArtifacts {
  std::vector<ReachPoint> points;
  ReachFit fit;
  std::vector<OverrepFlag> flags;
};

ReachArtifacts compute_reach(std::span<const ResultList> lists, const ReachPanel& panel,
                             const RunConfig& cfg) {
  ReachArtifacts art;
  art.points = count_topstory_deliveries(lists, panel.reach, cfg.reach_window);
  try {
    art.fit = fit_loglog(art.points);
  } catch (const FitError& e) {
    throw PreconditionError(e.what());
  }
  art.flags = overrepresentation(art.points, art.fit, cfg.thresholds.overrep_factor);
  return art;
}

void write_reach(const Invocation& inv, const ReachArtifacts& art) {
  util::TsvWriter points({"tld", "active_reach", "delivered_count"});
  for (const auto& p : art.points)
    points.add_row({p.tld.value, f4(p.active_reach), std::to_string(p.delivered_count)});
  points.write_file(out_path(inv, "reach_points.tsv"));

  util::TsvWriter fit({"a", "b", "n_points", "log_residual_variance"});
  fit.add_row({f6(art.fit.a), f6(art.fit.b), std::to_string(art.fit.n_points),
               f6(art.fit.log_residual_variance)});
  fit.write_file(out_path(inv, "reach_fit.tsv"));

  util::TsvWriter flags({"tld", "active_reach", "observed", "expected", "ratio", "direction"});
  for (const auto& f : art.flags)
    flags.add_row({f.tld.value, f4(f.active_reach), std::to_string(f.observed), f4(f.expected),
                   fratio(f.ratio), f.direction == Direction::over ? "over" : "under"});
  flags.write_file(out_path(inv, "overrep.tsv"));
}

void run_reach(Invocation& inv) {
  ensure_out_dir(inv);
  const ReachPanel panel = need_reach_panel(inv);
  const auto lists = load_lists(inv);
  if (lists.empty()) throw PreconditionError("no result lists in the admissible period");
  const ReachArtifacts art = compute_reach(lists, panel, inv.cfg);
  write_reach(inv, art);
  write_manifest(inv);
}

// ---------------------------------------------------------------------------
// simulate

void run_simulate(Invocation& inv, std::uint64_t seed, bool seed_set) {
  ensure_out_dir(inv);
  if (inv.config_path.empty()) throw ConfigError("simulate requires a cohort spec (--config)");
  std::string text;
  try {
    text = util::read_text_file(inv.config_path);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  CohortSpec spec = cohort_spec_from_json(text);  // SpecError maps to config exit
  if (seed_set) spec.seed = seed;
  inv.cfg.seed = spec.seed;
  generate_files(spec, inv.out);
  write_manifest(inv);
}

// ---------------------------------------------------------------------------
// report

void run_report(Invocation& inv) {
  ensure_out_dir(inv);
  const LanguageTable language = need_language_table(inv);
  const CleanseConfig cc = cleanse_config(inv);
  std::optional<CategoryTable> categories;
  if (!inv.cfg.category_table.empty()) categories = need_category_table(inv);
  std::optional<Gazetteer> gaz;
  if (!inv.cfg.gazetteer.empty()) gaz = need_gazetteer(inv);
  std::optional<ReachPanel> panel;
  if (!inv.cfg.reach_panel.empty()) panel = need_reach_panel(inv);
  const LocalePatternTable patterns = locale_patterns(inv);

  ParseResult parsed = load_dataset(inv);
  write_rejects(inv, parsed.rejects);
  const DatasetSummary summary = summarize(parsed.dataset);
  CleanseResult cleaned = run_pipeline(std::move(parsed.dataset), cc, language);
  write_cleaning_report(inv, cleaned.report);
  const std::span<const ResultList> lists(cleaned.lists);

  std::string text;
  text += "record audit report\n";
  text += "===================\n\n";
  text += "input records: " + std::to_string(summary.total_records) + " (google_search " +
          std::to_string(summary.records_google_search) + ", google_news " +
          std::to_string(summary.records_google_news) + ")\n";
  text += "rejected lines: " + std::to_string(parsed.rejects.size()) + "\n";
  text += "surviving lists: " + std::to_string(cleaned.lists.size()) + "\n\n";

  text += "cleaning\n--------\n";
  for (const auto& s : cleaned.report.stages)
    text += s.stage + ": " + std::to_string(s.records_in) + " in, " +
            std::to_string(s.records_removed) + " removed\n";
  text += "reduction google_search: " + f4(cleaned.report.reduction_google_search * 100.0) +
          "%\nreduction google_news: " + f4(cleaned.report.reduction_google_news * 100.0) + "%\n\n";

  const auto groups = build_groups(lists, SearchType::google_search);
  const auto search_stats = per_term_stats(groups, inv.threads);
  write_overlap_rows(inv, search_stats, "overlap_search.tsv", "overlap_search_per_key.tsv",
                     "histogram_search.tsv");
  text += "google_search overlap\n---------------------\n";
  for (const auto& t : search_stats)
    text += std::string(t.term.text()) + ": identical " + f2(t.pooled.identical_fraction()) +
            "%, mean common " + f4(t.pooled.mean_common_links()) + ", scope " +
            f4(t.pooled.scope()) + "\n";
  const auto news_stats = news_overlap(lists, inv.threads);
  if (!news_stats.empty()) {
    write_overlap_rows(inv, news_stats, "overlap_news.tsv", "overlap_news_per_key.tsv",
                       "histogram_news.tsv");
    text += "\ngoogle_news overlap\n-------------------\n";
    for (const auto& t : news_stats)
      text += std::string(t.term.text()) + ": identical " + f2(t.pooled.identical_fraction()) +
              "%, mean common " + f4(t.pooled.mean_common_links()) + ", scope " +
              f4(t.pooled.scope()) + "\n";
  }
  text += "\n";

  if (categories) {
    write_classify(inv, lists, *categories);
    const TldCensus census = distinct_tld_census(lists, *categories);
    text += "domains\n-------\ndistinct TLDs: " + std::to_string(census.total) + "\n\n";
  }

  if (gaz && categories) {
    const RegionalTagTable table = build_regional_table(lists, *gaz, *categories);
    write_region(inv, lists, table);
    double raw = 0.0, refined = 0.0;
    std::uint64_t pairs = 0;
    for (const auto& g : groups) {
      const auto rn = refined_nonshared(g, table);
      if (!rn) continue;
      const auto m = static_cast<std::uint64_t>(g.members.size());
      const std::uint64_t p = m * (m - 1) / 2;
      raw += rn->raw * static_cast<double>(p);
      refined += rn->refined * static_cast<double>(p);
      pairs += p;
    }
    text += "regionalization\n---------------\nregional TLDs: " +
            std::to_string(table.regional_count()) + "\n";
    if (pairs > 0)
      text += "mean non-shared links: raw " + f4(raw / static_cast<double>(pairs)) + ", refined " +
              f4(refined / static_cast<double>(pairs)) + "\n";
    text += "\n";
  }

  write_dynamics(inv, lists, categories ? &*categories : nullptr);

  const auto reports = detect_all(groups, detect_params(inv.cfg));
  write_detect(inv, lists, reports, patterns);
  std::size_t flagged = 0;
  for (const auto& report : reports)
    for (const auto& c : report.clusters)
      if (c.flagged) ++flagged;
  text += "cluster detection\n-----------------\nflagged clusters: " + std::to_string(flagged) +
          "\n";
  for (const auto& report : reports) {
    for (const auto& c : report.clusters) {
      if (!c.flagged) continue;
      std::string donors;
      for (const auto& d : c.member_donor_ids) {
        if (!donors.empty()) donors += ", ";
        donors += d;
      }
      text += "  " + std::string(report.term.slug()) + " " + report.time_key.label() + ": {" +
              donors + "} distinctness " + (c.distinctness ? f4(*c.distinctness) : "NA") + "\n";
    }
  }
  text += "\n";

  if (panel) {
    const ReachArtifacts art = compute_reach(lists, *panel, inv.cfg);
    write_reach(inv, art);
    text += "reach\n-----\nfit: expected = " + f4(art.fit.a) + " * reach^" + f4(art.fit.b) +
            " (" + std::to_string(art.fit.n_points) + " points)\nflagged domains: " +
            std::to_string(art.flags.size()) + "\n";
    for (const auto& f : art.flags)
      text += "  " + f.tld.value + ": observed " + std::to_string(f.observed) + ", expected " +
              f4(f.expected) + ", ratio " + fratio(f.ratio) +
              (f.direction == Direction::over ? " over" : " under") + "\n";
    text += "\n";
  }

  util::write_text_file(out_path(inv, "report.txt"), text);
  write_manifest(inv);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"search result list audit toolkit"};
  app.require_subcommand(1);

  std::string input, out, config_path;
  int threads = 1;
  std::uint64_t seed = 0;
  double popularity = -1.0, distinctness = -1.0, overrep_factor = -1.0, language_share = -1.0;
  int min_shared = -1;
  bool clique_mode = false, no_heuristic = false;
  std::vector<CLI::Option*> seed_opts;

  auto add_common = [&](CLI::App* sub, bool needs_input) {
    if (needs_input) sub->add_option("--input", input, "record file (.jsonl or .jsonl.gz)");
    sub->add_option("--out", out, "output directory")->required();
    sub->add_option("--config", config_path, "run configuration (JSON)");
    sub->add_option("--threads", threads, "worker threads (never changes results)");
    seed_opts.push_back(sub->add_option("--seed", seed, "override the configured seed"));
    sub->add_option("--popularity", popularity, "popularity filter threshold");
    sub->add_option("--min-shared", min_shared, "minimum shared residual links per edge");
    sub->add_option("--distinctness", distinctness, "distinctness flag threshold");
    sub->add_option("--overrep-factor", overrep_factor, "overrepresentation factor");
    sub->add_option("--language-share", language_share, "German share threshold");
    sub->add_flag("--clique-mode", clique_mode, "greedy cliques instead of components");
    sub->add_flag("--no-duplicate-heuristic", no_heuristic,
                  "disable the duplicate donor-ID heuristic");
  };

  CLI::App* ingest_cmd = app.add_subcommand("ingest", "parse records and summarize the corpus");
  CLI::App* clean_cmd = app.add_subcommand("clean", "run the cleaning pipeline");
  CLI::App* classify_cmd = app.add_subcommand("classify", "domain categories and TLD rankings");
  CLI::App* overlap_cmd = app.add_subcommand("overlap", "pairwise result list overlap");
  CLI::App* region_cmd = app.add_subcommand("region", "regional URL tagging and refined overlap");
  CLI::App* dynamics_cmd = app.add_subcommand("dynamics", "per-key time series");
  CLI::App* detect_cmd = app.add_subcommand("detect", "residual cluster detection");
  CLI::App* reach_cmd = app.add_subcommand("reach", "reach-based overrepresentation");
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "generate a synthetic cohort");
  CLI::App* report_cmd = app.add_subcommand("report", "full pipeline with a combined summary");
  for (CLI::App* sub : {ingest_cmd, clean_cmd, classify_cmd, overlap_cmd, region_cmd, dynamics_cmd,
                        detect_cmd, reach_cmd, report_cmd})
    add_common(sub, true);
  add_common(simulate_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  const bool seed_given =
      std::any_of(seed_opts.begin(), seed_opts.end(),
                  [](const CLI::Option* o) { return !o->empty(); });

  try {
    Invocation inv;
    inv.input = input;
    inv.out = out;
    inv.config_path = config_path;
    inv.threads = std::max(1, threads);

    const bool is_simulate = simulate_cmd->parsed();
    if (!config_path.empty() && !is_simulate) {
      std::string text;
      try {
        text = util::read_text_file(config_path);
      } catch (const std::exception& e) {
        throw InputError(e.what());
      }
      inv.cfg = run_config_from_json(text);
      // Relative table paths resolve against the config file's directory.
      const fs::path base = fs::path(config_path).parent_path();
      auto resolve = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
      };
      resolve(inv.cfg.language_table);
      resolve(inv.cfg.category_table);
      resolve(inv.cfg.gazetteer);
      resolve(inv.cfg.reach_panel);
      resolve(inv.cfg.locale_patterns);
      resolve(inv.cfg.donor_blocklist);
    }
    if (popularity >= 0.0) inv.cfg.thresholds.popularity = popularity;
    if (min_shared >= 0) inv.cfg.thresholds.min_shared = min_shared;
    if (distinctness >= 0.0) inv.cfg.thresholds.distinctness = distinctness;
    if (overrep_factor >= 0.0) inv.cfg.thresholds.overrep_factor = overrep_factor;
    if (language_share >= 0.0) inv.cfg.thresholds.language_share = language_share;
    if (clique_mode) inv.cfg.thresholds.clique_mode = true;
    if (no_heuristic) inv.cfg.duplicate_id_heuristic = false;
    check_thresholds(inv.cfg.thresholds);
    if (seed_given) inv.cfg.seed = seed;

    if (ingest_cmd->parsed()) {
      inv.subcommand = "ingest";
      run_ingest(inv);
    } else if (clean_cmd->parsed()) {
      inv.subcommand = "clean";
      run_clean(inv);
    } else if (classify_cmd->parsed()) {
      inv.subcommand = "classify";
      run_classify(inv);
    } else if (overlap_cmd->parsed()) {
      inv.subcommand = "overlap";
      run_overlap(inv);
    } else if (region_cmd->parsed()) {
      inv.subcommand = "region";
      run_region(inv);
    } else if (dynamics_cmd->parsed()) {
      inv.subcommand = "dynamics";
      run_dynamics(inv);
    } else if (detect_cmd->parsed()) {
      inv.subcommand = "detect";
      run_detect(inv);
    } else if (reach_cmd->parsed()) {
      inv.subcommand = "reach";
      run_reach(inv);
    } else if (simulate_cmd->parsed()) {
      inv.subcommand = "simulate";
      run_simulate(inv, seed, seed_given);
    } else if (report_cmd->parsed()) {
      inv.subcommand = "report";
      run_report(inv);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const FitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace serpaudit::cli
