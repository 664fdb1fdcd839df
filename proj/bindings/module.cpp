#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "serpaudit/bubble.hpp"
#include "serpaudit/cleanse.hpp"
#include "serpaudit/cli.hpp"
#include "serpaudit/overlap.hpp"
#include "serpaudit/reach.hpp"
#include "serpaudit/synth.hpp"
#include "serpaudit/util.hpp"

namespace py = pybind11;

namespace {

using namespace serpaudit;

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"serpaudit"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

py::dict generate_cohort(const std::string& spec_json, const std::string& out_dir) {
  const CohortSpec spec = cohort_spec_from_json(spec_json);
  const GenerateResult result = generate_files(spec, out_dir);
  py::dict d;
  d["records"] = result.records_emitted;
  d["search_records"] = result.search_records;
  d["news_records"] = result.news_records;
  return d;
}

py::list overlap_summary(const std::string& records_path, int threads) {
  const auto lists = load_result_lists(records_path);
  const auto groups = build_groups(lists, SearchType::google_search);
  py::list out;
  for (const auto& t : per_term_stats(groups, threads)) {
    py::dict d;
    d["term"] = t.term.slug();
    d["n_lists"] = t.pooled.n_lists;
    d["n_pairs"] = t.pooled.n_pairs;
    d["identical_pct"] = t.pooled.identical_fraction();
    d["mean_common_links"] = t.pooled.mean_common_links();
    d["mean_list_length"] = t.pooled.mean_list_length();
    d["scope"] = t.pooled.scope();
    out.append(d);
  }
  return out;
}

py::dict clean_records(const std::string& input_path, const std::string& language_table_path,
                       const std::string& output_path) {
  const LanguageTable table = LanguageTable::from_file(language_table_path);
  ParseResult parsed = load_records_file(input_path);
  CleanseRecordsResult cleaned = run_pipeline_records(std::move(parsed.dataset), {}, table);
  if (!output_path.empty()) {
    LineSink sink(output_path);
    for (const auto& record : cleaned.dataset.records) sink.write(serialize_record(record));
  }
  py::dict d;
  d["search_records_in"] = cleaned.report.search_records_in;
  d["search_records_out"] = cleaned.report.search_records_out;
  d["news_records_in"] = cleaned.report.news_records_in;
  d["news_records_out"] = cleaned.report.news_records_out;
  py::list stages;
  for (const auto& s : cleaned.report.stages) {
    py::dict row;
    row["stage"] = s.stage;
    row["records_in"] = s.records_in;
    row["records_removed"] = s.records_removed;
    stages.append(row);
  }
  d["stages"] = stages;
  return d;
}

py::list detect_clusters(const std::string& records_path, double popularity, int min_shared,
                         double distinctness) {
  const auto lists = load_result_lists(records_path);
  const auto groups = build_groups(lists, SearchType::google_search);
  DetectParams params;
  params.popularity_threshold = popularity;
  params.min_shared = min_shared;
  params.distinctness_threshold = distinctness;
  py::list out;
  for (const auto& g : groups) {
    const ClusterReport report = detect_group(g, params);
    for (const auto& c : report.clusters) {
      py::dict d;
      d["term"] = report.term.slug();
      d["key"] = report.time_key.label();
      d["members"] = c.member_donor_ids;
      d["mean_internal_shared"] = c.mean_internal_shared;
      if (c.distinctness)
        d["distinctness"] = *c.distinctness;
      else
        d["distinctness"] = py::none();
      d["flagged"] = c.flagged;
      out.append(d);
    }
  }
  return out;
}

py::dict fit_reach(const std::vector<std::tuple<double, std::uint64_t>>& points) {
  std::vector<ReachPoint> rp;
  rp.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    rp.push_back({Tld{"p" + std::to_string(i)}, std::get<0>(points[i]), std::get<1>(points[i])});
  const ReachFit fit = fit_loglog(rp);
  py::dict d;
  d["a"] = fit.a;
  d["b"] = fit.b;
  d["n_points"] = fit.n_points;
  return d;
}

}  // namespace

PYBIND11_MODULE(_serpaudit, m) {
  m.doc() = "search result list audit toolkit";
  m.def("run", &run, py::arg("args"),
        "Run the command line interface; returns its exit code.");
  m.def("generate_cohort", &generate_cohort, py::arg("spec_json"), py::arg("out_dir"),
        "Generate a synthetic cohort with sidecar tables and ground truth.");
  m.def("overlap_summary", &overlap_summary, py::arg("records_path"), py::arg("threads") = 1,
        "Pooled per-term overlap statistics of a record file.");
  m.def("clean_records", &clean_records, py::arg("input_path"), py::arg("language_table_path"),
        py::arg("output_path") = std::string(),
        "Run the cleaning pipeline; optionally writes surviving records.");
  m.def("detect_clusters", &detect_clusters, py::arg("records_path"),
        py::arg("popularity") = 0.70, py::arg("min_shared") = 3,
        py::arg("distinctness") = 3.5, "Residual cluster reports of a record file.");
  m.def("fit_reach", &fit_reach, py::arg("points"),
        "Least-squares power-law fit of (reach, count) points.");
}
