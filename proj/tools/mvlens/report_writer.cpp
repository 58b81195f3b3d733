#include "mvlens/report_writer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mvlens/error.hpp"

namespace mvlens::cli {

std::string format_double(double x) {
  if (!std::isfinite(x)) return "nan";
  return Json(x).dump();
}

Json json_number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

Json envelope(std::string_view command, const Json& config) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["tool"] = "mvlens";
  j["command"] = std::string(command);
  j["config"] = config;
  return j;
}

std::string csv_preamble(std::string_view command, const Json& config) {
  return "# " + envelope(command, config).dump() + "\n";
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

void write_outputs(const std::filesystem::path& prefix, const Json& json,
                   std::string_view csv) {
  write_text(prefix.string() + ".json", json.dump(2) + "\n");
  write_text(prefix.string() + ".csv", csv);
}

Json to_json(const MetricReport& report) {
  Json per_query = Json::array();
  for (const auto& [qid, v] : report.per_query) {
    per_query.push_back({{"query_id", qid}, {"ndcg", v}});
  }
  return {{"metric", "ndcg@" + std::to_string(report.k)},
          {"mean", report.mean},
          {"n_evaluated", report.per_query.size()},
          {"skipped_not_in_qrels", report.skipped_not_in_qrels},
          {"skipped_no_positive", report.skipped_no_positive},
          {"missing_from_run", report.missing_from_run},
          {"per_query", std::move(per_query)}};
}

std::string to_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "query_id,ndcg\n";
  for (const auto& [qid, v] : report.per_query) out << qid << ',' << format_double(v) << '\n';
  return out.str();
}

Json to_json(const FPLengthReport& report) {
  Json quantiles = Json::array();
  for (std::size_t i = 0; i < report.quantiles.size(); ++i) {
    const auto& q = report.quantiles[i];
    quantiles.push_back(
        {{"quantile_index", i},
         {"edge_low", q.edge_low},
         {"edge_high", q.edge_high},
         {"n_queries", q.n_queries},
         {"n_fps", q.n_fps},
         {"mean_fp_length", q.mean_fp_length ? Json(*q.mean_fp_length) : Json(nullptr)},
         {"n_relevant", q.n_relevant},
         {"mean_relevant_length", q.mean_relevant_length}});
  }
  return {{"fp_mode", report.mode.to_string()},
          {"corpus_mean_length", report.corpus_mean_length},
          {"n_queries", report.n_queries},
          {"skipped_no_positive", report.skipped_no_positive},
          {"skipped_no_positive_in_ranking", report.skipped_no_positive_in_ranking},
          {"quantiles", std::move(quantiles)}};
}

std::string to_csv(const FPLengthReport& report) {
  std::ostringstream out;
  out << "quantile_index,edge_low,edge_high,n_queries,n_fps,mean_fp_length,"
         "n_relevant,mean_relevant_length,corpus_mean_length\n";
  for (std::size_t i = 0; i < report.quantiles.size(); ++i) {
    const auto& q = report.quantiles[i];
    out << i << ',' << format_double(q.edge_low) << ',' << format_double(q.edge_high)
        << ',' << q.n_queries << ',' << q.n_fps << ','
        << (q.mean_fp_length ? format_double(*q.mean_fp_length) : "nan") << ','
        << q.n_relevant << ',' << format_double(q.mean_relevant_length) << ','
        << format_double(report.corpus_mean_length) << '\n';
  }
  return out.str();
}

Json to_json(const BinReport& report) {
  Json bins = Json::array();
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    const auto& s = report.bins[b];
    bins.push_back({{"bin_index", b},
                    {"edge_low", s.edge_low},
                    {"edge_high", s.edge_high},
                    {"observed", json_number(s.observed)},
                    {"baseline_mean", json_number(s.baseline_mean)},
                    {"ci_low", json_number(s.ci_low)},
                    {"ci_high", json_number(s.ci_high)},
                    {"n_items", s.n_items}});
  }
  return {{"statistic", report.statistic},
          {"n_permutations", report.n_permutations},
          {"ci_level", report.ci_level},
          {"permutation_seed", report.seed},
          {"total", report.total},
          {"skipped_queries", report.skipped_queries},
          {"bins", std::move(bins)}};
}

std::string to_csv(const BinReport& report) {
  std::ostringstream out;
  out << "bin_index,edge_low,edge_high,observed,baseline_mean,ci_low,ci_high,n_items\n";
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    const auto& s = report.bins[b];
    out << b << ',' << format_double(s.edge_low) << ',' << format_double(s.edge_high)
        << ',' << format_double(s.observed) << ',' << format_double(s.baseline_mean)
        << ',' << format_double(s.ci_low) << ',' << format_double(s.ci_high) << ','
        << s.n_items << '\n';
  }
  return out.str();
}

Json to_json(const SimCurve& curve) {
  Json values = Json::array();
  for (double v : curve.values) values.push_back(v);
  return {{"n_queries", curve.n_queries},
          {"n_query_tokens", curve.n_query_tokens},
          {"values", std::move(values)}};
}

namespace {

Json role_curves_json(const RoleCurves& curves) {
  Json j;
  for (auto role : kCurveRoles) {
    j[std::string(role_name(role))] = to_json(curves[static_cast<std::size_t>(role)]);
  }
  return j;
}

void role_curves_csv(std::ostringstream& out, std::string_view dataset,
                     const RoleCurves& curves) {
  for (auto role : kCurveRoles) {
    const auto& c = curves[static_cast<std::size_t>(role)];
    for (std::size_t g = 0; g < c.values.size(); ++g) {
      out << dataset << ',' << role_name(role) << ',' << format_double(c.grid[g]) << ','
          << format_double(c.values[g]) << ',' << c.n_queries << '\n';
    }
  }
}

}  // namespace

Json to_json(const SimDistReport& report) {
  Json datasets;
  for (const auto& [name, curves] : report.per_dataset) datasets[name] = role_curves_json(curves);
  Json grid = Json::array();
  for (double g : fraction_grid(report.grid_size)) grid.push_back(g);
  return {{"mode", std::string(mode_name(report.mode))},
          {"cutoff", report.cutoff},
          {"grid_size", report.grid_size},
          {"axis", "fraction_of_document_tokens"},
          {"aggregation", "sorted per query token, mean over query tokens, then mean over queries"},
          {"n_queries", report.n_queries},
          {"skipped_no_negative_below", report.skipped_no_negative_below},
          {"grid", std::move(grid)},
          {"pooled", role_curves_json(report.pooled)},
          {"per_dataset", std::move(datasets)}};
}

std::string to_csv(const SimDistReport& report) {
  std::ostringstream out;
  out << "dataset,role,fraction,value,n_queries\n";
  role_curves_csv(out, kPooledDataset, report.pooled);
  for (const auto& [name, curves] : report.per_dataset) role_curves_csv(out, name, curves);
  return out.str();
}

Json to_json(const SynthConfig& c) {
  return {{"dim", c.dim},
          {"n_chunks", c.n_chunks},
          {"n_queries", c.n_queries},
          {"query_tokens", c.query_tokens},
          {"length_min", c.length_min},
          {"length_max", c.length_max},
          {"relevance_signal", c.relevance_signal},
          {"noise_scale", c.noise_scale},
          {"seed", c.seed},
          {"extension_mode", std::string(extension_mode_name(c.extension_mode))}};
}

Json to_json(const MonotonicityResult& r) {
  return {{"trials", r.trials},
          {"causal_decreases", r.causal_decreases},
          {"bidirectional_decreases", r.bidirectional_decreases},
          {"min_causal_delta", json_number(r.min_causal_delta)},
          {"min_bidirectional_delta", json_number(r.min_bidirectional_delta)},
          {"tolerance", kMonotonicityTolerance}};
}

Json to_json(const std::vector<SweepRow>& rows) {
  Json out = Json::array();
  for (const auto& row : rows) {
    Json profile = Json::array();
    for (double p : row.profile) profile.push_back(json_number(p));
    out.push_back({{"config", to_json(row.config)},
                   {"pooling", std::string(pooling_name(row.pooling))},
                   {"mean_ndcg", row.mean_ndcg},
                   {"slope", json_number(row.slope)},
                   {"slope_ci_low", json_number(row.slope_ci_low)},
                   {"slope_ci_high", json_number(row.slope_ci_high)},
                   {"profile", std::move(profile)},
                   {"harm", to_json(row.report)}});
  }
  return out;
}

std::string to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "length_min,length_max,extension_mode,pooling,mean_ndcg,slope,slope_ci_low,"
         "slope_ci_high,top_bin_observed,top_bin_ci_low,top_bin_ci_high\n";
  for (const auto& row : rows) {
    const auto& top = row.report.bins.back();
    out << row.config.length_min << ',' << row.config.length_max << ','
        << extension_mode_name(row.config.extension_mode) << ','
        << pooling_name(row.pooling) << ',' << format_double(row.mean_ndcg) << ','
        << format_double(row.slope) << ',' << format_double(row.slope_ci_low) << ','
        << format_double(row.slope_ci_high) << ',' << format_double(top.observed) << ','
        << format_double(top.ci_low) << ',' << format_double(top.ci_high) << '\n';
  }
  return out.str();
}

}  // namespace mvlens::cli
