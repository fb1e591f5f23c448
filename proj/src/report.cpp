#include "agshock/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "agshock/csv.hpp"
#include "agshock/error.hpp"

namespace agshock {

namespace {

constexpr int kReportVersion = 1;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_from(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

bool same_number(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

bool is_lstm(const std::string& model) { return model == kLstmWith || model == kLstmWithout; }

}  // namespace

double rmse(std::span<const double> y_hat, std::span<const double> y) {
  if (y_hat.size() != y.size()) throw Error(ErrorCode::kLengthMismatch, "rmse inputs differ in length");
  if (y.empty()) throw Error(ErrorCode::kEmpty, "rmse of empty vectors");
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) ss += (y_hat[i] - y[i]) * (y_hat[i] - y[i]);
  return std::sqrt(ss / static_cast<double>(y.size()));
}

double r2(std::span<const double> y_hat, std::span<const double> y) {
  if (y_hat.size() != y.size()) throw Error(ErrorCode::kLengthMismatch, "r2 inputs differ in length");
  if (y.size() < 2) throw Error(ErrorCode::kTooFewPoints, "r2 needs >= 2 points");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) throw Error(ErrorCode::kConstantTarget, "r2 of a constant target");
  return 1.0 - ss_res / ss_tot;
}

std::vector<std::string> EvalReport::commodities() const {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (std::find(out.begin(), out.end(), r.commodity) == out.end()) out.push_back(r.commodity);
  }
  return out;
}

std::optional<EvalRow> EvalReport::find(const std::string& commodity, const std::string& model) const {
  for (const auto& r : rows) {
    if (r.commodity == commodity && r.model == model) return r;
  }
  return std::nullopt;
}

EvalReport build_comparison(const std::vector<EvalReport>& fragments) {
  EvalReport report;
  if (fragments.empty()) throw Error(ErrorCode::kEmpty, "no report fragments");
  const auto reference = fragments.front().commodities();
  const std::set<std::string> ref_set(reference.begin(), reference.end());
  for (const auto& f : fragments) {
    const auto names = f.commodities();
    if (std::set<std::string>(names.begin(), names.end()) != ref_set) {
      throw Error(ErrorCode::kCommoditySetMismatch, "fragment commodity sets differ");
    }
    report.rows.insert(report.rows.end(), f.rows.begin(), f.rows.end());
    report.metadata.update(f.metadata);
  }

  // Baseline families in first-seen order.
  std::vector<std::string> baselines;
  for (const auto& r : report.rows) {
    if (!is_lstm(r.model) && std::find(baselines.begin(), baselines.end(), r.model) == baselines.end()) {
      baselines.push_back(r.model);
    }
  }
  // Rank-sum selection is unchanged by any increasing transform of RMSE.
  std::string best_baseline;
  if (!baselines.empty()) {
    std::vector<double> rank_sum(baselines.size(), 0.0);
    for (const auto& c : reference) {
      for (std::size_t a = 0; a < baselines.size(); ++a) {
        const auto ra = report.find(c, baselines[a]);
        if (!ra) throw Error(ErrorCode::kCommoditySetMismatch, c + " lacks " + baselines[a]);
        for (std::size_t b = 0; b < baselines.size(); ++b) {
          const auto rb = report.find(c, baselines[b]);
          if (!rb) throw Error(ErrorCode::kCommoditySetMismatch, c + " lacks " + baselines[b]);
          if (rb->rmse < ra->rmse) rank_sum[a] += 1.0;
          else if (rb->rmse == ra->rmse && b != a) rank_sum[a] += 0.5;
        }
      }
    }
    const auto best = std::min_element(rank_sum.begin(), rank_sum.end()) - rank_sum.begin();
    best_baseline = baselines[static_cast<std::size_t>(best)];
  }

  ComparisonSummary& s = report.summary;
  for (const auto& c : reference) {
    ComparisonRow row;
    row.commodity = c;
    row.baseline_model = best_baseline;
    row.baseline_rmse = best_baseline.empty() ? kNaN : report.find(c, best_baseline)->rmse;
    const auto with = report.find(c, kLstmWith);
    const auto without = report.find(c, kLstmWithout);
    row.with_rmse = with ? with->rmse : kNaN;
    row.without_rmse = without ? without->rmse : kNaN;

    const std::vector<std::pair<std::string, double>> candidates = {
        {"baseline", row.baseline_rmse}, {kLstmWith, row.with_rmse}, {kLstmWithout, row.without_rmse}};
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [name, v] : candidates) {
      if (std::isfinite(v) && v < best) {
        best = v;
        row.winner = name;
      }
    }
    const auto at_best = std::count_if(candidates.begin(), candidates.end(),
                                       [&](const auto& kv) { return kv.second == best; });
    row.tie = at_best > 1;

    ++s.commodities;
    const double lstm_best = std::fmin(row.with_rmse, row.without_rmse);
    if (std::isfinite(lstm_best) && std::isfinite(row.baseline_rmse) && lstm_best < row.baseline_rmse) {
      ++s.lstm_beats_baseline;
    }
    if (row.with_rmse < row.without_rmse) ++s.with_beats_without;
    if (row.tie) {
      ++s.ties;
    } else if (row.winner == "baseline") {
      ++s.baseline_wins;
    } else if (row.winner == kLstmWith) {
      ++s.with_wins;
    } else if (row.winner == kLstmWithout) {
      ++s.without_wins;
    }
    report.comparison.push_back(std::move(row));
  }
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json jr = nlohmann::json::array();
  for (const auto& r : rows) {
    jr.push_back({{"commodity", r.commodity},
                  {"model", r.model},
                  {"rmse", number_or_null(r.rmse)},
                  {"rmse_units", number_or_null(r.rmse_units)},
                  {"r2", number_or_null(r.r2)},
                  {"prediction_last", number_or_null(r.prediction_last)},
                  {"paired_indices", r.paired_indices}});
  }
  nlohmann::json jc = nlohmann::json::array();
  for (const auto& c : comparison) {
    jc.push_back({{"commodity", c.commodity},
                  {"baseline_model", c.baseline_model},
                  {"baseline_rmse", number_or_null(c.baseline_rmse)},
                  {"with_rmse", number_or_null(c.with_rmse)},
                  {"without_rmse", number_or_null(c.without_rmse)},
                  {"winner", c.winner},
                  {"tie", c.tie}});
  }
  return {{"format", "agshock.report"},
          {"version", kReportVersion},
          {"rows", jr},
          {"comparison", jc},
          {"summary",
           {{"commodities", summary.commodities},
            {"lstm_beats_baseline", summary.lstm_beats_baseline},
            {"with_beats_without", summary.with_beats_without},
            {"baseline_wins", summary.baseline_wins},
            {"with_wins", summary.with_wins},
            {"without_wins", summary.without_wins},
            {"ties", summary.ties}}},
          {"metadata", metadata}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "agshock.report" || j.at("version").get<int>() != kReportVersion) {
      throw Error(ErrorCode::kFormatError, "not a report v1");
    }
    EvalReport r;
    for (const auto& x : j.at("rows")) {
      r.rows.push_back(EvalRow{x.at("commodity").get<std::string>(), x.at("model").get<std::string>(),
                               number_from(x.at("rmse")), number_from(x.at("rmse_units")),
                               number_from(x.at("r2")), number_from(x.at("prediction_last")),
                               x.at("paired_indices").get<std::vector<std::string>>()});
    }
    for (const auto& x : j.at("comparison")) {
      r.comparison.push_back(ComparisonRow{
          x.at("commodity").get<std::string>(), x.at("baseline_model").get<std::string>(),
          number_from(x.at("baseline_rmse")), number_from(x.at("with_rmse")),
          number_from(x.at("without_rmse")), x.at("winner").get<std::string>(), x.at("tie").get<bool>()});
    }
    const auto& s = j.at("summary");
    r.summary.commodities = s.at("commodities").get<std::size_t>();
    r.summary.lstm_beats_baseline = s.at("lstm_beats_baseline").get<std::size_t>();
    r.summary.with_beats_without = s.at("with_beats_without").get<std::size_t>();
    r.summary.baseline_wins = s.at("baseline_wins").get<std::size_t>();
    r.summary.with_wins = s.at("with_wins").get<std::size_t>();
    r.summary.without_wins = s.at("without_wins").get<std::size_t>();
    r.summary.ties = s.at("ties").get<std::size_t>();
    r.metadata = j.at("metadata");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, e.what());
  }
}

bool EvalReport::operator==(const EvalReport& other) const {
  auto rows_equal = [](const EvalRow& a, const EvalRow& b) {
    return a.commodity == b.commodity && a.model == b.model && same_number(a.rmse, b.rmse) &&
           same_number(a.rmse_units, b.rmse_units) && same_number(a.r2, b.r2) &&
           same_number(a.prediction_last, b.prediction_last) && a.paired_indices == b.paired_indices;
  };
  auto comp_equal = [](const ComparisonRow& a, const ComparisonRow& b) {
    return a.commodity == b.commodity && a.baseline_model == b.baseline_model &&
           same_number(a.baseline_rmse, b.baseline_rmse) && same_number(a.with_rmse, b.with_rmse) &&
           same_number(a.without_rmse, b.without_rmse) && a.winner == b.winner && a.tie == b.tie;
  };
  return std::equal(rows.begin(), rows.end(), other.rows.begin(), other.rows.end(), rows_equal) &&
         std::equal(comparison.begin(), comparison.end(), other.comparison.begin(),
                    other.comparison.end(), comp_equal) &&
         summary == other.summary && metadata == other.metadata;
}

std::string format_table5_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "commodity,paired_indices,rmse_with_outliers,prediction_with_outliers,"
         "rmse_without_outliers,prediction_without_outliers\n";
  for (const auto& c : report.commodities()) {
    const auto with = report.find(c, kLstmWith);
    const auto without = report.find(c, kLstmWithout);
    const auto& paired = with ? with->paired_indices
                              : (without ? without->paired_indices : std::vector<std::string>{});
    if (!with && !without) continue;
    out << c << ',' << join(paired, ';') << ',' << (with ? format_number(with->rmse) : "") << ','
        << (with ? format_number(with->prediction_last) : "") << ','
        << (without ? format_number(without->rmse) : "") << ','
        << (without ? format_number(without->prediction_last) : "") << '\n';
  }
  return out.str();
}

std::string format_table6_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "commodity,baseline_model,baseline_rmse,lstm_with_outliers_rmse,lstm_without_outliers_rmse,"
         "winner,tie\n";
  for (const auto& r : report.comparison) {
    out << r.commodity << ',' << r.baseline_model << ',' << format_number(r.baseline_rmse) << ','
        << format_number(r.with_rmse) << ',' << format_number(r.without_rmse) << ',' << r.winner << ','
        << (r.tie ? "true" : "false") << '\n';
  }
  const auto& s = report.summary;
  out << "# commodities=" << s.commodities << " lstm_beats_baseline=" << s.lstm_beats_baseline
      << " with_beats_without=" << s.with_beats_without << '\n';
  return out.str();
}

std::string format_metrics_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "commodity,model,rmse,rmse_units,r2,prediction_last,paired_indices\n";
  for (const auto& r : report.rows) {
    out << r.commodity << ',' << r.model << ',' << format_number(r.rmse) << ','
        << format_number(r.rmse_units) << ',' << format_number(r.r2) << ','
        << format_number(r.prediction_last) << ',' << join(r.paired_indices, ';') << '\n';
  }
  return out.str();
}

EvalReport parse_metrics_csv(std::string_view text) {
  const CsvTable t = parse_csv_table(text);
  const std::vector<std::string> expected = {"commodity", "model", "rmse", "rmse_units",
                                             "r2", "prediction_last", "paired_indices"};
  if (t.header != expected) throw Error(ErrorCode::kFormatError, "metrics CSV header");
  EvalReport report;
  for (const auto& row : t.rows) {
    if (row.size() != expected.size()) throw Error(ErrorCode::kFormatError, "metrics CSV row width");
    report.rows.push_back(EvalRow{row[0], row[1], parse_double(row[2]).value_or(kNaN),
                                  parse_double(row[3]).value_or(kNaN), parse_double(row[4]).value_or(kNaN),
                                  parse_double(row[5]).value_or(kNaN), split(row[6], ';')});
  }
  return report;
}

std::string format_forecast_plot_csv(const ForecastPlotData& data) {
  std::ostringstream out;
  out << "month,actual,fitted,forecast_with,forecast_without\n";
  for (std::size_t i = 0; i < data.months.size(); ++i) {
    out << format_date(data.months[i]) << ',' << format_number(data.actual.at(i)) << ','
        << (i < data.fitted.size() ? format_number(data.fitted[i]) : "") << ",,\n";
  }
  for (std::size_t k = 0; k < data.future_months.size(); ++k) {
    out << format_date(data.future_months[k]) << ",,,"
        << (k < data.forecast_with.size() ? format_number(data.forecast_with[k]) : "") << ','
        << (k < data.forecast_without.size() ? format_number(data.forecast_without[k]) : "") << '\n';
  }
  return out.str();
}

}  // namespace agshock
