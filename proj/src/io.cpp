#include "hteval/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hteval/version.hpp"

namespace hteval {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

double parse_cell(const std::string& s, std::size_t row,
                  const std::string& column) {
  if (s.empty())
    throw std::runtime_error("empty cell at row " + std::to_string(row) +
                             ", column " + column);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw std::runtime_error("unparseable value '" + s + "' at row " +
                             std::to_string(row) + ", column " + column);
  return v;
}

ordered_json fit_to_json(const LogisticFit& fit) {
  ordered_json j;
  j["coefficients"] = fit.coefficients;
  j["converged"] = fit.converged;
  j["deviance"] = fit.deviance;
  j["iterations"] = fit.iterations;
  j["separation"] = fit.separation;
  return j;
}

LogisticFit fit_from_json(const ordered_json& j) {
  LogisticFit fit;
  fit.coefficients = j.at("coefficients").get<std::vector<double>>();
  fit.converged = j.at("converged").get<bool>();
  fit.deviance = j.at("deviance").get<double>();
  fit.iterations = j.at("iterations").get<int>();
  fit.separation = j.at("separation").get<bool>();
  return fit;
}

ordered_json estimate_to_json(const MetricEstimate& e) {
  ordered_json j;
  j["name"] = to_string(e.name);
  j["context"] = to_string(e.context);
  if (!e.detail.empty()) j["detail"] = e.detail;
  if (e.estimable) {
    j["value"] = std::stod(format_sig(e.value));
  } else {
    j["value"] = nullptr;
  }
  j["estimable"] = e.estimable;
  ordered_json meta = ordered_json::object();
  for (const auto& [k, v] : e.meta) meta[k] = std::stod(format_sig(v));
  j["meta"] = meta;
  return j;
}

}  // namespace

LoadedTrial load_trial_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
  const auto header = split_csv_line(line);

  auto column_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::runtime_error("missing mapped column '" + name + "' in " + path);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t y_col = column_of(schema.outcome);
  const std::size_t a_col = column_of(schema.treatment);

  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != y_col && c != a_col) cov_names.push_back(header[c]);
    }
  }
  std::vector<std::size_t> cov_cols;
  for (const auto& name : cov_names) cov_cols.push_back(column_of(name));

  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  std::vector<int> a;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("row " + std::to_string(row_no) + " has " +
                               std::to_string(fields.size()) +
                               " fields, expected " +
                               std::to_string(header.size()));
    y.push_back(parse_cell(fields[y_col], row_no, schema.outcome));
    const double av = parse_cell(fields[a_col], row_no, schema.treatment);
    if (av != 0.0 && av != 1.0)
      throw std::runtime_error("treatment value '" + fields[a_col] +
                               "' at row " + std::to_string(row_no) +
                               " is not 0 or 1");
    a.push_back(static_cast<int>(av));
    std::vector<double> r;
    r.reserve(cov_cols.size());
    for (std::size_t k = 0; k < cov_cols.size(); ++k)
      r.push_back(parse_cell(fields[cov_cols[k]], row_no, cov_names[k]));
    rows.push_back(std::move(r));
  }
  if (y.empty()) throw std::runtime_error("no data rows in " + path);

  LoadedTrial out;
  out.covariate_names = cov_names;
  out.data.y = std::move(y);
  out.data.a = std::move(a);
  out.data.outcome_kind = schema.outcome_kind;
  out.data.x = Matrix(rows.size(), cov_cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cov_cols.size(); ++j)
      out.data.x(i, j) = rows[i][j];
  }
  validate_dataset(out.data);
  return out;
}

void write_trial_csv(const std::string& path, const TrialDataset& d,
                     const std::vector<std::string>& covariate_names) {
  if (covariate_names.size() != d.x.cols())
    throw std::invalid_argument("covariate name count mismatch");
  std::ostringstream out;
  out << "y,a";
  for (const auto& c : covariate_names) out << ',' << c;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << d.y[i] << ',' << d.a[i];
    for (std::size_t j = 0; j < d.x.cols(); ++j) out << ',' << d.x(i, j);
    out << '\n';
  }
  write_file(path, out.str());
}

void write_predictions_csv(const std::string& path,
                           const RiskPredictionSet& preds) {
  std::ostringstream out;
  out << "g0,g1,delta,lp0,lp1,delta_lp\n";
  out.precision(17);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out << preds.g0[i] << ',' << preds.g1[i] << ',' << preds.delta[i] << ','
        << preds.lp0[i] << ',' << preds.lp1[i] << ',' << preds.delta_lp[i]
        << '\n';
  }
  write_file(path, out.str());
}

void save_model(const std::string& path, const ModelFile& model) {
  ordered_json j;
  j["design"] = {{"covariates", model.spec.n_covariates},
                 {"treatment_terms", model.spec.treatment_terms},
                 {"covariate_names", model.covariate_names}};
  j["fit"] = fit_to_json(model.fit);
  write_file(path, j.dump(2) + "\n");
}

ModelFile load_model(const std::string& path) {
  const auto j = ordered_json::parse(read_file(path));
  ModelFile m;
  m.spec.n_covariates = j.at("design").at("covariates").get<std::size_t>();
  m.spec.treatment_terms = j.at("design").at("treatment_terms").get<bool>();
  m.covariate_names =
      j.at("design").at("covariate_names").get<std::vector<std::string>>();
  m.fit = fit_from_json(j.at("fit"));
  return m;
}

std::string format_sig(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

std::string config_hash(const std::string& canonical) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string report_json(const std::vector<MetricEstimate>& estimates,
                        const ReportMeta& meta) {
  ordered_json j;
  j["software"] = "hteval";
  j["version"] = HTEVAL_VERSION;
  j["seed"] = meta.seed;
  j["config_hash"] = meta.config_hash;
  if (!meta.command.empty()) j["command"] = meta.command;
  ordered_json arr = ordered_json::array();
  for (const auto& e : estimates) arr.push_back(estimate_to_json(e));
  j["estimates"] = arr;
  return j.dump(2) + "\n";
}

std::string report_tsv(const std::vector<MetricEstimate>& estimates) {
  std::ostringstream out;
  out << "name\tcontext\tdetail\tvalue\testimable\tmeta\n";
  for (const auto& e : estimates) {
    out << to_string(e.name) << '\t' << to_string(e.context) << '\t'
        << e.detail << '\t' << (e.estimable ? format_sig(e.value) : "NA")
        << '\t' << (e.estimable ? "1" : "0") << '\t';
    bool first = true;
    for (const auto& [k, v] : e.meta) {
      if (!first) out << ';';
      out << k << '=' << format_sig(v);
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

ParsedReport parse_report_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  ParsedReport out;
  out.meta.seed = j.value("seed", std::uint64_t{0});
  out.meta.config_hash = j.value("config_hash", std::string());
  out.meta.command = j.value("command", std::string());
  for (const auto& ej : j.at("estimates")) {
    MetricEstimate e;
    e.name = metric_from_string(ej.at("name").get<std::string>());
    e.context = context_from_string(ej.at("context").get<std::string>());
    e.detail = ej.value("detail", std::string());
    e.estimable = ej.at("estimable").get<bool>();
    e.value = ej.at("value").is_null() ? std::nan("")
                                       : ej.at("value").get<double>();
    if (ej.contains("meta"))
      e.meta = ej.at("meta").get<std::map<std::string, double>>();
    out.estimates.push_back(std::move(e));
  }
  return out;
}

void write_report(const std::string& path,
                  const std::vector<MetricEstimate>& estimates,
                  const ReportMeta& meta, const std::string& format) {
  if (format == "json") {
    write_file(path, report_json(estimates, meta));
  } else if (format == "tsv") {
    write_file(path, report_tsv(estimates));
  } else {
    throw std::invalid_argument("unknown report format: " + format);
  }
}

std::string to_json_string(const TrialDataset& d) {
  ordered_json j;
  j["y"] = d.y;
  j["a"] = d.a;
  j["x"] = d.x.data();
  j["rows"] = d.x.rows();
  j["cols"] = d.x.cols();
  j["outcome_kind"] =
      d.outcome_kind == OutcomeKind::binary ? "binary" : "continuous";
  return j.dump();
}

TrialDataset trial_from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  TrialDataset d;
  d.y = j.at("y").get<std::vector<double>>();
  d.a = j.at("a").get<std::vector<int>>();
  d.x = Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  d.x.data() = j.at("x").get<std::vector<double>>();
  d.outcome_kind = j.at("outcome_kind").get<std::string>() == "binary"
                       ? OutcomeKind::binary
                       : OutcomeKind::continuous;
  return d;
}

std::string to_json_string(const RiskPredictionSet& p) {
  ordered_json j;
  j["g0"] = p.g0;
  j["g1"] = p.g1;
  j["delta"] = p.delta;
  j["lp0"] = p.lp0;
  j["lp1"] = p.lp1;
  j["delta_lp"] = p.delta_lp;
  return j.dump();
}

RiskPredictionSet predictions_from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  RiskPredictionSet p;
  p.g0 = j.at("g0").get<std::vector<double>>();
  p.g1 = j.at("g1").get<std::vector<double>>();
  p.delta = j.at("delta").get<std::vector<double>>();
  p.lp0 = j.at("lp0").get<std::vector<double>>();
  p.lp1 = j.at("lp1").get<std::vector<double>>();
  p.delta_lp = j.at("delta_lp").get<std::vector<double>>();
  return p;
}

std::string to_json_string(const MatchedPairSet& m) {
  ordered_json j;
  ordered_json pairs = ordered_json::array();
  for (const auto& [c, t] : m.pairs) pairs.push_back({c, t});
  j["pairs"] = pairs;
  j["match_scalar"] = m.match_scalar;
  j["total_distance"] = m.total_distance;
  return j.dump();
}

MatchedPairSet pairs_from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  MatchedPairSet m;
  for (const auto& p : j.at("pairs"))
    m.pairs.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
  m.match_scalar = j.at("match_scalar").get<std::string>();
  m.total_distance = j.at("total_distance").get<double>();
  return m;
}

std::string to_json_string(const MetricEstimate& e) {
  ordered_json j;
  j["name"] = to_string(e.name);
  j["context"] = to_string(e.context);
  j["detail"] = e.detail;
  if (std::isfinite(e.value)) {
    j["value"] = e.value;
  } else {
    j["value"] = nullptr;
  }
  j["estimable"] = e.estimable;
  j["meta"] = e.meta;
  return j.dump();
}

MetricEstimate estimate_from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  MetricEstimate e;
  e.name = metric_from_string(j.at("name").get<std::string>());
  e.context = context_from_string(j.at("context").get<std::string>());
  e.detail = j.at("detail").get<std::string>();
  e.value = j.at("value").is_null() ? std::nan("") : j.at("value").get<double>();
  e.estimable = j.at("estimable").get<bool>();
  e.meta = j.at("meta").get<std::map<std::string, double>>();
  return e;
}

std::string to_json_string(const PopulationWithTruth& p) {
  ordered_json j;
  j["x"] = p.x.data();
  j["rows"] = p.x.rows();
  j["cols"] = p.x.cols();
  j["p0"] = p.p0;
  j["p1"] = p.p1;
  j["y0"] = p.y0;
  j["y1"] = p.y1;
  j["a"] = p.a;
  return j.dump();
}

PopulationWithTruth population_from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  PopulationWithTruth p;
  p.x = Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  p.x.data() = j.at("x").get<std::vector<double>>();
  p.p0 = j.at("p0").get<std::vector<double>>();
  p.p1 = j.at("p1").get<std::vector<double>>();
  p.y0 = j.at("y0").get<std::vector<double>>();
  p.y1 = j.at("y1").get<std::vector<double>>();
  p.a = j.at("a").get<std::vector<int>>();
  return p;
}

void write_bias_rmse_tsv(const std::string& path, const StudySummary& summary) {
  std::ostringstream out;
  out << "metric\tsetting\tn\truns\tmean_estimate\tsd\tmean_reference\tbias\trmse\n";
  for (const auto& r : summary.rows) {
    out << to_string(r.metric) << '\t' << to_string(r.setting) << '\t'
        << r.sample_size << '\t' << r.runs << '\t' << format_sig(r.mean) << '\t'
        << format_sig(r.sd) << '\t' << format_sig(r.mean_reference) << '\t'
        << format_sig(r.bias) << '\t' << format_sig(r.rmse) << '\n';
  }
  write_file(path, out.str());
}

void write_reference_tsv(const std::string& path, const StudySummary& summary) {
  std::ostringstream out;
  out << "metric\treference\tdgm\tn\truns\tmean\tsd\n";
  for (const auto& r : summary.references) {
    out << r.metric << '\t' << r.reference << '\t' << r.dgm << '\t'
        << r.sample_size << '\t' << r.runs << '\t' << format_sig(r.mean) << '\t'
        << format_sig(r.sd) << '\n';
  }
  write_file(path, out.str());
}

void write_plot_data_tsv(const std::string& path, const StudySummary& summary,
                         bool calibration_panel) {
  std::ostringstream out;
  out << "metric\tsetting\tn\tmean\tsd\n";
  for (const auto& r : summary.rows) {
    const bool is_cal = r.metric == MetricName::cal_intercept ||
                        r.metric == MetricName::cal_slope;
    if (is_cal != calibration_panel) continue;
    out << to_string(r.metric) << '\t' << to_string(r.setting) << '\t'
        << r.sample_size << '\t' << format_sig(r.mean) << '\t'
        << format_sig(r.sd) << '\n';
  }
  write_file(path, out.str());
}

void write_runs_tsv(const std::string& path, const SimulationResult& result) {
  std::ostringstream out;
  out << "n\trun\tmetric\tsetting\tvalue\n";
  for (const auto& r : result.runs) {
    if (!r.ok) continue;
    for (std::size_t m = 0; m < 8; ++m) {
      for (std::size_t s = 0; s < kSettingCount; ++s) {
        if (!r.estimates[m][s]) continue;
        out << r.sample_size << '\t' << r.run_index << '\t'
            << to_string(static_cast<MetricName>(m)) << '\t'
            << to_string(static_cast<Setting>(s)) << '\t'
            << format_sig(*r.estimates[m][s]) << '\n';
      }
    }
  }
  write_file(path, out.str());
}

std::vector<MetricEstimate> summary_estimates(const StudySummary& summary) {
  std::vector<MetricEstimate> out;
  for (const auto& r : summary.rows) {
    MetricEstimate e;
    e.name = r.metric;
    switch (r.setting) {
      case Setting::apparent: e.context = EvalContext::apparent; break;
      case Setting::boot632plus: e.context = EvalContext::boot632plus; break;
      case Setting::optimism_corrected:
        e.context = EvalContext::optimism_corrected;
        break;
      default: e.context = EvalContext::external; break;
    }
    e.detail = to_string(r.setting) + "/n=" + std::to_string(r.sample_size);
    e.value = r.mean;
    e.meta["sd"] = r.sd;
    e.meta["runs"] = static_cast<double>(r.runs);
    e.meta["n"] = static_cast<double>(r.sample_size);
    if (std::isfinite(r.bias)) {
      e.meta["bias"] = r.bias;
      e.meta["rmse"] = r.rmse;
      e.meta["mean_reference"] = r.mean_reference;
    }
    out.push_back(e);
  }
  for (const auto& r : summary.references) {
    MetricEstimate e;
    e.name = metric_from_string(r.metric);
    e.context = r.reference == "sample"
                    ? EvalContext::sample_reference
                    : (r.reference == "population"
                           ? EvalContext::population_reference
                           : EvalContext::naive_reference);
    e.detail = r.dgm + "/n=" + std::to_string(r.sample_size);
    e.value = r.mean;
    e.meta["sd"] = r.sd;
    e.meta["runs"] = static_cast<double>(r.runs);
    e.meta["n"] = static_cast<double>(r.sample_size);
    out.push_back(e);
  }
  return out;
}

}  // namespace hteval
