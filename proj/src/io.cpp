#include "fewtreat/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "fewtreat/error.hpp"

namespace fewtreat {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) fail(errc::io_error, "bad numeric value for " + what + ": '" + s + "'");
    return v;
  } catch (const Error&) {
    throw;
  } catch (...) {
    fail(errc::io_error, "bad numeric value for " + what + ": '" + s + "'");
  }
}

}  // namespace

LoadedPanel read_panel_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(errc::io_error, "empty input");
  const auto header = split_csv_line(line);

  long unit_col = -1, time_col = -1, outcome_col = -1, treated_col = -1, size_col = -1,
       mhat_col = -1;
  std::vector<std::pair<std::size_t, std::string>> cov_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (h == "unit") unit_col = static_cast<long>(i);
    else if (h == "time") time_col = static_cast<long>(i);
    else if (h == "outcome") outcome_col = static_cast<long>(i);
    else if (h == "treated") treated_col = static_cast<long>(i);
    else if (h == "size") size_col = static_cast<long>(i);
    else if (h == "m_hat") mhat_col = static_cast<long>(i);
    else cov_cols.emplace_back(i, h);
  }
  if (unit_col < 0) fail(errc::io_error, "missing required column: unit");
  if (time_col < 0) fail(errc::io_error, "missing required column: time");
  if (outcome_col < 0) fail(errc::io_error, "missing required column: outcome");
  if (treated_col < 0) fail(errc::io_error, "missing required column: treated");

  std::map<std::string, std::size_t> unit_ids, time_ids;
  std::vector<std::string> unit_names, time_names;
  struct Row {
    std::size_t unit, time;
    double outcome;
    int treated;
    double size;
    double m_hat;
    std::vector<double> covs;
  };
  std::vector<Row> rows;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < header.size())
      fail(errc::io_error, "line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " fields");
    Row r;
    const std::string& uname = fields[static_cast<std::size_t>(unit_col)];
    const std::string& tname = fields[static_cast<std::size_t>(time_col)];
    auto uit = unit_ids.find(uname);
    if (uit == unit_ids.end()) {
      uit = unit_ids.emplace(uname, unit_names.size()).first;
      unit_names.push_back(uname);
    }
    auto tit = time_ids.find(tname);
    if (tit == time_ids.end()) {
      tit = time_ids.emplace(tname, time_names.size()).first;
      time_names.push_back(tname);
    }
    r.unit = uit->second;
    r.time = tit->second;
    r.outcome = parse_double(fields[static_cast<std::size_t>(outcome_col)], "outcome");
    const std::string& tstr = fields[static_cast<std::size_t>(treated_col)];
    if (tstr == "0") r.treated = 0;
    else if (tstr == "1") r.treated = 1;
    else fail(errc::io_error, "line " + std::to_string(line_no) + ": treated must be 0 or 1");
    r.size = size_col >= 0 ? parse_double(fields[static_cast<std::size_t>(size_col)], "size")
                           : 0.0;
    r.m_hat = mhat_col >= 0 ? parse_double(fields[static_cast<std::size_t>(mhat_col)], "m_hat")
                            : 0.0;
    for (const auto& [idx, name] : cov_cols)
      r.covs.push_back(parse_double(fields[idx], name));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) fail(errc::io_error, "no data rows");

  const std::size_t n = unit_names.size();
  const std::size_t t = time_names.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  LoadedPanel out;
  Panel& p = out.panel;
  p.n_units = n;
  p.n_periods = t;
  p.unit_names = unit_names;
  p.period_names = time_names;
  p.outcomes.assign(n * t, nan);
  p.n_covariates = cov_cols.size();
  p.covariates.assign(n * p.n_covariates, nan);
  if (size_col >= 0) p.unit_sizes.assign(n, nan);
  if (mhat_col >= 0) {
    out.has_m_hat = true;
    out.m_hat.assign(t, nan);
  }
  std::vector<std::uint8_t> treat_cell(n * t, 2);  // 2 = unseen

  for (const auto& r : rows) {
    if (treat_cell[r.unit * t + r.time] != 2)
      fail(errc::io_error, "duplicate cell for unit '" + unit_names[r.unit] + "', time '" +
                               time_names[r.time] + "'");
    p.outcomes[r.unit * t + r.time] = r.outcome;
    treat_cell[r.unit * t + r.time] = static_cast<std::uint8_t>(r.treated);
    for (std::size_t q = 0; q < p.n_covariates; ++q) {
      double& slot = p.covariates[r.unit * p.n_covariates + q];
      if (std::isnan(slot)) slot = r.covs[q];
      else if (slot != r.covs[q])
        fail(errc::io_error, "covariate '" + cov_cols[q].second + "' varies within unit '" +
                                 unit_names[r.unit] + "'");
    }
    if (size_col >= 0) {
      double& slot = p.unit_sizes[r.unit];
      if (std::isnan(slot)) slot = r.size;
      else if (slot != r.size)
        fail(errc::io_error, "size varies within unit '" + unit_names[r.unit] + "'");
    }
    if (mhat_col >= 0) {
      double& slot = out.m_hat[r.time];
      if (std::isnan(slot)) slot = r.m_hat;
    }
  }

  for (std::size_t cell = 0; cell < n * t; ++cell)
    if (treat_cell[cell] == 2) fail(errc::unbalanced, "panel has missing cells");

  // Infer the block pattern: treated units are those ever treated; post
  // periods those where they are treated; the block must be exact and the
  // post periods a suffix of the time axis.
  p.treated.assign(n, 0);
  std::vector<std::uint8_t> post(t, 0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t s = 0; s < t; ++s)
      if (treat_cell[j * t + s] == 1) {
        p.treated[j] = 1;
        post[s] = 1;
      }
  std::size_t first_post = t;
  for (std::size_t s = 0; s < t; ++s)
    if (post[s]) {
      first_post = s;
      break;
    }
  if (first_post == t) fail(errc::no_treated, "no treated cells");
  for (std::size_t s = first_post; s < t; ++s)
    if (!post[s]) fail(errc::non_suffix_post, "treated periods are not a suffix of the time axis");
  p.n_pre = first_post;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t s = 0; s < t; ++s) {
      const std::uint8_t expected = (p.treated[j] && s >= first_post) ? 1 : 0;
      if (treat_cell[j * t + s] != expected)
        fail(errc::non_block_treatment,
             "treated indicator is not a treated-units x post-periods block (unit '" +
                 unit_names[j] + "', time '" + time_names[s] + "')");
    }

  p = validate_panel(std::move(p));
  return out;
}

LoadedPanel read_panel_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open input file: " + path);
  return read_panel_csv(in);
}

namespace {

// Shortest decimal representation that round-trips the double.
std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string join_warnings(const std::vector<std::string>& warnings) {
  std::string out;
  for (const auto& w : warnings) {
    if (!out.empty()) out += "; ";
    out += w;
  }
  return out;
}

nlohmann::json to_json(const TestResult& r) {
  nlohmann::json j{{"kind", "test"},
                   {"method", r.method},
                   {"p_value", r.p_value},
                   {"statistic", r.statistic},
                   {"estimate", r.estimate},
                   {"c0", r.c0},
                   {"ref_size", r.ref_size},
                   {"enumerated", r.enumerated},
                   {"tail", tail_name(r.tail)}};
  if (r.seed) j["seed"] = *r.seed;
  if (!r.metadata.empty()) j["metadata"] = r.metadata;
  if (!r.component_pvalues.empty()) j["component_pvalues"] = r.component_pvalues;
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

nlohmann::json to_json(const IntervalResult& r) {
  nlohmann::json j{{"kind", "interval"},
                   {"method", r.method},
                   {"lower", r.lower},
                   {"upper", r.upper},
                   {"level", r.level}};
  if (!r.metadata.empty()) j["metadata"] = r.metadata;
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<ResultRecord>& records) {
  out << "method,kind,p_value,statistic,estimate,c0,lower,upper,level,ref_size,enumerated,"
         "seed,tail,warnings\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& rec : records) {
    if (const auto* t = std::get_if<TestResult>(&rec)) {
      out << t->method << ",test," << fmt(t->p_value) << ',' << fmt(t->statistic) << ','
          << fmt(t->estimate) << ',' << fmt(t->c0) << ",,," << ',' << t->ref_size << ','
          << (t->enumerated ? 1 : 0) << ',' << (t->seed ? std::to_string(*t->seed) : "") << ','
          << tail_name(t->tail) << ',' << join_warnings(t->warnings) << '\n';
    } else {
      const auto& i = std::get<IntervalResult>(rec);
      out << i.method << ",interval," << fmt(nan) << ',' << fmt(nan) << ',' << fmt(nan) << ','
          << fmt(nan) << ',' << fmt(i.lower) << ',' << fmt(i.upper) << ',' << fmt(i.level)
          << ",,,,," << join_warnings(i.warnings) << '\n';
    }
  }
}

void write_results_json(std::ostream& out, const std::vector<ResultRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& rec : records) {
    if (const auto* t = std::get_if<TestResult>(&rec)) arr.push_back(to_json(*t));
    else arr.push_back(to_json(std::get<IntervalResult>(rec)));
  }
  out << arr.dump(2) << '\n';
}

void write_mc_csv(std::ostream& out, const MCResult& result) {
  out << "method,n1,effect,rejection_rate,mc_se,reps,seed\n";
  for (const auto& r : result.rows)
    out << r.method << ',' << result.scenario.n1 << ',' << fmt(result.scenario.effect_c) << ','
        << fmt(r.rejection_rate) << ',' << fmt(r.mc_se) << ',' << r.reps << ','
        << result.scenario.seed << '\n';
}

void write_mc_csv(std::ostream& out, const std::vector<Figure1Row>& rows) {
  out << "method,n1,effect,rejection_rate,mc_se,reps,seed\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.n1 << ',' << fmt(r.effect) << ',' << fmt(r.rejection_rate) << ','
        << fmt(r.mc_se) << ',' << r.reps << ',' << r.seed << '\n';
}

void write_mc_json(std::ostream& out, const MCResult& result) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : result.rows)
    arr.push_back({{"method", r.method},
                   {"n1", result.scenario.n1},
                   {"effect", result.scenario.effect_c},
                   {"rejection_rate", r.rejection_rate},
                   {"mc_se", r.mc_se},
                   {"reps", r.reps},
                   {"errors", r.errors},
                   {"failed", r.failed},
                   {"seed", result.scenario.seed}});
  nlohmann::json j{{"results", arr}, {"wall_seconds", result.wall_seconds}};
  out << j.dump(2) << '\n';
}

void write_mc_json(std::ostream& out, const std::vector<Figure1Row>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"method", r.method},
                   {"n1", r.n1},
                   {"effect", r.effect},
                   {"rejection_rate", r.rejection_rate},
                   {"mc_se", r.mc_se},
                   {"reps", r.reps},
                   {"errors", r.errors},
                   {"seed", r.seed}});
  out << arr.dump(2) << '\n';
}

void write_table1_csv(std::ostream& out, const std::vector<Table1Row>& rows, std::size_t reps,
                      std::uint64_t seed) {
  out << "n1,rejection,mc_se,ratio_of_expectations,mean_of_ratios,reps,seed\n";
  for (const auto& r : rows)
    out << r.n1 << ',' << fmt(r.rejection) << ',' << fmt(r.mc_se) << ','
        << fmt(r.ratio_of_expectations) << ',' << fmt(r.mean_of_ratios) << ',' << reps << ','
        << seed << '\n';
}

void write_table1_json(std::ostream& out, const std::vector<Table1Row>& rows, std::size_t reps,
                       std::uint64_t seed) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"n1", r.n1},
                   {"rejection", r.rejection},
                   {"mc_se", r.mc_se},
                   {"ratio_of_expectations", r.ratio_of_expectations},
                   {"mean_of_ratios", r.mean_of_ratios},
                   {"reps", reps},
                   {"seed", seed}});
  out << arr.dump(2) << '\n';
}

std::vector<std::pair<std::string, std::string>> read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      fail(errc::io_error, "config line " + std::to_string(line_no) + ": expected key=value");
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

}  // namespace fewtreat
