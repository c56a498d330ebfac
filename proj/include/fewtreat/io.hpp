#ifndef FEWTREAT_IO_HPP
#define FEWTREAT_IO_HPP

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "fewtreat/mclab.hpp"
#include "fewtreat/panel.hpp"
#include "fewtreat/result.hpp"

namespace fewtreat {

// Long-format panel CSV: header `unit,time,outcome,treated`, optional `size`
// column, optional `m_hat` column (an externally fitted counterfactual for
// the treated unit, aligned to periods), and any further columns read as
// unit-level covariates. Unit and time labels are arbitrary strings mapped
// to dense indices in first-appearance order; `treated` must form a block:
// the treated units in a suffix of periods.
struct LoadedPanel {
  Panel panel;
  std::vector<double> m_hat;  // per period; empty when the column is absent
  bool has_m_hat = false;
};

LoadedPanel read_panel_csv(std::istream& in);
LoadedPanel read_panel_csv_file(const std::string& path);

using ResultRecord = std::variant<TestResult, IntervalResult>;

// Fixed columns (see README):
// method,kind,p_value,statistic,estimate,c0,lower,upper,level,ref_size,enumerated,seed,tail,warnings
void write_results_csv(std::ostream& out, const std::vector<ResultRecord>& records);
void write_results_json(std::ostream& out, const std::vector<ResultRecord>& records);

// method,n1,effect,rejection_rate,mc_se,reps,seed
void write_mc_csv(std::ostream& out, const MCResult& result);
void write_mc_csv(std::ostream& out, const std::vector<Figure1Row>& rows);
void write_mc_json(std::ostream& out, const MCResult& result);
void write_mc_json(std::ostream& out, const std::vector<Figure1Row>& rows);

// n1,rejection,mc_se,ratio_of_expectations,mean_of_ratios,reps,seed
void write_table1_csv(std::ostream& out, const std::vector<Table1Row>& rows, std::size_t reps,
                      std::uint64_t seed);
void write_table1_json(std::ostream& out, const std::vector<Table1Row>& rows, std::size_t reps,
                       std::uint64_t seed);

// Flat key=value scenario/config file; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_key_value_file(const std::string& path);

}  // namespace fewtreat

#endif  // FEWTREAT_IO_HPP
