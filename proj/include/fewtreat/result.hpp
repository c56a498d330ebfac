#ifndef FEWTREAT_RESULT_HPP
#define FEWTREAT_RESULT_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fewtreat {

// Which tail of the reference distribution a test uses. Two-sided tests
// compare absolute values.
enum class Tail { both, left, right };

const char* tail_name(Tail t);

// Outcome of a hypothesis test. `statistic` is the observed test statistic
// (for difference-in-means style tests, the estimate minus the null value),
// `c0` the null value under test. For enumerated or sampled reference
// distributions, `ref_size` counts the reference draws including the
// identity transformation, so p_value >= 1/ref_size always holds there.
struct TestResult {
  std::string method;
  double p_value = 1.0;
  double statistic = 0.0;
  double estimate = 0.0;
  double c0 = 0.0;
  std::size_t ref_size = 0;
  bool enumerated = false;
  std::optional<std::uint64_t> seed;
  Tail tail = Tail::both;
  std::map<std::string, double> metadata;
  std::vector<double> component_pvalues;  // per-partition p-values, when any
  std::vector<std::string> warnings;
};

// Confidence or prediction interval. `level` is the nominal coverage.
struct IntervalResult {
  std::string method;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;
  std::map<std::string, double> metadata;
  std::vector<std::string> warnings;
};

}  // namespace fewtreat

#endif  // FEWTREAT_RESULT_HPP
