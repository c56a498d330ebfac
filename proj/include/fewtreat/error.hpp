#ifndef FEWTREAT_ERROR_HPP
#define FEWTREAT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fewtreat {

// Stable error codes; the CLI maps data errors to exit 2 and method errors
// to exit 3 based on these.
enum class errc {
  unbalanced,        // missing cells in a panel that must be balanced
  no_treated,        // treatment group empty
  no_controls,       // control group empty (all units treated)
  non_suffix_post,   // treated periods are not a suffix of the time axis
  non_block_treatment, // treatment indicator is not a units x post-periods block
  no_pre,            // pre/post collapse requested with zero pre periods
  insufficient_data, // too few observations for the requested procedure
  bad_argument,      // invalid parameter (budget, alpha, level, ...)
  singular_design,   // rank-deficient regression design
  degenerate,        // zero-variance input where spread is required
  collinear,         // variance model unidentified (all unit sizes equal)
  bester_balance,    // coarse clusters not equal-size / equally treated
  io_error,          // file or format problem
};

const char* errc_name(errc code);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace fewtreat

#endif  // FEWTREAT_ERROR_HPP
