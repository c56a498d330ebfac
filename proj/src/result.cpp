#include "fewtreat/result.hpp"

#include "fewtreat/error.hpp"

namespace fewtreat {

const char* errc_name(errc code) {
  switch (code) {
    case errc::unbalanced: return "UNBALANCED";
    case errc::no_treated: return "NO_TREATED";
    case errc::no_controls: return "NO_CONTROLS";
    case errc::non_suffix_post: return "NON_SUFFIX_POST";
    case errc::non_block_treatment: return "NON_BLOCK_TREATMENT";
    case errc::no_pre: return "NO_PRE";
    case errc::insufficient_data: return "INSUFFICIENT_DATA";
    case errc::bad_argument: return "BAD_ARGUMENT";
    case errc::singular_design: return "SINGULAR_DESIGN";
    case errc::degenerate: return "DEGENERATE";
    case errc::collinear: return "COLLINEAR";
    case errc::bester_balance: return "BESTER_BALANCE";
    case errc::io_error: return "IO_ERROR";
  }
  return "UNKNOWN";
}

const char* tail_name(Tail t) {
  switch (t) {
    case Tail::left: return "left";
    case Tail::right: return "right";
    case Tail::both: return "both";
  }
  return "both";
}

}  // namespace fewtreat
