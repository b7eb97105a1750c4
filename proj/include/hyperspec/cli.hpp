#pragma once

#include <iosfwd>

namespace hyperspec::cli {

/// `hyperspec <subcommand> [--config FILE] [--seed N] [--out DIR]`.
/// Returns 0 on success, 2 for usage or configuration errors, 3 for data
/// errors. Errors are written to `err` as one line:
///   error: kind=<code> msg=<text>
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hyperspec::cli
