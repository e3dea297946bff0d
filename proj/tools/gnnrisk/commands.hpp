#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gnnrisk/harness.hpp"

namespace gnnrisk::cli {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsageError = 2 };

/// Full command-line entry point. `args` excludes the program name. Output
/// goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

enum class ReportFormat { kText, kMarkdown, kCsv };

/// Attack × budget matrix of "mean ± std" percentages for one setting and
/// target category. With `bold_best` the highest mean per budget is marked.
std::string render_matrix(const std::vector<SummaryRow>& rows, Setting setting, const std::string& category,
                          ReportFormat format, bool bold_best);

}  // namespace gnnrisk::cli
