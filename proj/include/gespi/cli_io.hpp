#pragma once

// Configuration parsing, CSV/JSON ingestion and emission, and the
// command-line front end.

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gespi/conformal.hpp"
#include "gespi/multiple_testing.hpp"
#include "gespi/simulation.hpp"

namespace gespi {

/// Malformed input file or configuration; the message names the file and,
/// where applicable, the line and column.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration.

/// Builds an ExperimentSpec from JSON text. Missing keys take the task
/// defaults of default_spec; unknown keys and out-of-range values are errors.
/// The task comes from `task` when given, else from the "task" key, else
/// binomial. `base_dir` resolves relative file paths inside the config.
ExperimentSpec parse_config_text(const std::string& json_text,
                                 std::optional<Task> task = std::nullopt,
                                 const std::string& base_dir = ".");

ExperimentSpec parse_config(const std::string& path, std::optional<Task> task = std::nullopt);

/// Values of start, start + step, ... up to stop (inclusive within 1e-9 of a step).
std::vector<double> grid_values(double start, double stop, double step);

// ---------------------------------------------------------------------------
// Results.

enum class OutputFormat { Csv, Json };

OutputFormat parse_format(const std::string& name);

/// Shortest decimal that round-trips; "inf", "-inf" for infinities.
std::string format_number(double x);

void write_metrics_csv(const MetricsTable& table, std::ostream& out);
void write_metrics_json(const MetricsTable& table, std::ostream& out);

/// Writes to path, or to standard output when path is empty or "-".
void emit_results(const MetricsTable& table, const std::string& path, OutputFormat format);

MetricsTable read_metrics_csv(std::istream& in, const std::string& source = "<stream>");
MetricsTable read_metrics_json(std::istream& in, const std::string& source = "<stream>");

// ---------------------------------------------------------------------------
// Data files. Headers are mandatory, the decimal separator is '.', and NaN or
// infinite values are rejected.

struct ScoreTable {
  std::vector<double> values;
  std::vector<std::string> groups;  // empty when the file has no group column
};

/// Columns: value; optional group.
ScoreTable read_scores_csv(std::istream& in, const std::string& source = "<stream>");
ScoreTable read_scores_file(const std::string& path);

/// Columns: item_id, model_a_correct, model_b_correct, source (real|synthetic).
std::vector<WinRateRecord> read_winrate_csv(std::istream& in,
                                            const std::string& source = "<stream>");
std::vector<WinRateRecord> read_winrate_file(const std::string& path);

/// Columns: hypothesis_id (1..m, each exactly once), pvalue.
PValueVector read_pvalues_csv(std::istream& in, const std::string& source = "<stream>");
PValueVector read_pvalues_file(const std::string& path);

/// Columns: point_id, lambda, loss. Every point must list the same lambdas.
RiskGrid read_risk_grid_csv(std::istream& in, double bound, LossMonotonicity monotonicity,
                            const std::string& source = "<stream>");
RiskGrid read_risk_grid_file(const std::string& path, double bound,
                             LossMonotonicity monotonicity);

/// Either a score column or numeric feature columns, plus an optional label
/// column (0 inlier, 1 outlier).
struct OutlierTable {
  std::vector<double> scores;                   // filled when a score column exists
  std::vector<std::vector<double>> features;    // filled otherwise
  std::vector<int> labels;                      // empty without a label column
};

OutlierTable read_outlier_csv(std::istream& in, const std::string& source = "<stream>");
OutlierTable read_outlier_file(const std::string& path);

// ---------------------------------------------------------------------------

/// Parses argv and runs one subcommand. Returns the process exit status;
/// every error is reported on err with a nonzero status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gespi
