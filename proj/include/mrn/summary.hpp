#pragma once

// Aggregation of learning curves across seeds: per (arch, epoch) mean and
// population standard deviation of the success rate.

#include <string>
#include <vector>

#include "mrn/gcrl.hpp"

namespace mrn {

struct RunRecord {
  // Identifies every setting except arch and seed; runs aggregated together
  // must agree on it.
  std::string config_id;
  TrainResult result;
};

struct SummaryRow {
  std::string arch;
  int epoch = 0;
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

/// Rows ordered by arch name, then epoch. Throws std::invalid_argument on
/// an empty input or on runs with different config ids.
std::vector<SummaryRow> summarize_runs(const std::vector<RunRecord>& runs);

/// CSV: arch,epoch,n,mean_success,std_success
std::string summary_csv(const std::vector<SummaryRow>& rows);

/// Whitespace table for plotting: one line per epoch, a mean and a std
/// column per arch; "nan" where an arch has no run reaching that epoch.
std::string summary_plot_data(const std::vector<SummaryRow>& rows);

}  // namespace mrn
