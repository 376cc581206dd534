#include "mrn/summary.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mrn/csv.hpp"

namespace mrn {

std::vector<SummaryRow> summarize_runs(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw std::invalid_argument("summarize_runs: no runs to aggregate");
  for (const auto& r : runs) {
    if (r.config_id != runs.front().config_id) {
      throw std::invalid_argument("summarize_runs: runs of " + r.result.arch + " seed " + std::to_string(r.result.seed) +
                                  " use a different config than " + runs.front().result.arch + " seed " +
                                  std::to_string(runs.front().result.seed));
    }
  }
  std::map<std::pair<std::string, int>, std::vector<double>> values;
  for (const auto& r : runs)
    for (const auto& row : r.result.curve) values[{r.result.arch, row.epoch}].push_back(row.success_rate);

  std::vector<SummaryRow> out;
  for (const auto& [key, v] : values) {
    SummaryRow row;
    row.arch = key.first;
    row.epoch = key.second;
    row.n = v.size();
    for (double x : v) row.mean += x;
    row.mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - row.mean) * (x - row.mean);
    row.stddev = std::sqrt(var / static_cast<double>(v.size()));
    out.push_back(row);
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "arch,epoch,n,mean_success,std_success\n";
  for (const auto& r : rows) {
    os << csv_row({r.arch, std::to_string(r.epoch), std::to_string(r.n), format_double(r.mean),
                   format_double(r.stddev)});
  }
  return os.str();
}

std::string summary_plot_data(const std::vector<SummaryRow>& rows) {
  std::set<std::string> archs;
  std::set<int> epochs;
  std::map<std::pair<std::string, int>, const SummaryRow*> index;
  for (const auto& r : rows) {
    archs.insert(r.arch);
    epochs.insert(r.epoch);
    index[{r.arch, r.epoch}] = &r;
  }
  std::ostringstream os;
  os << "# epoch";
  for (const auto& a : archs) os << " " << a << "_mean " << a << "_std";
  os << "\n";
  for (int e : epochs) {
    os << e;
    for (const auto& a : archs) {
      const auto it = index.find({a, e});
      if (it == index.end()) {
        os << " nan nan";
      } else {
        os << " " << format_double(it->second->mean) << " " << format_double(it->second->stddev);
      }
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace mrn
