#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdmstack {

/// Raised when a learner produces a non-finite loss or parameter.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochRecord {
  int epoch = 0;  ///< 1-based
  double price = 0.0;
  double server_utility = 0.0;
  double reward = 0.0;
  /// Critic or value loss of the last update in this epoch (0 when no update
  /// ran). Kept in memory only; run CSVs carry the four shared columns.
  double loss = 0.0;
};

using TrainingLog = std::vector<EpochRecord>;

inline constexpr const char* kRunCsvHeader = "epoch,price,server_utility,reward";

void write_run_csv(const TrainingLog& log, std::ostream& out);
std::string run_csv(const TrainingLog& log);

}  // namespace gdmstack
