#include "gdmstack/training_log.hpp"

#include <fmt/format.h>
#include <ostream>
#include <sstream>

namespace gdmstack {

void write_run_csv(const TrainingLog& log, std::ostream& out) {
  out << kRunCsvHeader << '\n';
  for (const auto& row : log)
    out << fmt::format("{},{},{},{}\n", row.epoch, row.price, row.server_utility,
                       row.reward);
}

std::string run_csv(const TrainingLog& log) {
  std::ostringstream out;
  write_run_csv(log, out);
  return out.str();
}

}  // namespace gdmstack
