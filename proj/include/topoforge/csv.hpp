#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace topoforge {

// Shortest representation that round-trips to the same double.
std::string format_number(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}
  void header(const std::vector<std::string>& names);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(const std::string& s);
  void end_row();

 private:
  std::ostream& os_;
  bool first_ = true;
};

}  // namespace topoforge
