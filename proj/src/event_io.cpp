#include <cmath>
#include <fstream>
#include <ostream>

#include "backflash/error.hpp"
#include "backflash/events.hpp"

namespace backflash {

void write_events(std::ostream& out, std::span<const EventRecord> events,
                  const csv::Metadata& metadata) {
  for (const auto& [key, value] : metadata) out << "# " << key << " = " << value << '\n';
  out << "detector_id,timestamp_ns\n";
  std::string line;
  for (const EventRecord& e : events) {
    line.clear();
    line += std::to_string(e.detector_id);
    line += ',';
    line += csv::format_fixed(e.timestamp_ns, 3);
    line += '\n';
    out << line;
  }
}

EventStream read_events(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source, {"detector_id", "timestamp_ns"});
  EventStream stream;
  while (auto row = reader.next()) {
    const auto id = reader.to_int((*row)[0], "detector_id");
    const double t = reader.to_double((*row)[1], "timestamp_ns");
    if (!std::isfinite(t) || t < 0.0) reader.fail("timestamp must be finite and nonnegative");
    stream.events.push_back({static_cast<int>(id), t});
  }
  stream.metadata = reader.metadata();
  return stream;
}

EventStream load_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return read_events(in, path.string());
}

void require_time_sorted(std::span<const EventRecord> events) {
  for (std::size_t i = 1; i < events.size(); ++i)
    if (events[i].timestamp_ns < events[i - 1].timestamp_ns)
      throw DomainError("event stream not time-sorted at record " + std::to_string(i + 1));
}

}  // namespace backflash
