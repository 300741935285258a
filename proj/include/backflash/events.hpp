#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "backflash/csv.hpp"

namespace backflash {

// One detection: detector id and timestamp in ns from run start.
struct EventRecord {
  int detector_id = 0;
  double timestamp_ns = 0.0;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct EventStream {
  std::vector<EventRecord> events;
  csv::Metadata metadata;  // from '# key = value' lines
};

// Event file: `detector_id,timestamp_ns` with a header line; timestamps are
// written with ps resolution.
void write_events(std::ostream& out, std::span<const EventRecord> events,
                  const csv::Metadata& metadata = {});
EventStream read_events(std::istream& in, const std::string& source = "<stream>");
EventStream load_events(const std::filesystem::path& path);

// Throws DomainError if the stream is not in nondecreasing time order.
void require_time_sorted(std::span<const EventRecord> events);

}  // namespace backflash
