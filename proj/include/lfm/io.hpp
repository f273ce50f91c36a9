#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lfm/types.hpp"

namespace lfm::io {

struct MissingPolicy {
  bool drop_empty = true;     // empty cell / "nan"
  bool drop_negative = false; // negative sentinel convention
  std::optional<double> sentinel;  // exact-match sentinel value
};

// CSV layout: wide (one time column plus one value column per channel) or
// long (time, channel, value columns).
struct CsvSchema {
  enum class Format { Wide, Long } format = Format::Wide;
  std::string time_column = "time";
  std::string channel_column = "channel";
  std::string value_column = "value";
  std::vector<std::string> channels;  // wide: value columns; empty = all
  MissingPolicy missing;
};

// Reads a CSV time-series file. Times are either real day offsets or
// ISO-8601 dates (YYYY-MM-DD); dates are converted to day offsets from the
// earliest date, which is recorded as the epoch. Samples matching the
// missing policy are dropped, channels are sorted by time, duplicate
// (channel, time) pairs are an error. Parse failures carry the line number.
TimeSeriesSet ingest(const std::filesystem::path& path,
                     const CsvSchema& schema);

// Inverse of ingest for the wide layout (one row per distinct timestamp,
// empty cells where a channel has no sample). Dates are echoed when the set
// carries an epoch and the offset is integral.
std::string to_wide_csv(const TimeSeriesSet& data);

// Formats one timestamp the way outputs echo it.
std::string format_time(double t, const std::optional<std::string>& epoch);

// Date helpers (proleptic Gregorian).
long days_from_civil(int y, int m, int d);
std::string civil_from_days(long days);
bool parse_iso_date(const std::string& s, long& days_out);

// Writes via a temporary file in the same directory followed by an atomic
// rename, so interrupted runs never leave truncated outputs.
void atomic_write(const std::filesystem::path& path, const std::string& text);

}  // namespace lfm::io
