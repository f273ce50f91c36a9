#include "lfm/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace lfm::io {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  out.push_back(field);
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(0, 1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
  }
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size();
}

struct RawRecord {
  double time = 0.0;     // raw day number (absolute when from a date)
  bool from_date = false;
  std::string channel;
  double value = 0.0;
  bool missing = false;
};

bool value_is_missing(const std::string& field, double value, bool parsed,
                      const MissingPolicy& policy) {
  if (field.empty() || field == "nan" || field == "NaN" || field == "NA")
    return policy.drop_empty;
  if (!parsed) return false;  // will be reported as a parse error
  if (policy.sentinel && value == *policy.sentinel) return true;
  if (policy.drop_negative && value < 0.0) return true;
  return false;
}

}  // namespace

long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

std::string civil_from_days(long z) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long y = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04ld-%02u-%02u", y + (m <= 2), m, d);
  return buf;
}

bool parse_iso_date(const std::string& s, long& days_out) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i == 4 || i == 7) continue;
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  const int y = std::stoi(s.substr(0, 4));
  const int m = std::stoi(s.substr(5, 2));
  const int d = std::stoi(s.substr(8, 2));
  if (m < 1 || m > 12 || d < 1 || d > 31) return false;
  days_out = days_from_civil(y, m, d);
  return true;
}

TimeSeriesSet ingest(const std::filesystem::path& path,
                     const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());

  std::string line;
  if (!std::getline(in, line))
    throw DataError(path.string() + ": empty file");
  const std::vector<std::string> header = split_csv(line);

  auto column_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<long>(i);
    return -1L;
  };
  const long time_col = column_of(schema.time_column);
  if (time_col < 0)
    throw DataError(path.string() + ": missing time column '" +
                    schema.time_column + "'");

  std::vector<std::pair<long, std::string>> value_cols;  // wide layout
  long channel_col = -1, value_col = -1;
  if (schema.format == CsvSchema::Format::Wide) {
    if (schema.channels.empty()) {
      for (std::size_t i = 0; i < header.size(); ++i)
        if (static_cast<long>(i) != time_col)
          value_cols.emplace_back(static_cast<long>(i), header[i]);
    } else {
      for (const auto& ch : schema.channels) {
        const long c = column_of(ch);
        if (c < 0)
          throw DataError(path.string() + ": missing channel column '" + ch +
                          "'");
        value_cols.emplace_back(c, ch);
      }
    }
    if (value_cols.empty())
      throw DataError(path.string() + ": no value columns");
  } else {
    channel_col = column_of(schema.channel_column);
    value_col = column_of(schema.value_column);
    if (channel_col < 0 || value_col < 0)
      throw DataError(path.string() + ": long layout needs channel and value "
                      "columns");
  }

  std::vector<RawRecord> records;
  bool any_date = false, any_number = false;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != header.size())
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(fields.size()));
    double t;
    long days;
    bool from_date = false;
    if (parse_iso_date(fields[time_col], days)) {
      t = static_cast<double>(days);
      from_date = true;
      any_date = true;
    } else if (parse_double(fields[time_col], t)) {
      any_number = true;
    } else {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": unparseable time '" + fields[time_col] + "'");
    }
    auto add = [&](const std::string& channel, const std::string& field) {
      RawRecord r;
      r.time = t;
      r.from_date = from_date;
      r.channel = channel;
      double v = 0.0;
      const bool parsed = parse_double(field, v);
      r.value = v;
      r.missing = value_is_missing(field, v, parsed, schema.missing);
      if (!r.missing && !parsed)
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": unparseable value '" + field + "'");
      if (!r.missing) records.push_back(std::move(r));
    };
    if (schema.format == CsvSchema::Format::Wide) {
      for (const auto& [col, name] : value_cols) add(name, fields[col]);
    } else {
      if (fields[channel_col].empty())
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": empty channel id");
      add(fields[channel_col], fields[value_col]);
    }
  }
  if (any_date && any_number)
    throw DataError(path.string() + ": mixed date and numeric timestamps");

  TimeSeriesSet out;
  if (records.empty()) {
    if (schema.format == CsvSchema::Format::Wide)
      for (const auto& [col, name] : value_cols)
        out.channels.push_back(TimeSeries{name, "", "", {}});
    return out;
  }

  double t0 = 0.0;
  if (any_date) {
    double tmin = records.front().time;
    for (const auto& r : records) tmin = std::min(tmin, r.time);
    t0 = tmin;
    out.epoch_date = civil_from_days(static_cast<long>(tmin));
  }

  // Preserve first-appearance channel order (wide: header order).
  std::vector<std::string> order;
  std::map<std::string, std::vector<Sample>> per_channel;
  if (schema.format == CsvSchema::Format::Wide)
    for (const auto& [col, name] : value_cols) {
      order.push_back(name);
      per_channel[name];
    }
  for (const auto& r : records) {
    if (!per_channel.count(r.channel)) order.push_back(r.channel);
    per_channel[r.channel].push_back({r.time - t0, r.value});
  }
  for (const auto& name : order) {
    TimeSeries ts;
    ts.id = name;
    ts.samples = per_channel[name];
    std::sort(ts.samples.begin(), ts.samples.end(),
              [](const Sample& a, const Sample& b) { return a.t < b.t; });
    for (std::size_t i = 1; i < ts.samples.size(); ++i)
      if (ts.samples[i].t == ts.samples[i - 1].t)
        throw DataError(path.string() + ": duplicate timestamp " +
                        format_time(ts.samples[i].t, out.epoch_date) +
                        " in channel '" + name + "'");
    out.channels.push_back(std::move(ts));
  }
  return out;
}

std::string format_time(double t, const std::optional<std::string>& epoch) {
  if (epoch) {
    const double rounded = std::round(t);
    if (std::fabs(t - rounded) < 1e-9) {
      long days = 0;
      if (parse_iso_date(*epoch, days))
        return civil_from_days(days + static_cast<long>(rounded));
    }
  }
  std::ostringstream os;
  os.precision(17);
  os << t;
  return os.str();
}

std::string to_wide_csv(const TimeSeriesSet& data) {
  std::set<double> times;
  for (const auto& c : data.channels)
    for (const auto& s : c.samples) times.insert(s.t);

  std::ostringstream os;
  os.precision(17);
  os << "time";
  for (const auto& c : data.channels) os << "," << c.id;
  os << "\n";
  std::vector<std::size_t> cursor(data.channels.size(), 0);
  for (double t : times) {
    os << format_time(t, data.epoch_date);
    for (std::size_t c = 0; c < data.channels.size(); ++c) {
      os << ",";
      auto& k = cursor[c];
      const auto& samples = data.channels[c].samples;
      while (k < samples.size() && samples[k].t < t) ++k;
      if (k < samples.size() && samples[k].t == t) os << samples[k].y;
    }
    os << "\n";
  }
  return os.str();
}

void atomic_write(const std::filesystem::path& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path dir = path.parent_path().empty() ? "." : path.parent_path();
  fs::create_directories(dir);
  const fs::path tmp = dir / (path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write: " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace lfm::io
