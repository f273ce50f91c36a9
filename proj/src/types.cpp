#include "lfm/types.hpp"

#include <cmath>

namespace lfm {

std::size_t TimeSeriesSet::total_samples() const {
  std::size_t n = 0;
  for (const auto& c : channels) n += c.samples.size();
  return n;
}

const TimeSeries* TimeSeriesSet::find(const std::string& id) const {
  for (const auto& c : channels)
    if (c.id == id) return &c;
  return nullptr;
}

const TimeSeries& TimeSeriesSet::require(const std::string& id) const {
  const TimeSeries* c = find(id);
  if (!c) throw QueryError("unknown channel id: " + id);
  return *c;
}

void TimeSeriesSet::validate() const {
  if (channels.empty()) throw DataError("TimeSeriesSet has no channels");
  for (const auto& c : channels) {
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
      const Sample& s = c.samples[i];
      if (!std::isfinite(s.t) || !std::isfinite(s.y))
        throw DataError("non-finite sample in channel " + c.id);
      if (i > 0 && !(c.samples[i - 1].t < s.t))
        throw DataError("timestamps not strictly increasing in channel " +
                        c.id + " near t=" + std::to_string(s.t));
    }
  }
}

}  // namespace lfm
