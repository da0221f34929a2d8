#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "openstreets/dates.hpp"
#include "openstreets/roadnet.hpp"
#include "openstreets/routing.hpp"

namespace openstreets {

/// Daily weather: precipitation and snow summed over the day, temperature averaged.
struct WeatherDay {
  double precip_mm = 0.0;
  double snow_mm = 0.0;
  double temp_c = 0.0;
};

struct CollisionRecord {
  Date date;
  SegmentId segment_id = 0;
  int count = 1;
};

/// trips.csv: pickups and dropoffs are snapped to the nearest intersection. Trips
/// whose endpoints snap to the same intersection are dropped and counted in `*dropped`.
std::vector<TripRecord> load_trips(std::istream& in, const RoadNetwork& net, std::size_t* dropped = nullptr);
/// weather.csv, hourly or daily rows; aggregated per calendar day.
std::map<Date, WeatherDay> load_weather(std::istream& in);
/// collisions.csv; segment ids must exist in the network.
std::vector<CollisionRecord> load_collisions(std::istream& in, const RoadNetwork& net);

const std::vector<std::string>& trips_csv_header();
const std::vector<std::string>& weather_csv_header();
const std::vector<std::string>& collisions_csv_header();

/// Everything the learners need, indexed by day. The day list is the sorted set of
/// weather dates; trips and collisions on other dates are ignored (see warnings()).
class Corpus {
 public:
  Corpus(RoadNetwork net, std::vector<TripRecord> trips, std::map<Date, WeatherDay> weather,
         std::vector<CollisionRecord> collisions, unsigned threads = 1);

  const RoadNetwork& network() const noexcept { return net_; }
  const std::vector<Date>& days() const noexcept { return days_; }
  std::size_t day_count() const noexcept { return days_.size(); }
  std::optional<std::size_t> find_day(Date d) const;
  /// Throws Error(MissingDay).
  std::size_t day_index(Date d) const;

  const WeatherDay& weather(std::size_t day) const { return weather_[day]; }
  const std::vector<TripRecord>& trips(std::size_t day) const { return trips_[day]; }
  /// Single-shortest-path assignment of the day's trips (per arc).
  const ArcVolumes& base_volumes(std::size_t day) const { return base_[day]; }
  /// Per segment: 1 when at least one collision was recorded that day.
  const std::vector<double>& labels(std::size_t day) const { return labels_[day]; }
  const std::vector<UnroutableTrip>& unroutable() const noexcept { return unroutable_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// True when days[first .. first+count) are consecutive calendar days.
  bool consecutive(std::size_t first, std::size_t count) const;

 private:
  RoadNetwork net_;
  std::vector<Date> days_;
  std::map<Date, std::size_t> lookup_;
  std::vector<WeatherDay> weather_;
  std::vector<std::vector<TripRecord>> trips_;
  std::vector<ArcVolumes> base_;
  std::vector<std::vector<double>> labels_;
  std::vector<UnroutableTrip> unroutable_;
  std::vector<std::string> warnings_;
};

struct CorpusPaths {
  std::string net, trips, weather, collisions;
};

/// Default file names inside a data directory.
CorpusPaths corpus_paths(const std::string& dir);
Corpus load_corpus(const CorpusPaths& paths, unsigned threads = 1);

}  // namespace openstreets
