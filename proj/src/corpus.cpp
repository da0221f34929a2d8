#include "openstreets/corpus.hpp"

#include <fstream>

#include "openstreets/csv.hpp"
#include "openstreets/error.hpp"

namespace openstreets {

namespace {

Date read_date(const CsvTable& t, std::size_t row, std::string_view column) {
  try {
    return Date::parse(t.text(row, column));
  } catch (const Error& e) {
    throw BadValueError(row + 1, std::string(column), e.what());
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return in;
}

}  // namespace

const std::vector<std::string>& trips_csv_header() {
  static const std::vector<std::string> h{"trip_id",     "date",        "pickup_lat", "pickup_lon",
                                          "dropoff_lat", "dropoff_lon", "count"};
  return h;
}

const std::vector<std::string>& weather_csv_header() {
  static const std::vector<std::string> h{"date", "precip_mm", "snow_mm", "temp_c"};
  return h;
}

const std::vector<std::string>& collisions_csv_header() {
  static const std::vector<std::string> h{"date", "segment_id", "count"};
  return h;
}

std::vector<TripRecord> load_trips(std::istream& in, const RoadNetwork& net, std::size_t* dropped) {
  const CsvTable t = CsvTable::read(in, trips_csv_header());
  std::vector<TripRecord> out;
  out.reserve(t.rows());
  std::size_t same = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    TripRecord trip;
    trip.trip_id = t.integer(r, "trip_id");
    trip.date = read_date(t, r, "date");
    const long long count = t.integer(r, "count");
    if (count < 1) throw BadValueError(r + 1, "count", "must be at least 1");
    trip.count = static_cast<int>(count);
    trip.origin = snap(t.real(r, "pickup_lat"), t.real(r, "pickup_lon"), net);
    trip.destination = snap(t.real(r, "dropoff_lat"), t.real(r, "dropoff_lon"), net);
    if (trip.origin == trip.destination) {
      ++same;
      continue;
    }
    out.push_back(trip);
  }
  if (dropped) *dropped = same;
  return out;
}

std::map<Date, WeatherDay> load_weather(std::istream& in) {
  const CsvTable t = CsvTable::read(in, weather_csv_header());
  struct Acc {
    WeatherDay sum;
    int hours = 0;
  };
  std::map<Date, Acc> acc;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    Acc& a = acc[read_date(t, r, "date")];
    const double precip = t.real(r, "precip_mm");
    const double snow = t.real(r, "snow_mm");
    if (precip < 0) throw BadValueError(r + 1, "precip_mm", "must be non-negative");
    if (snow < 0) throw BadValueError(r + 1, "snow_mm", "must be non-negative");
    a.sum.precip_mm += precip;
    a.sum.snow_mm += snow;
    a.sum.temp_c += t.real(r, "temp_c");
    ++a.hours;
  }
  std::map<Date, WeatherDay> out;
  for (auto& [d, a] : acc) {
    a.sum.temp_c /= a.hours;
    out.emplace(d, a.sum);
  }
  return out;
}

std::vector<CollisionRecord> load_collisions(std::istream& in, const RoadNetwork& net) {
  const CsvTable t = CsvTable::read(in, collisions_csv_header());
  std::vector<CollisionRecord> out;
  out.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    CollisionRecord c;
    c.date = read_date(t, r, "date");
    c.segment_id = t.integer(r, "segment_id");
    if (!net.find_segment(c.segment_id)) throw BadValueError(r + 1, "segment_id", "unknown segment");
    const long long count = t.integer(r, "count");
    if (count < 0) throw BadValueError(r + 1, "count", "must be non-negative");
    c.count = static_cast<int>(count);
    out.push_back(c);
  }
  return out;
}

Corpus::Corpus(RoadNetwork net, std::vector<TripRecord> trips, std::map<Date, WeatherDay> weather,
               std::vector<CollisionRecord> collisions, unsigned threads)
    : net_(std::move(net)) {
  for (const auto& [d, w] : weather) {
    lookup_.emplace(d, days_.size());
    days_.push_back(d);
    weather_.push_back(w);
  }
  trips_.resize(days_.size());
  labels_.assign(days_.size(), std::vector<double>(net_.segment_count(), 0.0));

  std::size_t orphan_trips = 0, orphan_collisions = 0;
  for (const TripRecord& trip : trips) {
    if (auto d = find_day(trip.date)) {
      trips_[*d].push_back(trip);
    } else {
      ++orphan_trips;
    }
  }
  for (const CollisionRecord& c : collisions) {
    auto d = find_day(c.date);
    if (!d) {
      ++orphan_collisions;
      continue;
    }
    if (c.count > 0) labels_[*d][net_.segment_index(c.segment_id)] = 1.0;
  }
  if (orphan_trips) warnings_.push_back(std::to_string(orphan_trips) + " trips fall on days without weather");
  if (orphan_collisions) {
    warnings_.push_back(std::to_string(orphan_collisions) + " collisions fall on days without weather");
  }

  base_.reserve(days_.size());
  for (std::size_t d = 0; d < days_.size(); ++d) {
    Assignment a = assign_trips(net_, trips_[d], nullptr, threads);
    base_.push_back(std::move(a.arc_volumes));
    unroutable_.insert(unroutable_.end(), a.unroutable.begin(), a.unroutable.end());
  }
}

std::optional<std::size_t> Corpus::find_day(Date d) const {
  auto it = lookup_.find(d);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t Corpus::day_index(Date d) const {
  if (auto i = find_day(d)) return *i;
  throw Error(ErrorCode::MissingDay, "day " + d.iso() + " is not in the corpus");
}

bool Corpus::consecutive(std::size_t first, std::size_t count) const {
  if (count == 0) return true;
  if (first + count > days_.size()) return false;
  return days_[first + count - 1] - days_[first] == static_cast<int>(count) - 1;
}

CorpusPaths corpus_paths(const std::string& dir) {
  const std::string base = dir.empty() ? std::string(".") : dir;
  return {base + "/segments.csv", base + "/trips.csv", base + "/weather.csv", base + "/collisions.csv"};
}

Corpus load_corpus(const CorpusPaths& paths, unsigned threads) {
  RoadNetwork net = ingest_segments(paths.net);
  auto trips_in = open_input(paths.trips);
  auto weather_in = open_input(paths.weather);
  auto collisions_in = open_input(paths.collisions);
  std::vector<TripRecord> trips = load_trips(trips_in, net);
  std::map<Date, WeatherDay> weather = load_weather(weather_in);
  std::vector<CollisionRecord> collisions = load_collisions(collisions_in, net);
  return Corpus(std::move(net), std::move(trips), std::move(weather), std::move(collisions), threads);
}

}  // namespace openstreets
