#include "mobcast/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "mobcast/random.hpp"

namespace mobcast {
namespace {

constexpr const char* kCategories[] = {"Cafe",       "Office",  "Train Station",
                                       "Restaurant", "Gym",     "Park",
                                       "Home",       "Bookstore"};

// 2012-04-02, a Monday.
constexpr std::chrono::sys_days kStart =
    std::chrono::sys_days{std::chrono::year{2012} / 4 / 2};

}  // namespace

Poi synthetic_poi(std::size_t index) {
  // Deterministic scatter on a ~0.4 degree box around central Tokyo.
  const double u = static_cast<double>((index * 7919) % 1000) / 1000.0;
  const double v = static_cast<double>((index * 104729) % 1000) / 1000.0;
  Poi poi;
  poi.id = fmt::format("L{:05}", index);
  poi.category = kCategories[index % std::size(kCategories)];
  poi.coord = GeoPoint{std::round((35.48 + 0.4 * u) * 1e5) / 1e5,
                       std::round((139.49 + 0.4 * v) * 1e5) / 1e5};
  return poi;
}

SyntheticDataset generate_synthetic(const SynthOptions& options) {
  if (options.users == 0 || options.days == 0 || options.locations == 0 ||
      options.stays_per_day == 0) {
    throw std::invalid_argument("synthetic sizes must be positive");
  }
  if (options.stays_per_day > 17) {
    throw std::invalid_argument("at most 17 stays per day");
  }
  if (!(options.return_prob >= 0.0 && options.return_prob <= 1.0)) {
    throw std::invalid_argument("return_prob must be in [0, 1]");
  }

  std::mt19937_64 rng(options.seed);
  SyntheticDataset out;
  const auto width = static_cast<int>(std::to_string(options.users - 1).size());
  for (std::size_t u = 0; u < options.users; ++u) {
    const std::string user = fmt::format("u{:0{}}", u, width);
    std::vector<std::size_t> visits;  // one entry per past stay
    std::vector<std::size_t> unvisited(options.locations);
    for (std::size_t i = 0; i < unvisited.size(); ++i) unvisited[i] = i;

    for (std::size_t d = 0; d < options.days; ++d) {
      // Distinct hours by partial shuffle of 6..22.
      std::vector<int> hours;
      for (int h = 6; h < 23; ++h) hours.push_back(h);
      for (std::size_t i = 0; i < options.stays_per_day; ++i) {
        std::swap(hours[i], hours[i + uniform_index(rng, hours.size() - i)]);
      }
      hours.resize(options.stays_per_day);
      std::sort(hours.begin(), hours.end());

      for (const int hour : hours) {
        const auto minute = static_cast<int>(uniform_index(rng, 60));
        const double draw = uniform_unit(rng);
        const bool can_return = !visits.empty();
        const bool must_return = unvisited.empty();
        const bool ret = can_return && (must_return || draw < options.return_prob);
        std::size_t place;
        if (ret) {
          place = visits[uniform_index(rng, visits.size())];
        } else {
          const auto pick = uniform_index(rng, unvisited.size());
          place = unvisited[pick];
          unvisited[pick] = unvisited.back();
          unvisited.pop_back();
        }
        visits.push_back(place);

        CheckinRecord record;
        record.user_id = user;
        record.poi = synthetic_poi(place);
        record.stay.poi_id = record.poi.id;
        record.stay.utc_offset = options.offset;
        const auto local = kStart + std::chrono::days{d} + std::chrono::hours{hour} +
                           std::chrono::minutes{minute};
        record.stay.time = std::chrono::time_point_cast<std::chrono::seconds>(
            local - options.offset);
        out.records.push_back(std::move(record));
        out.returned.push_back(ret);
      }
    }
  }
  return out;
}

}  // namespace mobcast
