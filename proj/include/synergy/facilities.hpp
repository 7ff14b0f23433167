#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace synergy::facilities {

/// Degrees; lat in [-90, 90], lon in [-180, 180].
struct Coordinates {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const Coordinates&, const Coordinates&) = default;
};

enum class GeocodeQuality { exact, simplified, failed };

std::string_view to_string(GeocodeQuality q);
std::optional<GeocodeQuality> quality_from_string(std::string_view s);

inline constexpr double kEarthRadiusKm = 6371.0088;

/// Great-circle distance on the mean-radius sphere.
double haversine_km(const Coordinates& a, const Coordinates& b);

bool valid_coordinates(const Coordinates& c);

struct Facility {
    std::string id;
    std::string activity_code;
    std::string address;
    std::string territory;
    /// Present iff quality != failed.
    std::optional<Coordinates> coordinates;
    GeocodeQuality quality = GeocodeQuality::failed;

    friend bool operator==(const Facility&, const Facility&) = default;
};

/// Accepts NACE ("10.11", "1011", "10.1") and NAF ("10.11Z") spellings and
/// returns the dotted NACE form, or nullopt when the code is not NACE-like.
std::optional<std::string> normalize_activity_code(std::string_view code);

struct IngestIssue {
    std::size_t line = 0;
    std::string id;
    std::string reason;
};

/// Facilities ordered by id with unique ids.
class Registry {
public:
    Registry() = default;
    /// Throws DomainError on duplicate ids or coordinates inconsistent with quality.
    explicit Registry(std::vector<Facility> facilities);

    const std::vector<Facility>& all() const noexcept { return facilities_; }
    std::size_t size() const noexcept { return facilities_.size(); }
    const Facility* find(std::string_view id) const;

    friend bool operator==(const Registry&, const Registry&) = default;

private:
    std::vector<Facility> facilities_;
};

struct IngestResult {
    /// In file order. Rows without coordinates come back as `failed` and are
    /// candidates for geocoding.
    std::vector<Facility> facilities;
    std::vector<IngestIssue> report;
};

/// Reads `id,activity_code,address,territory,lat,lon`. Rows with a missing id,
/// an invalid activity code, bad coordinates or an id seen before are skipped
/// and reported.
IngestResult ingest_facilities(std::istream& in);

/// Registry dump: the ingest columns plus `quality`, coordinates round-trip exact.
void write_registry_csv(std::ostream& out, const Registry& r);
Registry read_registry_csv(std::istream& in);
void write_ingest_report_csv(std::ostream& out, const std::vector<IngestIssue>& report);

struct RadiusHit {
    std::string id;
    double distance_km = 0.0;

    friend bool operator==(const RadiusHit&, const RadiusHit&) = default;
};

/// Facilities with coordinates, sorted by latitude for band-limited scans.
class SpatialIndex {
public:
    SpatialIndex() = default;
    explicit SpatialIndex(const Registry& registry);

    std::size_t size() const noexcept { return entries_.size(); }
    bool contains(std::string_view id) const;

    /// Every facility within `radius_km` (haversine) of `center`, ascending
    /// distance then id. Throws DomainError for a negative radius.
    std::vector<RadiusHit> radius_query(const Coordinates& center, double radius_km) const;

private:
    struct Entry {
        double lat;
        double lon;
        std::string id;
    };
    std::vector<Entry> entries_;
};

}  // namespace synergy::facilities
