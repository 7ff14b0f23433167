#include "synergy/facilities.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <regex>
#include <set>

#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy::facilities {

std::string_view to_string(GeocodeQuality q) {
    switch (q) {
        case GeocodeQuality::exact: return "exact";
        case GeocodeQuality::simplified: return "simplified";
        case GeocodeQuality::failed: return "failed";
    }
    return "failed";
}

std::optional<GeocodeQuality> quality_from_string(std::string_view s) {
    if (s == "exact") return GeocodeQuality::exact;
    if (s == "simplified") return GeocodeQuality::simplified;
    if (s == "failed") return GeocodeQuality::failed;
    return std::nullopt;
}

double haversine_km(const Coordinates& a, const Coordinates& b) {
    constexpr double rad = std::numbers::pi / 180.0;
    const double phi1 = a.lat * rad;
    const double phi2 = b.lat * rad;
    const double dphi = (b.lat - a.lat) * rad;
    const double dlambda = (b.lon - a.lon) * rad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    const double h = std::clamp(s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

bool valid_coordinates(const Coordinates& c) {
    return std::isfinite(c.lat) && std::isfinite(c.lon) && c.lat >= -90.0 && c.lat <= 90.0 && c.lon >= -180.0 &&
           c.lon <= 180.0;
}

std::optional<std::string> normalize_activity_code(std::string_view code) {
    static const std::regex nace(R"((\d{2})\.?(\d{1,2})?[A-Z]?)");
    std::string s = csv::trim(code);
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    std::smatch m;
    if (!std::regex_match(s, m, nace)) return std::nullopt;
    if (s.find('.') != std::string::npos && !m[2].matched) return std::nullopt;
    // A trailing NAF letter only makes sense on a full four-digit class.
    if (std::isalpha(static_cast<unsigned char>(s.back())) && m[2].length() != 2) return std::nullopt;
    return m[2].matched ? m[1].str() + "." + m[2].str() : m[1].str();
}

Registry::Registry(std::vector<Facility> facilities) : facilities_(std::move(facilities)) {
    std::sort(facilities_.begin(), facilities_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < facilities_.size(); ++i) {
        const auto& f = facilities_[i];
        if (i && facilities_[i - 1].id == f.id) throw DomainError("duplicate facility id '" + f.id + "'");
        if (f.coordinates.has_value() == (f.quality == GeocodeQuality::failed))
            throw DomainError("facility '" + f.id + "': coordinates must be present iff geocoding succeeded");
    }
}

const Facility* Registry::find(std::string_view id) const {
    auto it = std::lower_bound(facilities_.begin(), facilities_.end(), id,
                               [](const Facility& f, std::string_view v) { return f.id < v; });
    return it != facilities_.end() && it->id == id ? &*it : nullptr;
}

IngestResult ingest_facilities(std::istream& in) {
    IngestResult result;
    csv::Reader reader(in);
    csv::read_header(reader, {"id", "activity_code", "address", "territory", "lat", "lon"}, "facilities");
    std::set<std::string> seen;
    csv::Row row;
    while (reader.next(row)) {
        const auto line = reader.line();
        if (row.size() != 6) {
            result.report.push_back({line, row.empty() ? "" : csv::trim(row[0]), "expected 6 columns"});
            continue;
        }
        Facility f;
        f.id = csv::trim(row[0]);
        if (f.id.empty()) {
            result.report.push_back({line, "", "missing id"});
            continue;
        }
        auto activity = normalize_activity_code(row[1]);
        if (!activity) {
            result.report.push_back({line, f.id, "invalid activity code '" + csv::trim(row[1]) + "'"});
            continue;
        }
        f.activity_code = *activity;
        f.address = csv::trim(row[2]);
        f.territory = csv::trim(row[3]);

        const auto lat = csv::trim(row[4]);
        const auto lon = csv::trim(row[5]);
        if (!lat.empty() || !lon.empty()) {
            try {
                if (lat.empty() || lon.empty()) throw ParseError("only one of lat/lon given");
                Coordinates c{csv::parse_double(lat, line), csv::parse_double(lon, line)};
                if (!valid_coordinates(c)) throw ParseError("coordinates out of range");
                f.coordinates = c;
                f.quality = GeocodeQuality::exact;
            } catch (const ParseError&) {
                result.report.push_back({line, f.id, "invalid coordinates"});
                continue;
            }
        }
        if (!seen.insert(f.id).second) {
            result.report.push_back({line, f.id, "duplicate id"});
            continue;
        }
        result.facilities.push_back(std::move(f));
    }
    return result;
}

namespace {

std::string exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_registry_csv(std::ostream& out, const Registry& r) {
    out << "id,activity_code,address,territory,lat,lon,quality\n";
    for (const auto& f : r.all()) {
        csv::write_row(out, {f.id, f.activity_code, f.address, f.territory,
                             f.coordinates ? exact(f.coordinates->lat) : "",
                             f.coordinates ? exact(f.coordinates->lon) : "", std::string(to_string(f.quality))});
    }
}

Registry read_registry_csv(std::istream& in) {
    csv::Reader reader(in);
    csv::read_header(reader, {"id", "activity_code", "address", "territory", "lat", "lon", "quality"}, "registry");
    std::vector<Facility> facilities;
    csv::Row row;
    while (reader.next(row)) {
        if (row.size() != 7) throw ParseError("expected 7 columns", reader.line());
        Facility f{row[0], row[1], row[2], row[3], std::nullopt, GeocodeQuality::failed};
        auto q = quality_from_string(row[6]);
        if (!q) throw ParseError("unknown quality '" + row[6] + "'", reader.line());
        f.quality = *q;
        if (!row[4].empty()) f.coordinates = Coordinates{csv::parse_double(row[4], reader.line()),
                                                         csv::parse_double(row[5], reader.line())};
        facilities.push_back(std::move(f));
    }
    return Registry(std::move(facilities));
}

void write_ingest_report_csv(std::ostream& out, const std::vector<IngestIssue>& report) {
    out << "line,id,reason\n";
    for (const auto& r : report) csv::write_row(out, {std::to_string(r.line), r.id, r.reason});
}

SpatialIndex::SpatialIndex(const Registry& registry) {
    for (const auto& f : registry.all())
        if (f.coordinates) entries_.push_back({f.coordinates->lat, f.coordinates->lon, f.id});
    std::sort(entries_.begin(), entries_.end(),
              [](const Entry& a, const Entry& b) { return a.lat != b.lat ? a.lat < b.lat : a.id < b.id; });
}

bool SpatialIndex::contains(std::string_view id) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.id == id; });
}

std::vector<RadiusHit> SpatialIndex::radius_query(const Coordinates& center, double radius_km) const {
    if (!(radius_km >= 0.0)) throw DomainError("radius must be non-negative");
    // Great-circle distance is at least R * |dlat|, so only this latitude band can match.
    const double band = radius_km / kEarthRadiusKm * 180.0 / std::numbers::pi + 1e-9;
    auto lo = std::lower_bound(entries_.begin(), entries_.end(), center.lat - band,
                               [](const Entry& e, double v) { return e.lat < v; });
    std::vector<RadiusHit> hits;
    for (auto it = lo; it != entries_.end() && it->lat <= center.lat + band; ++it) {
        const double d = haversine_km(center, {it->lat, it->lon});
        if (d <= radius_km) hits.push_back({it->id, d});
    }
    std::sort(hits.begin(), hits.end(), [](const RadiusHit& a, const RadiusHit& b) {
        return a.distance_km != b.distance_km ? a.distance_km < b.distance_km : a.id < b.id;
    });
    return hits;
}

}  // namespace synergy::facilities
