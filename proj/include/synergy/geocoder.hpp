#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "synergy/facilities.hpp"

namespace synergy::facilities {

/// Raised by a client when the request itself failed (network, 5xx).
class TransportError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Query string -> coordinates of the best match, nullopt when nothing matches.
/// Implementations must be callable from several threads at once.
class GeocoderClient {
public:
    virtual ~GeocoderClient() = default;
    virtual std::optional<Coordinates> lookup(const std::string& query) = 0;
};

/// Never resolves anything.
class NullGeocoder final : public GeocoderClient {
public:
    std::optional<Coordinates> lookup(const std::string&) override { return std::nullopt; }
};

/// Address-search HTTP API: GET <base_url>?q=<address>, GeoJSON
/// FeatureCollection response, top feature's [lon, lat] used.
class HttpGeocoder final : public GeocoderClient {
public:
    explicit HttpGeocoder(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(10));
    std::optional<Coordinates> lookup(const std::string& query) override;

private:
    std::string origin_;
    std::string path_;
    std::chrono::seconds timeout_;
};

/// Parses a GeoJSON FeatureCollection body; throws TransportError when the
/// body is not valid JSON.
std::optional<Coordinates> parse_feature_collection(std::string_view body);

struct RetryPolicy {
    int attempts = 3;
    /// Delay before the second attempt; doubles for each further attempt.
    std::chrono::milliseconds base_delay{200};
};

/// Queries tried for an address, most to least specific: the full address,
/// then leading comma components dropped down to street + city, then leading
/// house-number tokens dropped from the street, then the city alone. A single
/// component address loses one leading token per step instead.
std::vector<std::string> simplification_descent(std::string_view address);

/// Lower-cased, whitespace-collapsed, comma components trimmed; the cache key.
std::string normalize_address(std::string_view address);

struct GeocodeResult {
    std::optional<Coordinates> coordinates;
    GeocodeQuality quality = GeocodeQuality::failed;
};

/// Walks the descent and returns the first hit. Transport failures are
/// retried with exponential backoff, then count as a miss for that step.
/// Throws DomainError for an empty address.
GeocodeResult geocode(std::string_view address, GeocoderClient& client, const RetryPolicy& retry = {});

/// On-disk `normalized_address,lat,lon,quality` cache, safe for concurrent use.
class GeocodeCache {
public:
    GeocodeCache() = default;
    /// Adds the entries of a cache file; a missing file is not an error.
    void load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::optional<GeocodeResult> find(std::string_view address) const;
    void put(std::string_view address, const GeocodeResult& result);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, GeocodeResult, std::less<>> entries_;
};

struct GeocodeStats {
    std::size_t cache_hits = 0;
    std::size_t resolved = 0;
    std::size_t failed = 0;
};

/// Geocodes every facility that has no coordinates, using at most
/// `concurrency` client calls in flight.
GeocodeStats geocode_missing(std::vector<Facility>& facilities, GeocoderClient& client, GeocodeCache& cache,
                             std::size_t concurrency = 4, const RetryPolicy& retry = {});

}  // namespace synergy::facilities
