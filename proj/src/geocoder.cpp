#include "synergy/geocoder.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "synergy/csv.hpp"
#include "synergy/error.hpp"

namespace synergy::facilities {
namespace {

std::vector<std::string> split_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep, std::size_t from = 0) {
    std::string out;
    for (std::size_t i = from; i < parts.size(); ++i) {
        if (i > from) out += sep;
        out += parts[i];
    }
    return out;
}

// Comma components with whitespace collapsed; empty components dropped.
std::vector<std::string> components(std::string_view address) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= address.size()) {
        auto end = address.find(',', start);
        if (end == std::string_view::npos) end = address.size();
        auto part = join(split_tokens(address.substr(start, end - start)), " ");
        if (!part.empty()) out.push_back(std::move(part));
        start = end + 1;
    }
    return out;
}

bool has_digit(std::string_view tok) {
    return std::any_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

std::vector<std::string> simplification_descent(std::string_view address) {
    std::vector<std::string> queries;
    auto push = [&](std::string q) {
        if (!q.empty() && std::find(queries.begin(), queries.end(), q) == queries.end()) queries.push_back(std::move(q));
    };
    auto comps = components(address);
    if (comps.empty()) return queries;
    push(join(comps, ", "));

    if (comps.size() == 1) {
        auto tokens = split_tokens(comps.front());
        for (std::size_t from = 1; from < tokens.size(); ++from) push(join(tokens, " ", from));
        return queries;
    }

    for (std::size_t from = 1; comps.size() - from >= 2; ++from) push(join(comps, ", ", from));
    const auto& city = comps.back();
    auto street = split_tokens(comps[comps.size() - 2]);
    std::size_t from = 0;
    while (street.size() - from > 1 && has_digit(street[from])) {
        ++from;
        push(join(street, " ", from) + ", " + city);
    }
    push(city);
    return queries;
}

std::string normalize_address(std::string_view address) {
    auto out = join(components(address), ", ");
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

GeocodeResult geocode(std::string_view address, GeocoderClient& client, const RetryPolicy& retry) {
    const auto queries = simplification_descent(address);
    if (queries.empty()) throw DomainError("cannot geocode an empty address");
    for (std::size_t step = 0; step < queries.size(); ++step) {
        std::optional<Coordinates> hit;
        auto delay = retry.base_delay;
        for (int attempt = 1; attempt <= std::max(1, retry.attempts); ++attempt) {
            try {
                hit = client.lookup(queries[step]);
                break;
            } catch (const TransportError&) {
                if (attempt >= retry.attempts) break;
                std::this_thread::sleep_for(delay);
                delay *= 2;
            }
        }
        if (hit && valid_coordinates(*hit))
            return {hit, step == 0 ? GeocodeQuality::exact : GeocodeQuality::simplified};
    }
    return {std::nullopt, GeocodeQuality::failed};
}

HttpGeocoder::HttpGeocoder(std::string base_url, std::chrono::seconds timeout) : timeout_(timeout) {
    auto scheme = base_url.find("://");
    auto path_start = base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) {
        origin_ = base_url;
        path_ = "/";
    } else {
        origin_ = base_url.substr(0, path_start);
        path_ = base_url.substr(path_start);
    }
}

std::optional<Coordinates> parse_feature_collection(std::string_view body) {
    auto doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw TransportError("geocoder returned invalid JSON");
    if (!doc.contains("features") || !doc["features"].is_array() || doc["features"].empty()) return std::nullopt;
    const auto& top = doc["features"][0];
    if (!top.contains("geometry") || !top["geometry"].contains("coordinates")) return std::nullopt;
    const auto& xy = top["geometry"]["coordinates"];
    if (!xy.is_array() || xy.size() < 2 || !xy[0].is_number() || !xy[1].is_number()) return std::nullopt;
    return Coordinates{xy[1].get<double>(), xy[0].get<double>()};
}

std::optional<Coordinates> HttpGeocoder::lookup(const std::string& query) {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    auto res = client.Get(path_, httplib::Params{{"q", query}}, httplib::Headers{});
    if (!res) throw TransportError("geocoder request failed: " + httplib::to_string(res.error()));
    if (res->status >= 500 || res->status == 429)
        throw TransportError("geocoder returned HTTP " + std::to_string(res->status));
    if (res->status != 200) return std::nullopt;
    return parse_feature_collection(res->body);
}

void GeocodeCache::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return;
    csv::Reader reader(in);
    csv::read_header(reader, {"normalized_address", "lat", "lon", "quality"}, "geocode cache");
    csv::Row row;
    std::lock_guard lock(mutex_);
    while (reader.next(row)) {
        if (row.size() != 4) throw ParseError("expected 4 columns", reader.line());
        GeocodeResult r;
        auto q = quality_from_string(csv::trim(row[3]));
        if (!q) throw ParseError("unknown quality", reader.line());
        r.quality = *q;
        if (r.quality != GeocodeQuality::failed)
            r.coordinates = Coordinates{csv::parse_double(row[1], reader.line()), csv::parse_double(row[2], reader.line())};
        entries_[row[0]] = r;
    }
}

void GeocodeCache::save(const std::filesystem::path& path) const {
    std::ostringstream out;
    out << "normalized_address,lat,lon,quality\n";
    {
        std::lock_guard lock(mutex_);
        for (const auto& [key, r] : entries_) {
            char lat[40] = "", lon[40] = "";
            if (r.coordinates) {
                std::snprintf(lat, sizeof lat, "%.17g", r.coordinates->lat);
                std::snprintf(lon, sizeof lon, "%.17g", r.coordinates->lon);
            }
            csv::write_row(out, {key, lat, lon, std::string(to_string(r.quality))});
        }
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    file << out.str();
    if (!file) throw std::runtime_error("cannot write geocode cache " + path.string());
}

std::optional<GeocodeResult> GeocodeCache::find(std::string_view address) const {
    const auto key = normalize_address(address);
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void GeocodeCache::put(std::string_view address, const GeocodeResult& result) {
    auto key = normalize_address(address);
    std::lock_guard lock(mutex_);
    entries_[std::move(key)] = result;
}

std::size_t GeocodeCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

GeocodeStats geocode_missing(std::vector<Facility>& facilities, GeocoderClient& client, GeocodeCache& cache,
                             std::size_t concurrency, const RetryPolicy& retry) {
    GeocodeStats stats;
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < facilities.size(); ++i) {
        auto& f = facilities[i];
        if (f.coordinates) continue;
        if (normalize_address(f.address).empty()) {
            ++stats.failed;
            continue;
        }
        if (auto hit = cache.find(f.address)) {
            ++stats.cache_hits;
            f.coordinates = hit->coordinates;
            f.quality = hit->quality;
            continue;
        }
        pending.push_back(i);
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < pending.size();) {
            auto& f = facilities[pending[k]];
            auto r = geocode(f.address, client, retry);
            cache.put(f.address, r);
            f.coordinates = r.coordinates;
            f.quality = r.quality;
        }
    };
    const auto n = std::min(std::max<std::size_t>(concurrency, 1), pending.size());
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
    threads.clear();

    for (auto i : pending) (facilities[i].coordinates ? stats.resolved : stats.failed)++;
    return stats;
}

}  // namespace synergy::facilities
