#pragma once

// Test-only helpers. The recommendation oracle here is a deliberately naive
// re-derivation of the ranking rules and must not call into the recommender.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "synergy/facilities.hpp"
#include "synergy/ioanalysis.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = fs::temp_directory_path() / ("synergy-test-" + std::to_string(rng()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

inline fs::path desk_fixture() { return fs::path(SYNERGY_SOURCE_DIR) / "data" / "desk"; }

/// Copies the bundled desk inputs into `dir` (no artifacts).
inline void copy_desk(const fs::path& dir) {
    for (const auto& e : fs::directory_iterator(desk_fixture()))
        if (e.is_regular_file()) fs::copy_file(e.path(), dir / e.path().filename(), fs::copy_options::overwrite_existing);
}

struct CommandResult {
    int exit_code = -1;
    std::string out;
};

/// Runs the CLI with `args`; stdout captured, stderr discarded unless redirected in args.
inline CommandResult run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + SYNERGY_CLI_PATH + "\" " + args;
    CommandResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// ------------------------------------------------------------------ oracle

struct OracleConfig {
    std::optional<double> radius_km;
    std::optional<std::string> territory;
    double max_score = 1.25;
    std::size_t k = 5;
};

inline double oracle_haversine(double lat1, double lon1, double lat2, double lon2) {
    const double rad = std::numbers::pi / 180.0;
    const double a = std::sin((lat2 - lat1) * rad / 2.0);
    const double b = std::sin((lon2 - lon1) * rad / 2.0);
    double h = a * a + std::cos(lat1 * rad) * std::cos(lat2 * rad) * b * b;
    h = std::min(1.0, std::max(0.0, h));
    return 2.0 * 6371.0088 * std::asin(std::sqrt(h));
}

inline double oracle_score(const std::vector<double>& u, const std::vector<double>& v) {
    double dot = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    double c = dot / (std::sqrt(uu) * std::sqrt(vv));
    if (c < 1e-6) c = 1e-6;
    if (c > 1.0) c = 1.0;
    return 1.0 / c;
}

/// Nested-loop recommendation for one buyer, straight to JSON.
inline nlohmann::ordered_json oracle_recommend(const std::vector<synergy::facilities::Facility>& all,
                                               const synergy::ioanalysis::SupplierRelationTable& relations,
                                               const std::map<std::string, std::vector<double>>& vectors,
                                               const synergy::facilities::Facility& buyer, const OracleConfig& cfg) {
    using nlohmann::ordered_json;
    const bool spatial = cfg.radius_km.has_value() && buyer.coordinates.has_value();
    const std::string territory = cfg.territory ? *cfg.territory : buyer.territory;

    struct Cand {
        const synergy::facilities::Facility* f;
        std::optional<double> d;
    };
    std::vector<Cand> cands;
    for (const auto& f : all) {
        if (f.id == buyer.id) continue;
        if (spatial) {
            if (!f.coordinates) continue;
            const double d = oracle_haversine(buyer.coordinates->lat, buyer.coordinates->lon, f.coordinates->lat,
                                              f.coordinates->lon);
            if (d > *cfg.radius_km) continue;
            if (cfg.territory && f.territory != *cfg.territory) continue;
            cands.push_back({&f, d});
        } else {
            if (f.territory != territory) continue;
            std::optional<double> d;
            if (buyer.coordinates && f.coordinates)
                d = oracle_haversine(buyer.coordinates->lat, buyer.coordinates->lon, f.coordinates->lat,
                                     f.coordinates->lon);
            cands.push_back({&f, d});
        }
    }
    auto dist_key = [](const std::optional<double>& d) { return d ? *d : INFINITY; };

    struct Row {
        std::string id, own, sub;
        double score, intensity;
        std::optional<double> d;
    };
    std::vector<Row> direct, alternative;
    auto it = relations.entries.find(buyer.activity_code);
    if (it != relations.entries.end()) {
        for (const auto& link : it->second)
            for (const auto& c : cands)
                if (c.f->activity_code == link.supplier) direct.push_back({c.f->id, "", link.supplier, 0, link.intensity, c.d});
        std::sort(direct.begin(), direct.end(), [&](const Row& a, const Row& b) {
            if (a.intensity != b.intensity) return a.intensity > b.intensity;
            if (dist_key(a.d) != dist_key(b.d)) return dist_key(a.d) < dist_key(b.d);
            return a.id < b.id;
        });
        std::set<std::string> taken;
        for (const auto& r : direct) taken.insert(r.id);

        auto alt_less = [&](const Row& a, const Row& b) {
            if (a.score != b.score) return a.score < b.score;
            if (a.intensity != b.intensity) return a.intensity > b.intensity;
            if (dist_key(a.d) != dist_key(b.d)) return dist_key(a.d) < dist_key(b.d);
            if (a.id != b.id) return a.id < b.id;
            return a.sub < b.sub;
        };
        std::map<std::string, Row> best;
        for (const auto& link : it->second) {
            auto sv = vectors.find(link.supplier);
            if (sv == vectors.end()) continue;
            std::vector<std::pair<double, std::string>> neigh;
            for (const auto& [code, v] : vectors) {
                if (code == link.supplier) continue;
                const double s = oracle_score(sv->second, v);
                if (s <= cfg.max_score) neigh.emplace_back(s, code);
            }
            std::sort(neigh.begin(), neigh.end());
            if (neigh.size() > cfg.k) neigh.resize(cfg.k);
            for (const auto& [s, code] : neigh)
                for (const auto& c : cands) {
                    if (c.f->activity_code != code || taken.count(c.f->id)) continue;
                    Row r{c.f->id, code, link.supplier, s, link.intensity, c.d};
                    auto b = best.find(r.id);
                    if (b == best.end()) best.emplace(r.id, r);
                    else if (alt_less(r, b->second)) b->second = r;
                }
        }
        for (const auto& [id, r] : best) alternative.push_back(r);
        std::sort(alternative.begin(), alternative.end(), alt_less);
    }

    auto dist_json = [](const std::optional<double>& d) { return d ? ordered_json(*d) : ordered_json(nullptr); };
    ordered_json out;
    out["buyer"] = buyer.id;
    out["direct"] = ordered_json::array();
    for (const auto& r : direct)
        out["direct"].push_back({{"facility", r.id},
                                 {"supplier_activity", r.sub},
                                 {"intensity", r.intensity},
                                 {"distance_km", dist_json(r.d)}});
    out["alternative"] = ordered_json::array();
    for (const auto& r : alternative)
        out["alternative"].push_back({{"facility", r.id},
                                      {"own_activity", r.own},
                                      {"substituted_supplier_activity", r.sub},
                                      {"proximity_score", r.score},
                                      {"intensity", r.intensity},
                                      {"distance_km", dist_json(r.d)}});
    return out;
}

}  // namespace testing
