#include "synergy/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

#include "synergy/complexity.hpp"
#include "synergy/csv.hpp"
#include "synergy/embedding.hpp"
#include "synergy/error.hpp"
#include "synergy/facilities.hpp"
#include "synergy/geocoder.hpp"
#include "synergy/hash.hpp"
#include "synergy/ioanalysis.hpp"
#include "synergy/nomenclature.hpp"
#include "synergy/serialize.hpp"

namespace synergy::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

Config Config::from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    Config c;
    auto number = [](const json& v, const std::string& key) {
        if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
        return v.get<double>();
    };
    auto count = [&](const json& v, const std::string& key) {
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ConfigError("config key '" + key + "' must be a non-negative integer");
        return v.get<long long>();
    };
    auto text = [](const json& v, const std::string& key) {
        if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
        return v.get<std::string>();
    };
    for (const auto& [key, v] : doc.items()) {
        if (key == "radius_km") c.radius_km = number(v, key);
        else if (key == "max_score") c.max_score = number(v, key);
        else if (key == "k_per_activity") c.k_per_activity = static_cast<std::size_t>(count(v, key));
        else if (key == "min_intensity") c.min_intensity = number(v, key);
        else if (key == "top_k") c.top_k = static_cast<std::size_t>(count(v, key));
        else if (key == "mds.m") c.mds_m = static_cast<int>(count(v, key));
        else if (key == "mds.max_iters") c.mds_max_iters = static_cast<int>(count(v, key));
        else if (key == "mds.rel_tol") c.mds_rel_tol = number(v, key);
        else if (key == "mds.restarts") c.mds_restarts = static_cast<int>(count(v, key));
        else if (key == "seed") c.seed = static_cast<std::uint64_t>(count(v, key));
        else if (key == "rca_threshold") c.rca_threshold = number(v, key);
        else if (key == "country") c.country = text(v, key);
        else if (key == "rank_by") c.rank_by = text(v, key);
        else if (key == "territory") c.territory = v.is_null() ? std::nullopt : std::optional(text(v, key));
        else if (key == "geocoder.url") c.geocoder_url = text(v, key);
        else if (key == "geocoder.concurrency") c.geocoder_concurrency = static_cast<std::size_t>(count(v, key));
        else if (key == "api.host") c.api_host = text(v, key);
        else if (key == "api.port") c.api_port = static_cast<int>(count(v, key));
        else if (key == "api.cors_origin") c.cors_origin = text(v, key);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    if (c.radius_km < 0.0) throw ConfigError("radius_km must be non-negative");
    if (c.mds_m < 1) throw ConfigError("mds.m must be at least 1");
    if (c.mds_restarts < 1) throw ConfigError("mds.restarts must be at least 1");
    if (!(c.rca_threshold > 0.0)) throw ConfigError("rca_threshold must be positive");
    if (c.rank_by != "coefficient" && c.rank_by != "flow") throw ConfigError("rank_by must be 'coefficient' or 'flow'");
    return c;
}

Config Config::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    auto doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
    return from_json(doc);
}

recommender::RecommendConfig Config::recommend_config() const {
    recommender::RecommendConfig rc;
    rc.radius_km = radius_km;
    rc.territory = territory;
    rc.max_score = max_score;
    rc.k_per_activity = k_per_activity;
    return rc;
}

// ---------------------------------------------------------------- store

ArtifactStore::ArtifactStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
    std::ifstream in(manifest_path());
    if (!in) return;
    auto doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw CorruptionError("manifest " + manifest_path().string() + " is not valid JSON");
    if (doc.contains("seed")) seed_ = doc["seed"].get<std::uint64_t>();
    const auto artifacts = doc.value("artifacts", json::object());
    for (const auto& [name, r] : artifacts.items()) {
        ArtifactRecord rec;
        rec.path = r.at("path").get<std::string>();
        rec.hash = r.at("hash").get<std::string>();
        rec.stage = r.at("stage").get<std::string>();
        rec.params = r.at("params");
        rec.upstream = r.at("upstream").get<std::map<std::string, std::string>>();
        rec.metadata = r.value("metadata", json::object());
        artifacts_.emplace(name, std::move(rec));
    }
}

const ArtifactRecord* ArtifactStore::find(const std::string& name) const {
    auto it = artifacts_.find(name);
    return it == artifacts_.end() ? nullptr : &it->second;
}

void ArtifactStore::record(const std::string& name, ArtifactRecord rec) { artifacts_[name] = std::move(rec); }

void ArtifactStore::save() const {
    json doc;
    if (seed_) doc["seed"] = *seed_;
    doc["artifacts"] = json::object();
    for (const auto& [name, r] : artifacts_)
        doc["artifacts"][name] = {{"path", r.path},         {"hash", r.hash},         {"stage", r.stage},
                                  {"params", r.params},     {"upstream", r.upstream}, {"metadata", r.metadata}};
    fs::create_directories(root());
    const auto tmp = manifest_path().string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << doc.dump(2) << '\n';
        if (!out) throw std::runtime_error("cannot write " + tmp);
    }
    fs::rename(tmp, manifest_path());
}

StoreLock::StoreLock(const fs::path& root) : path_(root / ".lock") {
    fs::create_directories(root);
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw std::runtime_error("artifact store is locked by another run (remove " + path_.string() +
                                     " if that run is gone)");
        throw std::runtime_error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    auto pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

StoreLock::~StoreLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

// ---------------------------------------------------------------- stages

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct StageContext {
    const ArtifactStore& store;
    const Config& cfg;
    json metadata = json::object();

    std::istringstream input(const std::string& file) const {
        return std::istringstream(read_file(store.data_dir() / file));
    }
    std::istringstream artifact(const std::string& name) const {
        return std::istringstream(read_file(store.verified(name)));
    }
};

using Outputs = std::map<std::string, std::string>;

struct StageSpec {
    std::string name;
    std::vector<std::string> inputs;
    /// artifact -> producing stage
    std::vector<std::pair<std::string, std::string>> upstream;
    std::vector<std::string> outputs;
    std::function<json(const Config&)> params;
    std::function<Outputs(StageContext&)> run;
};

Outputs run_proximity(StageContext& ctx) {
    auto in = ctx.input("exports.csv");
    const auto exports = complexity::read_exports_csv(in);
    const auto m = complexity::binarize(complexity::compute_rca(exports), ctx.cfg.rca_threshold);
    const auto phi = complexity::product_proximity(m);
    std::ostringstream out;
    complexity::write_proximity_csv(out, phi);
    ctx.metadata["countries"] = exports.countries.size();
    ctx.metadata["products"] = exports.products.size();
    return {{"proximity.csv", out.str()}};
}

Outputs run_embed(StageContext& ctx) {
    auto in = ctx.artifact("proximity.csv");
    const auto d = embedding::to_dissimilarity(complexity::read_proximity_csv(in));
    embedding::MdsOptions opts{ctx.cfg.mds_max_iters, ctx.cfg.mds_rel_tol, ctx.cfg.seed, ctx.cfg.mds_restarts};
    const auto result = embedding::mds_embed(d, ctx.cfg.mds_m, opts);
    std::ostringstream out;
    embedding::write_embedding_csv(out, result.embedding);
    ctx.metadata["stress"] = result.stress;
    ctx.metadata["iterations"] = result.iterations;
    ctx.metadata["converged"] = result.converged;
    ctx.metadata["start"] = result.start;
    return {{"embedding.csv", out.str()}};
}

Outputs run_weights(StageContext& ctx) {
    using namespace nomenclature;
    auto bea_naics_in = ctx.input("bea_naics.csv");
    auto naics_nace_in = ctx.input("naics_nace.csv");
    const auto chain = build_weighted_chain(parse_correspondence(bea_naics_in, "BEA", "NAICS"),
                                            parse_correspondence(naics_nace_in, "NAICS", "NACE2"));

    auto nace_cpa_in = ctx.input("nace_cpa.csv");
    auto cpa_hs_in = ctx.input("cpa_hs.csv");
    const auto activity_products =
        compose_mappings(WeightedMapping::from_occurrences(parse_correspondence(nace_cpa_in, "NACE2", "CPA21")),
                         WeightedMapping::from_occurrences(parse_correspondence(cpa_hs_in, "CPA21", "HS2017")));

    auto exports_in = ctx.input("exports.csv");
    const auto weights =
        product_weights(complexity::read_exports_csv(exports_in), activity_products.mapping, ctx.cfg.country);

    std::ostringstream mapping, unmapped, lambdas;
    write_mapping_csv(mapping, chain.mapping);
    auto all_unmapped = chain.unmapped;
    all_unmapped.insert(all_unmapped.end(), activity_products.unmapped.begin(), activity_products.unmapped.end());
    write_unmapped_csv(unmapped, all_unmapped);
    write_product_weights_csv(lambdas, weights.table);
    ctx.metadata["uniform_fallback"] = weights.uniform_fallback;
    ctx.metadata["bea_lost_mass"] = chain.lost_mass;
    return {{"bea_nace.csv", mapping.str()}, {"unmapped.csv", unmapped.str()}, {"product_weights.csv", lambdas.str()}};
}

Outputs run_activity_proximity(StageContext& ctx) {
    auto emb_in = ctx.artifact("embedding.csv");
    auto w_in = ctx.artifact("product_weights.csv");
    const auto e = embedding::read_embedding_csv(emb_in);
    const auto w = nomenclature::read_product_weights_csv(w_in, ctx.cfg.country);
    const auto vectors = embedding::activity_vectors(e, w);
    std::ostringstream v_out, p_out;
    embedding::write_activity_vectors_csv(v_out, vectors.set);
    embedding::write_activity_proximity_csv(p_out, embedding::activity_proximity_matrix(vectors.set));
    ctx.metadata["omitted"] = vectors.omitted;
    return {{"activity_vectors.csv", v_out.str()}, {"activity_proximity.csv", p_out.str()}};
}

Outputs run_io_project(StageContext& ctx) {
    auto flows_in = ctx.input("io_flows.csv");
    auto industries_in = ctx.input("io_industries.csv");
    const auto load = ioanalysis::read_io_table(flows_in, industries_in);
    auto map_in = ctx.artifact("bea_nace.csv");
    const auto mapping = nomenclature::read_mapping_csv(map_in, "BEA", "NACE2");

    const auto coefficients = ioanalysis::technical_coefficients(load.table);
    const auto projected = ioanalysis::project_to_nace(coefficients, mapping);
    // Flow ranking projects z instead of A; intensities are then currency flows.
    const auto ranked = ctx.cfg.rank_by == "flow"
                            ? ioanalysis::project_to_nace({load.table.industries, load.table.flows}, mapping).matrix
                            : projected.matrix;
    const auto relations = ioanalysis::supplier_relations(ranked, ctx.cfg.min_intensity, ctx.cfg.top_k);

    std::ostringstream coef;
    coef << "supplier,buyer,coefficient\n";
    const auto& a = projected.matrix;
    for (Eigen::Index i = 0; i < a.a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.a.cols(); ++j)
            if (a.a(i, j) != 0.0) csv::write_row(coef, {a.industries[i], a.industries[j], csv::fixed(a.a(i, j), 9)});

    ctx.metadata["dropped_zero_output"] = load.report.dropped_zero_output;
    ctx.metadata["clamped_negative_flows"] = load.report.clamped_negative_flows;
    ctx.metadata["unmapped_industries"] = projected.unmapped;
    ctx.metadata["invertibility_violations"] = ioanalysis::invertibility_violations(coefficients);
    return {{"supplier_relations.json", ioanalysis::relations_to_json(relations)}, {"nace_coefficients.csv", coef.str()}};
}

Outputs run_ingest(StageContext& ctx) {
    auto in = ctx.input("facilities.csv");
    auto ingest = facilities::ingest_facilities(in);

    facilities::GeocodeCache cache;
    const auto cache_path = ctx.store.data_dir() / "geocode_cache.csv";
    cache.load(cache_path);
    std::unique_ptr<facilities::GeocoderClient> client;
    if (ctx.cfg.geocoder_url.empty())
        client = std::make_unique<facilities::NullGeocoder>();
    else
        client = std::make_unique<facilities::HttpGeocoder>(ctx.cfg.geocoder_url);
    const auto stats =
        facilities::geocode_missing(ingest.facilities, *client, cache, ctx.cfg.geocoder_concurrency);
    if (!ctx.cfg.geocoder_url.empty()) cache.save(cache_path);

    facilities::Registry registry(std::move(ingest.facilities));
    std::ostringstream reg, report;
    facilities::write_registry_csv(reg, registry);
    facilities::write_ingest_report_csv(report, ingest.report);
    ctx.metadata["facilities"] = registry.size();
    ctx.metadata["rejected_rows"] = ingest.report.size();
    ctx.metadata["geocode_cache_hits"] = stats.cache_hits;
    ctx.metadata["geocoded"] = stats.resolved;
    ctx.metadata["geocode_failed"] = stats.failed;
    return {{"registry.csv", reg.str()}, {"ingest_report.csv", report.str()}};
}

Outputs run_graph(StageContext& ctx) {
    const auto engine = load_engine(ctx.store);
    const auto graph = engine.build_synergy_graph(ctx.cfg.recommend_config(), ctx.cfg.territory);
    ctx.metadata["nodes"] = graph.nodes.size();
    ctx.metadata["edges"] = graph.edges.size();
    return {{"graph.json", serialize::dump(serialize::to_json(graph))},
            {"graph_edges.csv", serialize::graph_edges_csv(graph)}};
}

const std::vector<StageSpec>& stages() {
    static const std::vector<StageSpec> specs = {
        {"proximity", {"exports.csv"}, {}, {"proximity.csv"},
         [](const Config& c) { return json{{"rca_threshold", c.rca_threshold}}; }, run_proximity},
        {"embed", {}, {{"proximity.csv", "proximity"}}, {"embedding.csv"},
         [](const Config& c) {
             return json{{"mds.m", c.mds_m}, {"mds.max_iters", c.mds_max_iters}, {"mds.rel_tol", c.mds_rel_tol},
                         {"mds.restarts", c.mds_restarts}, {"seed", c.seed}};
         },
         run_embed},
        {"weights", {"bea_naics.csv", "naics_nace.csv", "nace_cpa.csv", "cpa_hs.csv", "exports.csv"}, {},
         {"bea_nace.csv", "unmapped.csv", "product_weights.csv"},
         [](const Config& c) { return json{{"country", c.country}}; }, run_weights},
        {"activity-proximity", {},
         {{"embedding.csv", "embed"}, {"product_weights.csv", "weights"}},
         {"activity_vectors.csv", "activity_proximity.csv"},
         [](const Config& c) { return json{{"country", c.country}}; }, run_activity_proximity},
        {"io-project", {"io_flows.csv", "io_industries.csv"}, {{"bea_nace.csv", "weights"}},
         {"supplier_relations.json", "nace_coefficients.csv"},
         [](const Config& c) {
             return json{{"min_intensity", c.min_intensity}, {"top_k", c.top_k}, {"rank_by", c.rank_by}};
         },
         run_io_project},
        {"ingest", {"facilities.csv"}, {}, {"registry.csv", "ingest_report.csv"},
         [](const Config& c) { return json{{"geocoder.url", c.geocoder_url}}; }, run_ingest},
        {"graph", {},
         {{"registry.csv", "ingest"}, {"supplier_relations.json", "io-project"},
          {"activity_vectors.csv", "activity-proximity"}},
         {"graph.json", "graph_edges.csv"},
         [](const Config& c) {
             return json{{"radius_km", c.radius_km},
                         {"max_score", c.max_score},
                         {"k_per_activity", c.k_per_activity},
                         {"territory", c.territory ? json(*c.territory) : json(nullptr)}};
         },
         run_graph},
    };
    return specs;
}

}  // namespace

std::filesystem::path ArtifactStore::verified(const std::string& name) const {
    const auto* rec = find(name);
    if (!rec) {
        for (const auto& s : stages())
            for (const auto& out : s.outputs)
                if (out == name) throw MissingUpstreamError(name, s.name);
        throw MissingUpstreamError(name, "all");
    }
    const auto path = root() / rec->path;
    if (!fs::exists(path)) throw MissingUpstreamError(name, rec->stage);
    if (sha256_file(path) != rec->hash)
        throw CorruptionError("artifact '" + name + "' does not match its manifest hash; rebuild with --force");
    return path;
}

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& s : stages()) n.push_back(s.name);
        return n;
    }();
    return names;
}

StageOutcome run_stage(ArtifactStore& store, const std::string& name, const Config& cfg, const RunOptions& opts) {
    const StageSpec* spec = nullptr;
    for (const auto& s : stages())
        if (s.name == name) spec = &s;
    if (!spec) throw ConfigError("unknown stage '" + name + "'");

    std::map<std::string, std::string> upstream;
    for (const auto& file : spec->inputs) {
        const auto path = store.data_dir() / file;
        if (!fs::exists(path)) throw ConfigError("missing input file " + path.string());
        upstream["input:" + file] = sha256_file(path);
    }
    for (const auto& [artifact, stage] : spec->upstream) {
        store.verified(artifact);
        upstream[artifact] = store.find(artifact)->hash;
    }
    const json params = spec->params(cfg);

    StageOutcome outcome{name, false, {}};
    if (!opts.force) {
        bool fresh = true;
        for (const auto& out : spec->outputs) {
            const auto* rec = store.find(out);
            if (!rec || rec->stage != name || rec->params != params || rec->upstream != upstream ||
                !fs::exists(store.root() / rec->path)) {
                fresh = false;
                break;
            }
        }
        if (fresh) {
            for (const auto& out : spec->outputs) {
                store.verified(out);
                outcome.outputs[out] = store.find(out)->hash;
            }
            outcome.cache_hit = true;
            return outcome;
        }
    }

    StageContext ctx{store, cfg};
    const auto outputs = spec->run(ctx);
    fs::create_directories(store.root());
    for (const auto& out : spec->outputs) {
        const auto& bytes = outputs.at(out);
        {
            std::ofstream file(store.root() / out, std::ios::binary | std::ios::trunc);
            file << bytes;
            if (!file) throw std::runtime_error("cannot write artifact " + out);
        }
        ArtifactRecord rec{out, sha256_hex(bytes), name, params, upstream, ctx.metadata};
        outcome.outputs[out] = rec.hash;
        store.record(out, std::move(rec));
    }
    store.set_seed(cfg.seed);
    store.save();
    return outcome;
}

std::vector<StageOutcome> run_all(ArtifactStore& store, const Config& cfg, const RunOptions& opts) {
    std::vector<StageOutcome> out;
    for (const auto& name : stage_names()) out.push_back(run_stage(store, name, cfg, opts));
    return out;
}

recommender::Engine load_engine(const ArtifactStore& store) {
    std::ifstream reg_in(store.verified("registry.csv"));
    auto registry = facilities::read_registry_csv(reg_in);
    auto relations = ioanalysis::relations_from_json(read_file(store.verified("supplier_relations.json")));
    std::ifstream vec_in(store.verified("activity_vectors.csv"));
    auto vectors = embedding::read_activity_vectors_csv(vec_in);
    return recommender::Engine(std::move(registry), std::move(relations), embedding::ActivitySpace(std::move(vectors)));
}

}  // namespace synergy::pipeline
