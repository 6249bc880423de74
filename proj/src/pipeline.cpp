#include "ktrace/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "ktrace/error.hpp"
#include "ktrace/simulator.hpp"

namespace ktrace::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); }

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) invalid(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            invalid("unknown key '" + key + "' in " + where);
    }
}

// Assigns obj[key] to out when present.
template <typename T>
bool read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return false;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        invalid("'" + std::string(key) + "' in " + where + " has the wrong type");
    }
    return true;
}

fs::path resolve(const json& doc, const char* key, const fs::path& base_dir) {
    std::string text;
    if (!read(doc, key, text, "config") || text.empty()) invalid("config is missing '" + std::string(key) + "'");
    const fs::path p(text);
    return p.is_absolute() ? p : base_dir / p;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
    return in;
}

// Files created so far by one command; removed again unless committed.
class OutputSet {
public:
    ~OutputSet() {
        if (committed_) return;
        std::error_code ec;
        for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
        if (created_dir_) fs::remove(*created_dir_, ec);  // only succeeds if empty
    }

    void prepare_dir(const fs::path& dir) {
        std::error_code ec;
        if (fs::is_directory(dir, ec)) return;
        if (!fs::create_directories(dir, ec) || ec)
            throw Error(ErrorKind::IoError, "cannot create directory '" + dir.string() + "'");
        created_dir_ = dir;
    }

    template <typename Body>
    void write(const fs::path& path, Body&& body) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "' for writing");
        files_.push_back(path);
        body(out);
        out.close();
        if (!out) throw Error(ErrorKind::IoError, "failed writing '" + path.string() + "'");
    }

    void commit() { committed_ = true; }
    const std::vector<fs::path>& files() const { return files_; }

private:
    std::vector<fs::path> files_;
    std::optional<fs::path> created_dir_;
    bool committed_ = false;
};

template <typename F>
auto stage(const char* module, const char* step, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(module) + " " + step + ": " + e.detail());
    }
}

bool selected(const RunConfig& config, Estimator e) {
    return std::find(config.estimators.begin(), config.estimators.end(), e) != config.estimators.end();
}

std::size_t count_invalid(const std::vector<AttemptPrediction>& predictions) {
    return static_cast<std::size_t>(
        std::count_if(predictions.begin(), predictions.end(), [](const auto& p) { return !p.valid(); }));
}

}  // namespace

void RunConfig::validate() const {
    if (interactions.empty() || posttest.empty() || output.empty()) invalid("input and output paths are required");
    const auto a = interactions.lexically_normal(), b = posttest.lexically_normal(), c = output.lexically_normal();
    if (a == b || a == c || b == c) invalid("interactions, posttest and output paths must be distinct");
    if (estimators.empty()) invalid("no estimators selected");
    std::set<Estimator> unique(estimators.begin(), estimators.end());
    if (unique.size() != estimators.size()) invalid("estimator selected twice");
    if (!(bkt.bounds.floor > 0.0 && bkt.bounds.floor < bkt.bounds.guess_slip_ceiling &&
          bkt.bounds.guess_slip_ceiling <= bkt.bounds.ceiling && bkt.bounds.ceiling < 1.0))
        invalid("bkt: bounds must satisfy 0 < floor < guess_slip_ceiling <= ceiling < 1");
    if (!(bkt.grid_step > 0.0) || !(bkt.refine_tolerance > 0.0))
        invalid("bkt: grid_step and refine_tolerance must be positive");
    if (!(pfa.tolerance > 0.0) || pfa.max_iterations < 1 || !(pfa.magnitude_cap > 0.0))
        invalid("pfa: tolerance, max_iterations and magnitude_cap must be positive");
    if (!(stats.q > 0.0 && stats.q < 1.0)) invalid("stats: q must lie in (0, 1)");
    dkt.validate();
    dkvmn.validate();
}

void RunConfig::set_seed(std::uint64_t value) {
    seed = value;
    if (!dkt_seed_explicit) dkt.seed = value;
    if (!dkvmn_seed_explicit) dkvmn.seed = value;
}

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
    check_keys(doc, {"interactions", "posttest", "output", "seed", "estimators", "bkt", "pfa", "dkt", "dkvmn", "stats"},
               "config");
    RunConfig cfg;
    cfg.interactions = resolve(doc, "interactions", base_dir);
    cfg.posttest = resolve(doc, "posttest", base_dir);
    cfg.output = resolve(doc, "output", base_dir);
    std::uint64_t seed = cfg.seed;
    read(doc, "seed", seed, "config");

    std::vector<std::string> names;
    if (read(doc, "estimators", names, "config")) {
        cfg.estimators.clear();
        for (const auto& name : names) {
            try {
                cfg.estimators.push_back(parse_estimator(name));
            } catch (const Error&) {
                invalid("unknown estimator '" + name + "'");
            }
        }
    }

    if (doc.contains("bkt")) {
        const json& b = doc.at("bkt");
        check_keys(b, {"floor", "guess_slip_ceiling", "ceiling", "grid_step", "refine_tolerance"}, "bkt");
        read(b, "floor", cfg.bkt.bounds.floor, "bkt");
        read(b, "guess_slip_ceiling", cfg.bkt.bounds.guess_slip_ceiling, "bkt");
        read(b, "ceiling", cfg.bkt.bounds.ceiling, "bkt");
        read(b, "grid_step", cfg.bkt.grid_step, "bkt");
        read(b, "refine_tolerance", cfg.bkt.refine_tolerance, "bkt");
    }
    if (doc.contains("pfa")) {
        const json& p = doc.at("pfa");
        check_keys(p, {"tolerance", "max_iterations", "magnitude_cap"}, "pfa");
        read(p, "tolerance", cfg.pfa.tolerance, "pfa");
        read(p, "max_iterations", cfg.pfa.max_iterations, "pfa");
        read(p, "magnitude_cap", cfg.pfa.magnitude_cap, "pfa");
    }
    if (doc.contains("dkt")) {
        const json& d = doc.at("dkt");
        check_keys(d, {"hidden_size", "learning_rate", "epochs", "lambda_r", "lambda_w1", "lambda_w2", "seed",
                       "max_grad_norm"},
                   "dkt");
        read(d, "hidden_size", cfg.dkt.hidden_size, "dkt");
        read(d, "learning_rate", cfg.dkt.learning_rate, "dkt");
        read(d, "epochs", cfg.dkt.epochs, "dkt");
        read(d, "lambda_r", cfg.dkt.lambda_r, "dkt");
        read(d, "lambda_w1", cfg.dkt.lambda_w1, "dkt");
        read(d, "lambda_w2", cfg.dkt.lambda_w2, "dkt");
        read(d, "max_grad_norm", cfg.dkt.max_grad_norm, "dkt");
        cfg.dkt_seed_explicit = read(d, "seed", cfg.dkt.seed, "dkt");
    }
    if (doc.contains("dkvmn")) {
        const json& d = doc.at("dkvmn");
        check_keys(d, {"memory_slots", "key_dim", "value_dim", "summary_dim", "learning_rate", "epochs", "seed",
                       "max_grad_norm"},
                   "dkvmn");
        read(d, "memory_slots", cfg.dkvmn.memory_slots, "dkvmn");
        read(d, "key_dim", cfg.dkvmn.key_dim, "dkvmn");
        read(d, "value_dim", cfg.dkvmn.value_dim, "dkvmn");
        read(d, "summary_dim", cfg.dkvmn.summary_dim, "dkvmn");
        read(d, "learning_rate", cfg.dkvmn.learning_rate, "dkvmn");
        read(d, "epochs", cfg.dkvmn.epochs, "dkvmn");
        read(d, "max_grad_norm", cfg.dkvmn.max_grad_norm, "dkvmn");
        cfg.dkvmn_seed_explicit = read(d, "seed", cfg.dkvmn.seed, "dkvmn");
    }
    if (doc.contains("stats")) {
        const json& s = doc.at("stats");
        check_keys(s, {"q", "family", "procedure", "table2_signs"}, "stats");
        read(s, "q", cfg.stats.q, "stats");
        std::string family = "global", procedure = "benjamini-hochberg";
        read(s, "family", family, "stats");
        read(s, "procedure", procedure, "stats");
        if (family == "global") cfg.stats.family = stats::FdrFamily::Global;
        else if (family == "per-skill") cfg.stats.family = stats::FdrFamily::PerSkill;
        else invalid("stats: unknown family '" + family + "' (global, per-skill)");
        if (procedure == "benjamini-hochberg") cfg.stats.procedure = stats::FdrProcedure::BenjaminiHochberg;
        else if (procedure == "benjamini-yekutieli") cfg.stats.procedure = stats::FdrProcedure::BenjaminiYekutieli;
        else invalid("stats: unknown procedure '" + procedure + "'");
        read(s, "table2_signs", cfg.table2_signs, "stats");
    }
    cfg.set_seed(seed);
    cfg.validate();
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in = open_input(path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        invalid("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

json effective_settings(const RunConfig& c) {
    json est = json::array();
    for (Estimator e : c.estimators) est.push_back(std::string(estimator_name(e)));
    return {
        {"seed", c.seed},
        {"estimators", est},
        {"bkt",
         {{"floor", c.bkt.bounds.floor},
          {"guess_slip_ceiling", c.bkt.bounds.guess_slip_ceiling},
          {"ceiling", c.bkt.bounds.ceiling},
          {"grid_step", c.bkt.grid_step},
          {"refine_tolerance", c.bkt.refine_tolerance}}},
        {"pfa",
         {{"tolerance", c.pfa.tolerance},
          {"max_iterations", c.pfa.max_iterations},
          {"magnitude_cap", c.pfa.magnitude_cap}}},
        {"dkt",
         {{"hidden_size", c.dkt.hidden_size},
          {"learning_rate", c.dkt.learning_rate},
          {"epochs", c.dkt.epochs},
          {"lambda_r", c.dkt.lambda_r},
          {"lambda_w1", c.dkt.lambda_w1},
          {"lambda_w2", c.dkt.lambda_w2},
          {"max_grad_norm", c.dkt.max_grad_norm},
          {"seed", c.dkt.seed}}},
        {"dkvmn",
         {{"memory_slots", c.dkvmn.memory_slots},
          {"key_dim", c.dkvmn.key_dim},
          {"value_dim", c.dkvmn.value_dim},
          {"summary_dim", c.dkvmn.summary_dim},
          {"learning_rate", c.dkvmn.learning_rate},
          {"epochs", c.dkvmn.epochs},
          {"max_grad_norm", c.dkvmn.max_grad_norm},
          {"seed", c.dkvmn.seed}}},
        {"stats",
         {{"q", c.stats.q},
          {"family", c.stats.family == stats::FdrFamily::Global ? "global" : "per-skill"},
          {"procedure", c.stats.procedure == stats::FdrProcedure::BenjaminiHochberg ? "benjamini-hochberg"
                                                                                       : "benjamini-yekutieli"},
          {"table2_signs", c.table2_signs}}},
    };
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunResult run(const RunConfig& config) {
    stage("cli", "config", [&] { config.validate(); });

    OutputSet outputs;
    Report report;
    report.seed = config.seed;
    report.config_hash = fnv1a_hex(effective_settings(config).dump());
    report.table2_signs = config.table2_signs;

    const auto records = stage("dataset", "load interactions", [&] {
        auto in = open_input(config.interactions);
        return parse_interactions(in);
    });
    const auto posttest = stage("dataset", "load posttest", [&] {
        auto in = open_input(config.posttest);
        return parse_posttest(in);
    });
    const auto firsts = stage("dataset", "first attempts", [&] { return first_attempts(records); });
    const auto catalog = SkillCatalog::from_records(firsts);
    const auto sequences = stage("dataset", "sequences", [&] { return build_sequences(firsts, catalog); });
    report.interactions = records.size();
    report.first_attempts = firsts.size();
    report.students = sequences.size();

    stage("cli", "output", [&] { outputs.prepare_dir(config.output); });
    const fs::path& dir = config.output;
    std::map<Estimator, KnowledgeTable> tables;

    if (selected(config, Estimator::Bkt) || selected(config, Estimator::MeanBkt)) {
        const auto params = stage("bkt", "fit", [&] { return bkt::fit_all(sequences, catalog, config.bkt); });
        const auto traces = stage("bkt", "trace", [&] { return bkt::trace_all(sequences, catalog, params); });
        tables.emplace(Estimator::Bkt, final_estimate_bkt(traces));
        tables.emplace(Estimator::MeanBkt, mean_estimate_bkt(traces));
        stage("bkt", "write", [&] { outputs.write(dir / "bkt_params.csv", [&](std::ostream& o) { bkt::write_params(o, params); }); });
    }
    if (selected(config, Estimator::Pfa) || selected(config, Estimator::MeanPfa)) {
        const auto params = stage("pfa", "fit", [&] { return pfa::fit(sequences, catalog, config.pfa); });
        stage("pfa", "estimate", [&] {
            tables.emplace(Estimator::Pfa, final_estimate_pfa(sequences, params));
            tables.emplace(Estimator::MeanPfa, mean_estimate_pfa(sequences, params));
        });
        stage("pfa", "write", [&] { outputs.write(dir / "pfa_params.csv", [&](std::ostream& o) { pfa::write_params(o, params); }); });
    }
    if (selected(config, Estimator::MeanDkt)) {
        const auto trained = stage("dkt", "train", [&] { return dkt::train(sequences, catalog.size(), config.dkt); });
        std::vector<AttemptPrediction> predictions;
        for (const auto& seq : sequences) {
            auto p = dkt::predict_attempts(trained.model, seq);
            predictions.insert(predictions.end(), p.begin(), p.end());
        }
        report.invalid_predictions["DKT"] = count_invalid(predictions);
        tables.emplace(Estimator::MeanDkt, mean_aggregate(predictions, std::string(estimator_name(Estimator::MeanDkt))));
        stage("dkt", "write", [&] {
            outputs.write(dir / "dkt_checkpoint.json",
                          [&](std::ostream& o) { dkt::save_checkpoint(o, trained.model, config.dkt); });
        });
    }
    if (selected(config, Estimator::MeanDkvmn)) {
        const auto trained =
            stage("dkvmn", "train", [&] { return dkvmn::train(sequences, catalog.size(), config.dkvmn); });
        std::vector<AttemptPrediction> predictions;
        for (const auto& seq : sequences) {
            auto p = dkvmn::predict_attempts(trained.model, seq);
            predictions.insert(predictions.end(), p.begin(), p.end());
        }
        report.invalid_predictions["DKVMN"] = count_invalid(predictions);
        tables.emplace(Estimator::MeanDkvmn,
                       mean_aggregate(predictions, std::string(estimator_name(Estimator::MeanDkvmn))));
        stage("dkvmn", "write", [&] {
            outputs.write(dir / "dkvmn_checkpoint.json",
                          [&](std::ostream& o) { dkvmn::save_checkpoint(o, trained.model, config.dkvmn); });
        });
    }

    std::vector<KnowledgeTable> ordered;
    for (Estimator e : kAllEstimators)
        if (selected(config, e)) ordered.push_back(tables.at(e));

    report.results = stage("stats", "compare", [&] { return stats::compare_all(ordered, posttest, config.stats); });
    report.generated_at = utc_timestamp();

    stage("cli", "write", [&] {
        outputs.write(dir / "estimates.csv", [&](std::ostream& o) { write_knowledge_csv(o, ordered); });
        outputs.write(dir / "correlations.csv",
                      [&](std::ostream& o) { stats::write_correlations_csv(o, report.results); });
        outputs.write(dir / "comparisons.csv",
                      [&](std::ostream& o) { stats::write_comparisons_csv(o, report.results); });
        outputs.write(dir / "report.json", [&](std::ostream& o) { o << report_to_json(report).dump(2) << '\n'; });
    });

    outputs.commit();
    return {std::move(report), outputs.files()};
}

Scenario parse_scenario(const std::string& name) {
    if (name == "default") return Scenario::Default;
    if (name == "mastery-saturation") return Scenario::MasterySaturation;
    throw Error(ErrorKind::InvalidArgument, "unknown scenario '" + name + "' (default, mastery-saturation)");
}

std::vector<fs::path> simulate(Scenario scenario, std::uint64_t seed, const fs::path& out_dir) {
    const auto spec =
        scenario == Scenario::Default ? sim::default_scenario(seed) : sim::mastery_saturation_scenario(seed);
    const auto cohort = sim::generate_cohort(spec);
    OutputSet outputs;
    outputs.prepare_dir(out_dir);
    outputs.write(out_dir / "interactions.csv",
                  [&](std::ostream& o) { write_interactions(o, cohort.interactions); });
    outputs.write(out_dir / "posttest.csv", [&](std::ostream& o) { write_posttest(o, cohort.posttest); });
    outputs.write(out_dir / "ground_truth.csv", [&](std::ostream& o) { sim::write_ground_truth(o, cohort.truth); });
    outputs.commit();
    return outputs.files();
}

}  // namespace ktrace::pipeline
