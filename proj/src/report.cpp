#include "ktrace/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "ktrace/error.hpp"

namespace ktrace {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "ktrace-report";
constexpr int kVersion = 1;

std::string family_name(stats::FdrFamily f) { return f == stats::FdrFamily::Global ? "global" : "per-skill"; }

std::string procedure_name(stats::FdrProcedure p) {
    return p == stats::FdrProcedure::BenjaminiHochberg ? "benjamini-hochberg" : "benjamini-yekutieli";
}

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorKind::MalformedReport, what); }

template <typename T>
T get(const json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) malformed(std::string("missing field '") + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception&) {
        malformed(std::string("field '") + key + "' has the wrong type");
    }
}

std::optional<double> get_optional_number(const json& doc, const char* key) {
    if (!doc.contains(key)) malformed(std::string("missing field '") + key + "'");
    const json& v = doc.at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_number()) malformed(std::string("field '") + key + "' is not a number");
    return v.get<double>();
}

std::string pad(const std::string& text, std::size_t width, bool right) {
    if (text.size() >= width) return text;
    const std::string fill(width - text.size(), ' ');
    return right ? fill + text : text + fill;
}

}  // namespace

std::string format_fixed2(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    std::string s(buf);
    if (s == "-0.00") s = "0.00";
    return s;
}

json report_to_json(const Report& report) {
    const auto& r = report.results;
    json doc;
    doc["format"] = kFormat;
    doc["version"] = kVersion;
    doc["generated_at"] = report.generated_at;
    doc["seed"] = report.seed;
    doc["config_hash"] = report.config_hash;
    doc["inputs"] = {{"interactions", report.interactions},
                     {"first_attempts", report.first_attempts},
                     {"students", report.students}};
    doc["invalid_predictions"] = json::object();
    for (const auto& [model, count] : report.invalid_predictions) doc["invalid_predictions"][model] = count;
    doc["options"] = {{"q", r.options.q},
                      {"family", family_name(r.options.family)},
                      {"procedure", procedure_name(r.options.procedure)},
                      {"table2_signs", report.table2_signs}};
    doc["estimators"] = r.estimators;
    doc["skills"] = r.skills;
    json correlations = json::array();
    for (const auto& c : r.correlations) {
        json row = {{"skill", c.skill}, {"estimator", c.estimator}, {"n", c.n}};
        row["r"] = c.r ? json(*c.r) : json(nullptr);
        if (!c.error.empty()) row["error"] = c.error;
        correlations.push_back(std::move(row));
    }
    doc["correlations"] = std::move(correlations);
    json comparisons = json::array();
    for (const auto& c : r.comparisons) {
        json row = {{"skill", c.skill},     {"estimator_a", c.estimator_a}, {"estimator_b", c.estimator_b},
                    {"df", c.df},           {"p", c.p},                     {"significant", c.significant},
                    {"n", c.n}};
        row["t"] = c.t ? json(*c.t) : json(nullptr);
        if (!c.error.empty()) row["error"] = c.error;
        comparisons.push_back(std::move(row));
    }
    doc["comparisons"] = std::move(comparisons);
    return doc;
}

Report report_from_json(const json& doc) {
    if (!doc.is_object()) malformed("report is not a JSON object");
    if (get<std::string>(doc, "format") != kFormat) malformed("not a ktrace report");
    if (get<int>(doc, "version") != kVersion) malformed("unsupported report version");

    Report report;
    report.generated_at = get<std::string>(doc, "generated_at");
    report.seed = get<std::uint64_t>(doc, "seed");
    report.config_hash = get<std::string>(doc, "config_hash");
    const json inputs = get<json>(doc, "inputs");
    report.interactions = get<std::size_t>(inputs, "interactions");
    report.first_attempts = get<std::size_t>(inputs, "first_attempts");
    report.students = get<std::size_t>(inputs, "students");
    report.invalid_predictions = get<std::map<std::string, std::size_t>>(doc, "invalid_predictions");

    auto& r = report.results;
    const json options = get<json>(doc, "options");
    r.options.q = get<double>(options, "q");
    const auto family = get<std::string>(options, "family");
    if (family == "global") r.options.family = stats::FdrFamily::Global;
    else if (family == "per-skill") r.options.family = stats::FdrFamily::PerSkill;
    else malformed("unknown FDR family '" + family + "'");
    const auto procedure = get<std::string>(options, "procedure");
    if (procedure == "benjamini-hochberg") r.options.procedure = stats::FdrProcedure::BenjaminiHochberg;
    else if (procedure == "benjamini-yekutieli") r.options.procedure = stats::FdrProcedure::BenjaminiYekutieli;
    else malformed("unknown FDR procedure '" + procedure + "'");
    report.table2_signs = get<bool>(options, "table2_signs");

    r.estimators = get<std::vector<std::string>>(doc, "estimators");
    if (r.estimators.empty()) malformed("report lists no estimators");
    r.skills = get<std::vector<std::string>>(doc, "skills");
    auto known = [](const std::vector<std::string>& names, const std::string& name) {
        return std::find(names.begin(), names.end(), name) != names.end();
    };

    const json correlations = get<json>(doc, "correlations");
    if (!correlations.is_array()) malformed("'correlations' is not an array");
    for (const auto& row : correlations) {
        stats::CorrelationResult c;
        c.skill = get<std::string>(row, "skill");
        c.estimator = get<std::string>(row, "estimator");
        if (!known(r.skills, c.skill)) malformed("correlation for unlisted skill '" + c.skill + "'");
        if (!known(r.estimators, c.estimator)) malformed("correlation for unlisted estimator '" + c.estimator + "'");
        c.r = get_optional_number(row, "r");
        c.n = get<std::size_t>(row, "n");
        if (row.contains("error")) c.error = get<std::string>(row, "error");
        r.correlations.push_back(std::move(c));
    }

    const json comparisons = get<json>(doc, "comparisons");
    if (!comparisons.is_array()) malformed("'comparisons' is not an array");
    for (const auto& row : comparisons) {
        stats::PairComparison c;
        c.skill = get<std::string>(row, "skill");
        c.estimator_a = get<std::string>(row, "estimator_a");
        c.estimator_b = get<std::string>(row, "estimator_b");
        if (!known(r.skills, c.skill)) malformed("comparison for unlisted skill '" + c.skill + "'");
        if (!known(r.estimators, c.estimator_a) || !known(r.estimators, c.estimator_b))
            malformed("comparison for unlisted estimator pair " + c.estimator_a + "/" + c.estimator_b);
        c.t = get_optional_number(row, "t");
        c.df = get<int>(row, "df");
        c.p = get<double>(row, "p");
        c.significant = get<bool>(row, "significant");
        c.n = get<std::size_t>(row, "n");
        if (row.contains("error")) c.error = get<std::string>(row, "error");
        r.comparisons.push_back(std::move(c));
    }
    return report;
}

Report load_report(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        malformed(std::string("report is not valid JSON: ") + e.what());
    }
    return report_from_json(doc);
}

std::string render_report(const Report& report, bool negate_t) {
    const auto& r = report.results;
    std::ostringstream out;

    std::size_t name_width = 9;
    for (const auto& e : r.estimators) name_width = std::max(name_width, e.size());
    name_width += 2;

    auto find_r = [&](const std::string& skill, const std::string& est) -> std::string {
        for (const auto& c : r.correlations)
            if (c.skill == skill && c.estimator == est) return c.r ? format_fixed2(*c.r) : "NA";
        return "-";
    };

    out << "Correlation with posttest (r)\n";
    std::vector<std::size_t> widths;
    out << pad("estimator", name_width, false);
    for (const auto& skill : r.skills) {
        widths.push_back(std::max<std::size_t>(skill.size(), 6) + 2);
        out << pad(skill, widths.back(), true);
    }
    out << '\n';
    for (const auto& est : r.estimators) {
        out << pad(est, name_width, false);
        for (std::size_t k = 0; k < r.skills.size(); ++k) out << pad(find_r(r.skills[k], est), widths[k], true);
        out << '\n';
    }

    if (r.estimators.size() < 2) return out.str();

    auto find_t = [&](const std::string& skill, const std::string& a, const std::string& b) -> std::string {
        for (const auto& c : r.comparisons) {
            if (c.skill != skill || c.estimator_a != a || c.estimator_b != b) continue;
            if (!c.t) return "NA";
            return format_fixed2(negate_t ? -*c.t : *c.t) + (c.significant ? "*" : "");
        }
        return "-";
    };

    std::vector<std::size_t> col_widths;
    for (std::size_t j = 1; j < r.estimators.size(); ++j)
        col_widths.push_back(std::max<std::size_t>(r.estimators[j].size(), 7) + 2);

    for (const auto& skill : r.skills) {
        out << "\nPairwise t, " << skill << " (* significant at FDR q=" << r.options.q << ")\n";
        out << pad("", name_width, false);
        for (std::size_t j = 1; j < r.estimators.size(); ++j) out << pad(r.estimators[j], col_widths[j - 1], true);
        out << '\n';
        for (std::size_t i = 0; i + 1 < r.estimators.size(); ++i) {
            out << pad(r.estimators[i], name_width, false);
            for (std::size_t j = 1; j < r.estimators.size(); ++j) {
                const std::string cell = j > i ? find_t(skill, r.estimators[i], r.estimators[j]) : "";
                out << pad(cell, col_widths[j - 1], true);
            }
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace ktrace
