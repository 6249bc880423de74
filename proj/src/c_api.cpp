#include "ktrace/ktrace.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <new>
#include <string>

#include "ktrace/dataset.hpp"
#include "ktrace/error.hpp"
#include "ktrace/pipeline.hpp"
#include "ktrace/report.hpp"
#include "ktrace/stats.hpp"

struct ktrace_report {
    ktrace::Report report;
};

struct ktrace_dataset {
    std::size_t records = 0;
    std::size_t first_attempts = 0;
    std::size_t students = 0;
    ktrace::SkillCatalog catalog;
};

namespace {

thread_local std::string last_error;

ktrace_status status_of(ktrace::ErrorKind kind) {
    // The status enum lists the error kinds in declaration order after OK.
    return static_cast<ktrace_status>(static_cast<int>(kind) + 1);
}

ktrace_status fail(ktrace_status status, std::string message) {
    last_error = std::move(message);
    return status;
}

template <typename F>
ktrace_status guarded(F&& body) {
    last_error.clear();
    try {
        body();
        return KTRACE_OK;
    } catch (const ktrace::Error& e) {
        return fail(status_of(e.kind()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(KTRACE_INTERNAL_ERROR, "out of memory");
    } catch (const std::exception& e) {
        return fail(KTRACE_INTERNAL_ERROR, e.what());
    } catch (...) {
        return fail(KTRACE_INTERNAL_ERROR, "unknown exception");
    }
}

void require(const void* p, const char* name) {
    if (p == nullptr) throw ktrace::Error(ktrace::ErrorKind::InvalidArgument, std::string(name) + " is NULL");
}

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

}  // namespace

extern "C" {

const char* ktrace_version(void) { return "0.3.0"; }

const char* ktrace_status_name(ktrace_status status) {
    if (status == KTRACE_OK) return "OK";
    if (status == KTRACE_INTERNAL_ERROR) return "InternalError";
    if (status > KTRACE_OK && status < KTRACE_INTERNAL_ERROR)
        return ktrace::to_string(static_cast<ktrace::ErrorKind>(static_cast<int>(status) - 1)).data();
    return "Unknown";
}

const char* ktrace_last_error(void) { return last_error.c_str(); }

void ktrace_string_free(char* text) { std::free(text); }

ktrace_status ktrace_simulate(const char* scenario, uint64_t seed, const char* out_dir) {
    return guarded([&] {
        require(scenario, "scenario");
        require(out_dir, "out_dir");
        ktrace::pipeline::simulate(ktrace::pipeline::parse_scenario(scenario), seed, out_dir);
    });
}

ktrace_status ktrace_run(const char* config_path, const ktrace_run_options* options, ktrace_report** report_out) {
    if (report_out != nullptr) *report_out = nullptr;
    return guarded([&] {
        require(config_path, "config_path");
        auto config = ktrace::pipeline::load_config(config_path);
        if (options != nullptr) {
            if (options->out_dir != nullptr) config.output = options->out_dir;
            if (options->has_seed) config.set_seed(options->seed);
        }
        auto result = ktrace::pipeline::run(config);
        if (report_out != nullptr) *report_out = new ktrace_report{std::move(result.report)};
    });
}

ktrace_status ktrace_report_load(const char* path, ktrace_report** report_out) {
    if (report_out != nullptr) *report_out = nullptr;
    return guarded([&] {
        require(path, "path");
        require(report_out, "report_out");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ktrace::Error(ktrace::ErrorKind::IoError, std::string("cannot open '") + path + "'");
        *report_out = new ktrace_report{ktrace::load_report(in)};
    });
}

void ktrace_report_free(ktrace_report* report) { delete report; }

ktrace_status ktrace_report_render(const ktrace_report* report, int negate_t, char** text_out) {
    if (text_out != nullptr) *text_out = nullptr;
    return guarded([&] {
        require(report, "report");
        require(text_out, "text_out");
        const bool negate = negate_t != 0 || report->report.table2_signs;
        *text_out = copy_string(ktrace::render_report(report->report, negate));
    });
}

size_t ktrace_report_estimator_count(const ktrace_report* report) {
    return report ? report->report.results.estimators.size() : 0;
}

const char* ktrace_report_estimator(const ktrace_report* report, size_t index) {
    if (!report || index >= report->report.results.estimators.size()) return nullptr;
    return report->report.results.estimators[index].c_str();
}

size_t ktrace_report_skill_count(const ktrace_report* report) {
    return report ? report->report.results.skills.size() : 0;
}

const char* ktrace_report_skill(const ktrace_report* report, size_t index) {
    if (!report || index >= report->report.results.skills.size()) return nullptr;
    return report->report.results.skills[index].c_str();
}

ktrace_status ktrace_report_correlation(const ktrace_report* report, const char* skill, const char* estimator,
                                        double* r, int* defined) {
    return guarded([&] {
        require(report, "report");
        require(skill, "skill");
        require(estimator, "estimator");
        require(r, "r");
        require(defined, "defined");
        for (const auto& c : report->report.results.correlations) {
            if (c.skill == skill && c.estimator == estimator) {
                *defined = c.r.has_value() ? 1 : 0;
                *r = c.r.value_or(std::numeric_limits<double>::quiet_NaN());
                return;
            }
        }
        throw ktrace::Error(ktrace::ErrorKind::InvalidArgument,
                            std::string("no correlation for ") + estimator + " on " + skill);
    });
}

size_t ktrace_report_comparison_count(const ktrace_report* report) {
    return report ? report->report.results.comparisons.size() : 0;
}

ktrace_status ktrace_report_comparison(const ktrace_report* report, size_t index, ktrace_comparison* out) {
    return guarded([&] {
        require(report, "report");
        require(out, "out");
        const auto& all = report->report.results.comparisons;
        if (index >= all.size())
            throw ktrace::Error(ktrace::ErrorKind::IndexOutOfRange, "comparison " + std::to_string(index));
        const auto& c = all[index];
        out->skill = c.skill.c_str();
        out->estimator_a = c.estimator_a.c_str();
        out->estimator_b = c.estimator_b.c_str();
        out->t_defined = c.t.has_value() ? 1 : 0;
        out->t = c.t.value_or(std::numeric_limits<double>::quiet_NaN());
        out->df = c.df;
        out->p = c.p;
        out->significant = c.significant ? 1 : 0;
    });
}

ktrace_status ktrace_dataset_load(const char* interactions_path, ktrace_dataset** dataset_out) {
    if (dataset_out != nullptr) *dataset_out = nullptr;
    return guarded([&] {
        require(interactions_path, "interactions_path");
        require(dataset_out, "dataset_out");
        std::ifstream in(interactions_path, std::ios::binary);
        if (!in)
            throw ktrace::Error(ktrace::ErrorKind::IoError, std::string("cannot open '") + interactions_path + "'");
        const auto records = ktrace::parse_interactions(in);
        const auto firsts = ktrace::first_attempts(records);
        auto catalog = ktrace::SkillCatalog::from_records(firsts);
        const auto sequences = ktrace::build_sequences(firsts, catalog);
        *dataset_out = new ktrace_dataset{records.size(), firsts.size(), sequences.size(), std::move(catalog)};
    });
}

void ktrace_dataset_free(ktrace_dataset* dataset) { delete dataset; }

size_t ktrace_dataset_record_count(const ktrace_dataset* dataset) { return dataset ? dataset->records : 0; }

size_t ktrace_dataset_first_attempt_count(const ktrace_dataset* dataset) {
    return dataset ? dataset->first_attempts : 0;
}

size_t ktrace_dataset_student_count(const ktrace_dataset* dataset) { return dataset ? dataset->students : 0; }

size_t ktrace_dataset_skill_count(const ktrace_dataset* dataset) { return dataset ? dataset->catalog.size() : 0; }

const char* ktrace_dataset_skill(const ktrace_dataset* dataset, size_t index) {
    if (!dataset || index >= dataset->catalog.size()) return nullptr;
    return dataset->catalog.skill(index).c_str();
}

ktrace_status ktrace_pearson(const double* x, const double* y, size_t n, double* r_out) {
    return guarded([&] {
        require(r_out, "r_out");
        if (n > 0) {
            require(x, "x");
            require(y, "y");
        }
        *r_out = ktrace::stats::pearson({x, n}, {y, n});
    });
}

ktrace_status ktrace_dependent_corr_t(double r_ay, double r_by, double r_ab, int n, double* t_out, int* df_out) {
    return guarded([&] {
        require(t_out, "t_out");
        require(df_out, "df_out");
        const auto ts = ktrace::stats::dependent_corr_t(r_ay, r_by, r_ab, n);
        *t_out = ts.t;
        *df_out = ts.df;
    });
}

ktrace_status ktrace_p_from_t(double t, int df, double* p_out) {
    return guarded([&] {
        require(p_out, "p_out");
        *p_out = ktrace::stats::p_from_t(t, df);
    });
}

}  // extern "C"
