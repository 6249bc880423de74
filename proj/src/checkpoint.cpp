#include "checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>

#include "ktrace/error.hpp"

namespace ktrace::checkpoint {

std::string to_hex(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", value);
    return buf;
}

double from_hex(const std::string& text) {
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size())
        throw Error(ErrorKind::BadCheckpoint, "unparseable value '" + text + "'");
    return value;
}

nlohmann::json encode(const std::vector<ConstParamView>& params) {
    auto blocks = nlohmann::json::array();
    for (const auto& p : params) {
        auto values = nlohmann::json::array();
        for (double v : p.values) values.push_back(to_hex(v));
        blocks.push_back({{"name", std::string(p.name)},
                          {"rows", p.rows},
                          {"cols", p.cols},
                          {"values", std::move(values)}});
    }
    return blocks;
}

void decode(const nlohmann::json& blocks, const std::vector<ParamView>& params) {
    if (!blocks.is_array() || blocks.size() != params.size())
        throw Error(ErrorKind::BadCheckpoint, "parameter block count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& block = blocks[i];
        const auto& target = params[i];
        const auto name = field<std::string>(block, "name");
        if (name != target.name)
            throw Error(ErrorKind::BadCheckpoint,
                        "expected block '" + std::string(target.name) + "', found '" + name + "'");
        if (field<std::int64_t>(block, "rows") != target.rows ||
            field<std::int64_t>(block, "cols") != target.cols)
            throw Error(ErrorKind::BadCheckpoint, "dimension mismatch in block '" + name + "'");
        const auto& values = block.at("values");
        if (!values.is_array() || values.size() != target.values.size())
            throw Error(ErrorKind::BadCheckpoint, "value count mismatch in block '" + name + "'");
        for (std::size_t k = 0; k < values.size(); ++k) {
            if (!values[k].is_string())
                throw Error(ErrorKind::BadCheckpoint, "non-string value in block '" + name + "'");
            target.values[k] = from_hex(values[k].get<std::string>());
        }
    }
}

template <typename T>
T field(const nlohmann::json& doc, const char* key) {
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::BadCheckpoint, std::string("field '") + key + "': " + e.what());
    }
}

template std::string field<std::string>(const nlohmann::json&, const char*);
template std::int64_t field<std::int64_t>(const nlohmann::json&, const char*);
template std::uint64_t field<std::uint64_t>(const nlohmann::json&, const char*);
template int field<int>(const nlohmann::json&, const char*);
template double field<double>(const nlohmann::json&, const char*);

}  // namespace ktrace::checkpoint
