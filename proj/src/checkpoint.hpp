#pragma once

// Shared JSON container for model checkpoints. Values are stored as C99
// hexadecimal floating-point strings so a reload is bit-exact.

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ktrace/param_view.hpp"

namespace ktrace::checkpoint {

std::string to_hex(double value);
// Throws BadCheckpoint.
double from_hex(const std::string& text);

nlohmann::json encode(const std::vector<ConstParamView>& params);
// Dimensions and names must match the target model. Throws BadCheckpoint.
void decode(const nlohmann::json& blocks, const std::vector<ParamView>& params);

// Typed field access with BadCheckpoint on absence or type mismatch.
template <typename T>
T field(const nlohmann::json& doc, const char* key);

}  // namespace ktrace::checkpoint
