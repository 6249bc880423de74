#pragma once

#include <Eigen/Core>
#include <span>
#include <string_view>

namespace ktrace {

// Flat view over one named parameter block of a trainable model.
struct ParamView {
    std::string_view name;
    Eigen::Index rows;
    Eigen::Index cols;
    std::span<double> values;
};

struct ConstParamView {
    std::string_view name;
    Eigen::Index rows;
    Eigen::Index cols;
    std::span<const double> values;
};

}  // namespace ktrace
