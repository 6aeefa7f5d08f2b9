#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spl/measures.hpp"

namespace spl {

// %.17g, which round-trips every finite double through strtod
std::string format_double(double x);

// <stem>.csv with columns x_1..x_N, weight[, V] and <stem>.json with {label, nominal_dim, bbox}
void write_measure(const std::string& stem, const DiscreteMeasure& m, const Vec* V = nullptr);

struct LoadedMeasure {
    DiscreteMeasure measure;
    std::optional<Vec> V;
};
LoadedMeasure read_measure(const std::string& stem);

// plain numeric table with a header line
void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

}  // namespace spl
