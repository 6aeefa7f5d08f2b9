#include "spl/serialize.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace spl {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_measure(const std::string& stem, const DiscreteMeasure& m, const Vec* V) {
    if (V && V->size() != m.size()) throw std::invalid_argument("write_measure: V length differs from atom count");
    std::ofstream csv(stem + ".csv");
    if (!csv) throw std::runtime_error("cannot write " + stem + ".csv");
    for (int a = 0; a < m.ambient_dim(); ++a) csv << "x_" << (a + 1) << ",";
    csv << "weight" << (V ? ",V" : "") << "\n";
    for (int k = 0; k < m.size(); ++k) {
        for (int a = 0; a < m.ambient_dim(); ++a) csv << format_double(m.atoms(k, a)) << ",";
        csv << format_double(m.weights(k));
        if (V) csv << "," << format_double((*V)(k));
        csv << "\n";
    }
    nlohmann::json j;
    j["label"] = m.label;
    j["nominal_dim"] = m.nominal_dim;
    j["bbox"] = {{"lo", m.bbox.lo}, {"hi", m.bbox.hi}};
    std::ofstream side(stem + ".json");
    if (!side) throw std::runtime_error("cannot write " + stem + ".json");
    side << j.dump(2) << "\n";
}

LoadedMeasure read_measure(const std::string& stem) {
    std::ifstream side(stem + ".json");
    if (!side) throw std::runtime_error("cannot read " + stem + ".json");
    nlohmann::json j = nlohmann::json::parse(side);
    std::ifstream csv(stem + ".csv");
    if (!csv) throw std::runtime_error("cannot read " + stem + ".csv");
    std::string line;
    std::getline(csv, line);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    const bool hasV = !header.empty() && header.back() == "V";
    const int ncols = static_cast<int>(header.size());
    const int N = ncols - 1 - (hasV ? 1 : 0);
    if (N < 1 || header[N] != "weight") throw std::runtime_error("measure csv: unexpected header");
    std::vector<std::vector<double>> rows;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::vector<double> r;
        const char* p = line.c_str();
        while (*p) {
            char* end = nullptr;
            r.push_back(std::strtod(p, &end));
            if (end == p) throw std::runtime_error("measure csv: bad number");
            p = end;
            if (*p == ',') ++p;
        }
        if (static_cast<int>(r.size()) != ncols) throw std::runtime_error("measure csv: ragged row");
        rows.push_back(std::move(r));
    }
    LoadedMeasure out;
    DiscreteMeasure& m = out.measure;
    const int n = static_cast<int>(rows.size());
    m.atoms.resize(n, N);
    m.weights.resize(n);
    Vec V(n);
    for (int k = 0; k < n; ++k) {
        for (int a = 0; a < N; ++a) m.atoms(k, a) = rows[k][a];
        m.weights(k) = rows[k][N];
        if (hasV) V(k) = rows[k][N + 1];
    }
    m.label = j.at("label").get<std::string>();
    m.nominal_dim = j.at("nominal_dim").get<double>();
    m.bbox.lo = j.at("bbox").at("lo").get<std::vector<double>>();
    m.bbox.hi = j.at("bbox").at("hi").get<std::vector<double>>();
    if (hasV) out.V = V;
    return out;
}

void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
    f << "\n";
    for (const auto& r : rows) {
        for (size_t i = 0; i < r.size(); ++i) f << (i ? "," : "") << format_double(r[i]);
        f << "\n";
    }
}

}  // namespace spl
