#include "spl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "spl/rng.hpp"
#include "spl/serialize.hpp"

namespace fs = std::filesystem;

namespace spl {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw ConfigError(where + ": " + what); }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(where, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) fail(where, "unknown key '" + it.key() + "'");
    }
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) fail(where, "expected a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) fail(where, "not finite");
    return v;
}

int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) fail(where, "expected an integer");
    return j.get<int>();
}

bool boolean(const json& j, const std::string& where) {
    if (!j.is_boolean()) fail(where, "expected true or false");
    return j.get<bool>();
}

std::vector<double> vec_of(const json& j, const std::string& where, int dim = -1) {
    if (!j.is_array()) fail(where, "expected an array of numbers");
    std::vector<double> v;
    for (size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
    if (dim >= 0 && static_cast<int>(v.size()) != dim)
        fail(where, "expected " + std::to_string(dim) + " entries, got " + std::to_string(v.size()));
    return v;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

void validate_weight(const json& w, const std::string& where, int dim) {
    if (w.is_number()) return;
    if (!w.is_object() || w.size() != 1) fail(where, "expected a number or an object with exactly one of constant, steps, bump, random, file");
    const std::string kind = w.begin().key();
    const json& b = w.begin().value();
    const std::string at = where + "." + kind;
    if (kind == "constant") {
        number(b, at);
    } else if (kind == "steps") {
        check_keys(b, at, {"boxes", "default"});
        if (!b.contains("boxes") || !b["boxes"].is_array()) fail(at, "needs a boxes array");
        for (size_t i = 0; i < b["boxes"].size(); ++i) {
            const json& box = b["boxes"][i];
            std::string bw = at + ".boxes[" + std::to_string(i) + "]";
            check_keys(box, bw, {"lo", "hi", "value"});
            for (const char* k : {"lo", "hi", "value"})
                if (!box.contains(k)) fail(bw, std::string("missing '") + k + "'");
            vec_of(box["lo"], bw + ".lo", dim);
            vec_of(box["hi"], bw + ".hi", dim);
            number(box["value"], bw + ".value");
        }
        if (b.contains("default")) number(b["default"], at + ".default");
    } else if (kind == "bump") {
        check_keys(b, at, {"center", "radius", "amplitude"});
        for (const char* k : {"center", "radius", "amplitude"})
            if (!b.contains(k)) fail(at, std::string("missing '") + k + "'");
        vec_of(b["center"], at + ".center", dim);
        if (!(number(b["radius"], at + ".radius") > 0)) fail(at, "radius must be positive");
        number(b["amplitude"], at + ".amplitude");
    } else if (kind == "random") {
        check_keys(b, at, {"lo", "hi"});
        if (!b.contains("lo") || !b.contains("hi")) fail(at, "needs lo and hi");
        if (!(number(b["lo"], at + ".lo") <= number(b["hi"], at + ".hi"))) fail(at, "lo > hi");
    } else if (kind == "file") {
        if (!b.is_string()) fail(at, "expected a path");
    } else {
        fail(where, "unknown weight kind '" + kind + "'");
    }
}

void validate_measure(const json& m, const std::string& where, int dim) {
    if (!m.is_object() || !m.contains("kind") || !m["kind"].is_string()) fail(where, "needs a kind");
    const std::string kind = m["kind"];
    if (kind == "segment") {
        check_keys(m, where, {"kind", "from", "to", "count"});
        if (!m.contains("from") || !m.contains("to")) fail(where, "segment needs from and to");
        vec_of(m["from"], where + ".from", dim);
        vec_of(m["to"], where + ".to", dim);
        if (m.contains("count") && integer(m["count"], where + ".count") < 1) fail(where, "count must be positive");
    } else if (kind == "ifs") {
        check_keys(m, where, {"kind", "maps", "depth", "atom_cap"});
        if (!m.contains("maps") || !m.contains("depth")) fail(where, "ifs needs maps and depth");
        if (m["maps"].is_string()) {
            if (m["maps"] != "cantor") fail(where + ".maps", "the only named system is 'cantor'");
            if (dim != 1) fail(where + ".maps", "the Cantor system lives on the line");
        } else if (m["maps"].is_array()) {
            for (size_t i = 0; i < m["maps"].size(); ++i) {
                const json& s = m["maps"][i];
                std::string sw = where + ".maps[" + std::to_string(i) + "]";
                check_keys(s, sw, {"ratio", "translation", "angle"});
                if (!s.contains("ratio") || !s.contains("translation")) fail(sw, "needs ratio and translation");
                number(s["ratio"], sw + ".ratio");
                vec_of(s["translation"], sw + ".translation", dim);
                if (s.contains("angle")) {
                    if (dim != 2) fail(sw, "angle only applies in 2D");
                    number(s["angle"], sw + ".angle");
                }
            }
        } else {
            fail(where + ".maps", "expected 'cantor' or a list of similitudes");
        }
        if (integer(m["depth"], where + ".depth") < 0) fail(where, "depth must be nonnegative");
        if (m.contains("atom_cap") && integer(m["atom_cap"], where + ".atom_cap") < 1) fail(where, "atom_cap must be positive");
    } else if (kind == "boundary" || kind == "lebesgue") {
        check_keys(m, where, {"kind"});
    } else if (kind == "union") {
        check_keys(m, where, {"kind", "parts"});
        if (!m.contains("parts") || !m["parts"].is_array() || m["parts"].size() < 2)
            fail(where, "union needs at least two parts");
        for (size_t i = 0; i < m["parts"].size(); ++i)
            validate_measure(m["parts"][i], where + ".parts[" + std::to_string(i) + "]", dim);
    } else if (kind == "file") {
        check_keys(m, where, {"kind", "stem"});
        if (!m.contains("stem") || !m["stem"].is_string()) fail(where, "file measure needs a stem");
    } else {
        fail(where, "unknown measure kind '" + kind + "'");
    }
}

// relative paths in a config resolve against the config's directory
void absolutize(json& j, const fs::path& base) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if ((it.key() == "stem" || it.key() == "file") && it.value().is_string()) {
                fs::path p = it.value().get<std::string>();
                if (p.is_relative()) it.value() = (base / p).lexically_normal().string();
            } else {
                absolutize(it.value(), base);
            }
        }
    } else if (j.is_array()) {
        for (auto& e : j) absolutize(e, base);
    }
}

const std::set<std::string> task_kinds = {"resolvent_diff", "two_weight_diff", "power_diff",
                                          "krein_feller",   "robin_diff",      "weyl_check"};

bool needs_v2(const std::string& kind) {
    return kind == "two_weight_diff" || kind == "robin_diff" || kind == "weyl_check";
}

DiscreteMeasure build_measure(const json& m, const Grid& g) {
    const std::string kind = m["kind"];
    if (kind == "segment") {
        Vec a = to_vec(m["from"].get<std::vector<double>>()), b = to_vec(m["to"].get<std::vector<double>>());
        int count;
        if (m.contains("count")) {
            count = m["count"];
        } else {
            // four atoms per grid step along the segment
            double h = *std::min_element(g.spacing.begin(), g.spacing.end());
            count = std::max(1, static_cast<int>(std::ceil(4.0 * (b - a).norm() / h - 1e-9)));
        }
        return segment_measure(a, b, count);
    }
    if (kind == "ifs") {
        std::vector<Similitude> maps;
        if (m["maps"].is_string()) {
            maps = cantor_maps();
        } else {
            for (const json& s : m["maps"]) {
                Similitude f;
                f.ratio = s["ratio"];
                f.translation = to_vec(s["translation"].get<std::vector<double>>());
                f.rotation = Mat::Identity(g.dim, g.dim);
                if (s.contains("angle")) {
                    double th = s["angle"];
                    f.rotation << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
                }
                f.validate();
                maps.push_back(f);
            }
        }
        long cap = m.contains("atom_cap") ? m["atom_cap"].get<long>() : (1L << 16);
        return ifs_measure(maps, m["depth"], nullptr, cap);
    }
    if (kind == "boundary") return boundary_measure(g);
    if (kind == "lebesgue") return lebesgue_measure(g);
    if (kind == "union") {
        DiscreteMeasure u = build_measure(m["parts"][0], g);
        for (size_t i = 1; i < m["parts"].size(); ++i) u = union_measure(u, build_measure(m["parts"][i], g));
        return u;
    }
    return read_measure(m["stem"]).measure;
}

Vec read_column(const std::string& path, int expected) {
    std::ifstream in(path);
    if (!in) throw ConfigError("weights: cannot open " + path);
    std::vector<double> v;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        char* end = nullptr;
        double x = std::strtod(line.c_str(), &end);
        if (end == line.c_str()) {
            if (v.empty()) continue;  // header
            throw ConfigError("weights: bad number '" + line + "' in " + path);
        }
        v.push_back(x);
    }
    if (static_cast<int>(v.size()) != expected)
        throw ConfigError("weights: " + path + " has " + std::to_string(v.size()) + " values for " +
                          std::to_string(expected) + " atoms");
    return to_vec(v);
}

Vec evaluate_weight(const json& w, const DiscreteMeasure& m, std::uint64_t seed, std::uint64_t stream) {
    const int n = m.size();
    if (w.is_number()) return Vec::Constant(n, w.get<double>());
    const std::string kind = w.begin().key();
    const json& b = w.begin().value();
    Vec v(n);
    if (kind == "constant") return Vec::Constant(n, b.get<double>());
    if (kind == "steps") {
        double dflt = b.value("default", 0.0);
        for (int k = 0; k < n; ++k) {
            v(k) = dflt;
            for (const json& box : b["boxes"]) {
                Box bx{box["lo"].get<std::vector<double>>(), box["hi"].get<std::vector<double>>()};
                if (bx.contains(m.atom(k))) {
                    v(k) = box["value"];
                    break;
                }
            }
        }
        return v;
    }
    if (kind == "bump") {
        Vec c = to_vec(b["center"].get<std::vector<double>>());
        double r = b["radius"], amp = b["amplitude"];
        for (int k = 0; k < n; ++k) {
            double s = (m.atom(k) - c).norm() / r;
            v(k) = s < 1.0 ? amp * std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
        }
        return v;
    }
    if (kind == "random") {
        CounterRng rng(seed, stream);
        for (int k = 0; k < n; ++k) v(k) = rng.uniform(b["lo"].get<double>(), b["hi"].get<double>());
        return v;
    }
    return read_column(b.get<std::string>(), n);
}

std::string utc_now() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << j.dump(2) << "\n";
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return json::parse(in);
}

json fit_json(const PowerFit& f) {
    return {{"theta_hat", f.theta_hat}, {"coeff_hat", f.coeff_hat}, {"slope", f.slope}, {"intercept", f.intercept},
            {"r2", f.r2},           {"lo", f.lo},             {"hi", f.hi},       {"n_usable", f.n_usable},
            {"period", f.period}};
}

// coefficient with the exponent pinned: geometric mean of j s_j^theta over the window
double coefficient_at(const Vec& s, double theta, int lo, int hi) {
    double acc = 0.0;
    for (int j = lo; j <= hi; ++j) acc += std::log(static_cast<double>(j)) + theta * std::log(s(j - 1));
    return std::exp(acc / (hi - lo + 1));
}

struct TaskContext {
    const ExperimentConfig& cfg;
    const OperatorMatrix& A;
    const Realization& R;
    const RestrictionMatrix& G;
    fs::path dir;
    std::vector<std::string> files;  // relative to the run directory
    double nominal_dim;

    std::string put(const std::string& name) {
        files.push_back(name);
        return (dir / name).string();
    }

    json record_spectrum(const std::string& stem, const SpectrumReport& rep) {
        std::vector<std::vector<double>> rows;
        for (Eigen::Index j = 0; j < rep.singular.size(); ++j) rows.push_back({double(j + 1), rep.singular(j)});
        write_table(put(stem + "_singular.csv"), {"j", "s_j"}, rows);
        rows.clear();
        for (const auto& c : rep.counting) rows.push_back({c.lambda, double(c.n_plus), double(c.n_minus), double(c.n)});
        write_table(put(stem + "_counting.csv"), {"lambda", "n_plus", "n_minus", "n"}, rows);
        json j = {{"n_positive", rep.positive.size()}, {"n_negative", rep.negative.size()}, {"floor", rep.floor}};
        j["fit"] = rep.fitted ? fit_json(rep.fit) : json(nullptr);
        if (!rep.fitted) j["fit_error"] = rep.fit_error;
        return j;
    }

    FitOptions options(const Vec& support_values) const {
        int cap = cfg.analysis.resolution_cap ? touched_cells(A.grid(), *R.measure, support_values) / 2 : 0;
        if (cfg.analysis.resolution_cap && cap < 1) cap = 1;
        return fit_options(cfg.analysis, cap);
    }

    double difference_theta(int m) const {
        const double d = nominal_dim, N = A.grid().dim;
        return d / (d - N + 2.0 * (m + 1));
    }
};

json task_resolvent(TaskContext& c, const TaskSpec& t, const std::string& stem) {
    const auto& p = c.R.V1;
    Mat direct = direct_inverse(c.A, coupling_matrix(c.A.grid(), c.G, p));
    BSOperator T = bs_operator(c.A, c.G, p, 0.5, "V1");
    ResolventReport r = resolvent_difference(c.A, T, &direct, c.cfg.analysis.margin);
    FitOptions opt = c.options(p.values);
    SpectrumReport s = spectrum(r.difference, opt, c.cfg.analysis.samples);
    json j = c.record_spectrum(stem, s);
    j["residual"] = r.residual;
    j["check_path"] = r.check_path;
    j["theta_predicted"] = c.difference_theta(1);
    if (t.sign_separation) {
        SignSplit split = split_signs(p);
        json ss;
        try {
            PowerFit full = fit_power_law(s.positive, opt);
            BSOperator Tp = bs_operator(c.A, c.G, split.plus, 0.5, "V1+");
            ResolventReport rp = resolvent_difference(c.A, Tp, nullptr, c.cfg.analysis.margin);
            SpectrumReport sp = spectrum(rp.difference, c.options(split.plus.values), c.cfg.analysis.samples);
            PowerFit plus = fit_power_law(sp.positive, opt);
            double th = c.difference_theta(1);
            int hi = std::min(full.hi, plus.hi), lo = std::max(full.lo, plus.lo);
            ss = {{"full", fit_json(full)},
                  {"plus_only", fit_json(plus)},
                  {"coefficient_ratio",
                   coefficient_at(s.positive, th, lo, hi) / coefficient_at(sp.positive, th, lo, hi)}};
        } catch (const std::invalid_argument& e) {
            ss = {{"error", e.what()}};
        }
        j["sign_separation"] = ss;
    }
    return j;
}

json two_weight_common(TaskContext& c, const std::string& stem, const Mat& d1, const Mat& d2,
                       SpectrumReport* keep = nullptr) {
    BSOperator T1 = bs_operator(c.A, c.G, c.R.V1, 0.5, "V1"), T2 = bs_operator(c.A, c.G, c.R.V2, 0.5, "V2");
    ResolventReport r = two_weight_difference(c.A, T1, T2, &d1, &d2, c.cfg.analysis.margin);
    SpectrumReport s = spectrum(r.difference, c.options(c.R.V2.values - c.R.V1.values), c.cfg.analysis.samples);
    json j = c.record_spectrum(stem, s);
    j["residual"] = r.residual;
    j["check_path"] = r.check_path;
    j["theta_predicted"] = c.difference_theta(1);
    j["convention"] = "difference = inverse(A + V2) - inverse(A + V1)";
    if (keep) *keep = std::move(s);
    return j;
}

json task_two_weight(TaskContext& c, const std::string& stem, SpectrumReport* keep = nullptr) {
    const Grid& g = c.A.grid();
    Mat d1 = direct_inverse(c.A, coupling_matrix(g, c.G, c.R.V1));
    Mat d2 = direct_inverse(c.A, coupling_matrix(g, c.G, c.R.V2));
    return two_weight_common(c, stem, d1, d2, keep);
}

json task_robin(TaskContext& c, const std::string& stem, const CoefficientField& coeffs) {
    if (c.R.measure->label.rfind("boundary", 0) != 0)
        throw ConfigError("robin_diff needs the boundary measure");
    const Grid& g = c.A.grid();
    // the direct path goes through the independently assembled Robin matrices
    OperatorMatrix r1 = assemble_robin(g, coeffs, c.R.V1), r2 = assemble_robin(g, coeffs, c.R.V2);
    Mat zero = Mat::Zero(r1.size(), r1.size());
    Mat d1 = direct_inverse(r1, zero), d2 = direct_inverse(r2, zero);
    return two_weight_common(c, stem, d1, d2);
}

json task_power(TaskContext& c, const TaskSpec& t, const std::string& stem) {
    const auto& p = c.R.V1;
    Mat direct = direct_inverse(c.A, coupling_matrix(c.A.grid(), c.G, p));
    BSOperator T = bs_operator(c.A, c.G, p, 0.5, "V1");
    ResolventReport r = power_difference(c.A, T, t.m, &direct, c.cfg.analysis.margin);
    FitOptions opt = c.options(p.values);
    SpectrumReport s = spectrum(r.difference, opt, c.cfg.analysis.samples);
    json j = c.record_spectrum(stem, s);
    j["m"] = t.m;
    j["residual"] = r.residual;
    j["theta_predicted"] = c.difference_theta(t.m);
    json terms = json::object();
    for (const auto& [name, M] : r.terms) {
        SpectrumReport ts = spectrum(M, opt, 0);
        std::vector<std::vector<double>> rows;
        for (Eigen::Index k = 0; k < ts.singular.size(); ++k) rows.push_back({double(k + 1), ts.singular(k)});
        write_table(c.put(stem + "_" + name + ".csv"), {"j", "s_j"}, rows);
        json tj = {{"fit", ts.fitted ? fit_json(ts.fit) : json(nullptr)}};
        if (!ts.fitted) tj["fit_error"] = ts.fit_error;
        terms[name] = tj;
    }
    const double d = c.nominal_dim, N = c.A.grid().dim;
    terms["H2"]["theta_predicted"] = c.difference_theta(t.m);
    terms["H3"]["theta_predicted"] = d / (d - N + 2.0 * (t.m + 2));
    j["terms"] = terms;
    return j;
}

json task_krein_feller(TaskContext& c, const std::string& stem) {
    const auto& p = c.R.V1;
    const double l = c.cfg.analysis.l;
    Mat K;
    if ((p.values.array() >= 0.0).all() || (p.values.array() <= 0.0).all()) {
        K = bs_compressed(c.A, c.G, p, l);
        if ((p.values.array() <= 0.0).all()) K = -K;
    } else {
        K = bs_operator(c.A, c.G, p, l, "V1").matrix;
    }
    FitOptions opt = c.options(p.values);
    opt.period_average = c.cfg.analysis.period_average;
    SpectrumReport s = spectrum(K, opt, c.cfg.analysis.samples);
    json j = c.record_spectrum(stem, s);
    const double d = c.nominal_dim, N = c.A.grid().dim;
    j["theta_predicted"] = d / (d + 4.0 * l - N);
    j["l"] = l;
    if (s.fitted) {
        const Vec& v = s.positive.size() > 0 ? s.positive : s.negative;
        int hi = std::min<int>(s.fit.hi, static_cast<int>(v.size()));
        if (hi > s.fit.lo) {
            auto cs = counting_samples(v.head(hi), v(hi - 1), v(s.fit.lo - 1), c.cfg.analysis.samples);
            try {
                LogPeriodicReport lp = log_periodic_residual(cs, s.fit.theta_hat);
                std::vector<std::vector<double>> rows;
                for (size_t i = 0; i < lp.log_lambda.size(); ++i)
                    rows.push_back({lp.log_lambda[i], lp.scaled[i], lp.residual[i]});
                write_table(c.put(stem + "_residual.csv"), {"log_lambda", "scaled", "residual"}, rows);
                double decades = std::abs(lp.log_lambda.back() - lp.log_lambda.front()) / std::log(10.0);
                j["log_periodic"] = {{"max_min_ratio", lp.max_min_ratio}, {"period", lp.period},
                                     {"period_found", lp.period_found}, {"decades", decades}};
            } catch (const std::invalid_argument& e) {
                j["log_periodic"] = {{"error", e.what()}};
            }
        }
    }
    return j;
}

json task_weyl(TaskContext& c, const std::string& stem, const json& measure_spec) {
    const Grid& g = c.A.grid();
    if (g.dim != 2 || measure_spec["kind"] != "segment")
        throw ConfigError("weyl_check needs a segment measure in two dimensions");
    Vec a = to_vec(measure_spec["from"].get<std::vector<double>>());
    Vec b = to_vec(measure_spec["to"].get<std::vector<double>>());
    Vec tangent = (b - a).normalized(), normal(2);
    normal << -tangent(1), tangent(0);
    SpectrumReport s;
    json j = task_two_weight(c, stem, &s);
    const double theta = c.difference_theta(1);
    WeylPrediction w = weyl_prediction(*c.R.measure, c.R.V1, c.R.V2, theta, c.cfg.coefficient, normal);
    json pred = {{"theta", theta},
                 {"coefficient_plus", w.coefficient_plus},
                 {"coefficient_minus", w.coefficient_minus},
                 {"with_prefactor_plus", w.with_prefactor_plus()},
                 {"with_prefactor_minus", w.with_prefactor_minus()},
                 {"omega_min", w.omega.size() ? w.omega.minCoeff() : 0.0},
                 {"omega_max", w.omega.size() ? w.omega.maxCoeff() : 0.0}};
    j["prediction"] = pred;
    // negative eigenvalues of inverse(A + V2) - inverse(A + V1) belong to (V2 - V1)_+
    for (auto [side, vals, predicted] : {std::tuple{"plus", s.negative, w.coefficient_plus},
                                         std::tuple{"minus", s.positive, w.coefficient_minus}}) {
        json sj;
        try {
            PowerFit f = fit_power_law(vals, c.options(c.R.V2.values - c.R.V1.values));
            double pinned = coefficient_at(vals, theta, f.lo, std::min<int>(f.hi, vals.size()));
            sj = {{"fit", fit_json(f)}, {"coefficient_at_theta", pinned}};
            if (predicted > 0) sj["ratio_to_prediction"] = pinned / predicted;
        } catch (const std::invalid_argument& e) {
            sj = {{"error", e.what()}};
        }
        j["weyl_" + std::string(side)] = sj;
    }
    return j;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::string ExperimentConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(raw.dump())));
    return buf;
}

ExperimentConfig parse_config(const json& in) {
    check_keys(in, "config", {"schema_version", "seed", "domain", "operator", "measure", "weights", "tasks", "analysis"});
    for (const char* k : {"schema_version", "domain", "measure", "weights", "tasks"})
        if (!in.contains(k)) fail("config", std::string("missing '") + k + "'");
    if (integer(in["schema_version"], "schema_version") != config_schema_version)
        fail("schema_version", "unsupported version " + in["schema_version"].dump() + " (expected " +
                                   std::to_string(config_schema_version) + ")");
    ExperimentConfig c;
    c.raw = in;
    json& raw = c.raw;
    if (!raw.contains("seed")) raw["seed"] = 0;
    if (!raw["seed"].is_number_unsigned() && !(raw["seed"].is_number_integer() && raw["seed"].get<long long>() >= 0))
        fail("seed", "expected a nonnegative integer");
    c.seed = raw["seed"].get<std::uint64_t>();

    // domain
    json& d = raw["domain"];
    check_keys(d, "domain", {"lo", "hi", "n", "shape", "node_cap"});
    if (!d.contains("lo") || !d.contains("hi")) fail("domain", "needs lo and hi");
    std::vector<double> lo = vec_of(d["lo"], "domain.lo"), hi = vec_of(d["hi"], "domain.hi", lo.size());
    const int dim = static_cast<int>(lo.size());
    if (dim < 1 || dim > 3) fail("domain", "dimension must be 1, 2 or 3");
    if (d.contains("n") == d.contains("shape")) fail("domain", "give exactly one of n and shape");
    std::vector<int> shape;
    if (d.contains("n")) {
        shape.assign(dim, integer(d["n"], "domain.n"));
    } else {
        if (!d["shape"].is_array() || static_cast<int>(d["shape"].size()) != dim) fail("domain.shape", "one entry per axis");
        for (size_t i = 0; i < d["shape"].size(); ++i) shape.push_back(integer(d["shape"][i], "domain.shape"));
    }
    if (!d.contains("node_cap")) d["node_cap"] = Grid::default_node_cap;
    try {
        c.grid = Grid::make(Box{lo, hi}, shape, integer(d["node_cap"], "domain.node_cap"));
    } catch (const std::invalid_argument& e) {
        fail("domain", e.what());
    }

    // operator
    if (!raw.contains("operator")) raw["operator"] = json::object();
    json& op = raw["operator"];
    check_keys(op, "operator", {"t", "coefficients", "max_t_raises"});
    if (!op.contains("t")) op["t"] = 1.0;
    c.t = number(op["t"], "operator.t");
    if (!(c.t > 0)) fail("operator.t", "must be positive");
    if (!op.contains("max_t_raises")) op["max_t_raises"] = 3;
    c.max_t_raises = integer(op["max_t_raises"], "operator.max_t_raises");
    if (c.max_t_raises < 0 || c.max_t_raises > 3) fail("operator.max_t_raises", "must be between 0 and 3");
    c.coefficient = Mat::Identity(dim, dim);
    if (op.contains("coefficients")) {
        const json& a = op["coefficients"];
        if (!a.is_array() || static_cast<int>(a.size()) != dim) fail("operator.coefficients", "expected an N x N matrix");
        for (int i = 0; i < dim; ++i) {
            auto row = vec_of(a[i], "operator.coefficients", dim);
            for (int k = 0; k < dim; ++k) c.coefficient(i, k) = row[k];
        }
        if ((c.coefficient - c.coefficient.transpose()).cwiseAbs().maxCoeff() > 0)
            fail("operator.coefficients", "must be symmetric");
        Eigen::SelfAdjointEigenSolver<Mat> es(c.coefficient);
        if (!(es.eigenvalues().minCoeff() > 0)) fail("operator.coefficients", "must be positive definite");
    }

    validate_measure(raw["measure"], "measure", dim);

    json& w = raw["weights"];
    check_keys(w, "weights", {"V1", "V2", "mollify"});
    if (!w.contains("V1")) fail("weights", "missing 'V1'");
    validate_weight(w["V1"], "weights.V1", dim);
    if (w.contains("V2")) validate_weight(w["V2"], "weights.V2", dim);
    if (w.contains("mollify") && !(number(w["mollify"], "weights.mollify") >= 0))
        fail("weights.mollify", "must be nonnegative");

    if (!raw["tasks"].is_array() || raw["tasks"].empty()) fail("tasks", "expected a nonempty list");
    for (size_t i = 0; i < raw["tasks"].size(); ++i) {
        json& t = raw["tasks"][i];
        std::string where = "tasks[" + std::to_string(i) + "]";
        if (t.is_string()) t = json{{"kind", t}};
        check_keys(t, where, {"kind", "m", "sign_separation"});
        if (!t.contains("kind") || !t["kind"].is_string() || !task_kinds.count(t["kind"]))
            fail(where, "kind must be one of resolvent_diff, two_weight_diff, power_diff, krein_feller, robin_diff, weyl_check");
        TaskSpec ts;
        ts.kind = t["kind"];
        if (t.contains("m")) {
            if (ts.kind != "power_diff") fail(where, "m only applies to power_diff");
            ts.m = integer(t["m"], where + ".m");
        } else if (ts.kind == "power_diff") {
            t["m"] = 2;
        }
        if (ts.kind == "power_diff" && (ts.m < 2 || ts.m > 4)) fail(where + ".m", "must be 2, 3 or 4");
        if (t.contains("sign_separation")) {
            if (ts.kind != "resolvent_diff") fail(where, "sign_separation only applies to resolvent_diff");
            ts.sign_separation = boolean(t["sign_separation"], where + ".sign_separation");
        }
        if (needs_v2(ts.kind) && !w.contains("V2")) fail(where, ts.kind + " needs weights.V2");
        c.tasks.push_back(ts);
    }

    if (!raw.contains("analysis")) raw["analysis"] = json::object();
    json& an = raw["analysis"];
    check_keys(an, "analysis",
               {"floor_rel", "lo", "hi", "period_average", "resolution_cap", "samples", "margin", "l"});
    AnalysisSpec& a = c.analysis;
    if (an.contains("floor_rel")) a.floor_rel = number(an["floor_rel"], "analysis.floor_rel");
    if (an.contains("lo")) a.lo = integer(an["lo"], "analysis.lo");
    if (an.contains("hi")) a.hi = integer(an["hi"], "analysis.hi");
    if (an.contains("period_average")) a.period_average = boolean(an["period_average"], "analysis.period_average");
    if (an.contains("resolution_cap")) a.resolution_cap = boolean(an["resolution_cap"], "analysis.resolution_cap");
    if (an.contains("samples")) a.samples = integer(an["samples"], "analysis.samples");
    if (an.contains("margin")) a.margin = number(an["margin"], "analysis.margin");
    if (an.contains("l")) a.l = number(an["l"], "analysis.l");
    if (!(a.floor_rel > 0 && a.floor_rel < 1)) fail("analysis.floor_rel", "must lie in (0, 1)");
    if (a.lo < 0 || a.hi < 0 || (a.hi > 0 && a.lo > a.hi)) fail("analysis", "bad window override");
    if (a.samples < 20) fail("analysis.samples", "at least 20");
    if (!(a.margin > 0 && a.margin < 1)) fail("analysis.margin", "must lie in (0, 1)");
    if (!(a.l > 0) || std::abs(2 * a.l - std::round(2 * a.l)) > 1e-12) fail("analysis.l", "must be a positive half-integer");
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    absolutize(j, fs::absolute(path).parent_path());
    return parse_config(j);
}

int touched_cells(const Grid& grid, const DiscreteMeasure& m, const Vec& values) {
    std::set<long> cells;
    for (int k = 0; k < m.size(); ++k) {
        if (values(k) == 0.0 || m.weights(k) == 0.0) continue;
        long key = 0;
        for (int a = 0; a < grid.dim; ++a) {
            long i = static_cast<long>(std::floor((m.atoms(k, a) - grid.bbox.lo[a]) / grid.spacing[a]));
            i = std::clamp<long>(i, 0, grid.shape[a] - 1);
            key = key * grid.shape[a] + i;
        }
        cells.insert(key);
    }
    return static_cast<int>(cells.size());
}

FitOptions fit_options(const AnalysisSpec& a, int resolution_cap) {
    FitOptions o;
    o.floor_rel = a.floor_rel;
    o.lo_override = a.lo;
    o.hi_override = a.hi;
    o.period_average = a.period_average;
    o.resolution_cap = resolution_cap;
    return o;
}

Realization realize(const ExperimentConfig& cfg) {
    Realization r;
    DiscreteMeasure m;
    try {
        m = build_measure(cfg.raw["measure"], cfg.grid);
        m.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("measure: ") + e.what());
    }
    if (m.ambient_dim() != cfg.grid.dim) throw ConfigError("measure: dimension differs from the domain");
    for (int k = 0; k < m.size(); ++k)
        if (!cfg.grid.bbox.contains(m.atom(k), 1e-9)) throw ConfigError("measure: atom outside the domain");
    r.measure = std::make_shared<const DiscreteMeasure>(std::move(m));
    const json& w = cfg.raw["weights"];
    try {
        r.V1 = Perturbation(r.measure, evaluate_weight(w["V1"], *r.measure, cfg.seed, 1));
        r.V2 = w.contains("V2") ? Perturbation(r.measure, evaluate_weight(w["V2"], *r.measure, cfg.seed, 2))
                                : Perturbation::constant(r.measure, 0.0);
        double radius = w.value("mollify", 0.0);
        if (radius > 0) {
            r.V1 = mollify_weight(r.V1, radius).p;
            r.V2 = mollify_weight(r.V2, radius).p;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("weights: ") + e.what());
    }
    return r;
}

fs::path output_root() {
    const char* env = std::getenv(output_root_env);
    return env && *env ? fs::path(env) : fs::path("spl-runs");
}

RunResult run_experiment(const ExperimentConfig& cfg, const fs::path& root) {
    RunResult res;
    const std::string hash = cfg.hash();
    res.dir = root / hash;
    const fs::path manifest_path = res.dir / "manifest.json";

    if (fs::exists(manifest_path)) {
        try {
            json old = read_json(manifest_path);
            bool complete = old.value("status", "") == "ok" && old.value("config_hash", "") == hash;
            for (const auto& f : old.value("files", json::array())) complete = complete && fs::exists(res.dir / f.get<std::string>());
            if (complete) {
                res.manifest = old;
                res.reused = true;
                return res;
            }
        } catch (const std::exception&) {
            // unreadable manifest: run again
        }
    }
    fs::create_directories(res.dir);

    json man = {{"schema_version", config_schema_version}, {"config_hash", hash}, {"tool_version", tool_version},
                {"started", utc_now()}, {"t_initial", cfg.t}, {"t_raises", json::array()},
                {"margins", json::array()}};
    write_json(res.dir / "config.json", cfg.raw);
    std::vector<std::string> common = {"config.json"};

    auto finish = [&](const std::string& status, int code, const std::string& message, const json& tasks,
                      const std::vector<std::string>& files) {
        man["status"] = status;
        man["exit_code"] = code;
        if (!message.empty()) man["message"] = message;
        man["tasks"] = tasks;
        man["files"] = files;
        man["finished"] = utc_now();
        write_json(manifest_path, man);
        res.manifest = man;
        res.exit_code = code;
    };

    Realization R;
    try {
        R = realize(cfg);
    } catch (const ConfigError& e) {
        finish("invalid", exit_validation, e.what(), json::array(), common);
        return res;
    }
    Vec v1 = R.V1.values;
    write_measure((res.dir / "measure").string(), *R.measure, &v1);
    common.push_back("measure.csv");
    common.push_back("measure.json");

    bool uses_v2 = false;
    for (const auto& t : cfg.tasks) uses_v2 = uses_v2 || needs_v2(t.kind);

    double t = cfg.t;
    for (int attempt = 0;; ++attempt) {
        json tasks = json::array();
        std::vector<std::string> files = common;
        try {
            CoefficientField coeffs = CoefficientField::constant(cfg.grid, cfg.coefficient, t);
            OperatorMatrix A = assemble_neumann(cfg.grid, coeffs);
            RestrictionMatrix G = restriction_matrix(cfg.grid, *R.measure);
            for (const auto& [name, p] : {std::pair{"V1", &R.V1}, std::pair{"V2", &R.V2}}) {
                if (std::string(name) == "V2" && !uses_v2) continue;
                double mg = positivity_margin(A, G, *p);
                man["margins"].push_back({{"t", t}, {"perturbation", name}, {"margin", mg}});
                if (!(mg > cfg.analysis.margin))
                    throw PositivityError(std::string("positivity margin of ") + name + " is " + std::to_string(mg), mg);
            }
            TaskContext ctx{cfg, A, R, G, res.dir, {}, R.measure->nominal_dim};
            for (size_t i = 0; i < cfg.tasks.size(); ++i) {
                const TaskSpec& ts = cfg.tasks[i];
                std::string stem = "task" + std::to_string(i) + "_" + ts.kind + (ts.kind == "power_diff" ? std::to_string(ts.m) : "");
                json sj;
                if (ts.kind == "resolvent_diff") sj = task_resolvent(ctx, ts, stem);
                else if (ts.kind == "two_weight_diff") sj = task_two_weight(ctx, stem);
                else if (ts.kind == "power_diff") sj = task_power(ctx, ts, stem);
                else if (ts.kind == "krein_feller") sj = task_krein_feller(ctx, stem);
                else if (ts.kind == "robin_diff") sj = task_robin(ctx, stem, coeffs);
                else sj = task_weyl(ctx, stem, cfg.raw["measure"]);
                sj["kind"] = ts.kind;
                sj["t"] = t;
                write_json(ctx.put(stem + "_summary.json"), sj);
                tasks.push_back({{"index", i}, {"kind", ts.kind}, {"summary", stem + "_summary.json"}});
            }
            files.insert(files.end(), ctx.files.begin(), ctx.files.end());
            man["t_final"] = t;
            finish("ok", exit_ok, "", tasks, files);
            return res;
        } catch (const PositivityError& e) {
            if (attempt >= cfg.max_t_raises) {
                man["t_final"] = t;
                finish("positivity_failure", exit_positivity, e.what(), json::array(), common);
                return res;
            }
            man["t_raises"].push_back({{"from", t}, {"to", 2 * t}, {"reason", e.what()}});
            t *= 2;
        } catch (const ConfigError& e) {
            finish("invalid", exit_validation, e.what(), json::array(), common);
            return res;
        } catch (const std::exception& e) {
            finish("numerical_failure", exit_numerical, e.what(), json::array(), common);
            return res;
        }
    }
}

std::vector<RunResult> sweep_experiment(const ExperimentConfig& base, const std::string& axis,
                                        const std::vector<double>& values, const fs::path& root, int workers,
                                        fs::path* table) {
    if (values.empty()) throw ConfigError("sweep: no values");
    json::json_pointer ptr;
    {
        std::string p;
        std::stringstream ss(axis);
        for (std::string part; std::getline(ss, part, '.');) {
            if (part.empty()) throw ConfigError("sweep: bad axis '" + axis + "'");
            p += "/" + part;
        }
        ptr = json::json_pointer(p);
    }
    if (!base.raw.contains(ptr) || !base.raw.at(ptr).is_number())
        throw ConfigError("sweep: axis '" + axis + "' does not name a scalar config field");
    const bool integral = base.raw.at(ptr).is_number_integer();

    std::vector<ExperimentConfig> cfgs;
    for (double v : values) {
        json j = base.raw;
        if (integral) {
            if (v != std::round(v)) throw ConfigError("sweep: axis '" + axis + "' takes integers");
            j[ptr] = static_cast<long long>(v);
        } else {
            j[ptr] = v;
        }
        cfgs.push_back(parse_config(j));
    }

    std::vector<RunResult> out(cfgs.size());
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (size_t i; (i = next++) < cfgs.size();) out[i] = run_experiment(cfgs[i], root);
    };
    const int nw = std::max(1, std::min<int>(workers, static_cast<int>(cfgs.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < nw; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < out.size(); ++i) {
        if (out[i].manifest.value("status", "") != "ok") continue;
        for (const auto& t : out[i].manifest["tasks"]) {
            json s = read_json(out[i].dir / t["summary"].get<std::string>());
            if (!s.contains("fit") || s["fit"].is_null()) continue;
            rows.push_back({values[i], t["index"].get<double>(), s["fit"]["theta_hat"].get<double>(),
                            s["fit"]["coeff_hat"].get<double>(), s["fit"]["r2"].get<double>(),
                            s.value("theta_predicted", 0.0)});
        }
    }
    fs::create_directories(root);
    fs::path tp = root / ("sweep-" + base.hash() + "-" + axis + ".csv");
    write_table(tp.string(), {"value", "task", "theta_hat", "coeff_hat", "r2", "theta_predicted"}, rows);
    if (table) *table = tp;
    return out;
}

std::string export_manifest(const fs::path& manifest, const std::string& format) {
    if (format != "csv" && format != "json") throw ConfigError("export: format must be csv or json");
    json man = read_json(manifest);
    if (!man.contains("config_hash") || !man.contains("tasks")) throw ConfigError("export: not a run manifest");
    const fs::path dir = manifest.parent_path();
    json doc = {{"schema_version", config_schema_version},
                {"config_hash", man["config_hash"]},
                {"status", man.value("status", "")},
                {"tasks", json::array()}};
    std::ostringstream csv;
    csv << "task,kind,term,theta_hat,coeff_hat,slope,r2,lo,hi,theta_predicted\n";
    auto row = [&](int idx, const std::string& kind, const std::string& term, const json& fit, const json& pred) {
        if (fit.is_null()) return;
        csv << idx << ',' << kind << ',' << term << ',' << format_double(fit["theta_hat"]) << ','
            << format_double(fit["coeff_hat"]) << ',' << format_double(fit["slope"]) << ','
            << format_double(fit["r2"]) << ',' << fit["lo"].get<int>() << ',' << fit["hi"].get<int>() << ','
            << (pred.is_number() ? format_double(pred.get<double>()) : std::string()) << '\n';
    };
    for (const auto& t : man["tasks"]) {
        json s = read_json(dir / t["summary"].get<std::string>());
        int idx = t["index"];
        std::string kind = t["kind"];
        row(idx, kind, "difference", s.value("fit", json(nullptr)), s.value("theta_predicted", json(nullptr)));
        if (s.contains("terms"))
            for (auto it = s["terms"].begin(); it != s["terms"].end(); ++it)
                row(idx, kind, it.key(), it.value().value("fit", json(nullptr)),
                    it.value().value("theta_predicted", json(nullptr)));
        s["index"] = idx;
        doc["tasks"].push_back(s);
    }
    return format == "csv" ? csv.str() : doc.dump(2) + "\n";
}

}  // namespace spl
