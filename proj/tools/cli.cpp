#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "pqv/pqv.hpp"

namespace pqv::cli {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

enum class Kind { integer, number, string, level_range, numbers, integers, number_map, sets, seeds };

using Schema = std::map<std::string, Kind>;

const Schema& path_schema() {
    static const Schema s{{"kind", Kind::string}, {"seed", Kind::integer},  {"seeds", Kind::seeds},
                          {"M", Kind::integer},   {"T", Kind::number},      {"d", Kind::integer},
                          {"H", Kind::number},    {"delta", Kind::number},  {"params", Kind::number_map},
                          {"file", Kind::string}, {"fbm_method", Kind::string}};
    return s;
}

const Schema& partition_schema() {
    static const Schema s{{"generator", Kind::string}, {"levels", Kind::level_range}, {"k", Kind::integer},
                          {"c_target", Kind::number},  {"seed", Kind::integer},       {"file", Kind::string}};
    return s;
}

const Schema& analysis_schema() {
    static const Schema s{{"beta", Kind::number},         {"kappa", Kind::number},
                          {"alpha_hat", Kind::number},    {"tol", Kind::number},
                          {"eval_level", Kind::integer},  {"u_points", Kind::integer},
                          {"u_margin", Kind::number},     {"function", Kind::string},
                          {"t", Kind::number},            {"h", Kind::number},
                          {"c_threshold", Kind::number},  {"comparability_bound", Kind::number},
                          {"deltas", Kind::numbers},      {"variance_margin", Kind::number},
                          {"sets", Kind::sets},           {"statistic", Kind::string},
                          {"expected", Kind::number},     {"pass_fraction", Kind::number},
                          {"isometry_eval_level", Kind::integer}, {"coarse_levels", Kind::integers}};
    return s;
}

const Schema& output_schema() {
    static const Schema s{{"dir", Kind::string}, {"format", Kind::string}};
    return s;
}

bool is_int(const json& v) { return v.is_number_integer() || v.is_number_unsigned(); }

void check_value(const json& v, Kind k, const std::string& where) {
    auto fail = [&](const char* what) { throw ConfigError(where + ": expected " + what); };
    switch (k) {
        case Kind::integer:
            if (!is_int(v)) fail("an integer");
            break;
        case Kind::number:
            if (!v.is_number()) fail("a number");
            break;
        case Kind::string:
            if (!v.is_string()) fail("a string");
            break;
        case Kind::level_range:
            if (!v.is_array() || v.size() != 2 || !is_int(v[0]) || !is_int(v[1])) fail("[lo, hi] integers");
            break;
        case Kind::numbers:
            if (!v.is_array()) fail("an array of numbers");
            for (const auto& e : v)
                if (!e.is_number()) fail("an array of numbers");
            break;
        case Kind::integers:
            if (!v.is_array()) fail("an array of integers");
            for (const auto& e : v)
                if (!is_int(e)) fail("an array of integers");
            break;
        case Kind::number_map:
            if (!v.is_object()) fail("an object of numbers");
            for (const auto& [key, e] : v.items())
                if (!e.is_number()) throw ConfigError(where + "." + key + ": expected a number");
            break;
        case Kind::sets:
            if (!v.is_array()) fail("an array of [lo, hi] pairs");
            for (const auto& e : v)
                if (!e.is_array() || e.size() != 2 || !(e[0].is_number() || e[0].is_null()) ||
                    !(e[1].is_number() || e[1].is_null()))
                    fail("an array of [lo, hi] pairs (null for an infinite end)");
            break;
        case Kind::seeds:
            if (!v.is_object()) fail("{first, count}");
            for (const auto& [key, e] : v.items()) {
                if (key != "first" && key != "count") throw ConfigError(where + ": unknown key '" + key + "'");
                if (!is_int(e)) throw ConfigError(where + "." + key + ": expected an integer");
            }
            if (!v.contains("count")) throw ConfigError(where + ": missing 'count'");
            break;
    }
}

void check_section(const json& cfg, const std::string& name, const Schema& schema) {
    if (!cfg.contains(name)) return;
    const json& sec = cfg.at(name);
    if (!sec.is_object()) throw ConfigError(name + ": expected an object");
    for (const auto& [key, v] : sec.items()) {
        auto it = schema.find(key);
        if (it == schema.end()) throw ConfigError(name + ": unknown key '" + key + "'");
        check_value(v, it->second, name + "." + key);
    }
}

void require_section(const json& cfg, const std::string& name, const std::string& command) {
    if (!cfg.contains(name)) throw ConfigError("command '" + command + "' needs a '" + name + "' section");
}

template <class T>
T get_or(const json& sec, const char* key, T fallback) {
    if (!sec.is_object() || !sec.contains(key)) return fallback;
    return sec.at(key).get<T>();
}

const json& section(const json& cfg, const char* name) {
    static const json empty = json::object();
    return cfg.contains(name) ? cfg.at(name) : empty;
}

// ---------------------------------------------------------------- builders

FbmMethod parse_fbm_method(const std::string& s) {
    if (s == "auto") return FbmMethod::automatic;
    if (s == "circulant") return FbmMethod::circulant;
    if (s == "cholesky") return FbmMethod::cholesky;
    throw ConfigError("path.fbm_method must be auto, circulant or cholesky");
}

SampledPath build_path(const json& p, std::uint64_t seed) {
    if (p.contains("file")) return io::load_path(p.at("file").get<std::string>());
    if (!p.contains("kind")) throw ConfigError("path: 'kind' or 'file' is required");
    const PathKind kind = path_kind_from_string(p.at("kind").get<std::string>());
    const int M = get_or(p, "M", 14);
    const double T = get_or(p, "T", 1.0);
    const auto d = static_cast<std::size_t>(get_or<long long>(p, "d", 1));
    switch (kind) {
        case PathKind::brownian: return gen_brownian(seed, M, T, d);
        case PathKind::fbm:
            return gen_fbm(seed, M, T, get_or(p, "H", 0.75), parse_fbm_method(get_or<std::string>(p, "fbm_method", "auto")));
        case PathKind::mixed: return gen_mixed(seed, M, T, get_or(p, "H", 0.75), get_or(p, "delta", 1.0));
        case PathKind::custom: throw ConfigError("path: custom paths are read from 'file'");
        default: {
            std::map<std::string, double> params;
            if (p.contains("params"))
                for (const auto& [k, v] : p.at("params").items()) params[k] = v.get<double>();
            return gen_deterministic(kind, params, M, T, d);
        }
    }
}

std::uint64_t path_seed(const json& cfg, const RunOptions& opts) {
    if (opts.has_seed) return opts.seed;
    const json& p = section(cfg, "path");
    if (p.contains("seed")) return p.at("seed").get<std::uint64_t>();
    if (p.contains("seeds")) return get_or<std::uint64_t>(p.at("seeds"), "first", 1);
    return 1;
}

PartitionSequence build_partitions(const json& s, int M, double T, const SampledPath* x) {
    const std::string gen = get_or<std::string>(s, "generator", "dyadic");
    if (gen == "file") {
        if (!s.contains("file")) throw ConfigError("partition: generator 'file' needs 'file'");
        return io::load_partitions(s.at("file").get<std::string>());
    }
    int lo = 4, hi = std::min(M, 10);
    if (s.contains("levels")) {
        lo = s.at("levels")[0].get<int>();
        hi = s.at("levels")[1].get<int>();
    }
    if (gen == "dyadic") return gen_dyadic(lo, hi, M, T);
    if (gen == "kadic") return gen_kadic(get_or(s, "k", 2), lo, hi, M, T);
    if (gen == "random_balanced")
        return gen_random_balanced(get_or<std::uint64_t>(s, "seed", 1), lo, hi, M, T, get_or(s, "c_target", 2.0));
    if (gen == "lebesgue") {
        if (!x) throw ConfigError("partition: lebesgue partitions need a path");
        std::vector<PartitionLevel> levels;
        for (int n = lo; n <= hi; ++n) levels.push_back({n, gen_lebesgue(*x, n).partition});
        return PartitionSequence(std::move(levels), "lebesgue");
    }
    throw ConfigError("partition: unknown generator '" + gen + "'");
}

std::vector<std::size_t> eval_grid(const json& a, const PartitionSequence& seq) {
    const int level = get_or(a, "eval_level", 8);
    auto idx = uniform_eval_indices(seq.grid(), level);
    const auto coarse = seq.front().partition.indices();
    idx.insert(idx.end(), coarse.begin(), coarse.end());
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

std::size_t time_index(const json& a, const Grid& g) {
    if (!a.contains("t")) return g.intervals();
    const double t = a.at("t").get<double>();
    const double arr[1] = {t};
    return eval_indices_from_times(g, arr)[0];
}

// ---------------------------------------------------------------- output

class Output {
public:
    Output(std::string dir, std::string format, RunReport& report)
        : dir_(std::move(dir)), format_(std::move(format)), report_(report) {
        if (format_ != "csv" && format_ != "json") throw ConfigError("output.format must be csv or json");
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_)) throw std::runtime_error("cannot create output directory '" + dir_ + "'");
    }

    std::string file(const std::string& name) const { return (fs::path(dir_) / name).string(); }

    void table(const std::string& name, const io::CsvWriter& w) {
        if (format_ == "csv") {
            const std::string f = file(name + ".csv");
            w.save(f);
            report_.tables.push_back(name + ".csv");
            return;
        }
        const io::CsvTable t = io::parse_csv(w.str());
        ojson j;
        j["columns"] = t.header;
        ojson rows = ojson::array();
        for (const auto& r : t.rows) {
            ojson row = ojson::array();
            for (const auto& c : r) row.push_back(io::parse_double(c));
            rows.push_back(std::move(row));
        }
        j["rows"] = std::move(rows);
        write_text(name + ".json", j.dump(2) + "\n");
        report_.tables.push_back(name + ".json");
    }

    void write_text(const std::string& name, const std::string& text) const {
        std::ofstream f(file(name), std::ios::binary);
        if (!f) throw std::runtime_error("cannot open '" + file(name) + "' for writing");
        f << text;
        if (!f) throw std::runtime_error("write failed for '" + file(name) + "'");
    }

private:
    std::string dir_, format_;
    RunReport& report_;
};

class Stopwatch {
public:
    explicit Stopwatch(RunReport& r) : r_(r), t0_(std::chrono::steady_clock::now()) {}
    void lap(const std::string& stage) {
        const auto now = std::chrono::steady_clock::now();
        r_.timings.emplace_back(stage, std::chrono::duration<double>(now - t0_).count());
        t0_ = now;
    }

private:
    RunReport& r_;
    std::chrono::steady_clock::time_point t0_;
};

void verdict(RunReport& r, std::string name, std::string check, bool passed, double value, double threshold) {
    r.verdicts.push_back({std::move(name), std::move(check), passed, value, threshold});
}

void add_balance(RunReport& r, Output& out, const PartitionSequence& seq, const json& a, const std::string& tag) {
    if (seq.size() < 2) return;
    const double h = get_or(a, "h", 0.25 * seq.grid().horizon);
    const auto b = balance_report(seq, h, get_or(a, "c_threshold", 4.0));
    io::CsvWriter w({"level", "intervals", "mesh", "min_step", "ratio", "window_ratio"});
    for (const auto& l : b.levels)
        w.row(l.n, l.intervals, l.mesh, l.min_step, l.ratio, l.window_ratio ? *l.window_ratio : 0.0);
    out.table("balance" + tag, w);
    verdict(r, "partition-count-sandwich" + tag, "N*min_step <= T <= N*mesh at every level", b.sandwich_holds,
            b.sandwich_holds ? 1.0 : 0.0, 1.0);
    verdict(r, "balanced" + tag, "max/min interval ratio over tested levels", b.balanced, b.c_hat, b.threshold);
}

// ---------------------------------------------------------------- commands

void cmd_gen_path(const json& cfg, const RunOptions& opts, RunReport& r, Output& out) {
    Stopwatch sw(r);
    const SampledPath x = build_path(section(cfg, "path"), path_seed(cfg, opts));
    sw.lap("generate");
    io::save_path(x, out.file("path.pqv"));
    r.tables.push_back("path.pqv");
    out.table("path", io::path_table(x));
    sw.lap("write");
    r.summary["kind"] = std::string(to_string(x.meta().kind));
    r.summary["seed"] = x.meta().seed;
    for (const auto& [k, v] : x.meta().params) r.summary["params"][k] = v;
    const bool stochastic = x.meta().kind == PathKind::brownian || x.meta().kind == PathKind::fbm ||
                            x.meta().kind == PathKind::mixed;
    if (stochastic) {
        double start = 0.0;
        for (std::size_t c = 0; c < x.dim(); ++c) start = std::max(start, std::abs(x.value(0, c)));
        verdict(r, "path-starts-at-zero", "|x(0)| for stochastic kinds", start == 0.0, start, 0.0);
    }
    if (x.level() >= 8 && x.dim() == 1) {
        const auto h = estimate_holder(x);
        r.summary["alpha_hat"] = h.alpha_hat;
        r.summary["alpha_fit_r2"] = h.fit_r2;
        r.summary["alpha_degenerate"] = h.degenerate;
    }
}

void cmd_gen_partition(const json& cfg, const RunOptions& opts, RunReport& r, Output& out) {
    const json& p = section(cfg, "path");
    const json& a = section(cfg, "analysis");
    std::optional<SampledPath> x;
    if (get_or<std::string>(section(cfg, "partition"), "generator", "dyadic") == "lebesgue")
        x.emplace(build_path(p, path_seed(cfg, opts)));
    const int M = x ? x->level() : get_or(p, "M", 14);
    const double T = x ? x->horizon() : get_or(p, "T", 1.0);
    Stopwatch sw(r);
    const auto seq = build_partitions(section(cfg, "partition"), M, T, x ? &*x : nullptr);
    sw.lap("generate");
    io::save_partitions(seq, out.file("partitions.csv"));
    r.tables.push_back("partitions.csv");
    r.tables.push_back("partitions.json");
    add_balance(r, out, seq, a, "");
    sw.lap("diagnostics");
}

void cmd_qv(const json& cfg, const RunOptions& opts, RunReport& r, Output& out) {
    const json& a = section(cfg, "analysis");
    Stopwatch sw(r);
    const SampledPath x = build_path(section(cfg, "path"), path_seed(cfg, opts));
    const auto seq = build_partitions(section(cfg, "partition"), x.level(), x.horizon(), &x);
    sw.lap("setup");
    const auto eval = eval_grid(a, seq);
    io::CsvWriter w({"t", "i", "j", "value", "level"});
    bool monotone = true;
    double worst_gap = 0.0;
    for (const auto& l : seq.levels()) {
        const QVCurve c = qv_level(x, l.partition, eval, l.n);
        for (std::size_t e = 0; e < c.size(); ++e)
            for (std::size_t i = 0; i < c.dim; ++i)
                for (std::size_t j = 0; j < c.dim; ++j) w.row(c.eval_times[e], i, j, c.value(e, i, j), l.n);
        // the truncated sum is only monotone across partition points
        std::size_t prev = SIZE_MAX;
        for (std::size_t e = 0; e < c.size(); ++e) {
            if (!l.partition.contains(c.eval_index[e])) continue;
            if (prev != SIZE_MAX)
                for (std::size_t i = 0; i < c.dim; ++i)
                    monotone = monotone && c.value(e, i, i) >= c.value(prev, i, i);
            prev = e;
        }
        if (x.dim() >= 2) worst_gap = std::max(worst_gap, qv_matrix(x, l.partition, eval, l.n).max_gap);
        r.summary["final"][std::to_string(l.n)] = c.trace(c.size() - 1);
    }
    out.table("qv", w);
    sw.lap("qv");
    verdict(r, "qv-monotone", "diagonal entries non-decreasing across partition points", monotone, monotone ? 1.0 : 0.0, 1.0);
    if (x.dim() >= 2) verdict(r, "polarization", "max |polarized - direct|", worst_gap <= 1e-10, worst_gap, 1e-10);
    if (seq.size() >= 3) {
        const double tol = get_or(a, "tol", default_brownian_tolerance(seq.back().partition.mesh()));
        const auto conv = qv_limit_diagnostic(x, seq, eval, tol);
        io::CsvWriter cw({"level", "mesh", "final", "sup_to_finest"});
        for (std::size_t i = 0; i < conv.levels.size(); ++i)
            cw.row(conv.levels[i], conv.mesh[i], conv.final_values[i], conv.sup_to_finest[i]);
        out.table("qv_convergence", cw);
        verdict(r, "qv-cauchy", "sup distance between the last consecutive levels", conv.cauchy_at_tol,
                conv.cauchy.back(), tol);
    }
}

void cmd_roughness(const json& cfg, const RunOptions& opts, RunReport& r, Output& out) {
    const json& a = section(cfg, "analysis");
    Stopwatch sw(r);
    const SampledPath x = build_path(section(cfg, "path"), path_seed(cfg, opts));
    const auto seq = build_partitions(section(cfg, "partition"), x.level(), x.horizon(), &x);
    const double beta = get_or(a, "beta", 0.5);
    const auto sel = select_dyadic_subsequence(seq, beta, x.level(), x.horizon());
    sw.lap("setup");
    const std::size_t t = time_index(a, x.grid());
    io::CsvWriter w({"level", "seed", "S", "fine_level", "cells"});
    io::CsvWriter detail({"level", "fine_level", "S", "S_strict", "boundary", "grouped_qv", "fine_qv", "lambda2",
                          "max_cell", "min_cell"});
    double worst = 0.0, last = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& l = seq[i];
        const Partition fine = dyadic_partition(sel.l[i], x.grid());
        const RoughnessStat s = roughness_statistic(x, l.partition, fine, t);
        worst = std::max(worst, s.identity_gap / std::max(1.0, s.fine_qv));
        last = s.S;
        w.row(l.n, x.meta().seed, s.S, sel.l[i], s.cells);
        detail.row(l.n, sel.l[i], s.S, s.S_strict, s.boundary, s.grouped_qv, s.fine_qv, s.lambda2, s.max_cell,
                   s.min_cell);
    }
    out.table("roughness", w);
    out.table("roughness_detail", detail);
    sw.lap("roughness");
    verdict(r, "roughness-decomposition", "|S - (grouped QV - fine QV)| relative", worst <= 1e-10, worst, 1e-10);
    verdict(r, "coarsening-sandwich", "dyadic selection sandwich at every level", sel.sandwich_holds,
            sel.sandwich_holds ? 1.0 : 0.0, 1.0);
    const double tol = get_or(a, "tol", 0.05);
    verdict(r, "roughness-final", "|S| at the finest coarse level", std::abs(last) < tol, std::abs(last), tol);
}

void cmd_integrate(const json& cfg, const RunOptions& opts, RunReport& r, Output& out) {
    const json& a = section(cfg, "analysis");
    Stopwatch sw(r);
    const SampledPath x = build_path(section(cfg, "path"), path_seed(cfg, opts));
    const auto seq = build_partitions(section(cfg, "partition"), x.level(), x.horizon(), &x);
    const FunctionTriple fn = catalogue(get_or<std::string>(a, "function", "x2"));
    sw.lap("setup");
    const auto eval = eval_grid(a, seq);
    const ItoResidual res = ito_residual(x, fn, seq, eval);
    io::CsvWriter w({"level", "t", "residual"});
    io::CsvWriter iw({"level", "integral"});
    for (const auto& lv : res.levels) {
        for (std::size_t e = 0; e < res.eval_times.size(); ++e) w.row(lv.level, res.eval_times[e], lv.residual[e]);
        iw.row(lv.level, follmer_integral(x, fn.f1, seq.at(lv.level), time_index(a, x.grid())));
    }
    out.table("residual", w);
    out.table("integral", iw);
    sw.lap("ito");
    const int iso_level = get_or(a, "isometry_eval_level", x.level());
    const auto iso = isometry_check(x, fn, seq.back().partition, iso_level, seq.back().n);
    r.summary["isometry_sup_distance"] = iso.sup_distance;
    sw.lap("isometry");
    const double tol = get_or(a, "tol", 0.02);
    verdict(r, "ito-residual", "sup residual at the finest level", res.levels.back().sup < tol,
            res.levels.back().sup, tol);
}

std::vector<Interval> parse_sets(const json& a) {
    std::vector<Interval> sets;
    if (!a.contains("sets")) return {Interval{0.0, std::numeric_limits<double>::infinity()}};
    for (const auto& e : a.at("sets")) {
        Interval I;
        if (!e[0].is_null()) I.lo = e[0].get<double>();
        if (!e[1].is_null()) I.hi = e[1].get<double>();
        sets.push_back(I);
    }
    return sets;
}

void cmd_localtime(const json& cfg, const RunOptions& opts, RunReport& r, Output& out) {
    const json& a = section(cfg, "analysis");
    Stopwatch sw(r);
    const SampledPath x = build_path(section(cfg, "path"), path_seed(cfg, opts));
    const auto seq = build_partitions(section(cfg, "partition"), x.level(), x.horizon(), &x);
    const UGrid u = make_u_grid(x, static_cast<std::size_t>(get_or(a, "u_points", 257)), get_or(a, "u_margin", 0.05));
    const auto tgrid = uniform_eval_indices(x.grid(), get_or(a, "eval_level", 8));
    const std::size_t t = time_index(a, x.grid());
    std::vector<std::size_t> times = tgrid;
    if (!std::binary_search(times.begin(), times.end(), t)) {
        times.push_back(t);
        std::sort(times.begin(), times.end());
    }
    sw.lap("setup");
    std::vector<LocalTimeField> fields;
    bool tent = true;
    for (const auto& l : seq.levels()) {
        fields.push_back(local_time_discrete(x, l.partition, times, u, l.n));
        const auto occ = occupation_check(fields.back(), x, l.partition, {}, t);
        tent = tent && occ.tent_identity;
    }
    sw.lap("local-time");
    const LocalTimeField& L = fields.back();
    io::CsvWriter w({"t", "u", "L"});
    for (std::size_t k = 0; k < L.t_index.size(); ++k)
        for (std::size_t i = 0; i < u.count; ++i) w.row(L.t_times[k], u.at(i), L.at(k, i));
    out.table("localtime", w);
    verdict(r, "tent-integral", "quadrature of L equals [x](t) within the quadrature bound", tent,
            tent ? 1.0 : 0.0, 1.0);
    const auto sets = parse_sets(a);
    const auto occ = occupation_check(L, x, seq.back().partition, sets, t);
    io::CsvWriter ow({"lo", "hi", "lhs", "rhs", "rhs_half", "matches"});
    double worst = 0.0;
    for (const auto& row : occ.rows) {
        ow.row(row.set.lo, row.set.hi, row.lhs, row.rhs, row.rhs_half, row.matches == "1" ? 1.0 : 0.5);
        worst = std::max(worst, row.rel_err);
    }
    out.table("occupation", ow);
    verdict(r, "occupation", "max relative error of the occupation identity", worst < 0.1, worst, 0.1);
    const FunctionTriple fn = catalogue(get_or<std::string>(a, "function", "smoothed_abs"));
    const double tanaka = tanaka_residual(x, fn, seq.back().partition, L, t);
    const double tol = get_or(a, "tol", 0.05);
    verdict(r, "tanaka-residual", "|Tanaka residual| at the finest level", std::abs(tanaka) < tol, std::abs(tanaka),
            tol);
    if (fields.size() >= 3) {
        const auto bank = default_test_bank(u);
        const auto weak = weak_l2_convergence(fields, bank, t, tol);
        io::CsvWriter ww({"function", "level", "pairing"});
        for (std::size_t h = 0; h < weak.names.size(); ++h)
            for (std::size_t i = 0; i < weak.levels.size(); ++i) ww.row(weak.names[h], weak.levels[i], weak.pairings[h][i]);
        out.table("weak_l2", ww);
        verdict(r, "weak-l2-cauchy", "max pairing difference at the last level pair", weak.passed, weak.last_pair_max,
                tol);
    }
    sw.lap("checks");
}

void cmd_invariance(const json& cfg, const RunOptions& opts, RunReport& r, Output& out) {
    const json& a = section(cfg, "analysis");
    Stopwatch sw(r);
    const SampledPath x = build_path(section(cfg, "path"), path_seed(cfg, opts));
    const auto A = build_partitions(section(cfg, "partition"), x.level(), x.horizon(), &x);
    const auto B = build_partitions(section(cfg, "partition_b"), x.level(), x.horizon(), &x);
    sw.lap("setup");
    const auto eval = full_eval_indices(x.grid());
    const double tol = get_or(a, "tol", 0.05);
    const auto rep = invariance_check(x, A, B, eval, tol, get_or(a, "comparability_bound", 4.0));
    io::CsvWriter w({"level_a", "level_b", "mesh_a", "mesh_b", "sup_distance"});
    for (const auto& p : rep.pairs) w.row(p.level_a, p.level_b, p.mesh_a, p.mesh_b, p.sup_distance);
    out.table("invariance", w);
    r.summary["pairing"] = rep.pairing;
    r.summary["c_hat_a"] = rep.c_hat_a;
    r.summary["c_hat_b"] = rep.c_hat_b;
    sw.lap("invariance");
    verdict(r, "qv-invariance", "sup_t distance at the finest matched pair", rep.passed, rep.finest_distance, tol);
}

std::vector<std::uint64_t> seed_list(const json& cfg, const RunOptions& opts) {
    const json& p = section(cfg, "path");
    std::uint64_t first = 1, count = 1;
    if (p.contains("seeds")) {
        first = get_or<std::uint64_t>(p.at("seeds"), "first", 1);
        count = p.at("seeds").at("count").get<std::uint64_t>();
    } else if (p.contains("seed")) {
        first = p.at("seed").get<std::uint64_t>();
    }
    if (opts.has_seed) first = opts.seed;
    if (count == 0) throw ConfigError("path.seeds.count must be positive");
    std::vector<std::uint64_t> s(count);
    for (std::uint64_t i = 0; i < count; ++i) s[i] = first + i;
    return s;
}

void cmd_mc(const json& cfg, const RunOptions& opts, RunReport& r, Output& out) {
    const json& p = section(cfg, "path");
    const json& a = section(cfg, "analysis");
    Stopwatch sw(r);
    const auto seeds = seed_list(cfg, opts);
    const int M = get_or(p, "M", 14);
    const double T = get_or(p, "T", 1.0);
    const auto seq = build_partitions(section(cfg, "partition"), M, T, nullptr);
    const std::string stat = get_or<std::string>(a, "statistic", "qv");
    const double tol = get_or(a, "tol", 0.05);
    sw.lap("setup");
    if (stat == "qv") {
        auto rows = parallel_map(seeds.size(), opts.workers, [&](std::size_t i) {
            const SampledPath x = build_path(p, seeds[i]);
            std::vector<double> v;
            for (const auto& l : seq.levels()) v.push_back(qv_total(x, l.partition));
            return v;
        });
        sw.lap("simulate");
        const std::string kind = get_or<std::string>(p, "kind", "brownian");
        const double dim = static_cast<double>(get_or<long long>(p, "d", 1));
        const double expected = get_or(a, "expected", kind == "brownian" || kind == "mixed" ? T * dim : 0.0);
        io::CsvWriter w({"seed", "level", "value"});
        std::vector<double> err;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            for (std::size_t k = 0; k < seq.size(); ++k) w.row(seeds[i], seq[k].n, rows[i][k]);
            err.push_back(std::abs(rows[i].back() - expected));
        }
        out.table("mc", w);
        const double mean_err = stats::mean(err);
        const double frac = stats::fraction_below(err, tol);
        const double need = get_or(a, "pass_fraction", 0.95);
        r.summary["mean_abs_error"] = mean_err;
        r.summary["fraction_within_tol"] = frac;
        verdict(r, "mc-qv-mean-error", "mean |[x](T) - expected| at the finest level", mean_err < tol, mean_err, tol);
        verdict(r, "mc-qv-fraction", "fraction of seeds within tol at the finest level", frac >= need, frac, need);
        return;
    }
    if (stat == "roughness") {
        const double beta = get_or(a, "beta", 0.5);
        const auto sel = select_dyadic_subsequence(seq, beta, M, T);
        std::map<int, Partition> fine;
        for (int l : sel.l)
            if (!fine.count(l)) fine.emplace(l, dyadic_partition(l, Grid{M, T, 0.0}));
        auto rows = parallel_map(seeds.size(), opts.workers, [&](std::size_t i) {
            const SampledPath x = build_path(p, seeds[i]);
            std::vector<RoughnessStat> v;
            for (std::size_t k = 0; k < seq.size(); ++k)
                v.push_back(roughness_statistic(x, seq[k].partition, fine.at(sel.l[k])));
            return v;
        });
        sw.lap("simulate");
        io::CsvWriter w({"level", "seed", "S", "fine_level", "cells"});
        std::vector<TailSample> samples(seq.size());
        for (std::size_t k = 0; k < seq.size(); ++k) {
            samples[k].level = seq[k].n;
            samples[k].coarse_mesh = seq[k].partition.mesh();
            samples[k].balance = seq[k].partition.ratio();
            for (std::size_t i = 0; i < seeds.size(); ++i) {
                w.row(seq[k].n, seeds[i], rows[i][k].S, sel.l[k], rows[i][k].cells);
                samples[k].S.push_back(rows[i][k].S);
            }
        }
        out.table("roughness", w);
        std::vector<double> med;
        for (const auto& s : samples) {
            std::vector<double> absS;
            for (double v : s.S) absS.push_back(std::abs(v));
            med.push_back(stats::median(absS));
        }
        io::CsvWriter mw({"level", "fine_level", "median_abs_S", "variance"});
        for (std::size_t k = 0; k < samples.size(); ++k)
            mw.row(samples[k].level, sel.l[k], med[k], stats::variance(samples[k].S));
        out.table("roughness_summary", mw);
        const std::size_t tail = std::min<std::size_t>(4, med.size());
        bool decreasing = true;
        for (std::size_t k = med.size() - tail + 1; k < med.size(); ++k) decreasing = decreasing && med[k] < med[k - 1];
        verdict(r, "roughness-median-decreasing", "median |S| strictly decreasing over the last levels", decreasing,
                decreasing ? 1.0 : 0.0, 1.0);
        verdict(r, "roughness-median-final", "median |S| at the finest level", med.back() < tol, med.back(), tol);
        if (seeds.size() >= 100) {
            std::vector<double> deltas{0.05, 0.1, 0.2};
            if (a.contains("deltas")) deltas = a.at("deltas").get<std::vector<double>>();
            const auto tailr = hw_tail_check(samples, deltas, T, get_or(a, "variance_margin", 0.5));
            io::CsvWriter tw({"level", "delta", "frequency"});
            for (const auto& lv : tailr.levels)
                for (std::size_t d = 0; d < deltas.size(); ++d) tw.row(lv.level, deltas[d], lv.frequency[d]);
            out.table("tail", tw);
            verdict(r, "roughness-variance-budget", "Var(S) <= 2 c T |pi| (1 + margin) at every level",
                    tailr.variance_ok, tailr.variance_ok ? 1.0 : 0.0, 1.0);
            if (tailr.fit_points >= 2)
                verdict(r, "tail-decay-slope", "fitted slope of log frequency against delta/sqrt|pi|",
                        tailr.slope_negative, tailr.fit.slope, 0.0);
        }
        return;
    }
    throw ConfigError("analysis.statistic must be qv or roughness for mc");
}

using Handler = void (*)(const json&, const RunOptions&, RunReport&, Output&);

const std::map<std::string, std::pair<Handler, std::vector<std::string>>>& handlers() {
    static const std::map<std::string, std::pair<Handler, std::vector<std::string>>> h{
        {"gen-path", {cmd_gen_path, {"path"}}},
        {"gen-partition", {cmd_gen_partition, {"partition"}}},
        {"qv", {cmd_qv, {"path", "partition"}}},
        {"roughness", {cmd_roughness, {"path", "partition"}}},
        {"integrate", {cmd_integrate, {"path", "partition"}}},
        {"localtime", {cmd_localtime, {"path", "partition"}}},
        {"invariance", {cmd_invariance, {"path", "partition", "partition_b"}}},
        {"mc", {cmd_mc, {"path", "partition"}}},
    };
    return h;
}

std::size_t workers_from_env() {
    if (const char* w = std::getenv("PQV_WORKERS")) {
        try {
            const long long v = io::parse_int(w);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
        throw ConfigError("PQV_WORKERS must be a positive integer");
    }
    return 1;
}

int print_report(const std::string& dir, std::ostream& out) {
    const std::string file = (fs::path(dir) / "report.json").string();
    std::ifstream f(file);
    if (!f) throw std::runtime_error("cannot open '" + file + "'");
    const json rep = json::parse(f);
    out << "command: " << rep.at("command").get<std::string>() << "\n";
    bool ok = true;
    for (const auto& v : rep.at("verdicts")) {
        const bool passed = v.at("passed").get<bool>();
        ok = ok && passed;
        out << (passed ? "PASS " : "FAIL ") << v.at("name").get<std::string>() << "  value=" << v.at("value").dump()
            << " threshold=" << v.at("threshold").dump() << "\n";
    }
    return ok ? 0 : 2;
}

}  // namespace

ojson RunReport::to_json() const {
    ojson j;
    j["command"] = command;
    j["version"] = pqv::version;
    j["config"] = config;
    ojson v = ojson::array();
    for (const auto& x : verdicts)
        v.push_back({{"name", x.name}, {"check", x.check}, {"passed", x.passed}, {"value", x.value},
                     {"threshold", x.threshold}});
    j["verdicts"] = v;
    j["tables"] = tables;
    ojson t = ojson::object();
    for (const auto& [k, s] : timings) t[k] = s;
    j["timings"] = t;
    j["summary"] = summary;
    return j;
}

const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"gen-path", "gen-partition", "qv",  "roughness", "integrate",
                                            "localtime", "invariance",  "mc", "report"};
    return c;
}

void validate_config(const std::string& command, const json& cfg) {
    if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> top{"path", "partition", "partition_b", "analysis", "output"};
    for (const auto& [key, v] : cfg.items())
        if (!top.count(key)) throw ConfigError("unknown top-level key '" + key + "'");
    check_section(cfg, "path", path_schema());
    check_section(cfg, "partition", partition_schema());
    check_section(cfg, "partition_b", partition_schema());
    check_section(cfg, "analysis", analysis_schema());
    check_section(cfg, "output", output_schema());
    if (command == "report") return;
    auto it = handlers().find(command);
    if (it == handlers().end()) throw ConfigError("unknown command '" + command + "'");
    for (const auto& s : it->second.second) require_section(cfg, s, command);
    if (command == "gen-partition" && get_or<std::string>(section(cfg, "partition"), "generator", "dyadic") != "file")
        require_section(cfg, "path", command);
}

RunReport run(const std::string& command, const json& cfg, const RunOptions& opts) {
    validate_config(command, cfg);
    auto it = handlers().find(command);
    if (it == handlers().end()) throw ConfigError("unknown command '" + command + "'");
    RunReport r;
    r.command = command;
    r.config = ojson::parse(cfg.dump());
    const json& o = section(cfg, "output");
    std::string dir = opts.out_dir.empty() ? get_or<std::string>(o, "dir", "") : opts.out_dir;
    if (dir.empty()) throw ConfigError("no output directory: pass --out or set output.dir");
    Output out(dir, get_or<std::string>(o, "format", "csv"), r);
    it->second.first(cfg, opts, r, out);
    out.write_text("report.json", r.to_json().dump(2) + "\n");
    return r;
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pathwise quadratic variation experiments"};
    app.require_subcommand(1);
    std::string config, out_dir;
    std::uint64_t seed = 0;
    std::size_t workers = 0;
    for (const auto& name : commands()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " pipeline");
        if (name == "report") {
            sub->add_option("--out", out_dir, "directory holding report.json")->required();
            continue;
        }
        sub->add_option("--config", config, "JSON experiment config")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "override the path seed (first seed for mc)");
        sub->add_option("--workers", workers, "worker threads (default PQV_WORKERS or 1)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (command == "report") return print_report(out_dir, out);
        std::ifstream f(config);
        if (!f) throw std::runtime_error("cannot open config '" + config + "'");
        json cfg;
        try {
            cfg = json::parse(f);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("malformed JSON config: ") + e.what());
        }
        RunOptions opts;
        opts.out_dir = out_dir;
        opts.has_seed = app.get_subcommands().front()->count("--seed") > 0;
        opts.seed = seed;
        opts.workers = workers > 0 ? workers : workers_from_env();
        const RunReport r = run(command, cfg, opts);
        for (const auto& v : r.verdicts)
            out << (v.passed ? "PASS " : "FAIL ") << v.name << "  value=" << io::format_double(v.value)
                << " threshold=" << io::format_double(v.threshold) << "\n";
        return r.passed() ? 0 : 2;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return 1;
}

}  // namespace pqv::cli
