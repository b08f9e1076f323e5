#pragma once

// Partition sequences on disk: a `level,index` CSV plus a JSON sidecar
// holding {generator, params, M, T}.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pqv/partitions.hpp"
#include "pqv/table_io.hpp"

namespace pqv::io {

inline CsvWriter partition_table(const PartitionSequence& seq) {
    CsvWriter w({"level", "index"});
    for (const auto& l : seq.levels())
        for (std::size_t j : l.partition.indices()) w.row(l.n, j);
    return w;
}

inline nlohmann::ordered_json partition_sidecar(const PartitionSequence& seq) {
    nlohmann::ordered_json j;
    j["generator"] = seq.generator();
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : seq.params()) params[k] = v;
    j["params"] = params;
    const Grid& g = seq.grid();
    j["M"] = g.level;
    j["T"] = g.horizon;
    if (g.origin != 0.0) j["origin"] = g.origin;
    return j;
}

/// Sidecar name: `foo.csv` becomes `foo.json`, anything else gets `.json` appended.
inline std::string sidecar_path(const std::string& csv) {
    if (csv.size() > 4 && csv.compare(csv.size() - 4, 4, ".csv") == 0)
        return csv.substr(0, csv.size() - 4) + ".json";
    return csv + ".json";
}

inline void save_partitions(const PartitionSequence& seq, const std::string& csv) {
    partition_table(seq).save(csv);
    std::ofstream f(sidecar_path(csv));
    if (!f) throw std::runtime_error("cannot open '" + sidecar_path(csv) + "' for writing");
    f << partition_sidecar(seq).dump(2) << '\n';
    if (!f) throw std::runtime_error("write failed for '" + sidecar_path(csv) + "'");
}

inline PartitionSequence load_partitions(const std::string& csv) {
    std::ifstream f(sidecar_path(csv));
    if (!f) throw std::runtime_error("cannot open '" + sidecar_path(csv) + "'");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed partition sidecar: ") + e.what());
    }
    Grid g{meta.at("M").get<int>(), meta.at("T").get<double>(), meta.value("origin", 0.0)};
    validate_grid(g);
    std::map<std::string, double> params;
    for (const auto& [k, v] : meta.at("params").items()) params[k] = v.get<double>();

    const CsvTable t = load_csv(csv);
    const std::size_t lc = t.column("level"), ic = t.column("index");
    std::map<int, std::vector<std::size_t>> by_level;
    for (const auto& row : t.rows) {
        const long long idx = parse_int(row[ic]);
        if (idx < 0) throw ParameterError("negative partition index");
        by_level[static_cast<int>(parse_int(row[lc]))].push_back(static_cast<std::size_t>(idx));
    }
    std::vector<PartitionLevel> levels;
    for (auto& [n, idx] : by_level) levels.push_back({n, Partition(g, std::move(idx))});
    return PartitionSequence(std::move(levels), meta.at("generator").get<std::string>(), std::move(params));
}

}  // namespace pqv::io
