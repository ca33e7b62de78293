// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors

#ifndef DROPMUON_HARNESS_IO_HPP
#define DROPMUON_HARNESS_IO_HPP

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "../costmodel.hpp"
#include "../sampling.hpp"
#include "../smoothness.hpp"

namespace dropmuon::harness {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Invalid input, reported with the JSON path of the offending field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& path, const std::string& msg) : std::runtime_error(path + ": " + msg), path(path) {}
    std::string path;
};

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path, std::string("invalid JSON: ") + e.what());
    }
}

inline std::string join_path(const std::string& base, const std::string& key) { return base + "." + key; }
inline std::string join_path(const std::string& base, std::size_t idx) {
    return base + "[" + std::to_string(idx) + "]";
}

inline const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    if (!j.contains(key)) throw ConfigError(join_path(path, key), "missing required field");
    return j.at(key);
}

inline double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
    return v;
}

inline std::size_t as_count(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError(path, "expected a non-negative integer");
    return j.get<std::size_t>();
}

inline std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

inline std::vector<double> as_numbers(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], join_path(path, i)));
    return out;
}

// A number broadcasts to b entries; an array must have exactly b entries.
inline std::vector<double> as_layer_values(const json& j, std::size_t b, const std::string& path) {
    if (j.is_number()) return std::vector<double>(b, as_number(j, path));
    auto v = as_numbers(j, path);
    if (v.size() != b) throw ConfigError(path, "expected " + std::to_string(b) + " entries");
    return v;
}

// 1-based layer list in JSON, 0-based in memory.
inline std::vector<std::size_t> as_layer_indices(const json& j, std::size_t b, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array of layer numbers");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto p = join_path(path, i);
        const std::size_t v = as_count(j[i], p);
        if (v < 1 || (b > 0 && v > b)) throw ConfigError(p, "layer number out of range");
        out.push_back(v - 1);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sampling schemes.

inline SamplingScheme scheme_from_json(const json& j, std::size_t b, const std::string& path) {
    const std::string type = as_string(require(j, "type", path), join_path(path, "type"));
    // Standalone scheme documents name their layer count.
    if (b == 0 && j.contains("b")) b = as_count(j.at("b"), join_path(path, "b"));
    if (b == 0 && (type == "full" || type == "tau_nice" || type == "tau_submodel" || type == "serial"))
        throw ConfigError(join_path(path, "b"), "layer count required for scheme type '" + type + "'");
    SamplingScheme s;
    if (type == "full") {
        s = FullNetwork{b};
    } else if (type == "rpt") {
        s = Rpt{as_numbers(require(j, "p", path), join_path(path, "p"))};
    } else if (type == "tau_nice") {
        s = TauNice{b, as_count(require(j, "tau", path), join_path(path, "tau"))};
    } else if (type == "tau_submodel") {
        s = TauSubmodel{b, as_count(require(j, "tau", path), join_path(path, "tau")),
                        as_numbers(require(j, "p", path), join_path(path, "p"))};
    } else if (type == "partitioned" || type == "serial") {
        PartitionedSubmodel ps;
        if (type == "serial") {
            for (std::size_t i = 0; i < b; ++i) ps.blocks.push_back({i});
        } else {
            const auto& blocks = require(j, "blocks", path);
            if (!blocks.is_array()) throw ConfigError(join_path(path, "blocks"), "expected an array of blocks");
            for (std::size_t k = 0; k < blocks.size(); ++k)
                ps.blocks.push_back(as_layer_indices(blocks[k], b, join_path(join_path(path, "blocks"), k)));
        }
        ps.p = j.contains("p") ? as_numbers(j.at("p"), join_path(path, "p"))
                               : std::vector<double>(ps.blocks.size(), 1.0 / static_cast<double>(ps.blocks.size()));
        s = ps;
    } else {
        throw ConfigError(join_path(path, "type"), "unknown scheme type '" + type + "'");
    }
    if (b > 0 && layer_count(s) != b)
        throw ConfigError(path, "scheme covers " + std::to_string(layer_count(s)) + " layers, expected " +
                                    std::to_string(b));
    try {
        validate(s);
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
    return s;
}

inline json scheme_to_json(const SamplingScheme& scheme) {
    return std::visit(Overloaded{
                          [](const Rpt& s) { return json{{"type", "rpt"}, {"p", s.p}}; },
                          [](const TauNice& s) { return json{{"type", "tau_nice"}, {"b", s.b}, {"tau", s.tau}}; },
                          [](const TauSubmodel& s) {
                              return json{{"type", "tau_submodel"}, {"b", s.b}, {"tau", s.tau}, {"p", s.p}};
                          },
                          [](const PartitionedSubmodel& s) {
                              json blocks = json::array();
                              for (const auto& blk : s.blocks) {
                                  json one = json::array();
                                  for (std::size_t i : blk) one.push_back(i + 1);
                                  blocks.push_back(one);
                              }
                              return json{{"type", "partitioned"}, {"blocks", blocks}, {"p", s.p}};
                          },
                          [](const FullNetwork& s) { return json{{"type", "full"}, {"b", s.b}}; },
                      },
                      scheme);
}

// ---------------------------------------------------------------------------
// Cost parameters: {"c_ov": x, "c": [...], "c_sharp": [...]}.

inline CostParams cost_from_json(const json& j, std::size_t b, const std::string& path) {
    CostParams cp;
    cp.c_ov = j.contains("c_ov") ? as_number(j.at("c_ov"), join_path(path, "c_ov")) : 0.0;
    if (b == 0) {
        cp.c = as_numbers(require(j, "c", path), join_path(path, "c"));
        b = cp.c.size();
    } else {
        cp.c = as_layer_values(require(j, "c", path), b, join_path(path, "c"));
    }
    cp.c_sharp = j.contains("c_sharp") ? as_layer_values(j.at("c_sharp"), b, join_path(path, "c_sharp"))
                                       : std::vector<double>(b, 0.0);
    try {
        cp.validate(b);
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
    return cp;
}

inline json cost_to_json(const CostParams& cp) { return json{{"c_ov", cp.c_ov}, {"c", cp.c}, {"c_sharp", cp.c_sharp}}; }

// ---------------------------------------------------------------------------
// Smoothness tables.
//   cutoff mode:    {"mode": "rpt_cutoff", "L0": [[L_{1,1}], [L_{2,1}, L_{2,2}], ...], "L1": same}
//   partition mode: {"mode": "partition", "blocks": [[1,3],[2]], "L0": [per-layer], "L1": [per-layer]}

inline std::vector<std::vector<double>> triangular_from_json(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array of rows");
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto p = join_path(path, i);
        auto row = as_numbers(j[i], p);
        if (row.size() != i + 1) throw ConfigError(p, "row " + std::to_string(i + 1) + " needs " +
                                                         std::to_string(i + 1) + " entries (cutoffs 1.." +
                                                         std::to_string(i + 1) + ")");
        rows.push_back(std::move(row));
    }
    return rows;
}

inline SmoothnessTable table_from_json(const json& j, const std::string& path) {
    const std::string mode = j.contains("mode") ? as_string(j.at("mode"), join_path(path, "mode")) : "rpt_cutoff";
    try {
        if (mode == "rpt_cutoff") {
            auto l0 = triangular_from_json(require(j, "L0", path), join_path(path, "L0"));
            std::vector<std::vector<double>> l1;
            if (j.contains("L1")) l1 = triangular_from_json(j.at("L1"), join_path(path, "L1"));
            if (!l1.empty() && l1.size() != l0.size()) throw ConfigError(join_path(path, "L1"), "shape differs from L0");
            return SmoothnessTable::rpt(l0, l1);
        }
        if (mode == "partition") {
            const auto& blocks_j = require(j, "blocks", path);
            std::vector<std::vector<std::size_t>> blocks;
            for (std::size_t k = 0; k < blocks_j.size(); ++k)
                blocks.push_back(as_layer_indices(blocks_j[k], 0, join_path(join_path(path, "blocks"), k)));
            auto l0 = as_numbers(require(j, "L0", path), join_path(path, "L0"));
            std::vector<double> l1;
            if (j.contains("L1")) l1 = as_numbers(j.at("L1"), join_path(path, "L1"));
            return SmoothnessTable::partition(blocks, l0, l1);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(join_path(path, "mode"), "unknown table mode '" + mode + "'");
}

inline json table_to_json(const SmoothnessTable& t) {
    json out;
    const std::size_t b = t.layers();
    if (t.mode() == SmoothnessTable::Mode::RptCutoff) {
        out["mode"] = "rpt_cutoff";
        json l0 = json::array(), l1 = json::array();
        for (std::size_t i = 0; i < b; ++i) {
            json r0 = json::array(), r1 = json::array();
            for (std::size_t s = 0; s <= i; ++s) {
                r0.push_back(t.l0(i, s));
                if (t.has_l1()) r1.push_back(t.l1(i, s));
            }
            l0.push_back(r0);
            l1.push_back(r1);
        }
        out["L0"] = l0;
        if (t.has_l1()) out["L1"] = l1;
    } else {
        out["mode"] = "partition";
        json blocks = json::array();
        std::vector<double> l0(b), l1(b);
        for (std::size_t k = 0; k < t.blocks().size(); ++k) {
            json one = json::array();
            for (std::size_t i : t.blocks()[k]) {
                one.push_back(i + 1);
                l0[i] = t.l0(i, k);
                if (t.has_l1()) l1[i] = t.l1(i, k);
            }
            blocks.push_back(one);
        }
        out["blocks"] = blocks;
        out["L0"] = l0;
        if (t.has_l1()) out["L1"] = l1;
    }
    out["approximate"] = t.approximate;
    return out;
}

// ---------------------------------------------------------------------------
// CSV helpers. Numbers use the shortest round-trip representation.

inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_number(std::uint64_t v) { return std::to_string(v); }

inline double parse_number(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("bad number '" + s + "'");
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header");
    t.header = split_csv_line(line);
    while (std::getline(in, line)) {
        auto row = split_csv_line(line);
        if (row.size() != t.header.size())
            throw std::runtime_error(path + ": row has " + std::to_string(row.size()) + " fields, header has " +
                                     std::to_string(t.header.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace dropmuon::harness

#endif  // DROPMUON_HARNESS_IO_HPP
