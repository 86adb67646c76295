#pragma once

// Serialization helpers: position snapshots as JSON, CSV emission with a
// scenario-hash comment line, and the FNV-1a hash that stamps every artifact.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "volterra_games/position.hpp"

namespace volterra_games {

using Json = nlohmann::json;

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_hex(std::string_view data) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(data)));
    return std::string(buf);
}

/// Shortest round-trippable decimal form.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline Json position_to_json(const Position& pos) {
    Json j;
    j["t_index"] = pos.t_index;
    Json ell = Json::array();
    for (int i = 0; i < pos.ell.cols(); ++i) {
        Json cell = Json::array();
        for (int r = 0; r < pos.ell.rows(); ++r) cell.push_back(pos.ell(r, i));
        ell.push_back(std::move(cell));
    }
    j["ell"] = std::move(ell);
    Json w = Json::array();
    for (int i = 0; i < pos.w.cols(); ++i) {
        Json node = Json::array();
        for (int r = 0; r < pos.w.rows(); ++r) node.push_back(pos.w(r, i));
        w.push_back(std::move(node));
    }
    j["w"] = std::move(w);
    return j;
}

inline Position position_from_json(const Json& j) {
    Position pos;
    pos.t_index = j.at("t_index").get<int>();
    const auto& ell = j.at("ell");
    const auto& w = j.at("w");
    if (static_cast<int>(ell.size()) != pos.t_index ||
        static_cast<int>(w.size()) != pos.t_index + 1)
        throw std::invalid_argument("position_from_json: field sizes do not match t_index");
    const int n = w.empty() ? 0 : static_cast<int>(w.front().size());
    pos.ell.resize(n, pos.t_index);
    pos.w.resize(n, pos.t_index + 1);
    for (int i = 0; i < pos.t_index; ++i)
        for (int r = 0; r < n; ++r) pos.ell(r, i) = ell.at(i).at(r).get<double>();
    for (int i = 0; i <= pos.t_index; ++i)
        for (int r = 0; r < n; ++r) pos.w(r, i) = w.at(i).at(r).get<double>();
    return pos;
}

/// CSV file with "# scenario_hash=..." on the first line, header on the
/// second. Rows are preformatted strings.
inline void write_csv(const std::string& path, const std::string& scenario_hash,
                      const std::string& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    out << "# scenario_hash=" << scenario_hash << "\n" << header << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ",";
            out << row[i];
        }
        out << "\n";
    }
}

inline void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace volterra_games
