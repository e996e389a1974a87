// SPDX-License-Identifier: Apache-2.0
#include "confreach/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <system_error>

namespace confreach {

namespace fs = std::filesystem;
using nlohmann::json;

void write_file_atomic(const fs::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename into '" + path.string() + "'");
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_double(double x) {
    if (!std::isfinite(x)) return "null";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string digest_hex(std::uint64_t d) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, d);
    return buf;
}

std::string dataset_to_json(const Dataset& ds) {
    std::string out;
    out.reserve(ds.visit_count() * 110 + 64);
    out += "{\"horizon\":" + std::to_string(ds.horizon) + ",\"seed\":" + std::to_string(ds.seed) + ",\"trajectories\":[";
    for (std::size_t j = 0; j < ds.trajectories.size(); ++j) {
        if (j) out += ',';
        out += '[';
        const auto& steps = ds.trajectories[j].steps;
        for (std::size_t k = 0; k < steps.size(); ++k) {
            const auto& s = steps[k];
            if (k) out += ',';
            out += "{\"t\":" + std::to_string(s.time) + ",\"p\":" + format_double(s.state.position) +
                   ",\"v\":" + format_double(s.state.velocity) + ",\"y\":" + format_double(s.measurement) +
                   ",\"u\":" + format_double(s.control) + '}';
        }
        out += ']';
    }
    out += "],\"terminated\":[";
    for (std::size_t j = 0; j < ds.trajectories.size(); ++j) {
        if (j) out += ',';
        out += ds.trajectories[j].terminated_at_goal ? "true" : "false";
    }
    out += "]}\n";
    return out;
}

Dataset dataset_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed dataset: ") + e.what());
    }
    try {
        Dataset ds;
        ds.horizon = j.at("horizon").get<int>();
        ds.seed = j.at("seed").get<std::uint64_t>();
        const auto& trs = j.at("trajectories");
        ds.trajectories.reserve(trs.size());
        for (const auto& tr : trs) {
            Trajectory t;
            t.steps.reserve(tr.size());
            for (const auto& s : tr) {
                Step st;
                st.time = s.at("t").get<int>();
                st.state = {s.at("p").get<double>(), s.at("v").get<double>()};
                st.measurement = s.at("y").get<double>();
                st.control = s.at("u").get<double>();
                if (st.time != static_cast<int>(t.steps.size())) throw IoError("dataset: step times must be consecutive from 0");
                t.steps.push_back(st);
            }
            if (t.steps.empty()) throw IoError("dataset: empty trajectory");
            ds.trajectories.push_back(std::move(t));
        }
        if (j.contains("terminated")) {
            const auto& term = j.at("terminated");
            if (term.size() != ds.trajectories.size()) throw IoError("dataset: terminated flags length mismatch");
            for (std::size_t i = 0; i < term.size(); ++i) ds.trajectories[i].terminated_at_goal = term[i].get<bool>();
        }
        return ds;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed dataset: ") + e.what());
    }
}

void save_dataset(const fs::path& path, const Dataset& ds) { write_file_atomic(path, dataset_to_json(ds)); }

Dataset load_dataset(const fs::path& path) { return dataset_from_json(read_file(path)); }

}  // namespace confreach
