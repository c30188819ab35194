#pragma once

#include "seedbank/config.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace seedbank {

// Doubles are written with 17 significant digits so that a reread is exact.
std::string format_double(double v);

using Cell = std::variant<double, std::int64_t, std::string>;
// Numeric cells compare by value, so an integral double reread as an integer still matches.
bool cell_equal(const Cell& a, const Cell& b);

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row);
    bool operator==(const Table& o) const;
};

std::string to_csv(const Table& t);
void write_csv(const std::filesystem::path& path, const Table& t);
Table read_csv(const std::filesystem::path& path);

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);
void write_text(const std::filesystem::path& path, const std::string& content);

struct Series {
    std::string name;
    std::vector<double> x, y;
};

struct PlotOptions {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool log_x = false;
    bool log_y = false;
};

std::string svg_line_plot(const std::vector<Series>& series, const PlotOptions& options);
std::string svg_histogram(const std::vector<double>& values, std::size_t bins, const PlotOptions& options);

struct RunManifest {
    std::string tool = "seedbank-lab";
    std::string version;
    std::string command;
    std::string config_hash; // 16 hex digits of FNV-1a over the canonical config
    std::uint64_t master_seed = 0;
    std::string seed_rule;
    unsigned threads = 1;
    double wall_clock_seconds = 0.0;
    std::string provenance;
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

std::string tool_version();
RunManifest make_manifest(const std::string& command, const Config& config);

} // namespace seedbank
