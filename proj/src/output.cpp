#include "seedbank/output.hpp"
#include "seedbank/random.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#ifndef SEEDBANK_VERSION
#define SEEDBANK_VERSION "0.0.0"
#endif
#ifndef SEEDBANK_GIT_DESCRIBE
#define SEEDBANK_GIT_DESCRIBE "unknown"
#endif

namespace seedbank {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

bool numeric(const Cell& c, double& out) {
    if (auto d = std::get_if<double>(&c)) {
        out = *d;
        return true;
    }
    if (auto i = std::get_if<std::int64_t>(&c)) {
        out = static_cast<double>(*i);
        return true;
    }
    return false;
}

std::string render(const Cell& c) {
    if (auto d = std::get_if<double>(&c)) return format_double(*d);
    if (auto i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    const std::string& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + "\"";
}

Cell parse_cell(const std::string& s) {
    if (s.empty()) return s;
    char* end = nullptr;
    errno = 0;
    const long long i = std::strtoll(s.c_str(), &end, 10);
    if (errno == 0 && end == s.c_str() + s.size()) return static_cast<std::int64_t>(i);
    errno = 0;
    const double d = std::strtod(s.c_str(), &end);
    if (end == s.c_str() + s.size()) return d;
    return s;
}

std::vector<std::string> split_record(std::istream& in, bool& ok) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false, any = false;
    int ch;
    while ((ch = in.get()) != EOF) {
        any = true;
        const char c = static_cast<char>(ch);
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    cur += '"';
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            cur += c;
        }
    }
    ok = any;
    if (any) out.push_back(cur);
    return out;
}

[[noreturn]] void io_failure(const std::filesystem::path& path, const char* what) {
    throw std::runtime_error(std::string(what) + " " + path.string() + ": " + std::strerror(errno));
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

struct Frame {
    double x0, x1, y0, y1;
    bool lx, ly;
    static constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
    double px(double x) const {
        const double u = lx ? std::log10(x) : x;
        return L + (u - x0) / (x1 - x0) * (W - L - R);
    }
    double py(double y) const {
        const double v = ly ? std::log10(y) : y;
        return H - B - (v - y0) / (y1 - y0) * (H - T - B);
    }
};

std::string svg_frame(const Frame& f, const PlotOptions& o) {
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Frame::W << "\" height=\"" << Frame::H << "\" viewBox=\"0 0 "
      << Frame::W << ' ' << Frame::H << "\">\n";
    s << "<rect x=\"0\" y=\"0\" width=\"" << Frame::W << "\" height=\"" << Frame::H << "\" fill=\"white\"/>\n";
    s << "<text x=\"" << Frame::W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(o.title) << "</text>\n";
    s << "<text x=\"" << Frame::W / 2 << "\" y=\"" << Frame::H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << escape_xml(o.xlabel) << "</text>\n";
    s << "<text x=\"16\" y=\"" << Frame::H / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << Frame::H / 2 << ")\">" << escape_xml(o.ylabel) << "</text>\n";
    s << "<rect x=\"" << Frame::L << "\" y=\"" << Frame::T << "\" width=\"" << Frame::W - Frame::L - Frame::R << "\" height=\""
      << Frame::H - Frame::T - Frame::B << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double u = f.x0 + (f.x1 - f.x0) * k / 4.0;
        const double v = f.y0 + (f.y1 - f.y0) * k / 4.0;
        const double xv = f.lx ? std::pow(10.0, u) : u;
        const double yv = f.ly ? std::pow(10.0, v) : v;
        s << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << Frame::H - Frame::B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
          << tick(xv) << "</text>\n";
        s << "<text x=\"" << Frame::L - 6 << "\" y=\"" << num(f.py(yv) + 3) << "\" text-anchor=\"end\" font-size=\"10\">" << tick(yv)
          << "</text>\n";
    }
    return s.str();
}

void range(std::vector<double> v, bool log, double& lo, double& hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (double x : v) {
        if (!std::isfinite(x) || (log && !(x > 0.0))) continue;
        const double u = log ? std::log10(x) : x;
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
}

} // namespace

bool cell_equal(const Cell& a, const Cell& b) {
    double x, y;
    if (numeric(a, x) && numeric(b, y)) return (std::isnan(x) && std::isnan(y)) || x == y;
    if (a.index() == 2 && b.index() == 2) return std::get<std::string>(a) == std::get<std::string>(b);
    return false;
}

void Table::add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::invalid_argument("table row width does not match the columns");
    rows.push_back(std::move(row));
}

bool Table::operator==(const Table& o) const {
    if (columns != o.columns || rows.size() != o.rows.size()) return false;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != o.rows[r].size()) return false;
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            if (!cell_equal(rows[r][c], o.rows[r][c])) return false;
    }
    return true;
}

std::string to_csv(const Table& t) {
    if (t.columns.empty()) throw std::invalid_argument("refusing to emit a table without columns");
    std::string out;
    for (std::size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + render(Cell{t.columns[c]});
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + render(row[c]);
        out += '\n';
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) io_failure(path, "cannot open");
    out << content;
    out.flush();
    if (!out) io_failure(path, "cannot write");
}

void write_csv(const std::filesystem::path& path, const Table& t) { write_text(path, to_csv(t)); }

Table read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) io_failure(path, "cannot open");
    Table t;
    bool ok = false;
    t.columns = split_record(in, ok);
    if (!ok) throw std::runtime_error("empty CSV " + path.string());
    while (true) {
        auto rec = split_record(in, ok);
        if (!ok) break;
        if (rec.size() == 1 && rec[0].empty()) continue;
        std::vector<Cell> row;
        for (const auto& s : rec) row.push_back(parse_cell(s));
        t.add(std::move(row));
    }
    return t;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines) {
    std::string out;
    for (const auto& j : lines) out += j.dump() + "\n";
    write_text(path, out);
}

std::string svg_line_plot(const std::vector<Series>& series, const PlotOptions& o) {
    if (series.empty()) throw std::invalid_argument("line plot needs at least one series");
    std::vector<double> xs, ys;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw std::invalid_argument("series x and y lengths differ");
        xs.insert(xs.end(), s.x.begin(), s.x.end());
        ys.insert(ys.end(), s.y.begin(), s.y.end());
    }
    Frame f{};
    f.lx = o.log_x;
    f.ly = o.log_y;
    range(xs, f.lx, f.x0, f.x1);
    range(ys, f.ly, f.y0, f.y1);
    std::ostringstream s;
    s << svg_frame(f, o);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& se = series[k];
        std::string pts;
        for (std::size_t i = 0; i < se.x.size(); ++i) {
            if (!std::isfinite(se.x[i]) || !std::isfinite(se.y[i])) continue;
            if ((f.lx && !(se.x[i] > 0)) || (f.ly && !(se.y[i] > 0))) continue;
            pts += num(f.px(se.x[i])) + "," + num(f.py(se.y[i])) + " ";
        }
        const char* colour = kPalette[k % (sizeof kPalette / sizeof *kPalette)];
        s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.2\" points=\"" << pts << "\"><title>"
          << escape_xml(se.name) << "</title></polyline>\n";
    }
    if (series.size() <= 8) {
        for (std::size_t k = 0; k < series.size(); ++k) {
            const char* colour = kPalette[k % (sizeof kPalette / sizeof *kPalette)];
            s << "<text x=\"" << Frame::W - Frame::R - 6 << "\" y=\"" << Frame::T + 14 + 14 * k
              << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << colour << "\">" << escape_xml(series[k].name) << "</text>\n";
        }
    }
    s << "</svg>\n";
    return s.str();
}

std::string svg_histogram(const std::vector<double>& values, std::size_t bins, const PlotOptions& o) {
    if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
    std::vector<double> finite;
    for (double v : values)
        if (std::isfinite(v)) finite.push_back(v);
    double lo = 0.0, hi = 1.0;
    if (!finite.empty()) {
        lo = *std::min_element(finite.begin(), finite.end());
        hi = *std::max_element(finite.begin(), finite.end());
        if (hi - lo < 1e-12) hi = lo + 1.0;
    }
    std::vector<double> counts(bins, 0.0);
    for (double v : finite) {
        auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        counts[std::min(b, bins - 1)] += 1.0;
    }
    Frame f{};
    f.x0 = lo;
    f.x1 = hi;
    f.y0 = 0.0;
    f.y1 = std::max(1.0, *std::max_element(counts.begin(), counts.end()));
    std::ostringstream s;
    s << svg_frame(f, o);
    const double w = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        const double x0 = f.px(lo + w * b), x1 = f.px(lo + w * (b + 1));
        const double y = f.py(counts[b]);
        s << "<rect x=\"" << num(x0) << "\" y=\"" << num(y) << "\" width=\"" << num(std::max(0.0, x1 - x0 - 1)) << "\" height=\""
          << num(f.py(0.0) - y) << "\" fill=\"#1f77b4\"/>\n";
    }
    const std::size_t dropped = values.size() - finite.size();
    if (dropped > 0)
        s << "<text x=\"" << Frame::W - Frame::R - 6 << "\" y=\"" << Frame::T + 14 << "\" text-anchor=\"end\" font-size=\"11\">"
          << dropped << " censored</text>\n";
    s << "</svg>\n";
    return s.str();
}

nlohmann::json RunManifest::to_json() const {
    return {{"tool", tool},
            {"version", version},
            {"command", command},
            {"config_hash", config_hash},
            {"master_seed", master_seed},
            {"seed_rule", seed_rule},
            {"threads", threads},
            {"wall_clock_seconds", wall_clock_seconds},
            {"provenance", provenance},
            {"outputs", outputs},
            {"warnings", warnings}};
}

std::string tool_version() { return SEEDBANK_VERSION; }

RunManifest make_manifest(const std::string& command, const Config& config) {
    RunManifest m;
    m.version = tool_version();
    m.command = command;
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(command + "\n" + canonical_config(config))));
    m.config_hash = buf;
    m.master_seed = config.run.seed;
    m.seed_rule = std::string(kSeedRule);
    m.threads = config.run.threads;
    m.provenance = std::string("seedbank-lab ") + SEEDBANK_VERSION + " (" + SEEDBANK_GIT_DESCRIBE + ")";
    return m;
}

} // namespace seedbank
