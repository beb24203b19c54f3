#include "repshift/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "repshift/error.hpp"

namespace repshift {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string provenance_line(const std::string& config_hash, std::uint64_t master_seed) {
    return "# config_hash=" + config_hash + " master_seed=" + std::to_string(master_seed);
}

void write_text_atomically(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << text;
        if (!out) throw Error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string metrics_csv_row(const BoundReport& r) {
    std::string s;
    s += std::to_string(r.width) + "," + std::to_string(r.seed) + "," + std::to_string(r.t) + "," +
         std::to_string(r.k) + "," + std::to_string(r.dt);
    for (double v : {r.rep_size, r.rep_distance, r.omega, r.mu_t, r.c_t, r.lambda_t, r.D_hat}) {
        s += "," + format_double(v);
    }
    s += "," + r.D_method;
    for (double v : {r.U, r.U_inf, r.delta_P, r.align_residual}) s += "," + format_double(v);
    return s;
}

std::string metrics_csv(const std::vector<BoundReport>& rows, const std::string& config_hash,
                        std::uint64_t master_seed) {
    std::string out = provenance_line(config_hash, master_seed) + "\n";
    for (std::size_t i = 0; i < kMetricsColumns.size(); ++i) out += (i ? "," : "") + kMetricsColumns[i];
    out += "\n";
    for (const BoundReport& r : rows) out += metrics_csv_row(r) + "\n";
    return out;
}

namespace {

template <class T>
T parse_field(const std::string& s, const std::string& where) {
    T v{};
    if constexpr (std::is_floating_point_v<T>) {
        if (s == "nan") return std::numeric_limits<T>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<T>::infinity();
        if (s == "-inf") return -std::numeric_limits<T>::infinity();
    }
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(where + ": cannot parse '" + s + "'");
    return v;
}

}  // namespace

MetricsTable read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    MetricsTable table;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream fields(line.substr(1));
            std::string tok;
            while (fields >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                if (tok.substr(0, eq) == "config_hash") table.config_hash = tok.substr(eq + 1);
                if (tok.substr(0, eq) == "master_seed") {
                    table.master_seed = parse_field<std::uint64_t>(tok.substr(eq + 1), where);
                }
            }
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream row(line);
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (!header_seen) {
            if (cells != kMetricsColumns) throw Error(where + ": unexpected metrics.csv header");
            header_seen = true;
            continue;
        }
        if (cells.size() != kMetricsColumns.size()) {
            throw Error(where + ": expected " + std::to_string(kMetricsColumns.size()) + " fields, got " +
                        std::to_string(cells.size()));
        }
        BoundReport r;
        r.width = parse_field<int>(cells[0], where);
        r.seed = parse_field<std::uint64_t>(cells[1], where);
        r.t = parse_field<int>(cells[2], where);
        r.k = parse_field<int>(cells[3], where);
        r.dt = parse_field<int>(cells[4], where);
        r.rep_size = parse_field<double>(cells[5], where);
        r.rep_distance = parse_field<double>(cells[6], where);
        r.omega = parse_field<double>(cells[7], where);
        r.mu_t = parse_field<double>(cells[8], where);
        r.c_t = parse_field<double>(cells[9], where);
        r.lambda_t = parse_field<double>(cells[10], where);
        r.D_hat = parse_field<double>(cells[11], where);
        r.D_method = cells[12];
        r.U = parse_field<double>(cells[13], where);
        r.U_inf = parse_field<double>(cells[14], where);
        r.delta_P = parse_field<double>(cells[15], where);
        r.align_residual = parse_field<double>(cells[16], where);
        table.rows.push_back(std::move(r));
    }
    if (!header_seen) throw Error(path.string() + ": missing metrics.csv header");
    return table;
}

}  // namespace repshift
