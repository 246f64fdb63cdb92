#pragma once

// CSV and JSON serialisation of references, orbits, traces and branches.

#include "cbc_adapt/continuation.hpp"
#include "cbc_adapt/harmonic_balance.hpp"
#include "cbc_adapt/reference.hpp"
#include "cbc_adapt/simulator.hpp"
#include "cbc_adapt/types.hpp"

#include <json.hpp>  // vendored nlohmann::json

#include <charconv>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace cbc_adapt {

using json = nlohmann::json;

/// 64-bit FNV-1a.
[[nodiscard]] constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

[[nodiscard]] inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    for (int i = 15; i >= 0; --i, h >>= 4) buf[i] = "0123456789abcdef"[h & 0xF];
    buf[16] = '\0';
    return buf;
}

/// Shortest decimal that parses back to the same double.
[[nodiscard]] inline std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

[[nodiscard]] inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    require(r.ec == std::errc() && r.ptr == s.data() + s.size(), "not a number: '" + std::string(s) + "'");
    return v;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os), columns_(header.size()) {
        row_strings(header);
    }

    void row(const std::vector<double>& values) {
        require(values.size() == columns_, "CsvWriter: row width differs from header");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) os_ << ',';
            os_ << format_double(values[i]);
        }
        os_ << '\n';
    }

    void row_strings(const std::vector<std::string>& values) {
        require(values.size() == columns_, "CsvWriter: row width differs from header");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) os_ << ',';
            os_ << values[i];
        }
        os_ << '\n';
    }

private:
    std::ostream& os_;
    std::size_t columns_;
};

/// Parses a numeric CSV with a header row. Returns the header and the rows.
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_numeric_csv(std::istream& is) {
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), "read_numeric_csv: missing header");
    auto header = split(line);
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> r;
        for (const auto& c : split(line)) r.push_back(parse_double(c));
        require(r.size() == header.size(), "read_numeric_csv: ragged row");
        rows.push_back(std::move(r));
    }
    return {std::move(header), std::move(rows)};
}

/// Column names for a trace of a p-dof, order-n system.
[[nodiscard]] inline std::vector<std::string> trace_csv_header(const SimTrace& tr) {
    const int p = tr.dof_p, n = tr.order_n;
    std::vector<std::string> h{"t"};
    auto state_names = [&](const std::string& prefix) {
        for (int blk = 0; blk < n; ++blk)
            for (int i = 0; i < p; ++i) h.push_back(prefix + "d" + std::to_string(n - 1 - blk) + "_" + std::to_string(i + 1));
    };
    auto vec_names = [&](const std::string& prefix, Eigen::Index count) {
        for (Eigen::Index i = 0; i < count; ++i) h.push_back(prefix + "_" + std::to_string(i + 1));
    };
    state_names("x");
    if (tr.has_reference()) state_names("xr");
    vec_names("u", p);
    vec_names("sigma", p);
    if (tr.closed_loop()) {
        vec_names("eta", p);
        vec_names("y", p);
        vec_names("z", p);
        h.push_back("phi");
        h.push_back("g");
        vec_names("theta_hat", tr.theta_hat.dim());
    }
    return h;
}

/// One row per recorded sample; columns documented by trace_csv_header().
inline void write_trace_csv(std::ostream& os, const SimTrace& tr) {
    CsvWriter w(os, trace_csv_header(tr));
    std::vector<double> row;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        row.clear();
        row.push_back(tr.time(i));
        auto append = [&](const auto& v) { row.insert(row.end(), v.data(), v.data() + v.size()); };
        append(tr.xi[i]);
        if (tr.has_reference()) append(tr.xi_ref[i]);
        append(tr.u[i]);
        append(tr.sigma[i]);
        if (tr.closed_loop()) {
            append(tr.eta[i]);
            append(tr.y[i]);
            append(tr.z_tilde[i]);
            row.push_back(tr.phi[i]);
            row.push_back(tr.g[i]);
            append(tr.theta_hat[i]);
        }
        w.row(row);
    }
}

/// One row per orbit: omega, per-channel max |x| and harmonic amplitudes,
/// stability flag, max |mu|, and an event marker (LP/NS) on the orbit that
/// closes the bracket.
inline void write_branch_csv(std::ostream& os, const Branch& br, int segment = 0, bool header = true) {
    require(!br.orbits.empty(), "write_branch_csv: empty branch");
    const int p = br.orbits.front().fourier.channels();
    const int H = br.orbits.front().fourier.harmonics();
    std::vector<std::string> h{"segment", "omega"};
    for (int c = 1; c <= p; ++c) h.push_back("max_abs_x_" + std::to_string(c));
    for (int c = 1; c <= p; ++c) {
        h.push_back("a0_" + std::to_string(c));
        for (int k = 1; k <= H; ++k) h.push_back("amp" + std::to_string(k) + "_" + std::to_string(c));
    }
    h.insert(h.end(), {"stable", "max_abs_mu", "event"});
    if (header) {
        for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "," : "") << h[i];
        os << '\n';
    }
    for (std::size_t i = 0; i < br.orbits.size(); ++i) {
        const auto& o = br.orbits[i];
        std::vector<std::string> cells{std::to_string(segment), format_double(o.omega)};
        // max |x_c(t)| over a fine grid of one period
        Vec mx = Vec::Zero(p);
        const int samples = 16 * (H + 1);
        for (int j = 0; j < samples; ++j) mx = mx.cwiseMax(o.fourier.eval(o.fourier.period() * j / samples).cwiseAbs());
        for (int c = 0; c < p; ++c) cells.push_back(format_double(mx[c]));
        for (int c = 0; c < p; ++c) {
            cells.push_back(format_double(o.fourier.a0[c]));
            for (int k = 0; k < H; ++k)
                cells.push_back(format_double(std::hypot(o.fourier.cos_coef(c, k), o.fourier.sin_coef(c, k))));
        }
        cells.push_back(o.stable ? "1" : "0");
        cells.push_back(format_double(o.max_multiplier_modulus()));
        std::string ev;
        for (const auto& e : br.events)
            if (e.after_index + 1 == i) ev += std::string(ev.empty() ? "" : "+") + to_string(e.type);
        cells.push_back(ev);
        for (std::size_t k = 0; k < cells.size(); ++k) os << (k ? "," : "") << cells[k];
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// JSON: references and orbits share { "omega", "channels": [{a0, cos, sin}] }
// ---------------------------------------------------------------------------

[[nodiscard]] inline json signal_to_json(const FourierSignal& s) {
    json ch = json::array();
    for (int c = 0; c < s.channels(); ++c) {
        json cj;
        cj["a0"] = s.a0[c];
        std::vector<double> cosv(static_cast<std::size_t>(s.harmonics())), sinv(cosv.size());
        for (int k = 0; k < s.harmonics(); ++k) {
            cosv[static_cast<std::size_t>(k)] = s.cos_coef(c, k);
            sinv[static_cast<std::size_t>(k)] = s.sin_coef(c, k);
        }
        cj["cos"] = cosv;
        cj["sin"] = sinv;
        ch.push_back(cj);
    }
    return json{{"omega", s.omega}, {"channels", ch}};
}

/// Channels may list different numbers of harmonics; missing ones are zero.
[[nodiscard]] inline FourierSignal signal_from_json(const json& j) {
    require(j.is_object() && j.contains("omega") && j.contains("channels"),
            "reference JSON needs 'omega' and 'channels'");
    const double omega = j.at("omega").get<double>();
    require(omega > 0.0, "reference JSON: omega must be positive");
    const auto& chs = j.at("channels");
    require(chs.is_array() && !chs.empty(), "reference JSON: 'channels' must be a non-empty array");
    std::size_t H = 0;
    for (const auto& c : chs) {
        const auto nc = c.value("cos", std::vector<double>{}).size();
        const auto ns = c.value("sin", std::vector<double>{}).size();
        H = std::max({H, nc, ns});
    }
    FourierSignal s(omega, static_cast<int>(chs.size()), static_cast<int>(H));
    for (std::size_t c = 0; c < chs.size(); ++c) {
        const auto& cj = chs[c];
        s.a0[static_cast<Eigen::Index>(c)] = cj.value("a0", 0.0);
        const auto cosv = cj.value("cos", std::vector<double>{});
        const auto sinv = cj.value("sin", std::vector<double>{});
        for (std::size_t k = 0; k < cosv.size(); ++k) s.cos_coef(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = cosv[k];
        for (std::size_t k = 0; k < sinv.size(); ++k) s.sin_coef(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = sinv[k];
    }
    return s;
}

[[nodiscard]] inline json orbit_to_json(const PeriodicOrbit& o) {
    json j = signal_to_json(o.fourier);
    json mu = json::array();
    for (const auto& m : o.floquet_multipliers) mu.push_back({m.real(), m.imag()});
    j["floquet_multipliers"] = mu;
    j["stable"] = o.stable;
    j["residual_norm"] = o.residual_norm;
    return j;
}

[[nodiscard]] inline json branch_events_to_json(const Branch& br) {
    json ev = json::array();
    for (const auto& e : br.events)
        ev.push_back({{"type", to_string(e.type)}, {"omega_lo", e.omega_lo}, {"omega_hi", e.omega_hi}});
    return ev;
}

[[nodiscard]] inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open '" + path + "'");
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ContractViolation("parse error in '" + path + "': " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    require(out.good(), "cannot write '" + path + "'");
    out << text;
}

}  // namespace cbc_adapt
