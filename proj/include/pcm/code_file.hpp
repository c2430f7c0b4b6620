// Plain-text frozen-set files. A block of `#` header lines echoes the code
// and construction parameters; the body lists the frozen indices over the
// stacked input word u~, 0-based, sorted ascending, one per line. Writing is
// byte-deterministic so equal inputs always produce identical files.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "pcm/construction.hpp"
#include "pcm/crc.hpp"
#include "pcm/polar.hpp"

namespace pcm {

struct CodeFile {
    CodeSpec spec;
    ConstructionMethod method = ConstructionMethod::mi_dga;
    double n_s = 0.0;  // operating point the frozen set was built for
    double n_b = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

[[noreturn]] inline void bad_code_file(const std::string& what) {
    throw std::runtime_error("code file: " + what);
}

inline std::uint64_t parse_u64_field(const std::string& token, const char* key, int base = 10) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value, base);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        bad_code_file(std::string("malformed value for '") + key + "': " + token);
    return value;
}

inline double parse_double_field(const std::string& token, const char* key) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        bad_code_file(std::string("malformed value for '") + key + "': " + token);
    return value;
}

inline ConstructionMethod parse_method_name(const std::string& name) {
    if (name == "mc")
        return ConstructionMethod::mc;
    if (name == "mi-dga")
        return ConstructionMethod::mi_dga;
    if (name == "mi-dbec")
        return ConstructionMethod::mi_dbec;
    bad_code_file("unknown construction method '" + name + "'");
}

inline std::string format_hex(std::uint64_t value) {
    char buf[20];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, 16);
    if (ec != std::errc{})
        throw std::logic_error("format_hex: buffer too small");
    return "0x" + std::string(buf, ptr);
}

}  // namespace detail

inline void write_code_file(std::ostream& out, const CodeFile& file) {
    validate_code_spec(file.spec);
    const CodeSpec& spec = file.spec;
    out << "# n " << spec.n << "\n";
    out << "# n_used " << spec.n_used << "\n";
    out << "# m " << spec.m << "\n";
    out << "# M " << spec.M() << "\n";
    out << "# rate " << format_double(spec.rate()) << "\n";
    out << "# n_s " << format_double(file.n_s) << "\n";
    out << "# n_b " << format_double(file.n_b) << "\n";
    if (spec.crc)
        out << "# crc " << spec.crc->degree << " " << detail::format_hex(spec.crc->poly) << "\n";
    else
        out << "# crc none\n";
    out << "# method " << method_name(file.method) << "\n";
    out << "# seed " << file.seed << "\n";
    for (std::size_t i = 0; i < spec.frozen.size(); ++i)
        if (spec.frozen[i])
            out << i << "\n";
    if (!out)
        detail::bad_code_file("write failed");
}

inline void write_code_file(const std::filesystem::path& path, const CodeFile& file) {
    std::ofstream out(path);
    if (!out)
        detail::bad_code_file("cannot open '" + path.string() + "' for writing");
    write_code_file(out, file);
    out.flush();
    if (!out)
        detail::bad_code_file("write to '" + path.string() + "' failed");
}

inline CodeFile read_code_file(std::istream& in) {
    std::optional<std::uint64_t> n, n_used, m, big_m, seed;
    std::optional<double> rate, n_s, n_b;
    std::optional<CrcSpec> crc;
    bool crc_seen = false;
    std::optional<ConstructionMethod> method;
    std::vector<std::uint64_t> indices;

    auto set_once = [](auto& slot, auto value, const char* key) {
        if (slot)
            detail::bad_code_file(std::string("duplicate header key '") + key + "'");
        slot = value;
    };

    std::string line;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string token;
        if (!(fields >> token))
            continue;  // blank line
        if (token == "#") {
            std::string key, value;
            if (!(fields >> key))
                continue;  // bare comment
            if (!(fields >> value))
                detail::bad_code_file("header key '" + key + "' has no value");
            if (key == "n")
                set_once(n, detail::parse_u64_field(value, "n"), "n");
            else if (key == "n_used")
                set_once(n_used, detail::parse_u64_field(value, "n_used"), "n_used");
            else if (key == "m")
                set_once(m, detail::parse_u64_field(value, "m"), "m");
            else if (key == "M")
                set_once(big_m, detail::parse_u64_field(value, "M"), "M");
            else if (key == "rate")
                set_once(rate, detail::parse_double_field(value, "rate"), "rate");
            else if (key == "n_s")
                set_once(n_s, detail::parse_double_field(value, "n_s"), "n_s");
            else if (key == "n_b")
                set_once(n_b, detail::parse_double_field(value, "n_b"), "n_b");
            else if (key == "seed")
                set_once(seed, detail::parse_u64_field(value, "seed"), "seed");
            else if (key == "method")
                set_once(method, detail::parse_method_name(value), "method");
            else if (key == "crc") {
                if (crc_seen)
                    detail::bad_code_file("duplicate header key 'crc'");
                crc_seen = true;
                if (value != "none") {
                    std::string poly_token;
                    if (!(fields >> poly_token))
                        detail::bad_code_file("crc header needs a degree and a polynomial");
                    if (poly_token.rfind("0x", 0) == 0 || poly_token.rfind("0X", 0) == 0)
                        poly_token.erase(0, 2);
                    std::uint64_t degree = detail::parse_u64_field(value, "crc degree");
                    std::uint64_t poly = detail::parse_u64_field(poly_token, "crc polynomial", 16);
                    try {
                        crc = CrcSpec(static_cast<unsigned>(degree), poly);
                    } catch (const std::invalid_argument& err) {
                        detail::bad_code_file(err.what());
                    }
                }
            }
            // unknown keys are ignored so files may carry extra annotations
        } else {
            indices.push_back(detail::parse_u64_field(token, "frozen index"));
            std::string extra;
            if (fields >> extra)
                detail::bad_code_file("unexpected trailing token '" + extra + "'");
        }
    }

    if (!n || !m || !big_m || !rate || !n_s || !n_b || !crc_seen || !method || !seed)
        detail::bad_code_file("missing header key (need n, m, M, rate, n_s, n_b, crc, method, seed)");
    if (*m < 1 || *m > 30)
        detail::bad_code_file("level count m out of range");
    if (*big_m != (std::uint64_t{1} << *m))
        detail::bad_code_file("M does not equal 2^m");
    if (*n < 1 || *n > (std::uint64_t{1} << 30))
        detail::bad_code_file("block length n out of range");
    if (!(*n_s > 0.0) || *n_b < 0.0)
        detail::bad_code_file("operating point must have n_s > 0 and n_b >= 0");

    const std::uint64_t total = *m * *n;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= total)
            detail::bad_code_file("frozen index " + std::to_string(indices[i]) + " out of range");
        if (i > 0 && indices[i] <= indices[i - 1])
            detail::bad_code_file("frozen indices must be strictly ascending");
    }

    const std::uint64_t k_total = total - indices.size();
    const std::uint64_t degree = crc ? crc->degree : 0u;
    if (k_total <= degree)
        detail::bad_code_file("frozen set leaves no information bits");

    CodeSpec spec;
    spec.n = static_cast<unsigned>(*n);
    spec.m = static_cast<unsigned>(*m);
    spec.n_used = n_used ? static_cast<unsigned>(*n_used) : spec.n;
    spec.k_info = static_cast<unsigned>(k_total - degree);
    spec.crc = crc;
    spec.frozen.assign(total, 0);
    for (std::uint64_t index : indices)
        spec.frozen[index] = 1;
    try {
        validate_code_spec(spec);
    } catch (const std::invalid_argument& err) {
        detail::bad_code_file(err.what());
    }
    if (std::abs(*rate - spec.rate()) > 1e-9)
        detail::bad_code_file("rate header disagrees with the frozen-set cardinality");

    return CodeFile{std::move(spec), *method, *n_s, *n_b, *seed};
}

inline CodeFile read_code_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        detail::bad_code_file("cannot open '" + path.string() + "'");
    return read_code_file(in);
}

}  // namespace pcm
